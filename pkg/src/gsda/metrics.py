"""Distortion metrics between an adversarial cloud and its clean source,
with analytic gradients for the two terms the attack penalizes.

Chamfer and Hausdorff are one-sided (adversarial -> clean) and use
squared distances; nearest-neighbor search is brute force, with ties
going to the lowest clean-point index.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import kernels
from .cloud import as_points
from .errors import SizeMismatchError, ValidationError


@dataclass(frozen=True)
class DistortionReport:
    d_norm: float
    d_c: float
    d_h: float
    e_delta: float

    def as_dict(self) -> dict:
        return asdict(self)


def l2_shift(adv, clean) -> float:
    """Root of the summed squared per-index point shifts."""
    a = as_points(adv)
    c = as_points(clean)
    if a.shape[0] != c.shape[0]:
        raise SizeMismatchError(
            "clouds differ in size: %d vs %d" % (a.shape[0], c.shape[0])
        )
    diff = a - c
    return float(np.sqrt((diff * diff).sum()))


def chamfer(adv, clean, with_grad: bool = False):
    """Mean squared distance from each adversarial point to its nearest
    clean point.  The gradient treats the nearest assignment as fixed."""
    a = as_points(adv)
    c = as_points(clean)
    d2, idx = kernels.nearest_sqdist(a, c)
    value = float(d2.mean())
    if not with_grad:
        return value
    grad = (2.0 / a.shape[0]) * (a - c[idx])
    return value, grad


def hausdorff(adv, clean, with_grad: bool = False):
    """Largest squared distance from an adversarial point to its nearest
    clean point; subgradient lives on the arg-max point only."""
    a = as_points(adv)
    c = as_points(clean)
    d2, idx = kernels.nearest_sqdist(a, c)
    worst = int(d2.argmax())
    value = float(d2[worst])
    if not with_grad:
        return value
    grad = np.zeros_like(a)
    grad[worst] = 2.0 * (a[worst] - c[idx[worst]])
    return value, grad


def spectral_energy_delta(delta: np.ndarray) -> float:
    """Frobenius norm of a spectral perturbation (clean cloud's basis)."""
    delta = np.asarray(delta, dtype=np.float64)
    if not np.all(np.isfinite(delta)):
        raise ValidationError("delta contains non-finite values")
    return float(np.sqrt((delta * delta).sum()))


def distortion_report(adv, clean, delta: np.ndarray) -> DistortionReport:
    """All four metrics for one attack result."""
    return DistortionReport(
        d_norm=l2_shift(adv, clean),
        d_c=chamfer(adv, clean),
        d_h=hausdorff(adv, clean),
        e_delta=spectral_energy_delta(delta),
    )
