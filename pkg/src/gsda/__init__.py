"""Graph-spectral-domain adversarial attacks on point-cloud classifiers.

The pipeline: build a K-NN graph over a cloud, eigendecompose its
combinatorial Laplacian, optimize a perturbation of the resulting
graph-Fourier coefficients so the reconstructed cloud fools a trained
classifier while staying geometrically close to the original.
"""

from .attack import (
    AttackConfig,
    AttackResult,
    adversarial_loss,
    gsda_attack,
    gsda_attack_batch,
    project_delta,
    xyz_baseline_attack,
    xyz_baseline_attack_batch,
)
from .cloud import PointCloud, normalize_unit_ball, sample_points
from .defense import SorConfig, sor_defense, sor_scores, srs_defense
from .errors import (
    ConfigError,
    ConvergenceError,
    GsdaError,
    ParseError,
    ValidationError,
)
from .io import load_point_cloud, save_point_cloud
from .metrics import (
    DistortionReport,
    chamfer,
    distortion_report,
    hausdorff,
    l2_shift,
    spectral_energy_delta,
)
from .model import (
    ClassifierModel,
    ModelConfig,
    TrainConfig,
    evaluate,
    forward,
    grad_input,
    init_model,
    load_model,
    predict,
    save_model,
    train,
)
from .report import EvalReport, build_report
from .shapes import (
    CLASS_NAMES,
    AugmentConfig,
    LabeledDataset,
    ShapeSpec,
    gen_dataset,
    synth_shape,
)
from .spectral import (
    BandBounds,
    KnnGraph,
    SpectralBasis,
    band_energy,
    band_filter,
    build_knn_graph,
    dct1d,
    eigendecompose,
    gft,
    idct1d,
    igft,
    laplacian,
    spectral_basis,
)

__version__ = "0.1.0"

__all__ = [
    "AttackConfig",
    "AttackResult",
    "AugmentConfig",
    "BandBounds",
    "CLASS_NAMES",
    "ClassifierModel",
    "ConfigError",
    "ConvergenceError",
    "DistortionReport",
    "EvalReport",
    "GsdaError",
    "KnnGraph",
    "LabeledDataset",
    "ModelConfig",
    "ParseError",
    "PointCloud",
    "ShapeSpec",
    "SorConfig",
    "SpectralBasis",
    "TrainConfig",
    "ValidationError",
    "adversarial_loss",
    "band_energy",
    "band_filter",
    "build_knn_graph",
    "build_report",
    "chamfer",
    "dct1d",
    "distortion_report",
    "eigendecompose",
    "evaluate",
    "forward",
    "gen_dataset",
    "gft",
    "grad_input",
    "gsda_attack",
    "gsda_attack_batch",
    "hausdorff",
    "idct1d",
    "igft",
    "init_model",
    "l2_shift",
    "laplacian",
    "load_model",
    "load_point_cloud",
    "normalize_unit_ball",
    "predict",
    "project_delta",
    "sample_points",
    "save_model",
    "save_point_cloud",
    "sor_defense",
    "sor_scores",
    "spectral_basis",
    "spectral_energy_delta",
    "srs_defense",
    "synth_shape",
    "train",
    "xyz_baseline_attack",
    "xyz_baseline_attack_batch",
]
