import numpy as np
import pytest

from gsda.cloud import PointCloud, normalize_unit_ball, sample_points
from gsda.errors import (
    BadCountError,
    DimensionMismatchError,
    EmptyCloudError,
    ParseError,
    ValidationError,
)
from gsda.io import load_point_cloud, save_point_cloud


def test_cloud_validates_shape_and_copies():
    pts = np.zeros((4, 3))
    c = PointCloud(pts, label=2)
    pts[0, 0] = 99.0
    assert c.points[0, 0] == 0.0
    assert c.label == 2
    assert c.n == 4


def test_cloud_rejects_bad_inputs():
    with pytest.raises(DimensionMismatchError):
        PointCloud(np.zeros((4, 2)))
    with pytest.raises(EmptyCloudError):
        PointCloud(np.zeros((0, 3)))
    with pytest.raises(ValidationError):
        PointCloud(np.array([[1.0, 2.0, np.nan]]))


def test_normalize_unit_ball():
    rng = np.random.default_rng(0)
    c = PointCloud(rng.normal(size=(50, 3)) * 7.0 + 3.0)
    out = normalize_unit_ball(c)
    radii = np.linalg.norm(out.points - out.points.mean(axis=0), axis=1)
    assert abs(out.points.mean(axis=0)).max() < 1e-12
    assert abs(radii.max() - 1.0) < 1e-12


def test_normalize_degenerate_cloud():
    c = PointCloud(np.full((5, 3), 2.5))
    out = normalize_unit_ball(c)
    assert np.allclose(out.points, 0.0)


def test_sample_points_seeded_subset():
    c = PointCloud(np.arange(30, dtype=float).reshape(10, 3))
    s1 = sample_points(c, 4, seed=7)
    s2 = sample_points(c, 4, seed=7)
    assert np.array_equal(s1.points, s2.points)
    rows = {tuple(r) for r in c.points}
    assert all(tuple(r) in rows for r in s1.points)
    with pytest.raises(BadCountError):
        sample_points(c, 11, seed=0)
    with pytest.raises(BadCountError):
        sample_points(c, 0, seed=0)


@pytest.mark.parametrize("suffix", ["xyz", "off", "ply"])
def test_io_roundtrip(tmp_path, suffix):
    rng = np.random.default_rng(3)
    c = PointCloud(rng.normal(size=(17, 3)))
    path = tmp_path / ("cloud.%s" % suffix)
    save_point_cloud(c, str(path))
    back = load_point_cloud(str(path))
    assert np.allclose(back.points, c.points, atol=1e-10)


def test_xyz_parse_error_reports_line(tmp_path):
    path = tmp_path / "bad.xyz"
    path.write_text("0 0 0\n1 oops 2\n")
    with pytest.raises(ParseError) as e:
        load_point_cloud(str(path))
    assert "2" in str(e.value)


def test_ply_header_must_declare_xyz(tmp_path):
    path = tmp_path / "bad.ply"
    path.write_text(
        "ply\nformat ascii 1.0\nelement vertex 1\n"
        "property float x\nproperty float y\nend_header\n0 0\n"
    )
    with pytest.raises(ParseError):
        load_point_cloud(str(path))


def test_unknown_extension(tmp_path):
    path = tmp_path / "cloud.bin"
    path.write_text("0 0 0\n")
    with pytest.raises(ValidationError):
        load_point_cloud(str(path))
