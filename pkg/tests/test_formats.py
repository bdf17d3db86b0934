import numpy as np
import pytest

from r2fd2.detector import InterestPoint
from r2fd2.errors import ImageFormatError
from r2fd2.formats import (
    descriptors_csv,
    match_summary,
    matches_csv,
    points_csv,
    read_descriptors,
    read_points_csv,
    write_descriptors,
)
from r2fd2.imaging import ProjectiveTransform
from r2fd2.matcher import MatchPair


def test_points_roundtrip_sorted(tmp_path):
    ips = [InterestPoint(1.5, 2.0, 0.1), InterestPoint(10.0, 20.25, 3.0)]
    (tmp_path / "p.csv").write_text(points_csv(ips))
    assert read_points_csv(tmp_path / "p.csv") == ips[::-1]


def test_descriptor_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    xy, d = rng.random((7, 2)) * 100, rng.random((7, 150))
    write_descriptors(tmp_path / "d.bin", xy, d)
    xy2, d2 = read_descriptors(tmp_path / "d.bin")
    assert np.array_equal(xy2, xy)
    assert np.array_equal(d2, d.astype(np.float32))
    assert (tmp_path / "d.bin").stat().st_size == 16 + 7 * (16 + 150 * 4)
    assert descriptors_csv(xy, d).count("\n") == 8


def test_descriptor_empty(tmp_path):
    write_descriptors(tmp_path / "e.bin", np.zeros((0, 2)), np.zeros((0, 150)))
    xy, d = read_descriptors(tmp_path / "e.bin")
    assert xy.shape == (0, 2) and d.shape == (0, 150)


def test_descriptor_corrupt(tmp_path):
    (tmp_path / "bad.bin").write_bytes(b"NOPE" + bytes(12))
    with pytest.raises(ImageFormatError):
        read_descriptors(tmp_path / "bad.bin")
    write_descriptors(tmp_path / "t.bin", np.zeros((2, 2)), np.ones((2, 4)))
    (tmp_path / "t.bin").write_bytes((tmp_path / "t.bin").read_bytes()[:-3])
    with pytest.raises(ImageFormatError):
        read_descriptors(tmp_path / "t.bin")


def test_matches_and_summary():
    text = matches_csv([MatchPair((1.0, 2.0), (3.0, 4.0), 0.5, True)])
    assert text.splitlines() == ["x_ref,y_ref,x_sen,y_sen,distance,inlier", "1.0,2.0,3.0,4.0,0.5,1"]
    s = match_summary(5, 0, False, None)
    assert s == {"n_candidates": 5, "n_inliers": 0, "success": False, "transform": None}
    s = match_summary(5, 4, True, ProjectiveTransform.identity(), rmse=0.25)
    assert s["transform"] == [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0] and s["rmse"] == 0.25
