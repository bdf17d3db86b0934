import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from r2fd2.config import RunConfig
from r2fd2.detector import InterestPoint
from r2fd2.errors import ParameterError
from r2fd2.evaluation import (
    FAILED_RMSE,
    EvalPair,
    ablation_csv,
    arrangement_ablation,
    assign_greedy,
    detector_repeatability,
    load_manifest,
    match_metrics,
    repeatability,
    rmse,
    rotation_sweep,
    sweep_angles,
    synthetic_pairs,
)
from r2fd2.imaging import NRD_PRESETS, ProjectiveTransform, save_image
from r2fd2.matcher import MatchPair, MatchResult


def _greedy_oracle(errors, tol):
    errors = errors.astype(float).copy()
    out = []
    while True:
        masked = np.where(errors <= tol, errors, np.inf)
        if not np.isfinite(masked).any():
            return sorted(out)
        i, j = np.unravel_index(np.argmin(masked), masked.shape)
        out.append((int(i), int(j)))
        errors[i, :] = np.inf
        errors[:, j] = np.inf


class TestRepeatability:
    def test_identity_example(self):
        pts = [InterestPoint(float(x), float(y), 1.0) for x, y in [(10, 10), (50, 20), (30, 70)]]
        r = repeatability(pts, pts, ProjectiveTransform.identity())
        assert (r.n_cor, r.repeatability) == (3, 1.0)

    def test_translation_outside_tolerance(self):
        pts = np.array([[10.0, 10.0], [60.0, 60.0]])
        r = repeatability(pts, pts, ProjectiveTransform.translation(4, 0))
        assert r.n_cor == 0 and r.repeatability == 0.0

    def test_empty(self):
        r = repeatability(np.zeros((0, 2)), np.ones((4, 2)), ProjectiveTransform.identity())
        assert r.repeatability == 0.0 and r.n_sen == 4

    def test_ratio_definition(self):
        rng = np.random.default_rng(0)
        ref = rng.random((40, 2)) * 200
        sen = np.vstack([ref[:25] + rng.normal(scale=0.5, size=(25, 2)), rng.random((35, 2)) * 200])
        r = repeatability(ref, sen, ProjectiveTransform.identity())
        assert r.repeatability == pytest.approx(r.n_cor / (0.5 * (r.n_ref + r.n_sen)))
        assert r.n_cor >= 25

    def test_greedy_matches_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            e = rng.random((rng.integers(1, 8), rng.integers(1, 8))) * 6
            got = sorted(assign_greedy(e, 3.0))
            assert got == _greedy_oracle(e, 3.0)
            # one-to-one, within tolerance, and at least half the maximum matching
            assert len({i for i, _ in got}) == len(got) == len({j for _, j in got})
            assert all(e[i, j] <= 3.0 for i, j in got)
            rows, cols = linear_sum_assignment(-(e <= 3.0).astype(float))
            best = int((e[rows, cols] <= 3.0).sum())
            assert best / 2 <= len(got) <= best


def _pair(ref, sen):
    return MatchPair(tuple(ref), tuple(sen), 0.0, True)


class TestMatchMetrics:
    def test_rmse_example(self):
        assert rmse([_pair((3.0, 4.0), (0.0, 0.0))], ProjectiveTransform.identity()) == pytest.approx(5.0)

    def test_rmse_loop_oracle_and_order(self):
        rng = np.random.default_rng(2)
        t = ProjectiveTransform.rotation(17, (50, 50))
        pairs = [_pair(rng.random(2) * 100, rng.random(2) * 100) for _ in range(30)]
        acc = 0.0
        for m in pairs:
            q = t.apply(np.array(m.sen_pt))
            acc += (m.ref_pt[0] - q[0]) ** 2 + (m.ref_pt[1] - q[1]) ** 2
        assert rmse(pairs, t) == pytest.approx(np.sqrt(acc / 30), rel=1e-12)
        assert rmse(pairs[::-1], t) == pytest.approx(rmse(pairs, t), rel=1e-12)

    def test_rmse_empty(self):
        with pytest.raises(ParameterError):
            rmse([], ProjectiveTransform.identity())

    def test_ncm_counts_only_true_inliers(self):
        good = [_pair((float(k), 0.0), (float(k), 0.5)) for k in range(12)]
        bad = [_pair((float(k), 50.0), (float(k), 0.0)) for k in range(5)]
        res = MatchResult(good + bad, ProjectiveTransform.identity(), 17)
        m = match_metrics(res, ProjectiveTransform.identity())
        assert (m.ncm, m.success) == (12, True)
        assert m.rmse == pytest.approx(0.5)

    def test_failure_rmse(self):
        res = MatchResult([_pair((0.0, 0.0), (0.0, 0.0))] * 9, ProjectiveTransform.identity(), 9)
        m = match_metrics(res, ProjectiveTransform.identity())
        assert (m.ncm, m.success, m.rmse) == (9, False, FAILED_RMSE)


class TestSweep:
    def test_angles(self):
        a = sweep_angles(0, 360, 10)
        assert len(a) == 36 and a[0] == 0 and a[-1] == 350
        with pytest.raises(ParameterError):
            sweep_angles(0, 360, 7)

    def test_zero_angle_clean_pair(self, camera):
        crop = camera[128:384, 128:384]
        rep = rotation_sweep(crop, NRD_PRESETS["none"], 0, 10, 10)
        m = rep.rows[0].metrics
        assert m.success and m.rmse < 0.5
        d = rep.to_dict(timing=False)
        assert "runtime_s" not in d["rows"][0] and d["n_angles"] == 1

    def test_stricter_ratio_never_helps(self, camera):
        crop = camera[128:384, 128:384]
        nrd = NRD_PRESETS["mild"]
        loose = rotation_sweep(crop, nrd, 0, 90, 45)
        strict = rotation_sweep(crop, nrd, 0, 90, 45, RunConfig(nndr_ratio=0.5))
        assert strict.mean_ncm <= loose.mean_ncm
        assert strict.success_rate <= loose.success_rate
        assert [r.angle for r in loose.rows] == [0, 45]

    def test_deterministic_and_threads(self, camera):
        crop = camera[128:384, 128:384]
        a = rotation_sweep(crop, NRD_PRESETS["mild"], 0, 60, 30)
        b = rotation_sweep(crop, NRD_PRESETS["mild"], 0, 60, 30, RunConfig(thread_count=2))
        assert a.to_csv(timing=False) == b.to_csv(timing=False)


class TestProtocols:
    def test_synthetic_pair_truth(self, texture):
        (p,) = synthetic_pairs({"t": texture}, [30], NRD_PRESETS["none"])
        assert p.name == "t@30"
        c = np.array([40.0, 70.0])
        fwd = ProjectiveTransform.rotation(30, ((texture.shape[1] - 1) / 2, (texture.shape[0] - 1) / 2))
        assert np.allclose(p.truth.apply(fwd.apply(c)), c)

    def test_manifest(self, tmp_path, texture):
        save_image(tmp_path / "a.png", texture)
        save_image(tmp_path / "b.png", texture)
        ProjectiveTransform.identity().save(tmp_path / "t.txt")
        (tmp_path / "m.csv").write_text("ref,sen,truth\na.png,b.png,t.txt\n")
        (p,) = load_manifest(tmp_path / "m.csv")
        assert p.name == "b" and p.ref.shape == texture.shape
        (tmp_path / "bad.csv").write_text("ref,sen\na.png,b.png\n")
        with pytest.raises(ParameterError):
            load_manifest(tmp_path / "bad.csv")

    def test_detector_repeatability_shapes(self, texture):
        pairs = synthetic_pairs({"t": texture}, [0], NRD_PRESETS["none"])
        rep = detector_repeatability(pairs)
        assert set(rep) == {"malg", "intensity"}
        # an undistorted, unrotated copy repeats every point
        assert rep["malg"][0].repeatability == 1.0

    def test_ablation_rows(self, camera):
        crop = camera[96:416, 96:416]
        pairs = synthetic_pairs({"c": crop}, [30], NRD_PRESETS["mild"])
        rows = arrangement_ablation(pairs)
        assert [r.arrangement for r in rows] == ["daisy", "square4", "square5", "logpolar"]
        assert rows[0].dim == 150
        assert ablation_csv(rows).count("\n") == 5

    def test_ablation_needs_pairs(self):
        with pytest.raises(ParameterError):
            arrangement_ablation([])

    def test_eval_pair_repr_is_short(self, texture):
        assert "0.4139" not in repr(EvalPair(texture, texture, ProjectiveTransform.identity(), "x"))
