"""Evaluation metrics and protocols: repeatability, NCM / SR / RMSE,
rotation sweeps and the descriptor-arrangement ablation."""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .config import RunConfig
from .descriptor import ARRANGEMENTS, DescriptorParams, describe_points
from .detector import InterestPoint, detect, points_array
from .errors import ParameterError
from .imaging import MIN_PIPELINE_SIZE, NrdParams, ProjectiveTransform, check_gray, load_image, rotate_about_center, synth_modality
from .loggabor import build_filter_bank, oriented_amplitudes
from .matcher import MatchPair, MatchResult
from .pipeline import extract_features, match_features

FAILED_RMSE = 10.0


def _xy(points) -> np.ndarray:
    if isinstance(points, np.ndarray):
        return np.asarray(points, dtype=np.float64).reshape(-1, 2)
    points = list(points)
    if points and isinstance(points[0], InterestPoint):
        return points_array(points)
    return np.asarray(points, dtype=np.float64).reshape(-1, 2)


# ---------------------------------------------------------------------------
# repeatability


@dataclass(frozen=True)
class RepeatabilityReport:
    n_ref: int
    n_sen: int
    n_cor: int
    repeatability: float
    tolerance: float = 3.0


def assign_greedy(errors: np.ndarray, tol: float) -> list[tuple[int, int]]:
    """One-to-one assignment taking pairs in ascending error order.

    Only pairs with ``error <= tol`` are eligible; ties are broken by
    row-major position so the result is deterministic.
    """
    ii, jj = np.nonzero(errors <= tol)
    order = np.argsort(errors[ii, jj], kind="stable")
    used_i, used_j, out = set(), set(), []
    for k in order:
        i, j = int(ii[k]), int(jj[k])
        if i in used_i or j in used_j:
            continue
        used_i.add(i)
        used_j.add(j)
        out.append((i, j))
    return out


def repeatability(ips_ref, ips_sen, truth: ProjectiveTransform, tol: float = 3.0) -> RepeatabilityReport:
    """Fraction of interest points recovered across a pair.

    ``truth`` maps sensed coordinates onto the reference. The location
    error of a pair is ``|ref_i - truth(sen_j)|``; correspondences are
    counted by :func:`assign_greedy` and the repeatability is
    ``n_cor / (0.5 * (n_ref + n_sen))``.
    """
    ref, sen = _xy(ips_ref), _xy(ips_sen)
    n_ref, n_sen = len(ref), len(sen)
    if n_ref == 0 or n_sen == 0:
        return RepeatabilityReport(n_ref, n_sen, 0, 0.0, tol)
    errors = cdist(ref, truth.apply(sen))
    n_cor = len(assign_greedy(errors, tol))
    return RepeatabilityReport(n_ref, n_sen, n_cor, n_cor / (0.5 * (n_ref + n_sen)), tol)


# ---------------------------------------------------------------------------
# match quality


def residuals(pairs: list[MatchPair], truth: ProjectiveTransform) -> np.ndarray:
    """Distances ``|ref - truth(sen)|`` of each pair."""
    if not pairs:
        return np.zeros(0)
    ref = np.array([m.ref_pt for m in pairs], dtype=np.float64)
    sen = np.array([m.sen_pt for m in pairs], dtype=np.float64)
    return np.linalg.norm(ref - truth.apply(sen), axis=1)


def rmse(pairs: list[MatchPair], truth: ProjectiveTransform) -> float:
    """Root-mean-square residual of correspondences under the true transform."""
    if not pairs:
        raise ParameterError("RMSE of an empty correspondence list is undefined")
    r = residuals(pairs, truth)
    return float(np.sqrt(np.mean(r**2)))


@dataclass(frozen=True)
class MatchMetrics:
    ncm: int
    success: bool
    rmse: float
    runtime_s: float = 0.0
    n_candidates: int = 0
    n_inliers: int = 0


def match_metrics(result: MatchResult, truth: ProjectiveTransform, tol: float = 3.0, min_matches: int = 10, runtime_s: float = 0.0) -> MatchMetrics:
    """Score a match result against the known transform.

    The correct matches (NCM) are the consensus inliers whose residual is
    within ``tol``. A match succeeds with at least ``min_matches`` of them;
    the RMSE is taken over the correct matches, or :data:`FAILED_RMSE` on
    failure.
    """
    inl = result.inliers
    correct = [m for m, r in zip(inl, residuals(inl, truth)) if r <= tol]
    ncm = len(correct)
    success = ncm >= min_matches
    err = rmse(correct, truth) if success else FAILED_RMSE
    return MatchMetrics(ncm, success, err, runtime_s, len(result.pairs), result.n_inliers)


# ---------------------------------------------------------------------------
# rotation sweep


@dataclass(frozen=True)
class SweepRow:
    angle: float
    metrics: MatchMetrics


@dataclass
class SweepReport:
    rows: list[SweepRow]
    nrd: NrdParams = field(default_factory=NrdParams)

    @property
    def angles(self) -> list[float]:
        return [r.angle for r in self.rows]

    @property
    def success_rate(self) -> float:
        return sum(r.metrics.success for r in self.rows) / len(self.rows) if self.rows else 0.0

    @property
    def mean_ncm(self) -> float:
        return float(np.mean([r.metrics.ncm for r in self.rows])) if self.rows else 0.0

    @property
    def mean_rmse(self) -> float:
        return float(np.mean([r.metrics.rmse for r in self.rows])) if self.rows else FAILED_RMSE

    def to_dict(self, timing: bool = True) -> dict:
        rows = []
        for r in self.rows:
            m = asdict(r.metrics)
            if not timing:
                m.pop("runtime_s")
            rows.append({"angle": r.angle, **m})
        return {
            "nrd": asdict(self.nrd),
            "n_angles": len(self.rows),
            "success_rate": self.success_rate,
            "mean_ncm": self.mean_ncm,
            "mean_rmse": self.mean_rmse,
            "rows": rows,
        }

    def to_csv(self, timing: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        head = ["angle", "ncm", "success", "rmse", "n_candidates", "n_inliers"]
        w.writerow(head + (["runtime_s"] if timing else []))
        for r in self.rows:
            m = r.metrics
            row = [_num(r.angle), m.ncm, int(m.success), f"{m.rmse:.6f}", m.n_candidates, m.n_inliers]
            w.writerow(row + ([f"{m.runtime_s:.3f}"] if timing else []))
        return buf.getvalue()


def _num(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def sweep_angles(start: float, stop: float, step: float) -> list[float]:
    """Angles from ``start`` (inclusive) to ``stop`` (exclusive)."""
    if step <= 0 or stop <= start:
        raise ParameterError("need step > 0 and stop > start")
    n = (stop - start) / step
    if abs(n - round(n)) > 1e-9:
        raise ParameterError("step must divide the angle span")
    return [start + k * step for k in range(int(round(n)))]


def rotation_sweep(img: np.ndarray, nrd: NrdParams | None = None, start: float = 0.0, stop: float = 360.0, step: float = 10.0, config: RunConfig | None = None) -> SweepReport:
    """Match an image against rotated, radiometrically distorted copies.

    Angle ``k`` uses noise seed ``config.seed + k``. Angles run concurrently
    on ``config.thread_count`` threads; the report is in angle order.
    """
    config = config or RunConfig()
    nrd = nrd or NrdParams()
    img = check_gray(img, min_size=MIN_PIPELINE_SIZE)
    angles = sweep_angles(start, stop, step)
    bank = build_filter_bank(*img.shape, config.filter_params())
    ref = extract_features(img, config, bank)
    inner = config.updated(thread_count=1)

    def one(k: int) -> SweepRow:
        t0 = time.perf_counter()
        sen, fwd = rotate_about_center(synth_modality(img, nrd, seed=config.seed + k), angles[k])
        result = match_features(ref, extract_features(sen, inner, bank), inner)
        elapsed = time.perf_counter() - t0
        m = match_metrics(result, fwd.inverse(), config.inlier_threshold, config.min_matches, elapsed)
        return SweepRow(angles[k], m)

    with ThreadPoolExecutor(max_workers=config.thread_count) as pool:
        rows = list(pool.map(one, range(len(angles))))
    return SweepReport(rows, nrd)


# ---------------------------------------------------------------------------
# evaluation pairs


@dataclass
class EvalPair:
    """A reference/sensed pair whose ``truth`` maps sensed onto reference."""

    ref: np.ndarray = field(repr=False)
    sen: np.ndarray = field(repr=False)
    truth: ProjectiveTransform
    name: str = ""


def synthetic_pairs(images: dict[str, np.ndarray], angles, nrd: NrdParams, seed: int = 0) -> list[EvalPair]:
    """Rotated and distorted copies of each image, one pair per angle."""
    out = []
    for name, img in images.items():
        for k, angle in enumerate(angles):
            sen, fwd = rotate_about_center(synth_modality(img, nrd, seed=seed + k), angle)
            out.append(EvalPair(check_gray(img), sen, fwd.inverse(), f"{name}@{_num(angle)}"))
    return out


def load_manifest(path) -> list[EvalPair]:
    """Read a CSV manifest with columns ``ref,sen,truth``.

    Paths are relative to the manifest's directory; ``truth`` names a
    transform file mapping sensed pixels onto the reference.
    """
    path = Path(path)
    base = path.parent
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ParameterError(f"{path}: manifest lists no pairs")
    missing = {"ref", "sen", "truth"} - set(rows[0])
    if missing:
        raise ParameterError(f"{path}: missing columns {sorted(missing)}")
    return [
        EvalPair(load_image(base / r["ref"]), load_image(base / r["sen"]), ProjectiveTransform.load(base / r["truth"]), r.get("name") or Path(r["sen"]).stem)
        for r in rows
    ]


# ---------------------------------------------------------------------------
# detector repeatability


def intensity_channels(img: np.ndarray) -> np.ndarray:
    """The raw image as a one-channel stack, for the gradient baseline."""
    return check_gray(img)[None]


def detector_repeatability(pairs: list[EvalPair], config: RunConfig | None = None, tol: float = 3.0) -> dict[str, list[RepeatabilityReport]]:
    """Repeatability of the Log-Gabor detector and of the same detector on
    raw intensity gradients, per pair."""
    config = config or RunConfig()
    dp = config.detector_params()
    out = {"malg": [], "intensity": []}
    for pair in pairs:
        bank = build_filter_bank(*pair.ref.shape, config.filter_params())
        amp = [oriented_amplitudes(im, bank if im.shape == bank.shape else build_filter_bank(*im.shape, config.filter_params())) for im in (pair.ref, pair.sen)]
        out["malg"].append(repeatability(detect(amp[0], dp), detect(amp[1], dp), pair.truth, tol))
        out["intensity"].append(repeatability(detect(intensity_channels(pair.ref), dp), detect(intensity_channels(pair.sen), dp), pair.truth, tol))
    return out


def repeatability_csv(pairs: list[EvalPair], reports: dict[str, list[RepeatabilityReport]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["pair", "detector", "n_ref", "n_sen", "n_cor", "repeatability"])
    for name, reps in reports.items():
        for pair, r in zip(pairs, reps):
            w.writerow([pair.name, name, r.n_ref, r.n_sen, r.n_cor, f"{r.repeatability:.6f}"])
    for name, reps in reports.items():
        w.writerow(["mean", name, "", "", "", f"{np.mean([r.repeatability for r in reps]):.6f}"])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# arrangement ablation


@dataclass(frozen=True)
class AblationRow:
    arrangement: str
    dim: int
    mean_ncm: float
    success_rate: float
    mean_rmse: float


def _shared_margin(config: RunConfig) -> int:
    reach = max(DescriptorParams(config.support_radius, a, config.n_orients).sampling_radius for a in ARRANGEMENTS)
    margin = config.border_margin if config.border_margin is not None else config.support_radius + 1
    return max(margin, reach + 1)


def arrangement_ablation(pairs: list[EvalPair], config: RunConfig | None = None, arrangements=ARRANGEMENTS) -> list[AblationRow]:
    """Mean NCM per spatial arrangement.

    Every arrangement describes the same detections: the border margin is
    widened to the largest pooling footprint so no arrangement drops points
    the others keep.
    """
    if not pairs:
        raise ParameterError("ablation needs at least one pair")
    config = config or RunConfig()
    config = config.updated(border_margin=_shared_margin(config))
    feats = []
    for pair in pairs:
        bank = build_filter_bank(*pair.ref.shape, config.filter_params())
        feats.append(
            (
                extract_features(pair.ref, config, bank, describe=False),
                extract_features(pair.sen, config, bank if pair.sen.shape == bank.shape else None, describe=False),
            )
        )
    rows = []
    for arr in arrangements:
        cfg = config.updated(arrangement=arr)
        dp = cfg.descriptor_params()
        metrics = []
        for pair, (fr, fs) in zip(pairs, feats):
            for f in (fr, fs):
                f.described = describe_points(f.mim, f.points, dp, amplitude=f.amplitudes.sum(axis=0))
            result = match_features(fr, fs, cfg)
            metrics.append(match_metrics(result, pair.truth, cfg.inlier_threshold, cfg.min_matches))
        rows.append(
            AblationRow(
                arr,
                dp.dim,
                float(np.mean([m.ncm for m in metrics])),
                float(np.mean([m.success for m in metrics])),
                float(np.mean([m.rmse for m in metrics])),
            )
        )
    return rows


def ablation_csv(rows: list[AblationRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["arrangement", "dimension", "mean_ncm", "success_rate", "mean_rmse"])
    for r in rows:
        w.writerow([r.arrangement, r.dim, f"{r.mean_ncm:.3f}", f"{r.success_rate:.3f}", f"{r.mean_rmse:.6f}"])
    return buf.getvalue()


def dumps_json(obj) -> str:
    """Stable JSON text (sorted keys, fixed indentation)."""
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"
