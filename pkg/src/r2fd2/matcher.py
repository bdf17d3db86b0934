"""Descriptor matching, projective estimation and sample-consensus filtering.

Estimated transforms map sensed-image coordinates onto the reference image.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial.distance import cdist

from .errors import EstimationError, InvalidTransformError, ParameterError
from .imaging import ProjectiveTransform

MODELS = ("projective", "affine")


@dataclass(frozen=True)
class MatchParams:
    nndr_ratio: float = 0.95
    fsc_iterations: int = 2000
    inlier_threshold: float = 3.0
    min_matches: int = 10
    model: str = "projective"
    cross_check: bool = True

    def __post_init__(self):
        if not 0 < self.nndr_ratio <= 1:
            raise ParameterError("nndr_ratio must lie in (0, 1]")
        if self.inlier_threshold <= 0 or self.fsc_iterations < 1 or self.min_matches < 1:
            raise ParameterError("thresholds and iteration counts must be positive")
        if self.model not in MODELS:
            raise ParameterError(f"model must be one of {MODELS}")

    @property
    def sample_size(self) -> int:
        return 4 if self.model == "projective" else 3


@dataclass
class MatchPair:
    ref_pt: tuple[float, float]
    sen_pt: tuple[float, float]
    distance: float
    inlier: bool = False


@dataclass
class MatchResult:
    pairs: list[MatchPair] = field(default_factory=list)
    transform: ProjectiveTransform | None = None
    n_inliers: int = 0
    min_matches: int = 10
    ref_points: np.ndarray | None = None
    sen_points: np.ndarray | None = None

    @property
    def success(self) -> bool:
        return self.transform is not None and self.n_inliers >= self.min_matches

    @property
    def inliers(self) -> list[MatchPair]:
        return [m for m in self.pairs if m.inlier]


def nndr_match(ref_desc, sen_desc, p: MatchParams | None = None, ref_xy=None, sen_xy=None) -> list[MatchPair]:
    """Nearest-neighbour distance-ratio matching by exhaustive search.

    A reference descriptor is paired with its nearest sensed descriptor when
    ``d1 < nndr_ratio * d2``; with ``cross_check`` the sensed descriptor's
    own nearest reference must be the same point. All-zero descriptors never
    match. Points default to descriptor row indices.
    """
    p = p or MatchParams()
    ref_desc = np.atleast_2d(np.asarray(ref_desc, dtype=np.float64))
    sen_desc = np.atleast_2d(np.asarray(sen_desc, dtype=np.float64))
    if len(ref_desc) == 0 or len(sen_desc) == 0:
        return []
    if ref_xy is None:
        ref_xy = np.column_stack([np.arange(len(ref_desc)), np.zeros(len(ref_desc))])
    if sen_xy is None:
        sen_xy = np.column_stack([np.arange(len(sen_desc)), np.zeros(len(sen_desc))])
    ref_ok = np.flatnonzero(np.any(ref_desc != 0, axis=1))
    sen_ok = np.flatnonzero(np.any(sen_desc != 0, axis=1))
    if ref_ok.size == 0 or sen_ok.size == 0:
        return []

    d = cdist(ref_desc[ref_ok], sen_desc[sen_ok])
    nn = np.argmin(d, axis=1)
    d1 = d[np.arange(len(ref_ok)), nn]
    if sen_ok.size > 1:
        d2 = np.partition(d, 1, axis=1)[:, 1]
    else:
        d2 = np.full(len(ref_ok), np.inf)
    keep = d1 < p.nndr_ratio * d2
    if p.cross_check:
        keep &= np.argmin(d, axis=0)[nn] == np.arange(len(ref_ok))

    pairs = []
    for i in np.flatnonzero(keep):
        r, s = ref_ok[i], sen_ok[nn[i]]
        pairs.append(MatchPair((float(ref_xy[r][0]), float(ref_xy[r][1])), (float(sen_xy[s][0]), float(sen_xy[s][1])), float(d1[i])))
    return pairs


def _normalizing_matrix(pts: np.ndarray) -> np.ndarray:
    c = pts.mean(axis=0)
    mean_dist = np.mean(np.linalg.norm(pts - c, axis=1))
    if not mean_dist > 1e-12:
        raise EstimationError("points coincide")
    s = np.sqrt(2.0) / mean_dist
    return np.array([[s, 0.0, -s * c[0]], [0.0, s, -s * c[1]], [0.0, 0.0, 1.0]])


def _apply_h(h: np.ndarray, pts: np.ndarray) -> np.ndarray:
    hom = pts @ h[:, :2].T + h[:, 2]
    return hom[:, :2] / hom[:, 2:3]


def estimate_projective(src, dst) -> ProjectiveTransform:
    """Least-squares homography with ``dst ~ H @ src`` by normalised DLT."""
    src = np.asarray(src, dtype=np.float64).reshape(-1, 2)
    dst = np.asarray(dst, dtype=np.float64).reshape(-1, 2)
    if len(src) < 4 or len(src) != len(dst):
        raise EstimationError("need at least 4 matched points")
    ts, td = _normalizing_matrix(src), _normalizing_matrix(dst)
    a, b = _apply_h(ts, src), _apply_h(td, dst)
    n = len(a)
    A = np.zeros((2 * n, 9))
    A[0::2, 0:2] = a
    A[0::2, 2] = 1.0
    A[0::2, 6:8] = -b[:, :1] * a
    A[0::2, 8] = -b[:, 0]
    A[1::2, 3:5] = a
    A[1::2, 5] = 1.0
    A[1::2, 6:8] = -b[:, 1:] * a
    A[1::2, 8] = -b[:, 1]
    _, sv, vt = np.linalg.svd(A)
    if sv[7] < 1e-9 * sv[0]:
        raise EstimationError("degenerate configuration (collinear points?)")
    h = np.linalg.inv(td) @ vt[-1].reshape(3, 3) @ ts
    try:
        return ProjectiveTransform(h)
    except InvalidTransformError as e:
        raise EstimationError(str(e)) from e


def estimate_affine(src, dst) -> ProjectiveTransform:
    src = np.asarray(src, dtype=np.float64).reshape(-1, 2)
    dst = np.asarray(dst, dtype=np.float64).reshape(-1, 2)
    if len(src) < 3 or len(src) != len(dst):
        raise EstimationError("need at least 3 matched points")
    ts, td = _normalizing_matrix(src), _normalizing_matrix(dst)
    a, b = _apply_h(ts, src), _apply_h(td, dst)
    X = np.column_stack([a, np.ones(len(a))])
    sol, _, rank, _ = np.linalg.lstsq(X, b, rcond=None)
    if rank < 3:
        raise EstimationError("degenerate configuration (collinear points?)")
    h = np.eye(3)
    h[:2, :] = sol.T
    try:
        return ProjectiveTransform(np.linalg.inv(td) @ h @ ts)
    except InvalidTransformError as e:
        raise EstimationError(str(e)) from e


def symmetric_transfer_error(h: np.ndarray, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Mean of the forward (``src -> dst``) and backward residual lengths."""
    with np.errstate(divide="ignore", invalid="ignore"):
        fwd = np.linalg.norm(_apply_h(h, src) - dst, axis=1)
        bwd = np.linalg.norm(_apply_h(np.linalg.inv(h), dst) - src, axis=1)
    err = 0.5 * (fwd + bwd)
    return np.where(np.isfinite(err), err, np.inf)


def _minimal_models(src, dst, samples, model) -> np.ndarray:
    """Exact models for a batch of minimal samples ``(k, m)``; NaN if singular."""
    a, b = src[samples], dst[samples]  # (k, m, 2)
    k = len(samples)
    if model == "affine":
        X = np.concatenate([a, np.ones((k, 3, 1))], axis=2)
        hs = np.full((k, 3, 3), np.nan)
        ok = np.abs(np.linalg.det(X)) > 1e-9
        sol = np.linalg.solve(X[ok], b[ok])  # (k, 3, 2)
        hs[ok, :2, :] = np.transpose(sol, (0, 2, 1))
        hs[ok, 2] = (0.0, 0.0, 1.0)
        return hs
    M = np.zeros((k, 8, 8))
    rhs = np.zeros((k, 8))
    x, y = a[..., 0], a[..., 1]
    u, v = b[..., 0], b[..., 1]
    M[:, 0::2, 0] = x
    M[:, 0::2, 1] = y
    M[:, 0::2, 2] = 1.0
    M[:, 0::2, 6] = -u * x
    M[:, 0::2, 7] = -u * y
    M[:, 1::2, 3] = x
    M[:, 1::2, 4] = y
    M[:, 1::2, 5] = 1.0
    M[:, 1::2, 6] = -v * x
    M[:, 1::2, 7] = -v * y
    rhs[:, 0::2] = u
    rhs[:, 1::2] = v
    hs = np.full((k, 3, 3), np.nan)
    cond = np.linalg.cond(M)
    ok = np.isfinite(cond) & (cond < 1e12)
    if ok.any():
        sol = np.linalg.solve(M[ok], rhs[ok][..., None])[..., 0]
        hs[ok] = np.concatenate([sol, np.ones((ok.sum(), 1))], axis=1).reshape(-1, 3, 3)
    return hs


def _non_collinear(pts: np.ndarray, samples: np.ndarray, eps: float = 1.0) -> np.ndarray:
    """Reject samples with any (near-)collinear triple (twice the area < eps px^2)."""
    q = pts[samples]
    m = samples.shape[1]
    ok = np.ones(len(samples), dtype=bool)
    for i in range(m):
        for j in range(i + 1, m):
            for k in range(j + 1, m):
                d1 = q[:, j] - q[:, i]
                d2 = q[:, k] - q[:, i]
                ok &= np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) > eps
    return ok


def _batched_errors(hs: np.ndarray, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    src_h = np.concatenate([src, np.ones((len(src), 1))], axis=1)
    dst_h = np.concatenate([dst, np.ones((len(dst), 1))], axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        fw = np.einsum("kij,nj->kni", hs, src_h)
        fwd = np.linalg.norm(fw[..., :2] / fw[..., 2:3] - dst, axis=2)
        inv = np.linalg.inv(hs)
        bw = np.einsum("kij,nj->kni", inv, dst_h)
        bwd = np.linalg.norm(bw[..., :2] / bw[..., 2:3] - src, axis=2)
    err = 0.5 * (fwd + bwd)
    return np.where(np.isfinite(err), err, np.inf)


def fsc_filter(pairs: list[MatchPair], p: MatchParams | None = None, seed: int = 0) -> MatchResult:
    """Two-stage sample consensus.

    Stage 1 scores random minimal-sample models by the number of pairs with
    symmetric transfer error within ``inlier_threshold``. Stage 2 refits the
    best model to its inliers by least squares and reclassifies, repeating
    until the inlier set stops changing (at most 10 rounds, never accepting
    a round that loses inliers).
    """
    p = p or MatchParams()
    pairs = [replace(m, inlier=False) for m in pairs]
    result = MatchResult(pairs, min_matches=p.min_matches)
    m = p.sample_size
    if len(pairs) < m:
        return result
    dst = np.array([mp.ref_pt for mp in pairs], dtype=np.float64)
    src = np.array([mp.sen_pt for mp in pairs], dtype=np.float64)
    fit = estimate_projective if p.model == "projective" else estimate_affine

    rng = np.random.default_rng(seed)
    n = len(pairs)
    samples = np.argsort(rng.random((p.fsc_iterations, n)), axis=1)[:, :m] if n <= 64 else _draw(rng, n, m, p.fsc_iterations)
    samples = samples[_non_collinear(src, samples) & _non_collinear(dst, samples)]
    best_h = None
    best_count = 0
    try:
        ts, td = _normalizing_matrix(src), _normalizing_matrix(dst)
    except EstimationError:
        return result
    src_n, dst_n = _apply_h(ts, src), _apply_h(td, dst)
    td_inv = np.linalg.inv(td)
    for s in range(0, len(samples), 250):
        hs = td_inv @ _minimal_models(src_n, dst_n, samples[s : s + 250], p.model) @ ts
        good = np.all(np.isfinite(hs.reshape(len(hs), -1)), axis=1)
        good[good] = np.abs(np.linalg.det(hs[good])) > 1e-12
        if not good.any():
            continue
        errs = _batched_errors(hs[good], src, dst)
        counts = (errs <= p.inlier_threshold).sum(axis=1)
        i = int(np.argmax(counts))
        if counts[i] > best_count:
            best_count = int(counts[i])
            best_h = hs[good][i]
    if best_h is None or best_count < m:
        return result

    model = ProjectiveTransform(best_h)
    mask = symmetric_transfer_error(model.h, src, dst) <= p.inlier_threshold
    for _ in range(10):
        try:
            cand = fit(src[mask], dst[mask])
        except EstimationError:
            break
        new_mask = symmetric_transfer_error(cand.h, src, dst) <= p.inlier_threshold
        if new_mask.sum() < mask.sum():
            break
        stable = np.array_equal(new_mask, mask)
        model, mask = cand, new_mask
        if stable:
            break
    for mp, flag in zip(pairs, mask):
        mp.inlier = bool(flag)
    result.transform = model
    result.n_inliers = int(mask.sum())
    return result


def _draw(rng: np.random.Generator, n: int, m: int, k: int) -> np.ndarray:
    """``k`` samples of ``m`` distinct indices from ``range(n)``."""
    out = rng.integers(0, n, size=(k, m))
    for _ in range(100):
        dup = np.zeros(k, dtype=bool)
        for i in range(m):
            for j in range(i + 1, m):
                dup |= out[:, i] == out[:, j]
        if not dup.any():
            break
        out[dup] = rng.integers(0, n, size=(dup.sum(), m))
    return out
