"""Rotation-invariant index-map descriptor.

Each interest point gets a dominant orientation from the most frequent
maximum-index value around it. The index patch is cyclically remapped so that
this value becomes 1, resampled in a frame rotated by the dominant
orientation, then pooled into per-region index histograms (DAISY layout by
default).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .detector import DEFAULT_SUPPORT_RADIUS, InterestPoint
from .errors import ParameterError

ARRANGEMENTS = ("daisy", "square4", "square5", "logpolar")
_BINS = {"daisy": 25, "square4": 16, "square5": 25, "logpolar": 24}


@dataclass(frozen=True)
class DescriptorParams:
    support_radius: int = DEFAULT_SUPPORT_RADIUS
    arrangement: str = "daisy"
    n_orients: int = 6
    resolve_polarity: bool = True
    slot_spread: float = 0.5

    def __post_init__(self):
        if not 0 <= self.slot_spread <= 1:
            raise ParameterError("slot_spread must lie in [0, 1]")
        if self.support_radius < 16:
            raise ParameterError("support_radius must be >= 16")
        if self.arrangement not in ARRANGEMENTS:
            raise ParameterError(f"arrangement must be one of {ARRANGEMENTS}")
        if self.n_orients < 2:
            raise ParameterError("n_orients must be >= 2")

    @property
    def n_bins(self) -> int:
        return _BINS[self.arrangement]

    @property
    def dim(self) -> int:
        return self.n_bins * self.n_orients

    @property
    def sampling_radius(self) -> int:
        """Largest source offset read by the rotated pooling footprint.

        Nearest-neighbour rounding can move a sample by up to half a pixel
        diagonal beyond the footprint's own reach.
        """
        return pooling_reach(self.support_radius, self.arrangement)


@dataclass(frozen=True)
class OrientedPatch:
    center: tuple[float, float]
    c_mim: int
    dominant_deg: float
    rmim: np.ndarray = field(repr=False)  # 0 marks samples outside the image
    flipped: bool = False


def _round_half_up(v):
    return np.floor(np.asarray(v) + 0.5).astype(np.intp)


@lru_cache(maxsize=16)
def _disc_offsets(radius: int) -> tuple[np.ndarray, np.ndarray]:
    u = np.arange(-radius, radius + 1)
    dy, dx = np.meshgrid(u, u, indexing="ij")
    keep = dx**2 + dy**2 <= radius**2
    return dy[keep], dx[keep]


def _center_pixel(center) -> tuple[int, int]:
    x, y = center
    return int(_round_half_up(x)), int(_round_half_up(y))


def dominant_orientation(mim: np.ndarray, center, radius: int, n_orients: int = 6) -> tuple[int, float]:
    """Mode of the index map over a disc; ties go to the smallest index.

    Returns ``(c_mim, dominant_deg)`` with ``dominant_deg = c_mim * 180 / n_orients``.
    """
    cx, cy = _center_pixel(center)
    rows, cols = mim.shape
    if cx - radius < 0 or cy - radius < 0 or cx + radius >= cols or cy + radius >= rows:
        raise IndexError(f"window of radius {radius} at ({cx}, {cy}) leaves the image")
    dy, dx = _disc_offsets(radius)
    counts = np.bincount(mim[cy + dy, cx + dx].astype(np.intp), minlength=n_orients + 1)[1 : n_orients + 1]
    c_mim = int(np.argmax(counts)) + 1
    return c_mim, c_mim * 180.0 / n_orients


def remap_indices(patch: np.ndarray, c_mim: int, n_orients: int) -> np.ndarray:
    """Cyclic shift making ``c_mim`` index 1; zeros (sentinels) pass through."""
    patch = np.asarray(patch)
    out = patch.astype(np.int16) - c_mim + 1
    out[out < 1] += n_orients
    return np.where(patch == 0, 0, out).astype(patch.dtype)


@lru_cache(maxsize=64)
def _rotated_offsets(radius: int, dominant_deg: float) -> tuple[np.ndarray, np.ndarray]:
    """Nearest source offsets of every output pixel of a rotated square frame.

    Output offset ``(u, v)`` reads the source at ``R(dominant) @ (u, v)``
    where ``R`` is the on-screen counter-clockwise rotation, so a scene
    rotated by ``r`` (raising the dominant orientation by ``r``) yields
    the same output.
    """
    a = math.radians(dominant_deg)
    c, s = math.cos(a), math.sin(a)
    u = np.arange(-radius, radius + 1, dtype=np.float64)
    vv, uu = np.meshgrid(u, u, indexing="ij")
    sx = c * uu + s * vv
    sy = -s * uu + c * vv
    return _round_half_up(sy).ravel(), _round_half_up(sx).ravel()


def _gather(mim: np.ndarray, cy, cx, dy: np.ndarray, dx: np.ndarray) -> np.ndarray:
    rows, cols = mim.shape
    yy = np.asarray(cy)[..., None] + dy
    xx = np.asarray(cx)[..., None] + dx
    inside = (yy >= 0) & (yy < rows) & (xx >= 0) & (xx < cols)
    vals = mim[np.clip(yy, 0, rows - 1), np.clip(xx, 0, cols - 1)]
    return np.where(inside, vals, 0).astype(np.int8)


def amplitude_moment(amplitude: np.ndarray, cx, cy, radius: int) -> np.ndarray:
    """First moment ``sum(A(p) * (p - c))`` of the total amplitude over discs.

    ``amplitude`` is the orientation-summed Log-Gabor amplitude; ``cx``, ``cy``
    are integer arrays of centres. Returns ``(n, 2)`` vectors ``(mx, my)``.
    """
    dy, dx = _disc_offsets(radius)
    yy = np.asarray(cy)[..., None] + dy
    xx = np.asarray(cx)[..., None] + dx
    rows, cols = amplitude.shape
    inside = (yy >= 0) & (yy < rows) & (xx >= 0) & (xx < cols)
    vals = np.where(inside, amplitude[np.clip(yy, 0, rows - 1), np.clip(xx, 0, cols - 1)], 0.0)
    return np.stack([vals @ dx.astype(np.float64), vals @ dy.astype(np.float64)], axis=-1)


def polarity_flip(moment: np.ndarray, dominant_deg) -> np.ndarray:
    """Whether the frame must turn by a further 180 degrees.

    The orientation index only fixes the frame up to a half turn. The
    amplitude moment is a true direction (it rotates with the image and is
    unchanged by contrast inversion), so the frame is flipped whenever the
    moment points into the negative half of its first axis.
    """
    a = np.deg2rad(dominant_deg)
    along = moment[..., 0] * np.cos(a) - moment[..., 1] * np.sin(a)
    return along < 0


def extract_rmim(mim: np.ndarray, center, p: DescriptorParams | None = None, amplitude: np.ndarray | None = None) -> OrientedPatch:
    """Remapped index patch resampled in the dominant-orientation frame.

    With ``amplitude`` (the orientation-summed amplitude map) and
    ``p.resolve_polarity`` the half-turn ambiguity of the frame is resolved
    by :func:`polarity_flip`; otherwise the frame angle is the dominant
    orientation itself.
    """
    p = p or DescriptorParams()
    c_mim, do = dominant_orientation(mim, center, p.support_radius, p.n_orients)
    cx, cy = _center_pixel(center)
    flip = False
    if p.resolve_polarity and amplitude is not None:
        flip = bool(polarity_flip(amplitude_moment(amplitude, cx, cy, p.support_radius), do))
    dy, dx = _rotated_offsets(p.support_radius, do + 180.0 * flip)
    side = 2 * p.support_radius + 1
    patch = _gather(mim, cy, cx, dy, dx).reshape(side, side)
    return OrientedPatch((float(center[0]), float(center[1])), c_mim, do, remap_indices(patch, c_mim, p.n_orients), flip)


def _gauss(d2: np.ndarray, sigma: float) -> np.ndarray:
    return np.exp(-d2 / (2.0 * sigma**2))


@lru_cache(maxsize=16)
def pooling_weights(support_radius: int, arrangement: str) -> np.ndarray:
    """Spatial weights ``(n_bins, side * side)`` over the rotated patch.

    Bin order: for ``daisy`` the centre region first, then rings from the
    inside out, each starting at 0 degrees and proceeding counter-clockwise;
    for ``logpolar`` rings inside out in the same angular order; for the
    square grids row-major from the top-left cell.
    """
    r = support_radius
    u = np.arange(-r, r + 1, dtype=np.float64)
    vv, uu = np.meshgrid(u, u, indexing="ij")
    uu, vv = uu.ravel(), vv.ravel()
    rows = []
    if arrangement == "daisy":
        # rings at 1/3, 2/3, 1 of the usable radius; sub-regions of radius
        # half the ring spacing, so the outer ones end exactly at r
        usable = r * 6.0 / 7.0
        rho = usable / 6.0
        centers = [(0.0, 0.0)]
        for ring in (1, 2, 3):
            rr = usable * ring / 3.0
            for k in range(8):
                phi = 2.0 * math.pi * k / 8.0
                centers.append((rr * math.cos(phi), -rr * math.sin(phi)))
        for cu, cv in centers:
            d2 = (uu - cu) ** 2 + (vv - cv) ** 2
            rows.append(np.where(d2 <= rho**2, _gauss(d2, rho / 2.0), 0.0))
    elif arrangement in ("square4", "square5"):
        n = int(arrangement[-1])
        cell = (2 * r + 1) / n
        iu = np.minimum(((uu + r + 0.5) // cell).astype(int), n - 1)
        iv = np.minimum(((vv + r + 0.5) // cell).astype(int), n - 1)
        half = cell / 2.0
        for i in range(n):
            for j in range(n):
                cu = -r - 0.5 + (j + 0.5) * cell
                cv = -r - 0.5 + (i + 0.5) * cell
                d2 = (uu - cu) ** 2 + (vv - cv) ** 2
                rows.append(np.where((iv == i) & (iu == j), _gauss(d2, half / 2.0), 0.0))
    elif arrangement == "logpolar":
        rad = np.hypot(uu, vv)
        ang = np.mod(np.arctan2(-vv, uu) + math.pi / 8.0, 2.0 * math.pi)
        sector = np.minimum((ang // (math.pi / 4.0)).astype(int), 7)
        edges = (0.0, r / 4.0, r / 2.0, float(r))
        env = _gauss(rad**2, float(r))
        for ring in range(3):
            lo, hi = edges[ring], edges[ring + 1]
            in_ring = (rad >= lo) & (rad < hi) if ring < 2 else (rad >= lo) & (rad <= hi)
            for k in range(8):
                rows.append(np.where(in_ring & (sector == k), env, 0.0))
    else:
        raise ParameterError(f"unknown arrangement {arrangement!r}")
    w = np.array(rows)
    w.setflags(write=False)
    return w


@lru_cache(maxsize=16)
def pooling_reach(support_radius: int, arrangement: str) -> int:
    w = pooling_weights(support_radius, arrangement)
    r = support_radius
    u = np.arange(-r, r + 1, dtype=np.float64)
    vv, uu = np.meshgrid(u, u, indexing="ij")
    dist = np.hypot(uu, vv).ravel()[w.any(axis=0)]
    return int(math.ceil(dist.max() + math.sqrt(0.5) - 1e-9))


def _histograms(rmim_flat: np.ndarray, weights: np.ndarray, n_orients: int, slot_spread: float = 0.0) -> np.ndarray:
    """Normalised descriptors for a batch of flattened patches ``(n, pixels)``.

    ``slot_spread`` adds that fraction of each index histogram to its two
    cyclic neighbours, softening the hard orientation quantisation.
    """
    n = rmim_flat.shape[0]
    desc = np.empty((n, weights.shape[0], n_orients))
    for k in range(1, n_orients + 1):
        desc[:, :, k - 1] = (rmim_flat == k).astype(np.float64) @ weights.T
    if slot_spread:
        desc = desc + slot_spread * (np.roll(desc, 1, axis=2) + np.roll(desc, -1, axis=2))
    desc = desc.reshape(n, -1)
    norm = np.linalg.norm(desc, axis=1, keepdims=True)
    np.divide(desc, norm, out=desc, where=norm > 0)
    return desc


def describe(patch: OrientedPatch, p: DescriptorParams | None = None) -> np.ndarray:
    p = p or DescriptorParams()
    w = pooling_weights(p.support_radius, p.arrangement)
    return _histograms(patch.rmim.reshape(1, -1), w, p.n_orients, p.slot_spread)[0]


@dataclass
class DescribedPoints:
    """Descriptors in the order of the input points, minus the dropped ones."""

    points: list[InterestPoint]
    descriptors: np.ndarray
    dropped: list[InterestPoint] = field(default_factory=list)
    dominant_index: np.ndarray | None = None
    flipped: np.ndarray | None = None

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(zip(self.points, self.descriptors))

    @property
    def xy(self) -> np.ndarray:
        return np.array([[ip.x, ip.y] for ip in self.points], dtype=np.float64).reshape(-1, 2)


def describe_points(mim: np.ndarray, ips, p: DescriptorParams | None = None, amplitude: np.ndarray | None = None, chunk: int = 256) -> DescribedPoints:
    """Batch version of ``describe(extract_rmim(...))``.

    Points whose rotated pooling footprint (``p.sampling_radius``) can leave
    the image are dropped.
    """
    p = p or DescriptorParams()
    rows, cols = mim.shape
    rs = p.sampling_radius
    kept, dropped = [], []
    for ip in ips:
        cx, cy = _center_pixel((ip.x, ip.y))
        if cx - rs < 0 or cy - rs < 0 or cx + rs >= cols or cy + rs >= rows:
            dropped.append(ip)
        else:
            kept.append(ip)
    if not kept:
        return DescribedPoints([], np.zeros((0, p.dim)), dropped, np.zeros(0, dtype=int))

    w = pooling_weights(p.support_radius, p.arrangement)
    used = np.flatnonzero(w.any(axis=0))
    w_used = np.ascontiguousarray(w[:, used])
    ddy, ddx = _disc_offsets(p.support_radius)
    centers = np.array([_center_pixel((ip.x, ip.y)) for ip in kept])
    cxs, cys = centers[:, 0], centers[:, 1]

    c_mims = np.empty(len(kept), dtype=int)
    flips = np.zeros(len(kept), dtype=bool)
    for s in range(0, len(kept), chunk):
        sl = slice(s, s + chunk)
        vals = _gather(mim, cys[sl], cxs[sl], ddy, ddx)
        counts = np.stack([(vals == k).sum(axis=1) for k in range(1, p.n_orients + 1)], axis=1)
        c_mims[sl] = np.argmax(counts, axis=1) + 1
        if p.resolve_polarity and amplitude is not None:
            moment = amplitude_moment(amplitude, cxs[sl], cys[sl], p.support_radius)
            flips[sl] = polarity_flip(moment, c_mims[sl] * 180.0 / p.n_orients)

    desc = np.empty((len(kept), p.dim))
    for c in range(1, p.n_orients + 1):
        for flip in (False, True):
            sel = np.flatnonzero((c_mims == c) & (flips == flip))
            if sel.size == 0:
                continue
            dy, dx = _rotated_offsets(p.support_radius, c * 180.0 / p.n_orients + 180.0 * flip)
            dy, dx = dy[used], dx[used]
            for s in range(0, sel.size, chunk):
                idx = sel[s : s + chunk]
                patch = remap_indices(_gather(mim, cys[idx], cxs[idx], dy, dx), c, p.n_orients)
                desc[idx] = _histograms(patch, w_used, p.n_orients, p.slot_spread)
    return DescribedPoints(kept, desc, dropped, c_mims, flips)
