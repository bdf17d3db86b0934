"""Multi-channel auto-correlation corner detector on Log-Gabor amplitudes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ParameterError

DEFAULT_SUPPORT_RADIUS = 48


@dataclass(frozen=True)
class DetectorParams:
    alpha: float = 0.04
    window_sigma: float = 1.0
    window_radius: int = 4
    nms_radius: int = 5
    border_margin: int = DEFAULT_SUPPORT_RADIUS + 1
    max_points: int = 5000

    def __post_init__(self):
        if not 0.04 <= self.alpha <= 0.06:
            raise ParameterError("alpha must lie in [0.04, 0.06]")
        if self.window_radius < 1 or self.nms_radius < 1:
            raise ParameterError("window_radius and nms_radius must be >= 1")
        if self.window_sigma <= 0:
            raise ParameterError("window_sigma must be > 0")
        if self.border_margin < 0 or self.max_points < 0:
            raise ParameterError("border_margin and max_points must be >= 0")


@dataclass(frozen=True)
class InterestPoint:
    x: float
    y: float
    response: float


@dataclass(frozen=True)
class StructureField:
    gx: np.ndarray | None  # (n_orients, rows, cols)
    gy: np.ndarray | None
    m11: np.ndarray | None = None
    m12: np.ndarray | None = None
    m22: np.ndarray | None = None


def channel_gradients(a: np.ndarray) -> StructureField:
    """Sobel derivatives (scaled by 1/8) of every channel, replicate borders."""
    a = np.asarray(a, dtype=np.float64)
    gx = np.empty_like(a)
    gy = np.empty_like(a)
    for o in range(a.shape[0]):
        gx[o] = ndimage.sobel(a[o], axis=1, mode="nearest") / 8.0
        gy[o] = ndimage.sobel(a[o], axis=0, mode="nearest") / 8.0
    return StructureField(gx, gy)


def window_weights(p: DetectorParams) -> np.ndarray:
    """Normalised 2-D Gaussian weights over the square window."""
    r = p.window_radius
    u = np.arange(-r, r + 1)
    g = np.exp(-(u**2) / (2.0 * p.window_sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def _window_sum(img: np.ndarray, p: DetectorParams) -> np.ndarray:
    r = p.window_radius
    u = np.arange(-r, r + 1)
    g = np.exp(-(u**2) / (2.0 * p.window_sigma**2))
    g /= g.sum()
    out = ndimage.correlate1d(img, g, axis=0, mode="nearest")
    return ndimage.correlate1d(out, g, axis=1, mode="nearest")


def comprehensive_matrix(g: StructureField, p: DetectorParams) -> StructureField:
    """Window-weighted structure tensors summed over all orientation channels."""
    m11 = _window_sum((g.gx * g.gx).sum(axis=0), p)
    m12 = _window_sum((g.gx * g.gy).sum(axis=0), p)
    m22 = _window_sum((g.gy * g.gy).sum(axis=0), p)
    return StructureField(g.gx, g.gy, m11, m12, m22)


def corner_response(m: StructureField, p: DetectorParams) -> np.ndarray:
    return (m.m11 * m.m22 - m.m12**2) - p.alpha * (m.m11 + m.m22) ** 2


def response_map(a: np.ndarray, p: DetectorParams | None = None) -> np.ndarray:
    p = p or DetectorParams()
    return corner_response(comprehensive_matrix(channel_gradients(a), p), p)


def _disc_offsets(radius: int) -> tuple[np.ndarray, np.ndarray]:
    """Integer offsets strictly closer than ``radius``."""
    u = np.arange(-radius, radius + 1)
    dy, dx = np.meshgrid(u, u, indexing="ij")
    keep = dx**2 + dy**2 < radius**2
    return dy[keep], dx[keep]


def select_points(resp: np.ndarray, p: DetectorParams) -> list[InterestPoint]:
    """Non-maximum suppression and top-N selection on a response map.

    Candidates are strict 3x3 maxima with positive response inside the
    border margin; they are visited by descending response and kept only
    if no kept point lies closer than ``nms_radius``.
    """
    rows, cols = resp.shape
    m = p.border_margin
    if rows <= 2 * m or cols <= 2 * m or p.max_points == 0:
        return []
    footprint = np.ones((3, 3), dtype=bool)
    footprint[1, 1] = False
    neigh = ndimage.maximum_filter(resp, footprint=footprint, mode="constant", cval=-np.inf)
    cand = (resp > neigh) & (resp > 0)
    cand[:m] = False
    cand[rows - m :] = False
    cand[:, :m] = False
    cand[:, cols - m :] = False

    ys, xs = np.nonzero(cand)
    vals = resp[ys, xs]
    order = np.argsort(-vals, kind="stable")

    blocked = np.zeros((rows, cols), dtype=bool)
    ddy, ddx = _disc_offsets(p.nms_radius)
    out: list[InterestPoint] = []
    for i in order:
        y, x = ys[i], xs[i]
        if blocked[y, x]:
            continue
        out.append(InterestPoint(float(x), float(y), float(vals[i])))
        if len(out) == p.max_points:
            break
        by, bx = y + ddy, x + ddx
        ok = (by >= 0) & (by < rows) & (bx >= 0) & (bx < cols)
        blocked[by[ok], bx[ok]] = True
    return out


def detect(a: np.ndarray, p: DetectorParams | None = None) -> list[InterestPoint]:
    """Interest points of an oriented amplitude stack, strongest first."""
    p = p or DetectorParams()
    return select_points(response_map(a, p), p)


def points_array(ips) -> np.ndarray:
    return np.array([[ip.x, ip.y] for ip in ips], dtype=np.float64).reshape(-1, 2)
