"""Static visual artifacts: match lines, checkerboards, index maps, sweep plots."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from PIL import Image  # noqa: E402

from .imaging import ProjectiveTransform, check_gray, warp_projective  # noqa: E402
from .matcher import MatchPair  # noqa: E402

# one colour per orientation index, fixed so dumps are comparable across runs
INDEX_COLORS = np.array(
    [
        [0, 0, 0],  # 0: outside / sentinel
        [230, 25, 75],
        [245, 130, 48],
        [255, 225, 25],
        [60, 180, 75],
        [0, 130, 200],
        [145, 30, 180],
    ],
    dtype=np.uint8,
)

_PNG_META = {"Software": None}


def index_map_rgb(mim: np.ndarray) -> np.ndarray:
    """RGB rendering of an index map; indices beyond the palette wrap around."""
    mim = np.asarray(mim).astype(np.intp)
    n = len(INDEX_COLORS) - 1
    idx = np.where(mim > 0, (mim - 1) % n + 1, 0)
    return INDEX_COLORS[idx]


def save_index_map(path, mim: np.ndarray) -> None:
    Image.fromarray(index_map_rgb(mim)).save(path)


def save_scalar_map(path, values: np.ndarray) -> None:
    """Min-max stretched 8-bit rendering of a real-valued map."""
    v = np.asarray(values, dtype=np.float64)
    lo, hi = float(v.min()), float(v.max())
    scaled = (v - lo) / (hi - lo) if hi > lo else np.zeros_like(v)
    Image.fromarray(np.round(scaled * 255).astype(np.uint8)).save(path)


def checkerboard(a: np.ndarray, b: np.ndarray, block: int = 64) -> np.ndarray:
    """Alternate ``block``-pixel squares of two equally sized images."""
    if a.shape != b.shape:
        raise ValueError("checkerboard needs equally sized images")
    rows, cols = a.shape
    yy, xx = np.mgrid[:rows, :cols]
    use_a = ((yy // block) + (xx // block)) % 2 == 0
    return np.where(use_a, a, b)


def registered_checkerboard(ref: np.ndarray, sen: np.ndarray, transform: ProjectiveTransform, block: int = 64) -> np.ndarray:
    """Checkerboard of the reference and the sensed image warped onto it."""
    ref = check_gray(ref)
    warped = warp_projective(check_gray(sen), transform, *ref.shape)
    return checkerboard(ref, warped, block)


def save_checkerboard(path, ref: np.ndarray, sen: np.ndarray, transform: ProjectiveTransform, block: int = 64) -> None:
    board = registered_checkerboard(ref, sen, transform, block)
    Image.fromarray(np.round(np.clip(board, 0, 1) * 255).astype(np.uint8)).save(path)


def plot_matches(path, ref: np.ndarray, sen: np.ndarray, pairs: list[MatchPair], show_outliers: bool = False, max_lines: int = 500) -> None:
    """Side-by-side images joined by lines between matched points."""
    ref, sen = check_gray(ref), check_gray(sen)
    rows = max(ref.shape[0], sen.shape[0])
    canvas = np.zeros((rows, ref.shape[1] + sen.shape[1]))
    canvas[: ref.shape[0], : ref.shape[1]] = ref
    canvas[: sen.shape[0], ref.shape[1] :] = sen
    off = ref.shape[1]

    fig, ax = plt.subplots(figsize=(canvas.shape[1] / 100, rows / 100), dpi=100)
    ax.imshow(canvas, cmap="gray", vmin=0, vmax=1, interpolation="nearest")
    shown = [m for m in pairs if m.inlier or show_outliers][:max_lines]
    for m in shown:
        color = "lime" if m.inlier else "red"
        ax.plot([m.ref_pt[0], m.sen_pt[0] + off], [m.ref_pt[1], m.sen_pt[1]], color=color, lw=0.6)
        ax.plot([m.ref_pt[0], m.sen_pt[0] + off], [m.ref_pt[1], m.sen_pt[1]], "o", color=color, ms=1.5)
    ax.set_axis_off()
    fig.subplots_adjust(0, 0, 1, 1)
    fig.savefig(path, metadata=_PNG_META)
    plt.close(fig)


def plot_ncm_per_angle(path, angles, ncms, threshold: int | None = None) -> None:
    """Scatter of correct matches against rotation angle."""
    fig, ax = plt.subplots(figsize=(7, 3.5), dpi=100)
    ax.scatter(angles, ncms, s=14)
    if threshold is not None:
        ax.axhline(threshold, color="gray", ls="--", lw=0.8)
    ax.set_xlabel("rotation angle (deg)")
    ax.set_ylabel("NCM")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, metadata=_PNG_META)
    plt.close(fig)


def plot_ablation(path, rows) -> None:
    """Bar chart of mean NCM per spatial arrangement."""
    fig, ax = plt.subplots(figsize=(5, 3.5), dpi=100)
    ax.bar([r.arrangement for r in rows], [r.mean_ncm for r in rows])
    ax.set_ylabel("mean NCM")
    fig.tight_layout()
    fig.savefig(path, metadata=_PNG_META)
    plt.close(fig)
