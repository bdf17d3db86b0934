"""Raster I/O, projective warping and synthetic multimodal pairs.

Images are plain 2-D ``float64`` arrays with intensities in ``[0, 1]``;
``x`` runs along columns and ``y`` along rows (pointing down).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import ImageFormatError, InvalidTransformError, ParameterError

LUMA_WEIGHTS = (0.299, 0.587, 0.114)
MIN_PIPELINE_SIZE = 64


@dataclass(frozen=True)
class ProjectiveTransform:
    """3x3 homography acting on homogeneous pixel coordinates ``(x, y, 1)``."""

    h: np.ndarray

    def __post_init__(self):
        h = np.array(self.h, dtype=np.float64).reshape(3, 3)
        if not np.all(np.isfinite(h)):
            raise InvalidTransformError("transform contains non-finite entries")
        if h[2, 2] != 0:
            h = h / h[2, 2]
        if abs(np.linalg.det(h)) <= 1e-12:
            raise InvalidTransformError("transform is singular")
        h.setflags(write=False)
        object.__setattr__(self, "h", h)

    @classmethod
    def identity(cls) -> ProjectiveTransform:
        return cls(np.eye(3))

    @classmethod
    def translation(cls, tx: float, ty: float) -> ProjectiveTransform:
        return cls(np.array([[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]]))

    @classmethod
    def rotation(cls, angle_deg: float, center: tuple[float, float] = (0.0, 0.0)) -> ProjectiveTransform:
        """Counter-clockwise rotation as seen on screen (y axis pointing down)."""
        a = np.deg2rad(angle_deg)
        c, s = np.cos(a), np.sin(a)
        cx, cy = center
        rot = np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])
        return cls.translation(cx, cy) @ cls(rot) @ cls.translation(-cx, -cy)

    def inverse(self) -> ProjectiveTransform:
        return ProjectiveTransform(np.linalg.inv(self.h))

    def __matmul__(self, other: ProjectiveTransform) -> ProjectiveTransform:
        return ProjectiveTransform(self.h @ other.h)

    def apply(self, pts) -> np.ndarray:
        """Map an ``(n, 2)`` array of ``(x, y)`` points."""
        pts = np.asarray(pts, dtype=np.float64)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        hom = pts @ self.h[:, :2].T + self.h[:, 2]
        out = hom[:, :2] / hom[:, 2:3]
        return out[0] if single else out

    def to_text(self) -> str:
        return "\n".join(" ".join(f"{v:.17g}" for v in row) for row in self.h) + "\n"

    @classmethod
    def from_text(cls, text: str) -> ProjectiveTransform:
        vals = text.split()
        if len(vals) != 9:
            raise ParameterError(f"transform file needs 9 values, got {len(vals)}")
        return cls(np.array([float(v) for v in vals]).reshape(3, 3))

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> ProjectiveTransform:
        return cls.from_text(Path(path).read_text())


@dataclass(frozen=True)
class NrdParams:
    """Settings of the synthetic radiometric distortion.

    Applied in a fixed order: gamma curve, optional inversion, Gaussian blur,
    additive Gaussian noise, clamp to ``[0, 1]``.
    """

    gamma: float = 1.0
    invert: bool = False
    noise_sigma: float = 0.0
    blur_sigma: float = 0.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ParameterError("gamma must be > 0")
        if self.noise_sigma < 0 or self.blur_sigma < 0:
            raise ParameterError("noise_sigma and blur_sigma must be >= 0")


NRD_PRESETS = {
    "none": NrdParams(),
    "mild": NrdParams(gamma=1.5, noise_sigma=0.02),
    "inverted": NrdParams(gamma=1.0, invert=True, noise_sigma=0.02),
    "strong": NrdParams(gamma=2.0, invert=True, noise_sigma=0.04, blur_sigma=1.0),
}


def check_gray(img, min_size: int = 1) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ImageFormatError(f"expected a 2-D image, got shape {img.shape}")
    if min(img.shape) < min_size:
        raise ImageFormatError(f"image {img.shape} smaller than {min_size}x{min_size}")
    if not np.all(np.isfinite(img)):
        raise ImageFormatError("image contains NaN or Inf")
    return img


def to_gray(arr: np.ndarray, max_value: float) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64) / max_value
    if arr.ndim == 3:
        if arr.shape[2] != 3:
            raise ImageFormatError(f"unsupported channel count {arr.shape[2]}")
        arr = arr @ np.array(LUMA_WEIGHTS)
    return check_gray(arr)


def load_image(path) -> np.ndarray:
    """Read an 8/16-bit grayscale or RGB raster as intensities in [0, 1]."""
    with Image.open(path) as im:
        mode = im.mode
        if mode in ("L", "RGB"):
            return to_gray(np.asarray(im), 255.0)
        if mode == "P":
            return to_gray(np.asarray(im.convert("RGB")), 255.0)
        if mode.startswith("I;16"):
            return to_gray(np.asarray(im).astype(np.float64), 65535.0)
        if mode == "I":
            arr = np.asarray(im)
            if arr.min() < 0 or arr.max() > 65535:
                raise ImageFormatError("32-bit integer rasters are not supported")
            return to_gray(arr, 65535.0)
    raise ImageFormatError(f"unsupported image mode {mode!r}")


def save_image(path, img: np.ndarray) -> None:
    """Write an image in [0, 1] as 8-bit PNG."""
    img = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    Image.fromarray(np.round(img * 255.0).astype(np.uint8)).save(path, format="PNG")


def bilinear_sample(img: np.ndarray, xs: np.ndarray, ys: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Bilinear lookup at real-valued ``(x, y)``; samples off the grid read 0."""
    rows, cols = img.shape
    inside = (xs >= -eps) & (xs <= cols - 1 + eps) & (ys >= -eps) & (ys <= rows - 1 + eps)
    x = np.clip(xs, 0, cols - 1)
    y = np.clip(ys, 0, rows - 1)
    x0 = np.minimum(np.floor(x).astype(np.intp), cols - 2) if cols > 1 else np.zeros_like(x, dtype=np.intp)
    y0 = np.minimum(np.floor(y).astype(np.intp), rows - 2) if rows > 1 else np.zeros_like(y, dtype=np.intp)
    x1 = np.minimum(x0 + 1, cols - 1)
    y1 = np.minimum(y0 + 1, rows - 1)
    fx = x - x0
    fy = y - y0
    top = img[y0, x0] * (1 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1 - fx) + img[y1, x1] * fx
    out = top * (1 - fy) + bot * fy
    return np.where(inside, out, 0.0)


def warp_projective(img: np.ndarray, t: ProjectiveTransform, out_rows: int, out_cols: int) -> np.ndarray:
    """Resample ``img`` so that ``out(t(p)) = img(p)``.

    Every output pixel is inverse-mapped through ``t`` and read bilinearly;
    pixels whose preimage falls outside ``img`` are 0.
    """
    img = check_gray(img)
    inv = t.inverse().h
    yy, xx = np.mgrid[0:out_rows, 0:out_cols].astype(np.float64)
    w = inv[2, 0] * xx + inv[2, 1] * yy + inv[2, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        sx = (inv[0, 0] * xx + inv[0, 1] * yy + inv[0, 2]) / w
        sy = (inv[1, 0] * xx + inv[1, 1] * yy + inv[1, 2]) / w
    bad = ~(np.isfinite(sx) & np.isfinite(sy))
    sx[bad] = -1e9
    sy[bad] = -1e9
    return bilinear_sample(img, sx, sy)


def image_center(shape) -> tuple[float, float]:
    rows, cols = shape
    return ((cols - 1) / 2.0, (rows - 1) / 2.0)


def rotate_about_center(img: np.ndarray, angle_deg: float) -> tuple[np.ndarray, ProjectiveTransform]:
    """Rotate counter-clockwise about the pixel-grid center, keeping the size.

    Returns the rotated image and the forward transform mapping original
    pixel coordinates to rotated ones.
    """
    img = check_gray(img)
    t = ProjectiveTransform.rotation(angle_deg, image_center(img.shape))
    return warp_projective(img, t, *img.shape), t


def synth_modality(img: np.ndarray, p: NrdParams, seed: int = 0) -> np.ndarray:
    """Simulate a second sensor by a nonlinear radiometric distortion."""
    out = check_gray(img) ** p.gamma
    if p.invert:
        out = 1.0 - out
    if p.blur_sigma > 0:
        out = ndimage.gaussian_filter(out, p.blur_sigma, mode="nearest")
    if p.noise_sigma > 0:
        rng = np.random.default_rng(seed)
        out = out + rng.normal(0.0, p.noise_sigma, size=out.shape)
    return np.clip(out, 0.0, 1.0)
