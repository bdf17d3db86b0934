"""Log-Gabor filter bank, oriented amplitudes and the maximum index map."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from .errors import ParameterError


@dataclass(frozen=True)
class FilterParams:
    """Log-Gabor bank geometry.

    Scale ``s`` (1-based) is centred on frequency
    ``1 / (min_wavelength * scale_mult**(s - 1))`` cycles/pixel; orientation
    ``o`` on angle ``(o - 1) * pi / n_orients``. ``sigma_on_f`` sets the
    radial bandwidth (ratio of the log-Gaussian sigma to the centre frequency).
    """

    n_scales: int = 4
    n_orients: int = 6
    min_wavelength: float = 3.0
    scale_mult: float = 2.0
    sigma_on_f: float = 0.75
    angular_sigma: float | None = None

    def __post_init__(self):
        if self.n_scales < 1:
            raise ParameterError("n_scales must be >= 1")
        if self.n_orients < 2:
            raise ParameterError("n_orients must be >= 2")
        if not 0 < self.sigma_on_f < 1:
            raise ParameterError("sigma_on_f must lie in (0, 1)")
        if self.min_wavelength <= 0 or self.scale_mult <= 0:
            raise ParameterError("min_wavelength and scale_mult must be > 0")
        if self.angular_sigma is None:
            object.__setattr__(self, "angular_sigma", 0.65 * np.pi / self.n_orients)
        elif self.angular_sigma <= 0:
            raise ParameterError("angular_sigma must be > 0")

    def center_frequency(self, s: int) -> float:
        return 1.0 / (self.min_wavelength * self.scale_mult ** (s - 1))

    def orientation(self, o: int) -> float:
        return (o - 1) * np.pi / self.n_orients


@dataclass(frozen=True)
class FilterBank:
    """Frequency-domain transfer functions, ``filters[s-1, o-1]``.

    Arrays use the unshifted FFT layout (DC at ``[0, 0]``).
    """

    params: FilterParams
    filters: np.ndarray = field(repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.filters.shape[2:]


def frequency_grid(rows: int, cols: int) -> tuple[np.ndarray, np.ndarray]:
    """Radius (cycles/pixel) and angle of every FFT sample.

    The angle is measured counter-clockwise on screen, so the vertical
    frequency is negated to compensate for rows growing downwards.
    """
    fy = np.fft.fftfreq(rows)[:, None]
    fx = np.fft.fftfreq(cols)[None, :]
    radius = np.sqrt(fx**2 + fy**2)
    theta = np.arctan2(-fy, fx) + np.zeros_like(radius)
    return radius, theta


def build_filter_bank(rows: int, cols: int, p: FilterParams | None = None) -> FilterBank:
    p = p or FilterParams()
    if rows < 8 or cols < 8:
        raise ParameterError("filter bank needs at least 8x8 samples")
    radius, theta = frequency_grid(rows, cols)
    radius[0, 0] = 1.0  # placeholder; DC is zeroed below
    sin_t, cos_t = np.sin(theta), np.cos(theta)

    radial = np.empty((p.n_scales, rows, cols))
    denom = 2.0 * np.log(p.sigma_on_f) ** 2
    for s in range(1, p.n_scales + 1):
        radial[s - 1] = np.exp(-np.log(radius / p.center_frequency(s)) ** 2 / denom)
        radial[s - 1, 0, 0] = 0.0

    angular = np.empty((p.n_orients, rows, cols))
    for o in range(1, p.n_orients + 1):
        t0 = p.orientation(o)
        # wrapped angular distance, safe across the +-pi seam
        dtheta = np.arctan2(sin_t * np.cos(t0) - cos_t * np.sin(t0), cos_t * np.cos(t0) + sin_t * np.sin(t0))
        angular[o - 1] = np.exp(-(dtheta**2) / (2.0 * p.angular_sigma**2))

    filters = radial[:, None] * angular[None, :]
    filters.setflags(write=False)
    return FilterBank(p, filters)


@dataclass(frozen=True)
class ResponseStack:
    even: np.ndarray  # (n_scales, n_orients, rows, cols)
    odd: np.ndarray


def convolve_bank(img: np.ndarray, bank: FilterBank) -> ResponseStack:
    """Even (real) and odd (imaginary) responses of every filter.

    The transfer functions are one-sided in orientation, so the inverse FFT
    of the filtered spectrum is an analytic signal whose real and imaginary
    parts are the even- and odd-symmetric filter outputs.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.shape != bank.shape:
        raise ParameterError(f"image {img.shape} does not match filter bank {bank.shape}")
    spectrum = np.fft.fft2(img)
    resp = np.fft.ifft2(spectrum[None, None] * bank.filters, axes=(-2, -1))
    return ResponseStack(resp.real, resp.imag)


def amplitude_stack(r: ResponseStack) -> np.ndarray:
    """Scale-summed amplitudes, shape ``(n_orients, rows, cols)``."""
    return np.sqrt(r.even**2 + r.odd**2).sum(axis=0)


def oriented_amplitudes(img: np.ndarray, bank: FilterBank, workers: int = 1) -> np.ndarray:
    """Memory-light equivalent of ``amplitude_stack(convolve_bank(img, bank))``."""
    img = np.asarray(img, dtype=np.float64)
    if img.shape != bank.shape:
        raise ParameterError(f"image {img.shape} does not match filter bank {bank.shape}")
    spectrum = scipy.fft.fft2(img, workers=workers)
    n_s, n_o = bank.filters.shape[:2]
    amp = np.zeros((n_o,) + img.shape)
    for o in range(n_o):
        resp = scipy.fft.ifft2(spectrum[None] * bank.filters[:, o], axes=(-2, -1), workers=workers)
        amp[o] = np.abs(resp).sum(axis=0)
    return amp


def max_index_map(a: np.ndarray) -> np.ndarray:
    """1-based index of the strongest orientation per pixel.

    Ties resolve to the smallest index (``argmax`` returns the first maximum).
    """
    return (np.argmax(a, axis=0) + 1).astype(np.int8)
