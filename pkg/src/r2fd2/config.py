"""Flat run configuration shared by the library entry points and the CLI.

The text format is one ``key = value`` per line; ``#`` starts a comment.
Unknown keys are rejected. Precedence is flags > file > defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

from .descriptor import DescriptorParams
from .detector import DetectorParams
from .errors import ParameterError
from .loggabor import FilterParams
from .matcher import MatchParams


@dataclass(frozen=True)
class RunConfig:
    # Log-Gabor bank
    n_scales: int = 4
    n_orients: int = 6
    min_wavelength: float = 3.0
    scale_mult: float = 2.0
    sigma_on_f: float = 0.75
    angular_sigma: float | None = None
    # detector
    alpha: float = 0.04
    window_sigma: float = 1.0
    window_radius: int = 4
    nms_radius: int = 5
    border_margin: int | None = None
    max_points: int = 5000
    # descriptor
    support_radius: int = 48
    arrangement: str = "daisy"
    resolve_polarity: bool = True
    slot_spread: float = 0.5
    # matching
    nndr_ratio: float = 0.95
    fsc_iterations: int = 2000
    inlier_threshold: float = 3.0
    min_matches: int = 10
    model: str = "projective"
    cross_check: bool = True
    # run
    seed: int = 0
    thread_count: int = 1

    def __post_init__(self):
        if self.thread_count < 1:
            raise ParameterError("thread_count must be >= 1")
        # constructing the parts validates them
        self.filter_params(), self.detector_params(), self.descriptor_params(), self.match_params()

    def filter_params(self) -> FilterParams:
        return FilterParams(self.n_scales, self.n_orients, self.min_wavelength, self.scale_mult, self.sigma_on_f, self.angular_sigma)

    def detector_params(self) -> DetectorParams:
        margin = self.border_margin
        if margin is None:
            margin = self.support_radius + 1
        return DetectorParams(self.alpha, self.window_sigma, self.window_radius, self.nms_radius, margin, self.max_points)

    def descriptor_params(self) -> DescriptorParams:
        return DescriptorParams(self.support_radius, self.arrangement, self.n_orients, self.resolve_polarity, self.slot_spread)

    def match_params(self) -> MatchParams:
        return MatchParams(self.nndr_ratio, self.fsc_iterations, self.inlier_threshold, self.min_matches, self.model, self.cross_check)

    def updated(self, **kwargs) -> RunConfig:
        unknown = set(kwargs) - {f.name for f in fields(self)}
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        return replace(self, **kwargs)

    def to_text(self) -> str:
        return "".join(f"{f.name} = {_format(getattr(self, f.name))}\n" for f in fields(self))

    @classmethod
    def from_text(cls, text: str, base: RunConfig | None = None) -> RunConfig:
        base = base or cls()
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParameterError(f"line {lineno}: expected 'key = value'")
            key, raw = (t.strip() for t in line.split("=", 1))
            if key not in types:
                raise ParameterError(f"line {lineno}: unknown key {key!r}")
            values[key] = parse_value(types[key], raw)
        return base.updated(**values)

    @classmethod
    def load(cls, path, base: RunConfig | None = None) -> RunConfig:
        return cls.from_text(Path(path).read_text(), base)


def _format(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def parse_value(type_name: str, raw: str):
    raw = raw.strip()
    optional = "None" in type_name
    if optional and raw.lower() in ("none", ""):
        return None
    try:
        if type_name.startswith("bool"):
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if type_name.startswith("int"):
            return int(raw)
        if type_name.startswith("float"):
            return float(raw)
    except ValueError as e:
        raise ParameterError(f"cannot parse {raw!r} as {type_name}") from e
    return raw
