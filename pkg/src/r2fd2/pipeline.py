"""End-to-end feature extraction and image-pair matching."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig
from .descriptor import DescribedPoints, describe_points
from .detector import InterestPoint, select_points, response_map
from .imaging import MIN_PIPELINE_SIZE, check_gray
from .loggabor import FilterBank, build_filter_bank, max_index_map, oriented_amplitudes
from .matcher import MatchResult, fsc_filter, nndr_match


@dataclass
class Features:
    amplitudes: np.ndarray = field(repr=False)
    mim: np.ndarray = field(repr=False)
    response: np.ndarray = field(repr=False)
    points: list[InterestPoint]
    described: DescribedPoints | None = None


def extract_features(img: np.ndarray, config: RunConfig | None = None, bank: FilterBank | None = None, describe: bool = True) -> Features:
    """Log-Gabor amplitudes, index map, interest points and descriptors."""
    config = config or RunConfig()
    img = check_gray(img, min_size=MIN_PIPELINE_SIZE)
    if bank is None or bank.shape != img.shape:
        bank = build_filter_bank(*img.shape, config.filter_params())
    amp = oriented_amplitudes(img, bank, workers=config.thread_count)
    mim = max_index_map(amp)
    dp = config.detector_params()
    resp = response_map(amp, dp)
    ips = select_points(resp, dp)
    feats = Features(amp, mim, resp, ips)
    if describe:
        feats.described = describe_points(mim, ips, config.descriptor_params(), amplitude=amp.sum(axis=0))
    return feats


def match_features(ref: Features, sen: Features, config: RunConfig | None = None) -> MatchResult:
    config = config or RunConfig()
    mp = config.match_params()
    a, b = ref.described, sen.described
    pairs = nndr_match(a.descriptors, b.descriptors, mp, a.xy, b.xy) if len(a) and len(b) else []
    result = fsc_filter(pairs, mp, seed=config.seed)
    result.ref_points = a.xy
    result.sen_points = b.xy
    return result


def match_pipeline(ref: np.ndarray, sen: np.ndarray, config: RunConfig | None = None) -> MatchResult:
    """Detect, describe and match two images.

    The returned transform maps sensed-image pixels onto the reference.
    Degenerate inputs (e.g. constant images) give an unsuccessful result.
    """
    config = config or RunConfig()
    ref = check_gray(ref, min_size=MIN_PIPELINE_SIZE)
    sen = check_gray(sen, min_size=MIN_PIPELINE_SIZE)
    bank = build_filter_bank(*ref.shape, config.filter_params())
    f_ref = extract_features(ref, config, bank)
    f_sen = extract_features(sen, config, bank if sen.shape == ref.shape else None)
    return match_features(f_ref, f_sen, config)
