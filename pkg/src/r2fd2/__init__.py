"""Multimodal image matching with a Log-Gabor corner detector and a
rotation-invariant maximum-index-map descriptor."""

from .config import RunConfig
from .descriptor import DescriptorParams, describe_points, extract_rmim
from .detector import DetectorParams, InterestPoint, detect
from .errors import EstimationError, ImageFormatError, InvalidTransformError, ParameterError, R2FD2Error
from .imaging import NrdParams, ProjectiveTransform, load_image, rotate_about_center, save_image, synth_modality
from .loggabor import FilterParams, build_filter_bank, max_index_map, oriented_amplitudes
from .matcher import MatchParams, MatchResult, fsc_filter, nndr_match
from .pipeline import extract_features, match_features, match_pipeline

__all__ = [
    "DescriptorParams",
    "DetectorParams",
    "EstimationError",
    "FilterParams",
    "ImageFormatError",
    "InterestPoint",
    "InvalidTransformError",
    "MatchParams",
    "MatchResult",
    "NrdParams",
    "ParameterError",
    "ProjectiveTransform",
    "R2FD2Error",
    "RunConfig",
    "build_filter_bank",
    "describe_points",
    "detect",
    "extract_features",
    "extract_rmim",
    "fsc_filter",
    "load_image",
    "match_features",
    "match_pipeline",
    "max_index_map",
    "nndr_match",
    "oriented_amplitudes",
    "rotate_about_center",
    "save_image",
    "synth_modality",
]
