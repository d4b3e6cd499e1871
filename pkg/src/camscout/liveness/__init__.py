"""Live-versus-static identification of candidate camera links."""

from .classify import (
    LivenessPolicy,
    PairRule,
    Sample,
    SampleSet,
    classify,
    compare_pair,
    identify,
    identify_all,
    sample_mjpeg,
    sample_still,
)
from .comparators import (
    DimensionMismatch,
    as_raster,
    checksum_compare,
    decode_raster,
    digest,
    luminance_diff,
    mean_luminance,
    percent_diff,
)
from .hls import HlsParseError, Playlist, check_hls_live, parse_playlist
from .mjpeg import MjpegError, MultipartReader, sample_mjpeg_frame

__all__ = [
    "DimensionMismatch",
    "HlsParseError",
    "LivenessPolicy",
    "MjpegError",
    "MultipartReader",
    "PairRule",
    "Playlist",
    "Sample",
    "SampleSet",
    "as_raster",
    "check_hls_live",
    "checksum_compare",
    "classify",
    "compare_pair",
    "decode_raster",
    "digest",
    "identify",
    "identify_all",
    "luminance_diff",
    "mean_luminance",
    "parse_playlist",
    "percent_diff",
    "sample_mjpeg",
    "sample_mjpeg_frame",
    "sample_still",
]
