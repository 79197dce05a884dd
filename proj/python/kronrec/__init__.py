"""Return-time sets of group rotations, their spectra and finite G-set reconstruction."""

import json

from ._core import (
    CapExceeded,
    ConfigError,
    Error,
    ReturnSet,
    ShapeError,
    SpectrumPeak,
    __version__,
    cesaro_average,
    closure_stabilizer,
    gset_is_simple,
    gset_order,
    gset_roundtrip,
    run_config,
    reconstruct_json,
    simulate,
    simulate_skew,
    spectrum,
)


def reconstruct(peaks, height=16, top_m=25):
    """Reconstructed group and rotation image as a dict."""
    return json.loads(reconstruct_json(peaks, height, top_m))


__all__ = [
    "CapExceeded",
    "ConfigError",
    "Error",
    "ReturnSet",
    "ShapeError",
    "SpectrumPeak",
    "__version__",
    "cesaro_average",
    "closure_stabilizer",
    "gset_is_simple",
    "gset_order",
    "gset_roundtrip",
    "reconstruct",
    "run_config",
    "simulate",
    "simulate_skew",
    "spectrum",
]
