"""Python access to the edtrace pipeline."""

import json

from ._edtrace import (
    ConfigError,
    FitError,
    WorkloadConfig,
    analyze,
    anon_string,
    decode,
    find_peaks,
    fit_power_law,
    generate,
    md5_hex,
    reencode,
    verify,
)
from ._edtrace import run as _run


def run(input, output, reports=None, client_bits=24, index_bytes=(2, 3), server_port=4661):
    """Capture to anonymized trace. Returns the run report as a dict."""
    return json.loads(_run(input, output, reports, client_bits, tuple(index_bytes), server_port))


__all__ = [
    "ConfigError",
    "FitError",
    "WorkloadConfig",
    "analyze",
    "anon_string",
    "decode",
    "find_peaks",
    "fit_power_law",
    "generate",
    "md5_hex",
    "reencode",
    "run",
    "verify",
]
