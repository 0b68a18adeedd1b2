"""Parallel rationale decoding with an exact prefix and an approximate window."""

from ._glimpse import (
    Backend,
    BackendSpec,
    CacheMismatch,
    CapacityError,
    ConfigError,
    ContractViolation,
    DecodeConfig,
    DecodeResult,
    GlimpseError,
    ar_baseline,
    config_digest,
    corrupt,
    decode_bytes,
    encode_bytes,
    fastcot,
    hit_report,
    iteration_savings,
    make_backend,
    run_rationale,
    truncated_cot,
    verify,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
