"""Simulated RIS activity detection on a MIMO-OFDM uplink."""

from ._risdet import (
    ConfigError,
    FormatError,
    Model,
    ValidationError,
    calibrate,
    default_config,
    feature_dim,
    generate_training_set,
    monte_carlo,
    normalize_config,
    observations,
    run_episode,
)

__all__ = [
    "ConfigError",
    "FormatError",
    "Model",
    "ValidationError",
    "calibrate",
    "default_config",
    "feature_dim",
    "generate_training_set",
    "monte_carlo",
    "normalize_config",
    "observations",
    "run_episode",
]
