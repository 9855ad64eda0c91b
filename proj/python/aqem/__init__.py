"""Adaptive phase estimation benchmark: simulation, policy training, sweeps and scaling fits."""

from ._core import (
    ConfigError,
    MarkovPolicy,
    MissingInputError,
    NoiseModel,
    NoiseSpec,
    TEST_SKEWNESS,
    ZeroProbabilityError,
    default_noise_grid,
    detection_probability,
    estimate,
    fit_scaling,
    holevo_variance,
    load_policy,
    robustness_threshold,
    sample_phases,
    save_policy,
    sharpness_of,
    sine_state,
    sweep,
    train_policy,
    wigner_d,
)

__all__ = [
    "ConfigError",
    "MarkovPolicy",
    "MissingInputError",
    "NoiseModel",
    "NoiseSpec",
    "TEST_SKEWNESS",
    "ZeroProbabilityError",
    "default_noise_grid",
    "detection_probability",
    "estimate",
    "fit_scaling",
    "holevo_variance",
    "load_policy",
    "robustness_threshold",
    "sample_phases",
    "save_policy",
    "sharpness_of",
    "sine_state",
    "sweep",
    "train_policy",
    "wigner_d",
]
