from ._icgkit import (
    ConfigError,
    DomainError,
    FormatError,
    center_of_mass,
    cross_validate,
    default_config,
    estimate_scale,
    fit,
    jacobian_check,
    predict,
    simple_features,
    simulate,
    train,
)

__all__ = [
    "ConfigError",
    "DomainError",
    "FormatError",
    "center_of_mass",
    "cross_validate",
    "default_config",
    "estimate_scale",
    "fit",
    "jacobian_check",
    "predict",
    "simple_features",
    "simulate",
    "train",
]
