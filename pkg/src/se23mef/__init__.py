"""Minimum-energy filtering on SE2(3) for IMU + landmark pose estimation."""

from .filter import (
    FilterDivergenceError,
    FilterState,
    ImuSample,
    LandmarkBatch,
    LandmarkMap,
    NoiseGains,
    init,
    predict,
    update,
)
from .lie import GroupElement, exp_se23, log_se23, vee, wedge

__version__ = "0.1.0"

__all__ = [
    "FilterDivergenceError",
    "FilterState",
    "GroupElement",
    "ImuSample",
    "LandmarkBatch",
    "LandmarkMap",
    "NoiseGains",
    "exp_se23",
    "init",
    "log_se23",
    "predict",
    "update",
    "vee",
    "wedge",
]
