"""Camera and 2D lidar fusion for planar robot relocalisation."""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    DatasetFormatError,
    DivergenceError,
    FusionLocError,
    InvalidInputError,
)
from .geometry import Pose2D, Quaternion, angular_error_deg, quat_to_yaw  # noqa: E402

__all__ = [
    "ConfigError",
    "DatasetFormatError",
    "DivergenceError",
    "FusionLocError",
    "InvalidInputError",
    "Pose2D",
    "Quaternion",
    "angular_error_deg",
    "quat_to_yaw",
]
