"""Planar pose types and angle arithmetic."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateOrientationError, InvalidInputError

TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    if not math.isfinite(theta):
        raise InvalidInputError(f"non-finite angle: {theta!r}")
    wrapped = theta - TWO_PI * math.ceil((theta - math.pi) / TWO_PI)
    # ceil can land one period off when theta - pi is a tiny negative number
    if wrapped <= -math.pi:
        wrapped += TWO_PI
    elif wrapped > math.pi:
        wrapped -= TWO_PI
    return wrapped


def wrap_angles(theta: np.ndarray) -> np.ndarray:
    """Vectorised :func:`wrap_angle`."""
    theta = np.asarray(theta, dtype=np.float64)
    out = theta - TWO_PI * np.ceil((theta - math.pi) / TWO_PI)
    out = np.where(out <= -math.pi, out + TWO_PI, out)
    return np.where(out > math.pi, out - TWO_PI, out)


@dataclass(frozen=True)
class Quaternion:
    qx: float
    qy: float
    qz: float
    qw: float

    def __post_init__(self):
        comps = (self.qx, self.qy, self.qz, self.qw)
        if not all(math.isfinite(c) for c in comps):
            raise InvalidInputError(f"non-finite quaternion component in {comps}")
        norm = math.sqrt(sum(c * c for c in comps))
        if norm < 1e-12:
            raise InvalidInputError("zero quaternion")
        for name, c in zip(("qx", "qy", "qz", "qw"), comps):
            object.__setattr__(self, name, c / norm)

    @classmethod
    def from_yaw(cls, theta: float) -> "Quaternion":
        return cls(0.0, 0.0, math.sin(theta / 2.0), math.cos(theta / 2.0))


def quat_to_yaw(q: Quaternion) -> float:
    """Yaw (rotation about z) of a unit quaternion, in (-pi, pi]."""
    siny = 2.0 * (q.qx * q.qy + q.qw * q.qz)
    cosy = 1.0 - 2.0 * (q.qy * q.qy + q.qz * q.qz)
    return wrap_angle(math.atan2(siny, cosy))


def yaw_to_vec(theta: float) -> np.ndarray:
    if not math.isfinite(theta):
        raise InvalidInputError(f"non-finite angle: {theta!r}")
    return np.array([math.cos(theta), math.sin(theta)])


def vec_to_yaw(v) -> float:
    """Angle of a 2-vector. Any positive scale is accepted."""
    vx, vy = float(v[0]), float(v[1])
    if not (math.isfinite(vx) and math.isfinite(vy)):
        raise InvalidInputError(f"non-finite heading vector: {(vx, vy)}")
    if math.hypot(vx, vy) <= 1e-8:
        raise DegenerateOrientationError(f"heading vector {(vx, vy)} has near-zero norm")
    return wrap_angle(math.atan2(vy, vx))


def angular_error_deg(theta_pred: float, theta_gt: float) -> float:
    """Smallest absolute angle between two headings, in degrees [0, 180]."""
    diff = math.remainder(theta_pred - theta_gt, TWO_PI)
    return math.degrees(abs(diff))


def angular_errors_deg(theta_pred: np.ndarray, theta_gt: np.ndarray) -> np.ndarray:
    diff = np.remainder(np.asarray(theta_pred) - np.asarray(theta_gt) + math.pi, TWO_PI) - math.pi
    return np.degrees(np.abs(diff))


def position_error_m(p_pred, p_gt) -> float:
    return float(math.hypot(float(p_pred[0]) - float(p_gt[0]), float(p_pred[1]) - float(p_gt[1])))


@dataclass(frozen=True)
class Pose2D:
    """Planar pose in the map frame; ``theta`` is kept in (-pi, pi]."""

    x: float
    y: float
    theta: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise InvalidInputError(f"non-finite position ({self.x}, {self.y})")
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def heading_vec(self) -> np.ndarray:
        return yaw_to_vec(self.theta)

    @classmethod
    def from_quaternion(cls, x: float, y: float, q: Quaternion) -> "Pose2D":
        return cls(x, y, quat_to_yaw(q))

    def to_world(self, points: np.ndarray) -> np.ndarray:
        """Transform (N, 2) sensor-frame points into the map frame."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        rot = np.array([[c, -s], [s, c]])
        return np.asarray(points, dtype=np.float64) @ rot.T + self.position
