import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fusionloc.errors import DegenerateOrientationError, InvalidInputError
from fusionloc.geometry import (
    Pose2D,
    Quaternion,
    angular_error_deg,
    position_error_m,
    quat_to_yaw,
    vec_to_yaw,
    wrap_angle,
    yaw_to_vec,
)

angles = st.floats(min_value=-math.pi, max_value=math.pi, allow_nan=False).filter(lambda t: t > -math.pi)
finite = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False)


@pytest.mark.parametrize(
    "q, expected",
    [
        ((0, 0, 0, 1), 0.0),
        ((0, 0, 0.7071068, 0.7071068), math.pi / 2),
        ((0, 0, 1, 0), math.pi),
    ],
)
def test_quat_to_yaw_examples(q, expected):
    assert quat_to_yaw(Quaternion(*q)) == pytest.approx(expected, abs=1e-7)


def test_quaternion_normalised_on_construction():
    q = Quaternion(0, 0, 2, 2)
    assert q.qx**2 + q.qy**2 + q.qz**2 + q.qw**2 == pytest.approx(1.0, abs=1e-12)


def test_quaternion_rejects_non_finite():
    with pytest.raises(InvalidInputError):
        Quaternion(0, 0, float("nan"), 1)


def test_quat_to_yaw_pure_yaw_sweep():
    for theta in np.linspace(-math.pi, math.pi, 2001)[1:]:
        q = Quaternion(0.0, 0.0, math.sin(theta / 2), math.cos(theta / 2))
        assert abs(quat_to_yaw(q) - theta) < 1e-9


@pytest.mark.parametrize("theta, vec", [(0, (1, 0)), (math.pi / 2, (0, 1)), (math.pi, (-1, 0))])
def test_yaw_to_vec(theta, vec):
    np.testing.assert_allclose(yaw_to_vec(theta), vec, atol=1e-15)


@pytest.mark.parametrize("v, expected", [((1, 0), 0.0), ((0, -1), -math.pi / 2), ((0.5, 0.5), math.pi / 4)])
def test_vec_to_yaw(v, expected):
    assert vec_to_yaw(v) == pytest.approx(expected, abs=1e-15)


def test_vec_to_yaw_degenerate():
    with pytest.raises(DegenerateOrientationError):
        vec_to_yaw((1e-9, 0.0))


def test_round_trip_random_angles():
    rng = np.random.default_rng(0)
    thetas = rng.uniform(-math.pi, math.pi, 10_000)
    thetas[0] = math.pi
    for t in thetas:
        assert abs(vec_to_yaw(yaw_to_vec(t)) - t) < 1e-9


@given(angles)
def test_heading_vec_is_unit(theta):
    assert abs(np.linalg.norm(Pose2D(0, 0, theta).heading_vec()) - 1) < 1e-9


@given(finite)
def test_pose_theta_wrapped(theta):
    t = Pose2D(0.0, 0.0, theta).theta
    assert -math.pi < t <= math.pi
    assert math.isclose(math.cos(t), math.cos(theta), abs_tol=1e-9)
    assert math.isclose(math.sin(t), math.sin(theta), abs_tol=1e-9)


def test_wrap_angle_boundaries():
    assert wrap_angle(math.pi) == math.pi
    assert wrap_angle(-math.pi) == math.pi
    assert wrap_angle(3 * math.pi) == pytest.approx(math.pi)


def _brute_angular_error(a, b):
    return min(abs(a - b + 2 * math.pi * k) for k in range(-5, 6))


@pytest.mark.parametrize(
    "a, b, expected",
    [(0, 0, 0), (math.pi / 2, 0, 90), (math.radians(179), math.radians(-179), 2)],
)
def test_angular_error_examples(a, b, expected):
    assert angular_error_deg(a, b) == pytest.approx(expected, abs=1e-9)
    assert angular_error_deg(a, b) == pytest.approx(math.degrees(_brute_angular_error(a, b)), abs=1e-9)


@given(finite, finite)
def test_angular_error_properties(a, b):
    e = angular_error_deg(a, b)
    assert 0 <= e <= 180
    assert e == pytest.approx(angular_error_deg(b, a), abs=1e-9)
    assert e == pytest.approx(angular_error_deg(a + 2 * math.pi, b), abs=1e-7)
    assert e == pytest.approx(math.degrees(_brute_angular_error(math.remainder(a, 2 * math.pi), math.remainder(b, 2 * math.pi))), abs=1e-7)


@pytest.mark.parametrize("p, g, d", [((0, 0), (0, 0), 0), ((3, 4), (0, 0), 5), ((1, 1), (2, 2), math.sqrt(2))])
def test_position_error(p, g, d):
    assert position_error_m(p, g) == pytest.approx(d, abs=1e-15)
    assert position_error_m(g, p) == position_error_m(p, g)


def test_pose_to_world():
    pose = Pose2D(1.0, 2.0, math.pi / 2)
    np.testing.assert_allclose(pose.to_world(np.array([[1.0, 0.0]])), [[1.0, 3.0]], atol=1e-12)
