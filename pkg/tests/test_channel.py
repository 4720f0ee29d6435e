import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nfisac.channel import build_channel_set, steering_derivative, steering_vector
from nfisac.errors import SingularGeometry
from nfisac.scenario import ArraySpec, ScenarioConfig, TargetSpec, UserSpec, build_antenna_positions

from .conftest import generic_config

LAM = 0.0107


def test_single_element_value():
    a = steering_vector(np.zeros((1, 3)), (0, 0, 2 * LAM), LAM)
    assert a[0] == pytest.approx(LAM / (8 * np.pi * LAM) * np.exp(-4j * np.pi))


def test_coincident_point_raises():
    with pytest.raises(SingularGeometry):
        steering_vector(np.zeros((2, 3)), (0, 0, 0), LAM)


@given(
    point=st.tuples(st.floats(-0.05, 0.05), st.floats(-0.05, 0.05), st.floats(0.02, 0.3)),
    axis=st.sampled_from("xyz"),
)
def test_derivative_matches_finite_difference(point, axis):
    ant = build_antenna_positions(ArraySpec(3, 3), LAM)
    delta = 1e-5 * LAM
    e = np.zeros(3)
    e["xyz".index(axis)] = delta
    p = np.asarray(point)
    fd = (steering_vector(ant, p + e, LAM) - steering_vector(ant, p - e, LAM)) / (2 * delta)
    an = steering_derivative(ant, p, LAM, axis)
    assert np.max(np.abs(fd - an)) <= 1e-6 * np.max(np.abs(an))


def test_channel_shapes_and_readonly():
    cfg = generic_config(n=3, m=2, K=2, U=1)
    ch = build_channel_set(cfg)
    assert ch.A.shape == (4, 2) and ch.V.shape == (9, 2) and ch.H_c.shape == (9, 1)
    assert ch.dV["z"].shape == (9, 2)
    np.testing.assert_array_equal(ch.b, [t.reflection for t in cfg.targets])
    with pytest.raises(ValueError):
        ch.V[0, 0] = 0
    assert ch.matrix("dA_y") is ch.dA["y"]
    with pytest.raises(KeyError):
        ch.matrix("nope")


def test_monostatic_a_equals_v():
    cfg = ScenarioConfig(carrier_hz=28e9, tx=ArraySpec(3, 3), rx=ArraySpec(3, 3), targets=(TargetSpec((0.01, 0, 0.2)),))
    ch = build_channel_set(cfg)
    np.testing.assert_array_equal(ch.A, ch.V)


def test_user_channel_is_conjugate_steering_plus_nlos():
    base = generic_config(K=1, U=1)
    ch0 = build_channel_set(base)
    pos = build_antenna_positions(base.tx, base.wavelength)
    np.testing.assert_allclose(ch0.H_c[:, 0], np.conj(steering_vector(pos, base.users[0].position, base.wavelength)))
    eta = 0.3 - 0.1j
    user = UserSpec(base.users[0].position, 10.0, nlos_coefficient=eta, nlos_target_index=0)
    ch1 = build_channel_set(ScenarioConfig(**{**base.__dict__, "users": (user,)}))
    np.testing.assert_allclose(ch1.H_c[:, 0], ch0.H_c[:, 0] + eta * np.conj(ch0.V[:, 0]))
