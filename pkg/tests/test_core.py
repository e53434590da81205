import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spinor import core
from spinor.core import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    PhysicalConstants,
    PolarState,
    SpinState,
    make_state,
)

from .conftest import random_unitary

angles = st.floats(-20, 20, allow_nan=False)
unit_interval = st.floats(0, 1, allow_nan=False)


def test_ground_state_from_polar():
    s = make_state(PolarState(r1=1.0, r2=0.0))
    assert s.x2 == 0 and s.x1 == 1


def test_equal_superposition():
    r = 1 / math.sqrt(2)
    s = make_state(PolarState(r, r))
    assert s.x2 == pytest.approx(r) and s.x1 == pytest.approx(r)


def test_polar_example_is_normalized():
    s = make_state(PolarState(0.6, 0.8, math.pi / 3, -math.pi / 4))
    assert abs(abs(s.x1) ** 2 + abs(s.x2) ** 2 - 1) < 1e-15
    assert np.angle(s.x1) == pytest.approx(math.pi / 3)
    assert np.angle(s.x2) == pytest.approx(-math.pi / 4)


def test_sigma_x_flips_up_to_down():
    out = core.mat_apply(SIGMA_X, SpinState(1, 0))
    assert np.array_equal(out, [0, 1])


def test_pauli_algebra():
    # sigma_x sigma_y = i sigma_z and cyclic
    assert np.allclose(SIGMA_X @ SIGMA_Y, 1j * SIGMA_Z)
    assert np.allclose(SIGMA_Y @ SIGMA_Z, 1j * SIGMA_X)
    assert np.allclose(SIGMA_Z @ SIGMA_X, 1j * SIGMA_Y)
    for s in (SIGMA_X, SIGMA_Y, SIGMA_Z):
        assert np.array_equal(s @ s, np.eye(2))


def test_identity_action():
    v = np.array([0.6, 0.8j])
    assert np.array_equal(core.mat_apply(np.eye(2), v), v)


def test_unitary_preserves_norm(rng):
    for _ in range(50):
        u = random_unitary(rng, 2)
        v = rng.normal(size=2) + 1j * rng.normal(size=2)
        v /= np.linalg.norm(v)
        assert abs(np.linalg.norm(core.mat_apply(u, v)) - 1) < 1e-12


def test_mat_mul_identity_and_associativity(rng):
    a, b, c = (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)) for _ in range(3))
    assert np.array_equal(core.mat_mul(a, np.eye(2)), a)
    assert np.max(np.abs(core.mat_mul(core.mat_mul(a, b), c) - core.mat_mul(a, core.mat_mul(b, c)))) < 1e-12


def test_tensor_basics():
    assert np.array_equal(core.tensor_product([1, 0], [1, 0]), [1, 0, 0, 0])
    assert np.array_equal(core.tensor_product(np.eye(2), np.eye(2)), np.eye(4))


def test_tensor_amplitude_ordering():
    a = make_state(PolarState(0.6, 0.8, 0.3, -0.2))
    b = make_state(PolarState(0.28, 0.96, 1.1, 0.4))
    v = core.tensor_product(a, b)
    # first factor is the outer index: (A+B+, A+B-, A-B+, A-B-)
    assert np.allclose(np.abs(v), [0.8 * 0.96, 0.8 * 0.28, 0.6 * 0.96, 0.6 * 0.28])
    assert np.angle(v[0]) == pytest.approx(-0.2 + 0.4)
    assert np.angle(v[3]) == pytest.approx(0.3 + 1.1)


def test_norm_violations():
    with pytest.raises(core.NormViolation):
        PolarState(0.5, 0.5)
    with pytest.raises(core.NormViolation):
        SpinState(1, 1)
    with pytest.raises(core.NonFiniteValue):
        SpinState(float("nan"), 0)
    with pytest.raises(ValueError):
        PolarState.from_polarization(1.5)


def test_dimension_errors():
    with pytest.raises(core.DimensionMismatch):
        core.mat_apply(np.eye(2), [1, 0, 0])
    with pytest.raises(core.DimensionMismatch):
        core.mat_mul(np.eye(2), np.eye(4))
    with pytest.raises(core.DimensionMismatch):
        core.as_matrix(np.ones((2, 3)))
    with pytest.raises(core.CapacityExceeded):
        core.check_dim(2**13)
    with pytest.raises(core.DimensionMismatch):
        core.check_dim(6)


def test_constants():
    c = PhysicalConstants()
    assert c.gamma == 2.675e8
    assert c.larmor(1.0) == -2.675e8
    with pytest.raises(ValueError):
        PhysicalConstants(gamma=0.0)
    with pytest.raises(ValueError):
        PhysicalConstants(hbar=-1.0)


@given(angles)
def test_wrap_phase_range(phi):
    w = core.wrap_phase(phi)
    assert -math.pi < w <= math.pi
    assert math.isclose(math.cos(w), math.cos(phi), abs_tol=1e-12)
    assert math.isclose(math.sin(w), math.sin(phi), abs_tol=1e-12)


@given(st.floats(-1, 1), angles, angles)
def test_polar_roundtrip(pol, p1, p2):
    p = PolarState.from_polarization(pol, p1, p2)
    s = make_state(p)
    assert abs(abs(s.x1) ** 2 + abs(s.x2) ** 2 - 1) < 1e-12
    assert math.isclose(p.polarization, pol, abs_tol=1e-12)
    back = s.to_polar()
    assert math.isclose(back.r1, p.r1, abs_tol=1e-12) and math.isclose(back.r2, p.r2, abs_tol=1e-12)


@given(st.lists(st.floats(-5, 5), min_size=4, max_size=4))
def test_hermitian_check(vals):
    a, b, c, d = vals
    h = np.array([[a, b + 1j * c], [b - 1j * c, d]])
    assert core.is_hermitian(h)
    assert core.is_hermitian(h + 1j * np.eye(2)) is False
