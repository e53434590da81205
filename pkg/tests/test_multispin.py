import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spinor import multispin as ms
from spinor import oracle
from spinor.core import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    UNIT_CONSTANTS,
    CapacityExceeded,
    NotHermitian,
    PhysicalConstants,
    PolarState,
    make_state,
)
from spinor.propagator import rf_propagator, static_propagator

from .conftest import expm_taylor, random_hermitian, random_unitary

C1 = UNIT_CONSTANTS


def test_two_by_two_layout():
    a, b, c, d = 1.0, 2.0, 3.0, 4.0
    al, be, ga, de = 10.0, 20.0, 30.0, 40.0
    A = np.array([[a, b], [c, d]])
    B = np.array([[al, be], [ga, de]])
    printed = np.array(
        [
            [a + al, b, be, 0],
            [c, d + al, 0, be],
            [ga, 0, a + de, b],
            [0, ga, c, d + de],
        ]
    )
    # the printed layout has the first operand as the inner index
    assert np.array_equal(ms.kron_sum(B, A), printed)
    assert np.array_equal(ms.kron_sum(A, B), np.kron(A, np.eye(2)) + np.kron(np.eye(2), B))


def test_kron_sum_with_zero():
    B = np.array([[1, 2j], [-2j, 3]])
    assert np.array_equal(ms.kron_sum(np.zeros((2, 2)), B), np.kron(np.eye(2), B))


def test_exponential_identity(rng):
    worst = 0.0
    for _ in range(100):
        a, b = random_hermitian(rng, 2), random_hermitian(rng, 2)
        lhs = expm_taylor(-1j * ms.kron_sum(a, b))
        rhs = np.kron(expm_taylor(-1j * a), expm_taylor(-1j * b))
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    assert worst < 1e-10


def test_kron_sum_all_three():
    a, b, c = SIGMA_X, SIGMA_Y, SIGMA_Z
    expect = np.kron(np.kron(a, np.eye(2)), np.eye(2)) + np.kron(np.kron(np.eye(2), b), np.eye(2)) + np.kron(
        np.eye(4), c
    )
    assert np.allclose(ms.kron_sum_all([a, b, c]), expect)


def test_k_sigma_reduces_to_pauli():
    for axis, s in zip("XYZ", (SIGMA_X, SIGMA_Y, SIGMA_Z)):
        assert np.array_equal(ms.k_sigma_matrix(ms.KSigma(axis)), s)


def test_k_sigma_z_half():
    assert np.array_equal(ms.k_sigma_matrix(ms.KSigma("Z", 0.5)), [[1.5, 0.5], [0.5, -0.5]])


@given(st.sampled_from("XYZxyz"), st.floats(-10, 10))
def test_k_sigma_hermitian(axis, k):
    m = ms.k_sigma_matrix(ms.KSigma(axis, k))
    assert np.array_equal(m, m.conj().T)


def test_k_sigma_bad_axis():
    with pytest.raises(ValueError):
        ms.KSigma("W")


def test_homogeneous_two_spin_coupling():
    k1, k2, b = 0.3, -0.7, 2.0
    printed = np.array(
        [
            [(k1 + k2 + 2) * b, k1 * b, k2 * b, 0],
            [k1 * b, (k1 + k2) * b, 0, k2 * b],
            [k2 * b, 0, (k1 + k2) * b, k1 * b],
            [0, k2 * b, k1 * b, (k1 + k2 - 2) * b],
        ]
    )
    h = ms.hamiltonian_homogeneous(ms.SpinDomain(2, (0, 0, b), (k2, k1)), C1)
    assert np.allclose(h, -0.5 * printed, atol=1e-15)


def test_single_spin_reduction():
    c = PhysicalConstants()
    h = ms.hamiltonian_homogeneous(ms.SpinDomain(1, (0, 0, 7.0)), c)
    assert np.allclose(h, -0.5 * c.gamma_hbar * 7.0 * SIGMA_Z, rtol=1e-15, atol=0)


def test_three_spins_total_projection():
    b = 1.3
    h = ms.hamiltonian_homogeneous(ms.SpinDomain(3, (0, 0, b)), C1)
    expect = [-0.5 * b * sum(1 if bit == "0" else -1 for bit in format(i, "03b")) for i in range(8)]
    assert np.allclose(h, np.diag(expect), atol=1e-15)
    levels = sorted(set(np.round(expect, 12)))
    assert len(levels) == 4  # intermediate levels are threefold degenerate


def test_distinct_fields_along_z():
    ba, bb = 2.0, 0.5
    h = ms.hamiltonian_distinct_fields([(0, 0, ba), (0, 0, bb)], C1)
    assert np.allclose(h, -0.5 * np.diag([ba + bb, ba - bb, bb - ba, -ba - bb]), atol=1e-15)


def test_distinct_fields_layout():
    a = np.array([0.3, -0.2, 1.1])
    b = np.array([-0.4, 0.9, 0.6])
    h = ms.hamiltonian_distinct_fields([a, b], C1)
    ap, am = a[0] - 1j * a[1], a[0] + 1j * a[1]
    bp, bm = b[0] - 1j * b[1], b[0] + 1j * b[1]
    printed = np.array(
        [
            [a[2] + b[2], bp, ap, 0],
            [bm, a[2] - b[2], 0, ap],
            [am, 0, b[2] - a[2], bp],
            [0, am, bm, -a[2] - b[2]],
        ]
    )
    assert np.allclose(h, -0.5 * printed, atol=1e-15)
    zeros = {(0, 3), (1, 2), (2, 1), (3, 0)}
    for i, j in itertools.product(range(4), repeat=2):
        assert (h[i, j] == 0) == ((i, j) in zeros)


def test_equal_fields_match_homogeneous():
    h1 = ms.hamiltonian_distinct_fields([(0.1, 0.2, 0.3)] * 2, C1)
    h2 = ms.hamiltonian_homogeneous(ms.SpinDomain(2, (0.1, 0.2, 0.3)), C1)
    assert np.allclose(h1, h2, atol=1e-15)


def test_two_field_eigenvalues():
    h = ms.hamiltonian_distinct_fields([(0, 0, 2.0), (0, 0, 1.0)], C1)
    ev = ms.eigen_spectrum(h).eigenvalues
    assert np.allclose(ev, [1.5, 0.5, -0.5, -1.5], rtol=1e-12, atol=0)


def test_diagonal_spectrum():
    s = ms.eigen_spectrum(np.diag([3.0, -1.0, 2.0]) + 0j)
    assert np.array_equal(s.eigenvalues, [3.0, 2.0, -1.0])


def test_eigen_reconstruction(rng):
    for _ in range(20):
        h = random_hermitian(rng, 4, 5.0)
        s = ms.eigen_spectrum(h)
        v = s.eigenvectors
        assert np.linalg.norm(v @ np.diag(s.eigenvalues) @ v.conj().T - h) < 1e-9 * np.linalg.norm(h)
        assert np.all(np.diff(s.eigenvalues) <= 0)


def test_eigen_rejects_non_hermitian():
    with pytest.raises(NotHermitian):
        ms.eigen_spectrum([[0, 1], [0, 0]])


def test_evolution_at_zero_time(rng):
    h = random_hermitian(rng, 4)
    psi = np.array([0.5, 0.5, 0.5, 0.5], dtype=complex)
    assert np.allclose(ms.evolve_matrix_exp(h, psi, 0.0), psi, atol=1e-15)


def test_two_field_wave_function():
    g = 1e3
    c = PhysicalConstants(gamma=g, hbar=1.0)
    ba, bb, t = 2.0, 0.7, 3e-3
    wa, wb = -g * ba, -g * bb
    pa, pb = PolarState(0.6, 0.8, 0.2, -0.4), PolarState(0.28, 0.96, 0.5, 1.0)
    sa, sb = make_state(pa), make_state(pb)
    psi = ms.evolve_matrix_exp(ms.hamiltonian_distinct_fields([(0, 0, ba), (0, 0, bb)], c), np.kron(sa.vector, sb.vector), t)
    r = np.abs(np.kron(sa.vector, sb.vector))
    ph = np.angle(np.kron(sa.vector, sb.vector))
    expect = r * np.exp(
        1j * ph + np.array([-1, -1, 1, 1]) * 0.5j * np.array([wa + wb, wa - wb, wa - wb, wa + wb]) * t
    )
    assert np.allclose(psi, expect, atol=1e-12)
    per_spin = np.kron(static_propagator(wa, t) @ sa.vector, static_propagator(wb, t) @ sb.vector)
    assert np.allclose(psi, per_spin, atol=1e-12)


def test_coupled_pair_against_oracle():
    c = PhysicalConstants(gamma=1.0, hbar=1.0)
    h = ms.hamiltonian_homogeneous(ms.SpinDomain(2, (0, 0, 1e3), (0.01, 0.01)), c)
    r = oracle.compare_closed_form("matrix_exp", {"h": h}, [1e-3, 7e-3])
    assert r.max_entry_error < 1e-8


def test_blockwise_system_evolution():
    c = PhysicalConstants(gamma=1.0, hbar=1.0)
    sys_ = ms.MultiSpinSystem([ms.SpinDomain(1, (0.2, 0, 1.0)), ms.SpinDomain(2, (0, 0.3, 0.8), (0.1, 0.0))], c)
    p0 = [np.array([0.6, 0.8], dtype=complex), np.array([0.5, 0.5, 0.5, 0.5], dtype=complex)]
    whole = ms.evolve_matrix_exp(ms.hamiltonian_system(sys_), np.kron(p0[0], p0[1]), 2.5)
    assert np.allclose(ms.evolve_system(sys_, p0, 2.5), whole, atol=1e-12)


def test_capacity_limit():
    with pytest.raises(CapacityExceeded):
        ms.MultiSpinSystem([ms.SpinDomain(7), ms.SpinDomain(6)])


def test_tensor_rf_identity_pairs():
    psi = [make_state(PolarState(0.6, 0.8)), make_state(PolarState(1.0, 0.0))]
    eye = (np.eye(2), np.eye(2))
    assert np.allclose(ms.tensor_rf_evolution([eye, eye], psi), np.kron(psi[0].vector, psi[1].vector))


def test_tensor_rf_two_pi_half_pulses():
    w0, w1 = 1e6, 1e4
    t = math.pi / 2 / w1
    pair = rf_propagator(w0, w0, w1, t)
    s = [make_state(PolarState(1.0, 0.0)), make_state(PolarState(0.6, 0.8, 0.3))]
    out = ms.tensor_rf_evolution([(pair.e_part, pair.r_part)] * 2, s)
    assert np.allclose(out, np.kron(pair.apply(s[0]), pair.apply(s[1])), atol=1e-14)


def test_mixed_product(rng):
    for _ in range(10):
        es = [random_unitary(rng, 2) for _ in range(3)]
        rs = [random_unitary(rng, 2) for _ in range(3)]
        lhs = ms.kron_all(es) @ ms.kron_all(rs)
        rhs = ms.kron_all([e @ r for e, r in zip(es, rs)])
        assert np.allclose(lhs, rhs, atol=1e-13)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_no_population_transfer(n):
    c = PhysicalConstants()
    h = ms.hamiltonian_homogeneous(ms.SpinDomain(n, (0, 0, 7.0)), c)
    for t in (1e-9, 3.3e-6, 1.0):
        u = ms.propagator_matrix_exp(h, t, c.hbar)
        assert np.array_equal(np.abs(u) ** 2 > 0, np.eye(2**n, dtype=bool))
        assert np.max(np.abs(np.abs(u) ** 2 - np.eye(2**n))) <= 1e-15
