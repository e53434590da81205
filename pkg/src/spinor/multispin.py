"""Multi-spin Hamiltonians built from Kronecker sums, and their evolution.

Tensor ordering: the first spin (or domain) is the outer index, as in
``numpy.kron``. Under this ordering ``exp(A (+) B) == exp(A) (x) exp(B)``.
Some printed matrices list the first spin as the *inner* index instead;
those equal the matrices built here with the spin order reversed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .core import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    DimensionMismatch,
    NotHermitian,
    PhysicalConstants,
    SpinState,
    as_matrix,
    as_vector,
    check_dim,
    is_unitary,
    kron_all,
)

AXES = ("X", "Y", "Z")


def kron_sum(a, b) -> np.ndarray:
    """``A (x) I_n + I_m (x) B`` with ``m = dim A`` and ``n = dim B``."""
    a, b = as_matrix(a), as_matrix(b)
    return np.kron(a, np.eye(b.shape[0])) + np.kron(np.eye(a.shape[0]), b)


def kron_sum_all(mats) -> np.ndarray:
    return reduce(kron_sum, mats)


@dataclass(frozen=True)
class KSigma:
    axis: str
    k_p: float = 0.0

    def __post_init__(self):
        if self.axis.upper() not in AXES:
            raise ValueError(f"axis must be one of {AXES}")
        object.__setattr__(self, "axis", self.axis.upper())


def k_sigma_matrix(s: KSigma) -> np.ndarray:
    """Pauli matrix shifted by the dimensionless rest ratio ``k_p`` in every entry."""
    base = {"X": SIGMA_X, "Y": SIGMA_Y, "Z": SIGMA_Z}[s.axis]
    return base + s.k_p * np.ones((2, 2), dtype=complex)


@dataclass(frozen=True)
class SpinDomain:
    """``n_spins`` spins sharing one field (tesla) and a position (m) for gradients."""

    n_spins: int
    field: tuple = (0.0, 0.0, 0.0)
    k_list: tuple | None = None
    position: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.n_spins < 1:
            raise ValueError("a domain needs at least one spin")
        object.__setattr__(self, "field", tuple(float(x) for x in self.field))
        k = (0.0,) * self.n_spins if self.k_list is None else tuple(float(x) for x in self.k_list)
        if len(k) != self.n_spins:
            raise ValueError("k_list must have one entry per spin")
        object.__setattr__(self, "k_list", k)
        object.__setattr__(self, "position", tuple(float(x) for x in self.position))


@dataclass(frozen=True)
class MultiSpinSystem:
    domains: tuple
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)

    def __post_init__(self):
        object.__setattr__(self, "domains", tuple(self.domains))
        if not self.domains:
            raise ValueError("a system needs at least one domain")
        check_dim(2**self.n_total)

    @property
    def n_total(self) -> int:
        return sum(d.n_spins for d in self.domains)


@dataclass(frozen=True)
class EnergySpectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def hamiltonian_homogeneous(d: SpinDomain, c: PhysicalConstants) -> np.ndarray:
    """``-1/2 gamma hbar sum_axis (sigma_1^axis (+) ... (+) sigma_n^axis) B_axis``."""
    check_dim(2**d.n_spins)
    h = np.zeros((2**d.n_spins,) * 2, dtype=complex)
    for axis, b in zip(AXES, d.field):
        if b == 0.0:
            continue
        h += kron_sum_all([k_sigma_matrix(KSigma(axis, k)) for k in d.k_list]) * b
    return -0.5 * c.gamma_hbar * h


def single_spin_zeeman(field_tesla, c: PhysicalConstants) -> np.ndarray:
    """``-1/2 gamma hbar (B . sigma)``."""
    bx, by, bz = field_tesla
    return -0.5 * c.gamma_hbar * (bx * SIGMA_X + by * SIGMA_Y + bz * SIGMA_Z)


def hamiltonian_distinct_fields(fields, c: PhysicalConstants) -> np.ndarray:
    """Kronecker sum of ``-mu_j . B_j`` over spins that each see their own field."""
    fields = list(fields)
    if not fields:
        raise ValueError("need at least one field")
    check_dim(2 ** len(fields))
    return kron_sum_all([single_spin_zeeman(f, c) for f in fields])


def hamiltonian_system(s: MultiSpinSystem) -> np.ndarray:
    """Kronecker sum of the per-domain homogeneous Hamiltonians."""
    return kron_sum_all([hamiltonian_homogeneous(d, s.constants) for d in s.domains])


def _fix_phase(v: np.ndarray) -> np.ndarray:
    for i in range(v.shape[0]):
        if abs(v[i]) > 1e-12:
            return v * (abs(v[i]) / v[i])
    return v


def eigen_spectrum(h, tol: float = 1e-9) -> EnergySpectrum:
    """Real eigenvalues (descending) and orthonormal eigenvectors (columns).

    Each eigenvector is scaled so its first nonzero component is real and
    positive.
    """
    h = as_matrix(h)
    scale = max(1.0, float(np.max(np.abs(h))))
    if np.max(np.abs(h - h.conj().T)) > tol * scale:
        raise NotHermitian("eigen_spectrum needs a Hermitian matrix")
    w, v = np.linalg.eigh(h)
    order = np.argsort(-w, kind="stable")
    vecs = np.column_stack([_fix_phase(v[:, i]) for i in order])
    return EnergySpectrum(w[order], vecs)


def _is_diagonal(h: np.ndarray) -> bool:
    return not np.any(h - np.diag(np.diag(h)))


def propagator_matrix_exp(h, t: float, hbar: float = 1.0) -> np.ndarray:
    """``exp(-i H t / hbar)`` through the Hermitian eigendecomposition."""
    h = as_matrix(h)
    if _is_diagonal(h):
        # keeps basis-state populations exactly fixed
        return np.diag(np.exp(-1j * np.real(np.diag(h)) * t / hbar))
    spec = eigen_spectrum(h)
    v = spec.eigenvectors
    return (v * np.exp(-1j * spec.eigenvalues * t / hbar)) @ v.conj().T


def evolve_matrix_exp(h, psi0, t: float, hbar: float = 1.0) -> np.ndarray:
    """``psi(t) = V diag(exp(-i E_k t / hbar)) V^dagger psi0``."""
    h = as_matrix(h)
    psi0 = as_vector(psi0)
    if psi0.shape[0] != h.shape[0]:
        raise DimensionMismatch(f"state length {psi0.shape[0]} != dim {h.shape[0]}")
    if abs(np.linalg.norm(psi0) - 1.0) > 1e-10:
        raise ValueError("psi0 must be normalized")
    return propagator_matrix_exp(h, t, hbar) @ psi0


def evolve_system(s: MultiSpinSystem, psi0s, t: float) -> np.ndarray:
    """Evolve each domain in its own space, then combine by tensor product.

    ``psi0s`` holds one normalized state per domain (length ``2**n_spins``).
    The result equals evolving ``kron(psi0s)`` under :func:`hamiltonian_system`.
    """
    psi0s = list(psi0s)
    if len(psi0s) != len(s.domains):
        raise DimensionMismatch("need one initial state per domain")
    parts = [
        evolve_matrix_exp(hamiltonian_homogeneous(d, s.constants), p, t, s.constants.hbar)
        for d, p in zip(s.domains, psi0s)
    ]
    return kron_all(parts)


def tensor_rf_evolution(pairs, psi0s) -> np.ndarray:
    """``(E_1 (x) E_2 ...)(R_1 (x) R_2 ...)(psi_1 (x) psi_2 ...)`` for per-spin (E, R)."""
    pairs = list(pairs)
    psi0s = [p.vector if isinstance(p, SpinState) else as_vector(p) for p in psi0s]
    if len(pairs) != len(psi0s):
        raise DimensionMismatch("need one (E, R) pair per spin state")
    es, rs = [], []
    for e, r in pairs:
        e, r = as_matrix(e), as_matrix(r)
        if e.shape != (2, 2) or r.shape != (2, 2):
            raise DimensionMismatch("E and R factors must be 2x2")
        if not (is_unitary(e) and is_unitary(r)):
            raise ValueError("E and R factors must be unitary")
        es.append(e)
        rs.append(r)
    check_dim(2 ** len(pairs))
    return kron_all(es) @ (kron_all(rs) @ kron_all(psi0s))

