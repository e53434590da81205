"""Shared types and small linear-algebra helpers for spin-1/2 simulations.

Matrices and state vectors are plain ``numpy`` complex arrays. State vectors
list the ``|+>`` amplitude first and the ``|->`` amplitude second::

    psi = (x2, x1) = (r2 exp(i phi2), r1 exp(i phi1))

Frequencies are angular (rad/s) everywhere. The Larmor convention is
``omega0 = -gamma * B0``: for a proton (gamma > 0) a field along +z gives a
*negative* omega0. Many NMR texts flip this sign; this package does not.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

NORM_TOL = 1e-10
UNITARY_TOL = 1e-10
ORACLE_TOL = 1e-8

#: Largest supported number of spins in a dense Hilbert space (4096 x 4096).
MAX_SPINS = 12
MAX_DIM = 2**MAX_SPINS

PROTON_GAMMA = 2.675e8  # rad s^-1 T^-1
HBAR = 1.054571817e-34  # J s
K_BOLTZMANN = 1.380649e-23  # J/K

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY2 = np.eye(2, dtype=complex)


class SpinorError(Exception):
    """Base class for errors raised by this package."""


class NormViolation(SpinorError, ValueError):
    pass


class DimensionMismatch(SpinorError, ValueError):
    pass


class CapacityExceeded(SpinorError, ValueError):
    pass


class NotHermitian(SpinorError, ValueError):
    pass


class NonFiniteValue(SpinorError, ValueError):
    pass


def wrap_phase(phi: float) -> float:
    """Map an angle onto (-pi, pi]."""
    w = math.remainder(phi, 2 * math.pi)
    if w <= -math.pi:
        w += 2 * math.pi
    return w


@dataclass(frozen=True)
class PhysicalConstants:
    gamma: float = PROTON_GAMMA
    hbar: float = HBAR

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and self.gamma != 0):
            raise ValueError("gamma must be finite and nonzero")
        if not (math.isfinite(self.hbar) and self.hbar > 0):
            raise ValueError("hbar must be finite and strictly positive")

    @property
    def gamma_hbar(self) -> float:
        return self.gamma * self.hbar

    def larmor(self, field_tesla: float) -> float:
        """Angular frequency ``-gamma * B`` for a field in tesla."""
        return -self.gamma * field_tesla


#: gamma = hbar = 1; convenient for tests and dimensionless work.
UNIT_CONSTANTS = PhysicalConstants(gamma=1.0, hbar=1.0)


@dataclass(frozen=True)
class PolarState:
    """Amplitude/phase description ``(r1 e^{i phi1}, r2 e^{i phi2})`` of a spin."""

    r1: float
    r2: float
    phi1: float = 0.0
    phi2: float = 0.0

    def __post_init__(self):
        for v in (self.r1, self.r2, self.phi1, self.phi2):
            if not math.isfinite(v):
                raise NonFiniteValue("polar state components must be finite")
        if not (0.0 <= self.r1 <= 1.0 + 1e-12 and 0.0 <= self.r2 <= 1.0 + 1e-12):
            raise NormViolation("amplitudes r1, r2 must lie in [0, 1]")
        if abs(self.r1**2 + self.r2**2 - 1.0) > 1e-9:
            raise NormViolation(
                f"r1^2 + r2^2 = {self.r1**2 + self.r2**2!r} deviates from 1"
            )
        object.__setattr__(self, "phi1", wrap_phase(self.phi1))
        object.__setattr__(self, "phi2", wrap_phase(self.phi2))

    @classmethod
    def from_polarization(cls, polarization: float, phi1=0.0, phi2=0.0) -> PolarState:
        """State with ``r2**2 - r1**2 == polarization``."""
        if abs(polarization) > 1:
            raise ValueError("polarization must lie in [-1, 1]")
        return cls(
            r1=math.sqrt((1 - polarization) / 2),
            r2=math.sqrt((1 + polarization) / 2),
            phi1=phi1,
            phi2=phi2,
        )

    @property
    def polarization(self) -> float:
        return self.r2**2 - self.r1**2


@dataclass(frozen=True)
class SpinState:
    """Normalized spin-1/2 state; ``x2`` is the ``|+>`` amplitude (listed first)."""

    x2: complex
    x1: complex

    def __post_init__(self):
        x2, x1 = complex(self.x2), complex(self.x1)
        if not all(math.isfinite(v) for v in (x2.real, x2.imag, x1.real, x1.imag)):
            raise NonFiniteValue("state amplitudes must be finite")
        norm = abs(x2) ** 2 + abs(x1) ** 2
        if abs(norm - 1.0) > NORM_TOL:
            raise NormViolation(f"|x1|^2 + |x2|^2 = {norm!r}")
        object.__setattr__(self, "x2", x2)
        object.__setattr__(self, "x1", x1)

    @classmethod
    def from_vector(cls, v) -> SpinState:
        v = np.asarray(v, dtype=complex)
        if v.shape != (2,):
            raise DimensionMismatch(f"expected a 2-vector, got shape {v.shape}")
        return cls(x2=v[0], x1=v[1])

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.x2, self.x1], dtype=complex)

    def to_polar(self) -> PolarState:
        return PolarState(
            r1=min(abs(self.x1), 1.0),
            r2=min(abs(self.x2), 1.0),
            phi1=float(np.angle(self.x1)),
            phi2=float(np.angle(self.x2)),
        )


SPIN_UP = SpinState(1.0, 0.0)
SPIN_DOWN = SpinState(0.0, 1.0)


def make_state(p: PolarState) -> SpinState:
    """Build ``(r2 e^{i phi2}, r1 e^{i phi1})`` from a polar description."""
    if abs(p.r1**2 + p.r2**2 - 1.0) > 1e-9:
        raise NormViolation("r1^2 + r2^2 must equal 1")
    x2 = p.r2 * complex(math.cos(p.phi2), math.sin(p.phi2))
    x1 = p.r1 * complex(math.cos(p.phi1), math.sin(p.phi1))
    # absorb the ~1e-16 rounding so SpinState's check never trips on valid input
    n = math.sqrt(abs(x2) ** 2 + abs(x1) ** 2)
    return SpinState(x2=x2 / n, x1=x1 / n)


def as_vector(s) -> np.ndarray:
    if isinstance(s, SpinState):
        return s.vector
    v = np.asarray(s, dtype=complex)
    if v.ndim != 1:
        raise DimensionMismatch(f"expected a state vector, got shape {v.shape}")
    return v


def as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFiniteValue("matrix has non-finite entries")
    return a


def check_dim(dim: int) -> None:
    if dim > MAX_DIM:
        raise CapacityExceeded(
            f"dimension {dim} exceeds the dense limit {MAX_DIM} ({MAX_SPINS} spins)"
        )
    if dim < 2 or dim & (dim - 1):
        raise DimensionMismatch(f"dimension {dim} is not a power of two >= 2")


def is_hermitian(m, tol: float = 1e-10) -> bool:
    a = np.asarray(m)
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    return bool(np.max(np.abs(a - a.conj().T)) <= tol * scale)


def is_unitary(m, tol: float = UNITARY_TOL) -> bool:
    a = np.asarray(m)
    return bool(np.max(np.abs(a @ a.conj().T - np.eye(a.shape[0]))) <= tol)


def mat_apply(m, s) -> np.ndarray:
    """Matrix-vector product; accepts a :class:`SpinState` or a plain vector."""
    a = as_matrix(m)
    v = as_vector(s)
    if a.shape[1] != v.shape[0]:
        raise DimensionMismatch(f"matrix {a.shape} cannot act on vector of length {v.shape[0]}")
    return a @ v


def mat_mul(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes {a.shape} and {b.shape} differ")
    return a @ b


def tensor_product(a, b) -> np.ndarray:
    """Kronecker product; the first factor is the outer (slow) index.

    For two spins ``psi_A (x) psi_B`` this orders the 4-vector as
    ``(A+B+, A+B-, A-B+, A-B-)``.
    """
    a = a.vector if isinstance(a, SpinState) else np.asarray(a, dtype=complex)
    b = b.vector if isinstance(b, SpinState) else np.asarray(b, dtype=complex)
    if a.ndim != b.ndim:
        raise DimensionMismatch("cannot mix vectors and matrices in a tensor product")
    return np.kron(a, b)


def kron_all(factors) -> np.ndarray:
    out = None
    for f in factors:
        out = np.asarray(f, dtype=complex) if out is None else tensor_product(out, f)
    if out is None:
        raise ValueError("need at least one factor")
    return out
