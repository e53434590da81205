"""Closed-form single-spin evolution operators.

Every driven propagator is returned as an :class:`EvolutionPair`: a diagonal
(or scalar) phase factor ``E`` times an SU(2) rotation ``R``, so that
``psi(t) = E @ R @ psi(0)``.

Builders and the Hamiltonians they solve exactly (``H / hbar``)::

    static_propagator   1/2 [[w0, 0], [0, -w0]]
    rf_propagator       1/2 [[w0, w1 e^{-i(wt+ph)}], [w1 e^{i(wt+ph)}, -w0]]
    rest_propagator     1/2 [[w0 + K, K], [K, -w0 + K]]
    general_propagator  1/2 [[wZ + K, wX - i wY + K], [wX + i wY + K, -wZ + K]]

``general_propagator_literal`` keeps the textbook closed form of the general
case (diagonal phases ``e^{-i(Omega+K)t/2}``, ``e^{+i(Omega-K)t/2}`` and a
rotation with real-axis coupling ``omega1``). It is *not* the solution of the
static Hamiltonian above; it equals ``static_propagator(Omega, t)`` applied
after the exact solution, and it is the form from which the susceptibility
D-terms are read off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import IDENTITY2, DimensionMismatch, PolarState, SpinorError, as_matrix, as_vector


class DegenerateDelta(SpinorError, ValueError):
    """Raised when Delta = 0 makes the rotation coefficients undefined."""


class NonUnitAxis(SpinorError, ValueError):
    pass


@dataclass(frozen=True)
class FieldParams:
    """Angular-frequency parameters of a single spin (all rad/s).

    ``omega_z`` plays the role of Omega in the general case. Use
    :meth:`from_larmor` to pick which identification of Omega
    applies when a rest constant is present.
    """

    omega_x: float = 0.0
    omega_y: float = 0.0
    omega_z: float = 0.0
    omega_rf: float = 0.0
    omega_1: float = 0.0
    k_rest: float = 0.0
    symmetrize_k_coupling: bool = False

    def __post_init__(self):
        for name in ("omega_x", "omega_y", "omega_z", "omega_rf", "omega_1", "k_rest"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.omega_1 < 0:
            raise ValueError("omega_1 must be >= 0; carry the RF phase on the axis instead")

    @classmethod
    def from_fields(cls, field_tesla, gamma: float, k_rest: float = 0.0) -> FieldParams:
        """``omega_i = -gamma * B_i`` for a static field vector in tesla."""
        bx, by, bz = field_tesla
        return cls(omega_x=-gamma * bx, omega_y=-gamma * by, omega_z=-gamma * bz, k_rest=k_rest)

    @classmethod
    def from_larmor(
        cls,
        omega0: float,
        k_rest: float = 0.0,
        omega_x: float = 0.0,
        omega_y: float = 0.0,
        reading: str = "field",
    ) -> FieldParams:
        """General-case parameters from a Larmor frequency.

        ``reading="field"`` sets ``omega_z = omega0`` (i.e. ``-gamma B_Z``);
        ``reading="rest-shifted"`` sets ``omega_z = omega0 - k_rest``. The two
        agree only when ``k_rest == 0``.
        """
        if reading == "field":
            wz = omega0
        elif reading == "rest-shifted":
            wz = omega0 - k_rest
        else:
            raise ValueError(f"unknown reading {reading!r}")
        return cls(omega_x=omega_x, omega_y=omega_y, omega_z=wz, k_rest=k_rest)

    @property
    def omega1_squared(self) -> float:
        k, wx, wy = self.k_rest, self.omega_x, self.omega_y
        if self.symmetrize_k_coupling:
            return wx**2 + wy**2 + k**2 + 2 * k * math.hypot(wx, wy)
        return wx**2 + wy**2 + k**2 + 2 * k * wx


@dataclass(frozen=True)
class DerivedFreqs:
    big_omega: float
    delta: float
    eff_omega1: float


def derived_freqs(p: FieldParams) -> DerivedFreqs:
    # the product form can dip below zero by rounding when it is ~0
    w1 = math.sqrt(max(p.omega1_squared, 0.0))
    return DerivedFreqs(big_omega=p.omega_z, delta=math.hypot(p.omega_z, w1), eff_omega1=w1)


@dataclass(frozen=True)
class EvolutionPair:
    e_part: np.ndarray
    r_part: np.ndarray
    product: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "product", self.e_part @ self.r_part)

    def apply(self, state) -> np.ndarray:
        return self.product @ as_vector(state)


def _phase_diag(a: float, b: float) -> np.ndarray:
    """diag(e^{i a}, e^{i b})"""
    return np.diag([complex(math.cos(a), math.sin(a)), complex(math.cos(b), math.sin(b))])


def _su2(axis_z: float, transverse: complex, delta: float, t: float) -> np.ndarray:
    """exp(-i t/2 (axis_z sigma_z + Re(tr) sigma_x + Im(tr) sigma_y)), |axis| = delta."""
    if delta == 0.0:
        return IDENTITY2.copy()
    c = math.cos(delta * t / 2)
    s = math.sin(delta * t / 2)
    nz = axis_z / delta
    off = transverse / delta
    return np.array(
        [[complex(c, -nz * s), -1j * off.conjugate() * s], [-1j * off * s, complex(c, nz * s)]],
        dtype=complex,
    )


def static_propagator(omega0: float, t: float) -> np.ndarray:
    """diag(e^{-i omega0 t/2}, e^{+i omega0 t/2}); period 4 pi / omega0."""
    return _phase_diag(-omega0 * t / 2, omega0 * t / 2)


def rf_coefficients(initial: PolarState, omega_big: float, delta: float, omega1: float):
    """The four mode amplitudes C1..C4 of the driven solution.

    ``x2(t) = e^{-i w t/2} (C1 e^{i Delta t/2} + C2 e^{-i Delta t/2})`` and
    ``x1(t) = e^{+i w t/2} (C3 e^{i Delta t/2} + C4 e^{-i Delta t/2})``.
    """
    if delta <= 0:
        raise DegenerateDelta("Delta must be > 0; use static_propagator when Omega = omega1 = 0")
    z2 = initial.r2 * complex(math.cos(initial.phi2), math.sin(initial.phi2))
    z1 = initial.r1 * complex(math.cos(initial.phi1), math.sin(initial.phi1))
    u = omega_big / delta
    v = omega1 / delta
    c1 = 0.5 * ((1 - u) * z2 - v * z1)
    c2 = 0.5 * ((1 + u) * z2 + v * z1)
    c3 = 0.5 * (-v * z2 + (1 + u) * z1)
    c4 = 0.5 * (v * z2 + (1 - u) * z1)
    return c1, c2, c3, c4


def rf_propagator(
    omega_rf: float, omega0: float, omega1: float, t: float, phase: float = 0.0
) -> EvolutionPair:
    """Spin in ``B0`` plus a transverse field rotating at ``omega_rf``.

    ``E`` is the frame rotation at the carrier; ``R`` rotates by ``Delta t``
    about ``(omega1 cos(phase), omega1 sin(phase), Omega) / Delta`` with
    ``Omega = omega0 - omega_rf``.
    """
    if omega1 < 0:
        raise ValueError("omega1 must be >= 0")
    big = omega0 - omega_rf
    delta = math.hypot(big, omega1)
    e = _phase_diag(-omega_rf * t / 2, omega_rf * t / 2)
    r = _su2(big, omega1 * complex(math.cos(phase), math.sin(phase)), delta, t)
    return EvolutionPair(e, r)


def rotation_matrix(u, theta: float) -> np.ndarray:
    """``cos(theta/2) I - i sin(theta/2) (u . sigma)`` for a unit axis ``u``."""
    ux, uy, uz = (float(x) for x in u)
    if abs(math.sqrt(ux * ux + uy * uy + uz * uz) - 1.0) > 1e-9:
        raise NonUnitAxis(f"axis {u!r} is not a unit vector")
    c = math.cos(theta / 2)
    s = math.sin(theta / 2)
    return np.array(
        [[complex(c, -uz * s), complex(-uy * s, -ux * s)], [complex(uy * s, -ux * s), complex(c, uz * s)]],
        dtype=complex,
    )


def rest_propagator(omega0: float, k_rest: float, t: float) -> EvolutionPair:
    """Static field plus rest constant: scalar phase ``e^{-iKt/2}`` times a rotation
    by ``sqrt(omega0^2 + K^2) t`` about ``(K, 0, omega0) / Delta``."""
    delta = math.hypot(omega0, k_rest)
    ph = complex(math.cos(k_rest * t / 2), -math.sin(k_rest * t / 2))
    return EvolutionPair(ph * IDENTITY2, _su2(omega0, complex(k_rest, 0.0), delta, t))


def general_propagator(p: FieldParams, t: float) -> EvolutionPair:
    """Exact solution for static ``(omega_x, omega_y, omega_z)`` and rest constant K.

    The rest constant enters as a scalar phase and as an extra x-component of
    the rotation axis ``(omega_x + K, omega_y, omega_z)``, whose length is
    ``Delta = sqrt(omega_z^2 + omega_x^2 + omega_y^2 + K^2 + 2 K omega_x)``.
    """
    k = p.k_rest
    tr = complex(p.omega_x + k, p.omega_y)
    delta = math.hypot(p.omega_z, abs(tr))
    ph = complex(math.cos(k * t / 2), -math.sin(k * t / 2))
    return EvolutionPair(ph * IDENTITY2, _su2(p.omega_z, tr, delta, t))


def general_propagator_literal(p: FieldParams, t: float) -> EvolutionPair:
    """Textbook closed form of the general case.

    ``E = diag(e^{-i(Omega+K)t/2}, e^{i(Omega-K)t/2})``, ``R = [[a, b], [b, conj(a)]]``
    with ``a = cos(Delta t/2) - i (Omega/Delta) sin(Delta t/2)`` and
    ``b = -i (omega1/Delta) sin(Delta t/2)``.
    """
    d = derived_freqs(p)
    big, k = d.big_omega, p.k_rest
    e = _phase_diag(-(big + k) * t / 2, (big - k) * t / 2)
    return EvolutionPair(e, _su2(big, complex(d.eff_omega1, 0.0), d.delta, t))


def compose_segments(segments) -> np.ndarray:
    """Total propagator of consecutive segments, earliest first in ``segments``.

    Each item is ``(matrix, duration)``; the duration is informational. The
    result is ``U_n ... U_2 U_1``.
    """
    segments = list(segments)
    if not segments:
        raise ValueError("need at least one segment")
    total = None
    for m, _duration in segments:
        m = as_matrix(m)
        if total is None:
            total = m.copy()
            continue
        if m.shape != total.shape:
            raise DimensionMismatch(f"segment shape {m.shape} != {total.shape}")
        total = m @ total
    return total
