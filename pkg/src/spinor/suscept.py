"""Complex susceptibility of single spins and spin ensembles.

The susceptibility of one spin is ``chi = gamma hbar conj(x1) x2``. All
functions return values in units of ``gamma hbar`` unless a
:class:`~spinor.core.PhysicalConstants` is passed, in which case the result
is multiplied by ``gamma * hbar``. Time arguments may be scalars or arrays.

Ensemble sums come in two normalizations:

``"total"``
    ``N * sum_q (r2q^2 - r1q^2) = N^2 * polarization`` multiplies the
    single-spin ``D1`` term.
``"mean"``
    the per-spin average, i.e. the same expression divided by ``N^2``.

Phase averages use the normalized mean over ``phi in (-pi, pi]``, not the
bare integral (which would add a factor ``2 pi``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import HBAR, K_BOLTZMANN, PhysicalConstants, PolarState, SpinorError
from .propagator import DegenerateDelta, DerivedFreqs, FieldParams, derived_freqs


class ZeroField(SpinorError, ValueError):
    pass


class NonPositiveTemperature(SpinorError, ValueError):
    pass


NORMALIZATIONS = ("total", "mean")

#: Monte-Carlo draws are generated and reduced in chunks of this size, in order.
MC_CHUNK = 65536


@dataclass(frozen=True)
class DTerms:
    d1: complex
    d2: complex
    d3: complex


def _scale(c: PhysicalConstants | None) -> float:
    return 1.0 if c is None else c.gamma_hbar


def _ensemble_factor(n: float, polarization: float, normalization: str) -> float:
    if normalization == "total":
        return n * (n * polarization)
    if normalization == "mean":
        return polarization
    raise ValueError(f"normalization must be one of {NORMALIZATIONS}")


def _as_freqs(f) -> DerivedFreqs:
    return f if isinstance(f, DerivedFreqs) else derived_freqs(f)


def d_terms(f: FieldParams | DerivedFreqs, t) -> DTerms:
    """D1, D2, D3 at time ``t`` for the given Omega, omega1 and Delta."""
    d = _as_freqs(f)
    if d.delta <= 0:
        raise DegenerateDelta("Delta must be > 0")
    half = 0.5 * d.delta * np.asarray(t, dtype=float)
    c, s = np.cos(half), np.sin(half)
    u, v = d.big_omega / d.delta, d.eff_omega1 / d.delta
    d1 = v * (u * s**2 + 1j * c * s)
    d2 = v**2 * s**2 + 0j
    d3 = c**2 - u**2 * s**2 - 2j * u * c * s
    return DTerms(d1, d2, d3)


def chi_from_state(state, c: PhysicalConstants | None = None):
    """``gamma hbar conj(x1) x2`` from raw amplitudes (vector ``(x2, x1)`` or SpinState)."""
    v = state.vector if hasattr(state, "vector") else np.asarray(state)
    return _scale(c) * np.conj(v[..., 1]) * v[..., 0]


def chi_single_static(p: PolarState, omega0: float, t, c: PhysicalConstants | None = None):
    """``r1 r2 exp(-i (omega0 t + phi1 - phi2))``."""
    t = np.asarray(t, dtype=float)
    return _scale(c) * p.r1 * p.r2 * np.exp(-1j * (omega0 * t + p.phi1 - p.phi2))


def chi_single_general(
    p: PolarState,
    f: FieldParams | DerivedFreqs,
    t,
    c: PhysicalConstants | None = None,
    frame_omega: float | None = None,
):
    """Single-spin susceptibility and its D-terms.

    ``chi = e^{-i w t} (D1 (r2^2 - r1^2) + r1 r2 (D2 e^{i(phi1-phi2)} + D3 e^{i(phi2-phi1)}))``

    ``w`` defaults to Omega, which matches ``general_propagator_literal``. Pass the
    RF carrier as ``frame_omega`` for states produced by ``rf_propagator``, or
    ``0`` for the exact static-field solution with ``omega_y = 0``.
    """
    d = _as_freqs(f)
    dt = d_terms(d, t)
    w = d.big_omega if frame_omega is None else frame_omega
    dphi = p.phi1 - p.phi2
    body = dt.d1 * p.polarization + p.r1 * p.r2 * (
        dt.d2 * complex(math.cos(dphi), math.sin(dphi)) + dt.d3 * complex(math.cos(dphi), -math.sin(dphi))
    )
    chi = _scale(c) * np.exp(-1j * w * np.asarray(t, dtype=float)) * body
    return chi, dt


@dataclass(frozen=True)
class EnsembleSpec:
    """``n_total`` independent spins with mean ``r2^2 - r1^2`` equal to ``polarization``.

    ``phase_policy`` is ``"analytic"`` (exact phase average) or
    ``"monte-carlo"`` (``draws`` random phase pairs from a seeded Philox
    generator). ``freqs`` overrides the Omega/Delta/omega1 derived from
    ``params``.
    """

    n_total: float
    polarization: float
    params: FieldParams = FieldParams()
    phase_policy: str = "analytic"
    seed: int = 0
    draws: int = 1
    freqs: DerivedFreqs | None = None

    def __post_init__(self):
        if abs(self.polarization) > 1:
            raise ValueError("|polarization| must be <= 1")
        if self.n_total < 0:
            raise ValueError("n_total must be >= 0")
        if self.phase_policy not in ("analytic", "monte-carlo"):
            raise ValueError(f"unknown phase policy {self.phase_policy!r}")
        if self.phase_policy == "monte-carlo" and self.draws < 1:
            raise ValueError("monte-carlo needs draws >= 1")

    @property
    def derived(self) -> DerivedFreqs:
        return self.freqs if self.freqs is not None else derived_freqs(self.params)


@dataclass(frozen=True)
class PhaseAverage:
    """Sample mean and standard error of ``exp(i (phi2 - phi1))`` over random phases."""

    mean: complex
    stderr: float
    draws: int


def phase_average(seed: int, draws: int) -> PhaseAverage:
    """Average of ``exp(i(phi2 - phi1))`` with ``phi1, phi2`` uniform on (-pi, pi].

    Draws come from ``numpy.random.Philox(seed)`` and are reduced in chunks of
    :data:`MC_CHUNK` in a fixed order, so results are bit-reproducible.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    total = 0j
    total_sq = 0.0
    left = draws
    while left:
        m = min(MC_CHUNK, left)
        phi1 = rng.uniform(-math.pi, math.pi, m)
        phi2 = rng.uniform(-math.pi, math.pi, m)
        z = np.exp(1j * (phi2 - phi1))
        total += z.sum()
        total_sq += float(np.sum(np.abs(z) ** 2))
        left -= m
    mean = total / draws
    var = max(total_sq / draws - abs(mean) ** 2, 0.0)
    return PhaseAverage(complex(mean), math.sqrt(var / draws), draws)


def chi_ensemble(
    spec: EnsembleSpec, t, c: PhysicalConstants | None = None, normalization: str = "total"
):
    """Ensemble susceptibility ``e^{-i Omega t} D1 N sum(r2^2 - r1^2)`` (total normalization).

    Under ``"monte-carlo"`` every spin shares the amplitudes fixed by the
    polarization and gets a random phase pair; the phase-dependent D2/D3
    terms then average to a small residual instead of exactly zero.
    """
    d = spec.derived
    dt = d_terms(d, t)
    t = np.asarray(t, dtype=float)
    pol = spec.polarization
    body = dt.d1 * pol
    if spec.phase_policy == "monte-carlo":
        z = phase_average(spec.seed, spec.draws).mean
        r1r2 = 0.5 * math.sqrt(max(1.0 - pol * pol, 0.0))
        body = body + r1r2 * (dt.d2 * z.conjugate() + dt.d3 * z)
    per_spin = np.exp(-1j * d.big_omega * t) * body
    if normalization not in NORMALIZATIONS:
        raise ValueError(f"normalization must be one of {NORMALIZATIONS}")
    factor = spec.n_total**2 if normalization == "total" else 1.0
    return _scale(c) * factor * per_spin


def weak_drive_freqs(omega0: float, omega1: float) -> DerivedFreqs:
    """Omega = Delta = omega0 with the given omega1 (drive much weaker than the main field)."""
    return DerivedFreqs(big_omega=omega0, delta=abs(omega0), eff_omega1=omega1)


def _two_line(amplitude: float, omega0: float, t):
    t = np.asarray(t, dtype=float)
    return amplitude / (2 * omega0) * (np.exp(-1j * omega0 * t) - np.exp(-2j * omega0 * t))


def chi_rf_closed_form(
    n: float,
    polarization: float,
    omega_x: float,
    omega0: float,
    t,
    c: PhysicalConstants | None = None,
    normalization: str = "total",
):
    """``(sqrt(2) wX / 2 w0) (e^{-i w0 t} - e^{-2i w0 t})`` times the ensemble factor."""
    if omega0 == 0:
        raise ZeroField("omega0 must be nonzero")
    return _scale(c) * _ensemble_factor(n, polarization, normalization) * _two_line(
        math.sqrt(2) * omega_x, omega0, t
    )


def chi_noise_closed_form(
    n: float,
    polarization: float,
    k_rest: float,
    omega0: float,
    t,
    c: PhysicalConstants | None = None,
    normalization: str = "total",
):
    """RF form with ``sqrt(2) omega_x`` replaced by the rest constant ``K``."""
    if omega0 == 0:
        raise ZeroField("omega0 must be nonzero")
    return _scale(c) * _ensemble_factor(n, polarization, normalization) * _two_line(k_rest, omega0, t)


def boltzmann_polarization(
    temperature: float, omega0: float, c: PhysicalConstants | None = None
) -> float:
    """Thermal two-level polarization ``tanh(hbar |omega0| / (2 k_B T))``."""
    if not temperature > 0:
        raise NonPositiveTemperature("temperature must be > 0 K")
    hbar = HBAR if c is None else c.hbar
    return math.tanh(hbar * abs(omega0) / (2 * K_BOLTZMANN * temperature))
