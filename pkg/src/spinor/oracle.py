"""Fixed-step RK4 integration of the Schrodinger equation.

This module is the independent check on every closed form in the package:
the Hamiltonians here are written down directly from the differential
systems, and :func:`integrate_rk4` never touches :mod:`spinor.propagator` or
:mod:`spinor.multispin`. Only :func:`compare_closed_form` imports them, to
obtain the side being checked.

Single-spin Hamiltonians are expressed as ``H / hbar`` in rad/s, so they are
integrated with ``hbar=1``.

The step size follows ``dt = 2 pi / (steps_per_period * f_max)`` with
``f_max`` the largest absolute row sum of ``H / hbar`` over the sampled
times (an upper bound on the largest eigenfrequency).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .core import ORACLE_TOL, SpinorError, as_vector


class StepTooLarge(SpinorError, RuntimeError):
    pass


class NonHermitianSample(SpinorError, ValueError):
    pass


@dataclass(frozen=True)
class IntegrationConfig:
    dt_max: float = math.inf
    steps_per_period: int = 200
    renormalize: bool = False
    max_norm_drift: float = 1e-9

    def __post_init__(self):
        if not self.dt_max > 0:
            raise ValueError("dt_max must be > 0")
        if self.steps_per_period < 50:
            raise ValueError("steps_per_period must be >= 50")


@dataclass(frozen=True)
class HamiltonianFn:
    """``eval(t)`` returns the Hamiltonian at time ``t`` (Hermitian, ``dim x dim``)."""

    dim: int
    eval: Callable[[float], np.ndarray]

    @classmethod
    def constant(cls, h) -> HamiltonianFn:
        h = np.asarray(h, dtype=complex)
        return cls(h.shape[0], lambda t: h)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    norm_drift: float

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def _row_sum_bound(h: np.ndarray) -> float:
    return float(np.max(np.sum(np.abs(h), axis=-1)))


def _rk4_run(hfun, psi, t0, dts, n_steps, hbar, record=False):
    """Advance ``psi`` (shape ``(B, d, m)``) by ``n_steps`` steps of size ``dts`` (shape ``(B,)``).

    ``hfun(t)`` takes times of shape ``(B,)`` and returns ``(B, d, d)``.
    """
    coef = -1j / hbar
    dt3 = dts[:, None, None]
    t = np.array(t0, dtype=float)
    out = [psi.copy()] if record else None
    for _ in range(n_steps):
        h0 = hfun(t)
        hm = hfun(t + dts / 2)
        h1 = hfun(t + dts)
        k1 = coef * (h0 @ psi)
        k2 = coef * (hm @ (psi + 0.5 * dt3 * k1))
        k3 = coef * (hm @ (psi + 0.5 * dt3 * k2))
        k4 = coef * (h1 @ (psi + dt3 * k3))
        psi = psi + dt3 / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t + dts
        if record:
            out.append(psi.copy())
    return psi, out


def integrate_rk4(
    h: HamiltonianFn,
    psi0,
    t_final: float,
    cfg: IntegrationConfig = IntegrationConfig(),
    hbar: float = 1.0,
) -> Trajectory:
    """Integrate ``d psi/dt = -(i/hbar) H(t) psi`` from 0 to ``t_final``.

    Raises :class:`StepTooLarge` when the accumulated norm drift exceeds
    ``cfg.max_norm_drift`` (unless ``cfg.renormalize`` is set).
    """
    psi0 = as_vector(psi0)
    if psi0.shape[0] != h.dim:
        raise ValueError(f"state length {psi0.shape[0]} != Hamiltonian dim {h.dim}")
    if t_final < 0:
        raise ValueError("t_final must be >= 0")
    n0 = float(np.linalg.norm(psi0))
    if abs(n0 - 1.0) > 1e-10:
        raise ValueError("psi0 must be normalized")

    f_max = 0.0
    for ts in np.linspace(0.0, t_final, 5):
        hs = np.asarray(h.eval(float(ts)), dtype=complex)
        scale = max(1.0, float(np.max(np.abs(hs))))
        if np.max(np.abs(hs - hs.conj().T)) > 1e-9 * scale:
            raise NonHermitianSample(f"H({ts}) is not Hermitian")
        f_max = max(f_max, _row_sum_bound(hs) / hbar)

    if t_final == 0 or f_max == 0:
        n_steps = 1 if t_final > 0 else 0
    else:
        dt = min(2 * math.pi / (cfg.steps_per_period * f_max), cfg.dt_max)
        n_steps = max(1, math.ceil(t_final / dt))
    if n_steps == 0:
        return Trajectory(np.array([0.0]), psi0[None, :].copy(), 0.0)
    dt = t_final / n_steps

    hfun = lambda t: np.asarray(h.eval(float(t[0])), dtype=complex)[None]  # noqa: E731
    states = [psi0.copy()]
    psi = psi0[None, :, None]
    drift = 0.0
    for _ in range(n_steps):
        psi, _ = _rk4_run(hfun, psi, np.array([len(states) - 1]) * dt, np.array([dt]), 1, hbar)
        nrm = float(np.linalg.norm(psi))
        drift = max(drift, abs(nrm - 1.0))
        if cfg.renormalize:
            psi = psi / nrm
        states.append(psi[0, :, 0].copy())
    if drift > cfg.max_norm_drift and not cfg.renormalize:
        raise StepTooLarge(
            f"norm drift {drift:.3e} exceeds {cfg.max_norm_drift:.1e}; raise steps_per_period"
        )
    return Trajectory(np.arange(n_steps + 1) * dt, np.array(states), drift)


def propagate_batch(hfun, t_final, n_steps: int, dim: int = 2, hbar: float = 1.0) -> np.ndarray:
    """RK4 propagators ``U(t_final)`` for a batch of Hamiltonians.

    ``hfun(t)`` maps times of shape ``(B,)`` to ``(B, dim, dim)``; every batch
    member is integrated with ``n_steps`` equal steps of its own length.
    Columns of the result are the evolved basis vectors.
    """
    t_final = np.atleast_1d(np.asarray(t_final, dtype=float))
    b = t_final.shape[0]
    psi = np.broadcast_to(np.eye(dim, dtype=complex), (b, dim, dim)).copy()
    psi, _ = _rk4_run(hfun, psi, np.zeros(b), t_final / n_steps, n_steps, hbar)
    return psi


# --- Hamiltonians written directly from the equations of motion (H / hbar) ---
# All accept scalars or arrays of shape (B,) and return (B, 2, 2) callables.


def _stack(h00, h01, h10, h11):
    return np.stack([np.stack([h00, h01], axis=-1), np.stack([h10, h11], axis=-1)], axis=-2)


def static_hamiltonian(omega0):
    w0 = np.atleast_1d(np.asarray(omega0, dtype=complex))
    z = np.zeros_like(w0)
    h = 0.5 * _stack(w0, z, z, -w0)
    return lambda t: h


def rf_hamiltonian(omega_rf, omega0, omega1, phase=0.0):
    w = np.atleast_1d(np.asarray(omega_rf, dtype=float))
    w0 = np.atleast_1d(np.asarray(omega0, dtype=complex))
    w1 = np.atleast_1d(np.asarray(omega1, dtype=float))
    ph = np.atleast_1d(np.asarray(phase, dtype=float))

    def h(t):
        rot = np.exp(1j * (w * t + ph))
        return 0.5 * _stack(w0 + 0 * rot, w1 * rot.conj(), w1 * rot, -w0 + 0 * rot)

    return h


def rest_hamiltonian(omega0, k_rest):
    w0 = np.atleast_1d(np.asarray(omega0, dtype=complex))
    k = np.atleast_1d(np.asarray(k_rest, dtype=complex))
    h = 0.5 * _stack(w0 + k, k + 0 * w0, k + 0 * w0, -w0 + k)
    return lambda t: h


def general_hamiltonian(omega_x, omega_y, omega_z, k_rest):
    wx = np.atleast_1d(np.asarray(omega_x, dtype=float))
    wy = np.atleast_1d(np.asarray(omega_y, dtype=float))
    wz = np.atleast_1d(np.asarray(omega_z, dtype=complex))
    k = np.atleast_1d(np.asarray(k_rest, dtype=float))
    h = 0.5 * _stack(wz + k, wx - 1j * wy + k, wx + 1j * wy + k, -wz + k)
    return lambda t: h


def rotation_hamiltonian(u, rate):
    """``(rate/2) u . sigma``; evolving for ``t`` rotates by ``rate * t`` about ``u``."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    r = np.atleast_1d(np.asarray(rate, dtype=float))
    ux, uy, uz = u[:, 0] * r, u[:, 1] * r, u[:, 2] * r
    h = 0.5 * _stack(uz + 0j, ux - 1j * uy, ux + 1j * uy, -uz + 0j)
    return lambda t: h


# --- closed-form comparison ---

BUILDERS = ("static", "rf", "rotation", "rest", "general", "matrix_exp")


@dataclass
class ComparisonReport:
    builder: str
    n_cases: int
    max_entry_error: float
    max_norm_drift: float
    tolerance: float = ORACLE_TOL

    @property
    def passed(self) -> bool:
        return self.max_entry_error < self.tolerance and self.max_norm_drift < 1e-9

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def _closed_and_hamiltonian(builder: str, params: dict, t: np.ndarray):
    """Closed-form propagators (B, d, d) and the matching batched Hamiltonian."""
    from . import multispin, propagator

    n = len(t)
    col = {}
    for k, v in params.items():
        if k in ("h", "hbar"):
            continue
        col[k] = np.broadcast_to(np.atleast_2d(v), (n, 3)) if k == "u" else np.broadcast_to(v, (n,))
    if builder == "static":
        closed = [propagator.static_propagator(col["omega0"][i], t[i]) for i in range(n)]
        ham = static_hamiltonian(col["omega0"])
    elif builder == "rf":
        ph = col.get("phase", np.zeros(n))
        closed = [
            propagator.rf_propagator(col["omega_rf"][i], col["omega0"][i], col["omega1"][i], t[i], ph[i]).product
            for i in range(n)
        ]
        ham = rf_hamiltonian(col["omega_rf"], col["omega0"], col["omega1"], ph)
    elif builder == "rotation":
        closed = [propagator.rotation_matrix(col["u"][i], col["rate"][i] * t[i]) for i in range(n)]
        ham = rotation_hamiltonian(col["u"], col["rate"])
    elif builder == "rest":
        closed = [propagator.rest_propagator(col["omega0"][i], col["k_rest"][i], t[i]).product for i in range(n)]
        ham = rest_hamiltonian(col["omega0"], col["k_rest"])
    elif builder == "general":
        closed = [
            propagator.general_propagator(
                propagator.FieldParams(
                    omega_x=col["omega_x"][i], omega_y=col["omega_y"][i],
                    omega_z=col["omega_z"][i], k_rest=col["k_rest"][i],
                ),
                t[i],
            ).product
            for i in range(n)
        ]
        ham = general_hamiltonian(col["omega_x"], col["omega_y"], col["omega_z"], col["k_rest"])
    elif builder == "matrix_exp":
        h = np.asarray(params["h"], dtype=complex)
        hbar = float(params.get("hbar", 1.0))
        eye = np.eye(h.shape[0], dtype=complex)
        closed = [
            np.stack([multispin.evolve_matrix_exp(h, eye[:, j], t[i], hbar) for j in range(h.shape[0])], axis=1)
            for i in range(n)
        ]
        hs = np.broadcast_to(h / hbar, (n,) + h.shape)
        ham = lambda tt: hs  # noqa: E731
    else:
        raise ValueError(f"unknown builder {builder!r}; expected one of {BUILDERS}")
    return np.array(closed), ham


def _frequency_bound(ham, n) -> np.ndarray:
    h = ham(np.zeros(n))
    return np.max(np.sum(np.abs(h), axis=-1), axis=-1)


def compare_closed_form(builder: str, params: dict, t_grid, steps_per_period: int = 2000) -> ComparisonReport:
    """Max per-entry deviation between a closed form and RK4 over ``t_grid``.

    ``params`` holds the builder's keyword inputs; each value may be a scalar
    (shared) or an array aligned with ``t_grid`` (one case per grid point).
    """
    t = np.atleast_1d(np.asarray(t_grid, dtype=float))
    closed, ham = _closed_and_hamiltonian(builder, params, t)
    dim = closed.shape[-1]
    f = _frequency_bound(ham, len(t))
    # time-dependent drives add the carrier rate to the phase budget
    if builder == "rf":
        f = f + np.abs(np.broadcast_to(np.asarray(params["omega_rf"], dtype=float), f.shape))
    n_steps = max(1, int(math.ceil(float(np.max(f * np.abs(t))) * steps_per_period / (2 * math.pi))))
    oracle = propagate_batch(ham, t, n_steps, dim=dim)
    err = float(np.max(np.abs(oracle - closed)))
    col_norms = np.linalg.norm(oracle, axis=-2)
    drift = float(np.max(np.abs(col_norms - 1.0)))
    return ComparisonReport(builder, len(t), err, drift)


def random_draws(builder: str, n: int, rng: np.random.Generator, max_phase: float = 20.0):
    """Random parameters and times for ``builder``.

    Frequencies are log-uniform in [1e2, 1e9] rad/s, rest constants uniform in
    [0, 1e3] rad/s, and ``t`` is chosen so the fastest rate times ``t`` stays
    below ``max_phase``.
    """
    logu = lambda: 10 ** rng.uniform(2, 9, n)  # noqa: E731
    sign = lambda: rng.choice([-1.0, 1.0], n)  # noqa: E731
    if builder == "static":
        p = {"omega0": sign() * logu()}
        fast = np.abs(p["omega0"])
    elif builder == "rf":
        w0 = sign() * logu()
        detune = rng.choice([0.0, 1.0], n) * sign() * logu()
        p = {"omega0": w0, "omega_rf": w0 - detune, "omega1": logu(), "phase": rng.uniform(-np.pi, np.pi, n)}
        fast = np.abs(w0) + np.abs(p["omega_rf"]) + p["omega1"]
    elif builder == "rotation":
        u = rng.normal(size=(n, 3))
        p = {"u": u / np.linalg.norm(u, axis=1, keepdims=True), "rate": logu()}
        fast = p["rate"]
    elif builder == "rest":
        p = {"omega0": sign() * logu(), "k_rest": rng.uniform(0, 1e3, n)}
        fast = np.abs(p["omega0"]) + p["k_rest"]
    elif builder == "general":
        p = {"omega_x": sign() * logu(), "omega_y": sign() * logu(), "omega_z": sign() * logu(),
             "k_rest": rng.uniform(0, 1e3, n)}
        fast = np.abs(p["omega_x"]) + np.abs(p["omega_y"]) + np.abs(p["omega_z"]) + p["k_rest"]
    else:
        raise ValueError(f"no random draws for builder {builder!r}")
    t = rng.uniform(0.05, 1.0, n) * max_phase / fast
    return p, t
