"""FID synthesis, discrete spectra, peak picking and the canned experiments.

Spectrum convention: bins are ``X[k] / n`` with the analysis kernel
``exp(-2 pi i k j / n)``, so a unit tone ``exp(+2 pi i f t)`` lands with
amplitude 1 at frequency ``+f``. Susceptibility signals rotate as
``exp(-i omega t)`` and therefore appear at *negative* frequencies in the
``"full-complex"`` convention. The ``"negative-frequency-folded"``
convention flips the frequency axis so those lines read as ``+omega / 2 pi``.
No apodization window is applied.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import SPIN_DOWN, SpinorError
from .propagator import rf_propagator
from .suscept import (
    EnsembleSpec,
    chi_ensemble,
    chi_from_state,
    chi_noise_closed_form,
    chi_rf_closed_form,
)

REPORT_SCHEMA = "spinor-report/1"
CONVENTIONS = ("full-complex", "negative-frequency-folded")
DIRECT_DFT_MAX = 4096
PEAK_REL_THRESHOLD = 1e-3


class NyquistViolation(SpinorError, ValueError):
    pass


# --- sources -----------------------------------------------------------------


@dataclass(frozen=True)
class RfSource:
    n: float
    polarization: float
    omega_x: float
    omega0: float

    def __call__(self, t):
        return chi_rf_closed_form(self.n, self.polarization, self.omega_x, self.omega0, t)

    @property
    def max_omega(self) -> float:
        return 2 * abs(self.omega0)


@dataclass(frozen=True)
class NoiseSource:
    n: float
    polarization: float
    k_rest: float
    omega0: float

    def __call__(self, t):
        return chi_noise_closed_form(self.n, self.polarization, self.k_rest, self.omega0, t)

    @property
    def max_omega(self) -> float:
        return 2 * abs(self.omega0)


@dataclass(frozen=True)
class EnsembleSource:
    spec: EnsembleSpec

    def __call__(self, t):
        return chi_ensemble(self.spec, t)

    @property
    def max_omega(self) -> float:
        d = self.spec.derived
        return abs(d.big_omega) + abs(d.delta)


@dataclass(frozen=True)
class SumSource:
    """Weighted sum of sources."""

    parts: tuple

    def __call__(self, t):
        return sum(w * s(t) for w, s in self.parts)

    @property
    def max_omega(self) -> float:
        return max(s.max_omega for _, s in self.parts)


# --- FID / spectrum ----------------------------------------------------------


@dataclass(frozen=True)
class Fid:
    dt: float
    samples: np.ndarray
    t0: float = 0.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        s = np.asarray(self.samples, dtype=complex)
        if s.ndim != 1 or s.shape[0] < 8:
            raise ValueError("an FID needs at least 8 samples")
        object.__setattr__(self, "samples", s)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.samples.shape[0])


@dataclass(frozen=True)
class Spectrum:
    df: float
    bins: np.ndarray
    convention: str = "full-complex"

    @property
    def frequencies(self) -> np.ndarray:
        n = self.bins.shape[0]
        f = np.fft.fftfreq(n, d=1.0 / (n * self.df))
        return -f if self.convention == "negative-frequency-folded" else f

    def bin_of(self, frequency: float) -> int:
        return int(np.argmin(np.abs(self.frequencies - frequency)))


def synthesize_fid(source: Callable, duration: float, n_samples: int, t0: float = 0.0) -> Fid:
    """Sample ``source(t)`` at ``t0 + k * duration / n_samples``, ``k = 0 .. n-1``."""
    if n_samples < 8:
        raise ValueError("n_samples must be >= 8")
    dt = duration / n_samples
    w = getattr(source, "max_omega", None)
    if w is not None and 1.0 / dt <= 2 * (w / (2 * math.pi)):
        raise NyquistViolation(
            f"sample rate {1 / dt:.6g} Hz does not exceed twice {w / (2 * math.pi):.6g} Hz"
        )
    t = t0 + dt * np.arange(n_samples)
    return Fid(dt, np.asarray(source(t), dtype=complex) * np.ones(n_samples), t0)


def dft_direct(x) -> np.ndarray:
    """Unnormalized DFT by explicit summation (O(n^2), row blocks of the kernel)."""
    x = np.asarray(x, dtype=complex)
    n = x.shape[0]
    j = np.arange(n)
    out = np.empty(n, dtype=complex)
    block = 256
    for start in range(0, n, block):
        k = np.arange(start, min(start + block, n))
        # reduce k*j mod n in integers so the phase stays exact for large n
        kern = np.exp(-2j * math.pi * ((k[:, None] * j[None, :]) % n) / n)
        out[start : start + len(k)] = kern @ x
    return out


def spectrum_of(fid: Fid, convention: str = "full-complex", method: str = "auto") -> Spectrum:
    """Normalized DFT of an FID.

    ``method`` is ``"direct"``, ``"fft"`` or ``"auto"`` (direct up to
    :data:`DIRECT_DFT_MAX` samples).
    """
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}")
    n = fid.samples.shape[0]
    if method == "auto":
        method = "direct" if n <= DIRECT_DFT_MAX else "fft"
    if method == "direct":
        x = dft_direct(fid.samples)
    elif method == "fft":
        x = np.fft.fft(fid.samples)
    else:
        raise ValueError(f"unknown method {method!r}")
    return Spectrum(df=1.0 / (n * fid.dt), bins=x / n, convention=convention)


def parseval_residual(fid: Fid, spec: Spectrum) -> float:
    """Relative mismatch between ``mean |x|^2`` and ``sum |bins|^2``."""
    e_t = float(np.mean(np.abs(fid.samples) ** 2))
    e_f = float(np.sum(np.abs(spec.bins) ** 2))
    return abs(e_t - e_f) / max(e_t, 1e-300)


def find_peaks(spec: Spectrum, rel_threshold: float = PEAK_REL_THRESHOLD):
    """Local maxima of ``|bin|`` above ``rel_threshold`` times the global maximum.

    Returns ``(frequency_hz, amplitude)`` pairs sorted by magnitude, largest first.
    """
    mag = np.abs(spec.bins)
    top = float(mag.max()) if mag.size else 0.0
    if top == 0.0:
        return []
    left = np.roll(mag, 1)
    right = np.roll(mag, -1)
    idx = np.nonzero((mag >= left) & (mag >= right) & (mag > rel_threshold * top))[0]
    freqs = spec.frequencies
    peaks = [(float(freqs[i]), complex(spec.bins[i])) for i in idx]
    peaks.sort(key=lambda p: (-abs(p[1]), p[0]))
    return peaks


# --- reports -----------------------------------------------------------------


@dataclass
class ExperimentReport:
    name: str
    passed: bool
    peaks: list = field(default_factory=list)
    tolerances: dict = field(default_factory=dict)
    reason: str = ""
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "name": self.name,
            "passed": self.passed,
            "reason": self.reason,
            "peaks": [
                {"frequency_hz": f, "re": a.real, "im": a.imag, "magnitude": abs(a)} for f, a in self.peaks
            ],
            "tolerances": self.tolerances,
            "details": self.details,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def to_csv(first_column, values, header: str) -> str:
    """Three-column CSV (``header,re,im``), 15 significant digits, LF line endings."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([header, "re", "im"])
    for a, z in zip(np.asarray(first_column, dtype=float), np.asarray(values, dtype=complex)):
        w.writerow([f"{a:.15g}", f"{z.real:.15g}", f"{z.imag:.15g}"])
    return buf.getvalue()


def fid_to_csv(fid: Fid) -> str:
    return to_csv(fid.times, fid.samples, "t")


def spectrum_to_csv(spec: Spectrum) -> str:
    order = np.argsort(spec.frequencies, kind="stable")
    return to_csv(spec.frequencies[order], spec.bins[order], "f")


def fid_from_csv(text: str) -> Fid:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [c.strip() for c in rows[0]] != ["t", "re", "im"]:
        raise ValueError("expected a header 't,re,im'")
    data = np.array([[float(c) for c in r] for r in rows[1:] if r], dtype=float)
    if data.shape[0] < 8:
        raise ValueError("an FID needs at least 8 samples")
    dts = np.diff(data[:, 0])
    dt = float(np.mean(dts))
    if np.max(np.abs(dts - dt)) > 1e-9 * max(abs(dt), 1e-300) + 1e-15 * abs(data[-1, 0]):
        raise ValueError("FID samples are not uniformly spaced")
    return Fid(dt, data[:, 1] + 1j * data[:, 2], float(data[0, 0]))


# --- experiments -------------------------------------------------------------


def _integer_period_grid(f_line: float, bins_per_line: int, n_samples: int):
    """``(duration, n)`` so that ``f_line`` falls exactly on bin ``bins_per_line``."""
    df = f_line / bins_per_line
    return 1.0 / df, n_samples


def _near(peaks, f, df, tol_bins=1.0):
    return [p for p in peaks if abs(p[0] - f) <= tol_bins * df + 1e-9 * abs(f)]


def experiment_low_field(
    omega0: float = 2 * math.pi * 1e5,
    omega_x: float = 2 * math.pi * 1e3,
    n: float = 1.0,
    polarization: float = 1.0,
    n_samples: int = 1024,
    bins_per_line: int = 100,
) -> ExperimentReport:
    """Resonant drive in a weak main field: lines at omega0 and 2 omega0, equal height."""
    tol = {"secondary_rel": 0.01, "peak_bins": 1, "ratio": 1e-9}
    f0 = abs(omega0) / (2 * math.pi)
    duration, n_samples = _integer_period_grid(f0, bins_per_line, n_samples)
    fid = synthesize_fid(RfSource(n, polarization, omega_x, omega0), duration, n_samples)
    spec = spectrum_of(fid, "negative-frequency-folded")
    peaks = find_peaks(spec)
    sign = 1.0 if omega0 > 0 else -1.0
    details = {"omega0": omega0, "omega_x": omega_x, "n_samples": n_samples, "df_hz": spec.df}
    if not peaks:
        return ExperimentReport("low-field", False, [], tol, "no-signal", details)
    main = _near(peaks, sign * f0, spec.df)
    double = _near(peaks, sign * 2 * f0, spec.df)
    others = [p for p in peaks if p not in main and p not in double]
    big = abs(peaks[0][1])
    ratio = abs(main[0][1]) / abs(double[0][1]) if main and double else float("nan")
    details["line_ratio"] = ratio
    details["secondary_max_rel"] = max((abs(p[1]) for p in others), default=0.0) / big
    ok = (
        len(main) == 1
        and len(double) == 1
        and details["secondary_max_rel"] < tol["secondary_rel"]
        and abs(ratio - 1.0) <= tol["ratio"]
    )
    reason = "" if ok else "expected exactly two equal lines at omega0 and 2 omega0"
    return ExperimentReport("low-field", ok, main + double + others, tol, reason, details)


def pulse_profile(omega0: float, omega1: float, t_grid) -> np.ndarray:
    """``|conj(x1) x2|`` after a resonant pulse of each duration, starting from ``|->``."""
    out = np.empty(len(t_grid))
    for i, tp in enumerate(t_grid):
        psi = rf_propagator(omega0, omega0, omega1, float(tp)).apply(SPIN_DOWN)
        out[i] = abs(chi_from_state(psi))
    return out


def experiment_pulse_calibration(
    omega0: float = 2 * math.pi * 1e5, omega1: float = 2 * math.pi * 1e3, t_grid=None
) -> ExperimentReport:
    """Sweep the resonant pulse length; the transverse term peaks at ``omega1 t = pi/2``."""
    if t_grid is None:
        t_grid = np.linspace(0.0, 2 * math.pi / omega1, 1000)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid[-1] * omega1 < 2 * math.pi * (1 - 1e-12):
        raise ValueError("t_grid must span at least one full nutation period 2 pi / omega1")
    prof = pulse_profile(omega0, omega1, t_grid)
    # first local maximum; the profile has a second equal one at 3 pi / 2
    i = next(
        (k for k in range(1, len(prof) - 1) if prof[k] >= prof[k - 1] and prof[k] > prof[k + 1]),
        int(np.argmax(prof)),
    )
    step = float(np.max(np.diff(t_grid)))
    t_peak = float(t_grid[i])
    expect = math.pi / (2 * omega1)
    tol = {"location_steps": 1, "profile_abs": 1e-10}
    profile_err = float(np.max(np.abs(prof - np.abs(np.sin(omega1 * t_grid)) / 2)))
    ok = abs(t_peak - expect) <= step and profile_err < tol["profile_abs"]
    details = {
        "t_peak": t_peak,
        "t_pi_over_2": expect,
        "grid_step": step,
        "peak_value": float(prof[i]),
        "profile_max_error": profile_err,
    }
    reason = "" if ok else "maximum not at the pi/2 pulse"
    return ExperimentReport("pulse-calibration", ok, [], tol, reason, details)


def experiment_ethanol_triplet(
    omega_z: float = 2 * math.pi * 5e5,
    epsilon: float = 2 * math.pi * 10,
    n: float = 1.0,
    polarization: float = 1.0,
    omega_x: float = 2 * math.pi * 1e3,
    weights=(1.0, 2.0, 1.0),
) -> ExperimentReport:
    """Methyl protons seeing ``omega_z - eps``, ``omega_z``, ``omega_z + eps`` with weights (1, 2, 1)."""
    if abs(epsilon) >= abs(omega_z) / 10:
        raise ValueError("epsilon must be below omega_z / 10")
    tol = {"ratio_rel": 0.02, "peak_bins": 1}
    fz = abs(omega_z) / (2 * math.pi)
    fe = abs(epsilon) / (2 * math.pi)
    # lines sit 4 bins apart so each stays a separate local maximum
    df = fe / 4 if fe > 0 else fz / 256
    f_max = 2 * (fz + fe)
    n_samples = 1 << max(3, math.ceil(math.log2(2.2 * f_max / df)))
    lines = (omega_z - epsilon, omega_z, omega_z + epsilon)
    src = SumSource(tuple((w, RfSource(n, polarization, omega_x, wl)) for w, wl in zip(weights, lines)))
    fid = synthesize_fid(src, 1.0 / df, n_samples)
    spec = spectrum_of(fid, "negative-frequency-folded")
    peaks = find_peaks(spec)
    sign = 1.0 if omega_z > 0 else -1.0
    group = sorted(
        (p for p in peaks if abs(p[0] - sign * fz) <= 2 * fe + spec.df), key=lambda p: p[0] * sign
    )
    details = {"df_hz": spec.df, "n_samples": n_samples, "weights": list(weights)}
    if not group:
        return ExperimentReport("ethanol", False, peaks, tol, "no-signal", details)
    amps = [abs(p[1]) for p in group]
    details["relative_amplitudes"] = [a / amps[0] for a in amps]
    if len(group) != 3:
        reason = "collapsed to a single line" if len(group) == 1 else f"found {len(group)} lines"
        return ExperimentReport("ethanol", False, peaks, tol, reason, details)
    expected = (1.0, 2.0, 1.0)
    ok = all(abs(a / amps[0] - e) <= tol["ratio_rel"] * e for a, e in zip(amps, expected))
    reason = "" if ok else "amplitudes differ from (1, 2, 1)"
    return ExperimentReport("ethanol", ok, peaks, tol, reason, details)


def experiment_spin_noise_sign(
    omega0: float = 2 * math.pi * 1e5,
    k_rest: float | None = None,
    omega_x_ref: float = 2 * math.pi * 1e3,
    n: float = 1.0,
    polarization: float = 1.0,
    k_sign: float = -1.0,
    n_samples: int = 1024,
    bins_per_line: int = 100,
) -> ExperimentReport:
    """Compare a no-RF (rest-constant) run with a pi/2-pulse reference run.

    The rest constant used is ``k_sign * |k_rest|``; the default magnitude
    makes ``|K| / (sqrt(2) omega_x_ref) = 1e-8``.
    """
    if k_rest is None:
        k_rest = 1e-8 * math.sqrt(2) * omega_x_ref
    k = math.copysign(abs(k_rest), k_sign)
    tol = {"ratio_rel": 1e-9}
    f0 = abs(omega0) / (2 * math.pi)
    duration, n_samples = _integer_period_grid(f0, bins_per_line, n_samples)
    sign = 1.0 if omega0 > 0 else -1.0
    rf_spec = spectrum_of(synthesize_fid(RfSource(n, polarization, omega_x_ref, omega0), duration, n_samples),
                          "negative-frequency-folded")
    nz_spec = spectrum_of(synthesize_fid(NoiseSource(n, polarization, k, omega0), duration, n_samples),
                          "negative-frequency-folded")
    b = rf_spec.bin_of(sign * f0)
    rf_peak, nz_peak = complex(rf_spec.bins[b]), complex(nz_spec.bins[b])
    expected_ratio = abs(k) / (math.sqrt(2) * abs(omega_x_ref))
    ratio = abs(nz_peak) / abs(rf_peak) if rf_peak else float("nan")
    flipped = rf_peak.real * nz_peak.real < 0
    ratio_ok = abs(ratio - expected_ratio) <= tol["ratio_rel"] * expected_ratio
    details = {
        "k_rest": k,
        "rf_peak": [rf_peak.real, rf_peak.imag],
        "noise_peak": [nz_peak.real, nz_peak.imag],
        "amplitude_ratio": ratio,
        "expected_ratio": expected_ratio,
        "sign_flipped": flipped,
    }
    ok = flipped and ratio_ok
    reason = "" if ok else ("no sign inversion" if not flipped else "amplitude ratio mismatch")
    peaks = [(float(rf_spec.frequencies[b]), nz_peak)]
    return ExperimentReport("spin-noise", ok, peaks, tol, reason, details)


EXPERIMENTS = {
    "low-field": experiment_low_field,
    "pulse-calibration": experiment_pulse_calibration,
    "ethanol": experiment_ethanol_triplet,
    "spin-noise": experiment_spin_noise_sign,
}
