"""Pulse-sequence language: parser, pretty-printer, compiler and executor.

One statement per line, ``#`` starts a comment::

    set gamma 2.675e8
    field b0 7.0 T
    rest k -6e-8 rad/s
    domain left spins 2 field 0 0 7.0 T at -0.01 0 0 m
    ensemble n 1e6 polarization boltzmann 300 K seed 42 phases montecarlo 100000
    pulse rf amp 1e-3 T carrier resonant dur 2.5e-6 s phase 0 on left
    delay 1e-3 s
    gradient x 6 mT/m dur 1e-3 s
    acquire n 4096 dt 1e-6 s

Quantities keep their literal value and unit in the AST and are converted
to SI / rad s^-1 when the program is compiled. Field-like quantities given
in ``Hz`` or ``rad/s`` are taken as angular frequencies directly; in tesla
they go through ``omega = -gamma B``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .core import HBAR, MAX_SPINS, PROTON_GAMMA, PhysicalConstants, SpinorError
from .propagator import (
    FieldParams,
    general_propagator,
    rest_propagator,
    rf_propagator,
    static_propagator,
)
from .spectra import ExperimentReport, Fid, find_peaks, spectrum_of
from .suscept import boltzmann_polarization, phase_average

TIME_UNITS = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9}
TESLA_UNITS = {"T": 1.0, "mT": 1e-3, "uT": 1e-6}
FREQ_UNITS = {"rad/s": 1.0, "Hz": 2 * math.pi}
GRADIENT_UNITS = {"T/m": 1.0, "mT/m": 1e-3}
LENGTH_UNITS = {"m": 1.0, "cm": 1e-2, "mm": 1e-3}
TEMPERATURE_UNITS = {"K": 1.0}
ANGLE_UNITS = {"rad": 1.0, "deg": math.pi / 180}
FIELD_UNITS = {**TESLA_UNITS, **FREQ_UNITS}
AXES = ("x", "y", "z")


# --- diagnostics ---------------------------------------------------------------


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    line: int
    column: int
    message: str
    code: str

    def to_dict(self) -> dict:
        return {
            "severity": self.severity,
            "line": self.line,
            "column": self.column,
            "message": self.message,
            "code": self.code,
        }

    def format(self, filename: str = "<sequence>") -> str:
        return f"{filename}:{self.line}:{self.column}: {self.severity}: {self.message} [{self.code}]"


class SequenceError(SpinorError):
    def __init__(self, diagnostic: Diagnostic):
        super().__init__(diagnostic.format())
        self.diagnostic = diagnostic


class SequenceSyntaxError(SequenceError, SyntaxError):
    pass


class UnknownUnit(SequenceError, ValueError):
    pass


class DuplicateAcquire(SequenceError, ValueError):
    pass


class UndeclaredDomain(SequenceError, ValueError):
    pass


class UnsupportedCombination(SequenceError, ValueError):
    pass


_ERROR_CLASSES = {
    "unknown-unit": UnknownUnit,
    "duplicate-acquire": DuplicateAcquire,
    "undeclared-domain": UndeclaredDomain,
    "unsupported-combination": UnsupportedCombination,
}


def error_for(d: Diagnostic) -> SequenceError:
    return _ERROR_CLASSES.get(d.code, SequenceSyntaxError)(d)


# --- AST -------------------------------------------------------------------------


@dataclass(frozen=True)
class Quantity:
    value: float
    unit: str

    def si(self, table: dict) -> float:
        return self.value * table[self.unit]

    def to_json(self):
        return [self.value, self.unit]


@dataclass(frozen=True)
class DomainDecl:
    name: str
    spins: int
    field: tuple
    field_unit: str
    position: tuple | None = None
    position_unit: str | None = None
    line: int = field(default=0, compare=False)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "spins": self.spins,
            "field": [list(self.field), self.field_unit],
            "position": None if self.position is None else [list(self.position), self.position_unit],
        }


@dataclass(frozen=True)
class EnsembleDecl:
    n: float
    seed: int
    polarization: float | None = None
    temperature: Quantity | None = None
    phases: str = "analytic"
    draws: int | None = None
    line: int = field(default=0, compare=False)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "seed": self.seed,
            "polarization": self.polarization,
            "temperature": None if self.temperature is None else self.temperature.to_json(),
            "phases": self.phases,
            "draws": self.draws,
        }


@dataclass(frozen=True)
class Event:
    """``kind`` is one of ``rf_pulse``, ``delay``, ``gradient``, ``acquire``."""

    kind: str
    params: tuple
    start: float
    duration: float
    line: int = field(default=0, compare=False)

    @property
    def p(self) -> dict:
        return dict(self.params)

    def to_dict(self) -> dict:
        out = {}
        for k, v in self.params:
            out[k] = v.to_json() if isinstance(v, Quantity) else v
        return {"kind": self.kind, "params": out, "start": self.start, "duration": self.duration}


@dataclass(frozen=True)
class SequenceProgram:
    gamma: float | None = None
    b0: Quantity | None = None
    rest_k: Quantity | None = None
    domains: tuple = ()
    ensemble: EnsembleDecl | None = None
    events: tuple = ()

    @property
    def constants(self) -> PhysicalConstants:
        return PhysicalConstants(gamma=PROTON_GAMMA if self.gamma is None else self.gamma, hbar=HBAR)

    @property
    def duration(self) -> float:
        return self.events[-1].start + self.events[-1].duration if self.events else 0.0

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "b0": None if self.b0 is None else self.b0.to_json(),
            "rest_k": None if self.rest_k is None else self.rest_k.to_json(),
            "domains": [d.to_dict() for d in self.domains],
            "ensemble": None if self.ensemble is None else self.ensemble.to_dict(),
            "events": [e.to_dict() for e in self.events],
        }


@dataclass(frozen=True)
class ParseResult:
    program: SequenceProgram | None
    diagnostics: tuple

    @property
    def errors(self) -> list:
        return [d for d in self.diagnostics if d.severity == "error"]

    @property
    def ok(self) -> bool:
        return not self.errors

    def unwrap(self) -> SequenceProgram:
        if self.errors:
            raise error_for(self.errors[0])
        return self.program


# --- parser ----------------------------------------------------------------------


class _Fail(Exception):
    def __init__(self, column: int, message: str, code: str = "syntax"):
        self.column, self.message, self.code = column, message, code


class _Cursor:
    def __init__(self, tokens, line_len):
        self.toks = tokens
        self.i = 0
        self.end_col = line_len + 1

    def col(self) -> int:
        return self.toks[self.i][0] if self.i < len(self.toks) else self.end_col

    def peek(self):
        return self.toks[self.i][1] if self.i < len(self.toks) else None

    def next(self, what: str) -> str:
        if self.i >= len(self.toks):
            raise _Fail(self.end_col, f"expected {what}, found end of line")
        tok = self.toks[self.i][1]
        self.i += 1
        return tok

    def keyword(self, kw: str) -> None:
        c = self.col()
        tok = self.next(f"'{kw}'")
        if tok != kw:
            raise _Fail(c, f"expected '{kw}', found '{tok}'")

    def optional(self, kw: str) -> bool:
        if self.peek() == kw:
            self.i += 1
            return True
        return False

    def number(self, what: str = "a number") -> float:
        c = self.col()
        tok = self.next(what)
        try:
            v = float(tok)
        except ValueError:
            raise _Fail(c, f"expected {what}, found '{tok}'") from None
        if not math.isfinite(v):
            raise _Fail(c, f"{what} must be finite", "invalid-value")
        return v

    def integer(self, what: str) -> int:
        c = self.col()
        tok = self.next(what)
        if not re.fullmatch(r"[0-9]+", tok):
            raise _Fail(c, f"expected {what}, found '{tok}'")
        return int(tok)

    def unit(self, table: dict, what: str) -> str:
        c = self.col()
        tok = self.next(f"a {what} unit")
        if tok not in table:
            raise _Fail(c, f"unknown {what} unit '{tok}' (expected one of {', '.join(table)})", "unknown-unit")
        return tok

    def name(self) -> str:
        c = self.col()
        tok = self.next("a name")
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_-]*", tok):
            raise _Fail(c, f"invalid name '{tok}'")
        return tok

    def done(self) -> None:
        if self.i < len(self.toks):
            raise _Fail(self.toks[self.i][0], f"unexpected '{self.toks[self.i][1]}'")


def _positive(col: int, v: float, what: str) -> None:
    if not v > 0:
        raise _Fail(col, f"{what} must be > 0", "invalid-value")


class _Parser:
    def __init__(self):
        self.diags: list[Diagnostic] = []
        self.gamma = None
        self.b0 = None
        self.rest_k = None
        self.domains: list[DomainDecl] = []
        self.ensemble = None
        self.events: list[Event] = []
        self.clock = 0.0
        self.acquire_line = None
        self.seen = {}

    def error(self, line, col, msg, code="syntax"):
        self.diags.append(Diagnostic("error", line, col, msg, code))

    def once(self, key: str, line: int, col: int) -> None:
        if key in self.seen:
            raise _Fail(col, f"'{key}' already declared on line {self.seen[key]}", "duplicate-declaration")
        self.seen[key] = line

    def add_event(self, kind, params, duration, line, col):
        if self.acquire_line is not None:
            raise _Fail(col, f"event after the acquisition on line {self.acquire_line}", "event-after-acquire")
        self.events.append(Event(kind, tuple(params), self.clock, duration, line))
        self.clock += duration

    def target(self, cur: _Cursor, line: int):
        if not cur.optional("on"):
            return None
        c = cur.col()
        name = cur.name()
        if name not in {d.name for d in self.domains}:
            raise _Fail(c, f"domain '{name}' is not declared", "undeclared-domain")
        return name

    # statements ---------------------------------------------------------------

    def st_set(self, cur, line, col):
        c = cur.col()
        what = cur.next("'gamma'")
        if what != "gamma":
            raise _Fail(c, f"unknown setting '{what}'")
        vc = cur.col()
        v = cur.number()
        if v == 0:
            raise _Fail(vc, "gamma must be nonzero", "invalid-value")
        cur.done()
        self.once("set gamma", line, col)
        self.gamma = v

    def st_field(self, cur, line, col):
        cur.keyword("b0")
        v = cur.number()
        u = cur.unit(FIELD_UNITS, "field")
        cur.done()
        self.once("field b0", line, col)
        self.b0 = Quantity(v, u)

    def st_rest(self, cur, line, col):
        cur.keyword("k")
        v = cur.number()
        u = cur.unit(FREQ_UNITS, "frequency")
        cur.done()
        self.once("rest k", line, col)
        self.rest_k = Quantity(v, u)

    def st_domain(self, cur, line, col):
        nc = cur.col()
        name = cur.name()
        cur.keyword("spins")
        sc = cur.col()
        spins = cur.integer("a spin count")
        if spins < 1:
            raise _Fail(sc, "a domain needs at least one spin", "invalid-value")
        cur.keyword("field")
        f = tuple(cur.number() for _ in range(3))
        fu = cur.unit(FIELD_UNITS, "field")
        pos, pu = None, None
        if cur.optional("at"):
            pos = tuple(cur.number() for _ in range(3))
            pu = cur.unit(LENGTH_UNITS, "length")
        cur.done()
        if any(d.name == name for d in self.domains):
            raise _Fail(nc, f"domain '{name}' already declared", "duplicate-declaration")
        if sum(d.spins for d in self.domains) + spins > MAX_SPINS:
            raise _Fail(sc, f"more than {MAX_SPINS} spins in total", "capacity")
        if self.events:
            raise _Fail(col, "domains must be declared before the first event", "declaration-order")
        self.domains.append(DomainDecl(name, spins, f, fu, pos, pu, line))

    def st_ensemble(self, cur, line, col):
        cur.keyword("n")
        nc = cur.col()
        n = cur.number("a spin count")
        if not n >= 1:
            raise _Fail(nc, "ensemble size must be >= 1", "invalid-value")
        cur.keyword("polarization")
        pol, temp = None, None
        if cur.optional("boltzmann"):
            tc = cur.col()
            tv = cur.number("a temperature")
            _positive(tc, tv, "temperature")
            temp = Quantity(tv, cur.unit(TEMPERATURE_UNITS, "temperature"))
        else:
            pc = cur.col()
            pol = cur.number("a polarization")
            if abs(pol) > 1:
                raise _Fail(pc, "|polarization| must be <= 1", "invalid-value")
        cur.keyword("seed")
        seed = cur.integer("a seed")
        phases, draws = "analytic", None
        if cur.optional("phases"):
            pc = cur.col()
            phases = cur.next("'analytic' or 'montecarlo'")
            if phases == "montecarlo":
                dc = cur.col()
                draws = cur.integer("a draw count")
                if draws < 1:
                    raise _Fail(dc, "draw count must be >= 1", "invalid-value")
            elif phases != "analytic":
                raise _Fail(pc, f"expected 'analytic' or 'montecarlo', found '{phases}'")
        cur.done()
        self.once("ensemble", line, col)
        self.ensemble = EnsembleDecl(n, seed, pol, temp, phases, draws, line)

    def duration(self, cur, what="duration"):
        c = cur.col()
        v = cur.number(f"a {what}")
        q = Quantity(v, cur.unit(TIME_UNITS, "time"))
        _positive(c, v, what)
        return q

    def st_pulse(self, cur, line, col):
        cur.keyword("rf")
        cur.keyword("amp")
        ac = cur.col()
        av = cur.number("an amplitude")
        amp = Quantity(av, cur.unit(FIELD_UNITS, "field"))
        _positive(ac, av, "amplitude")
        cur.keyword("carrier")
        if cur.optional("resonant"):
            carrier = "resonant"
        else:
            carrier = Quantity(cur.number("a carrier frequency or 'resonant'"), cur.unit(FREQ_UNITS, "frequency"))
        cur.keyword("dur")
        dur = self.duration(cur)
        phase = Quantity(0.0, "rad")
        if cur.optional("phase"):
            v = cur.number("a phase")
            phase = Quantity(v, cur.next("") if cur.peek() in ANGLE_UNITS else "rad")
        on = self.target(cur, line)
        cur.done()
        params = [("amp", amp), ("carrier", carrier), ("dur", dur), ("phase", phase), ("on", on)]
        self.add_event("rf_pulse", params, dur.si(TIME_UNITS), line, col)

    def st_delay(self, cur, line, col):
        dur = self.duration(cur)
        cur.done()
        self.add_event("delay", [("dur", dur)], dur.si(TIME_UNITS), line, col)

    def st_gradient(self, cur, line, col):
        c = cur.col()
        axis = cur.next("an axis")
        if axis not in AXES:
            raise _Fail(c, f"expected an axis x, y or z, found '{axis}'")
        g = Quantity(cur.number("a gradient strength"), cur.unit(GRADIENT_UNITS, "gradient"))
        cur.keyword("dur")
        dur = self.duration(cur)
        cur.done()
        self.add_event("gradient", [("axis", axis), ("strength", g), ("dur", dur)], dur.si(TIME_UNITS), line, col)

    def st_acquire(self, cur, line, col):
        cur.keyword("n")
        nc = cur.col()
        n = cur.integer("a sample count")
        if n < 8:
            raise _Fail(nc, "an acquisition needs at least 8 samples", "invalid-value")
        cur.keyword("dt")
        dt = self.duration(cur, "sampling interval")
        on = self.target(cur, line)
        cur.done()
        if self.acquire_line is not None:
            raise _Fail(col, f"acquisition already defined on line {self.acquire_line}", "duplicate-acquire")
        self.add_event("acquire", [("n", n), ("dt", dt), ("on", on)], n * dt.si(TIME_UNITS), line, col)
        self.acquire_line = line

    STATEMENTS = {
        "set": st_set,
        "field": st_field,
        "rest": st_rest,
        "domain": st_domain,
        "ensemble": st_ensemble,
        "pulse": st_pulse,
        "delay": st_delay,
        "gradient": st_gradient,
        "acquire": st_acquire,
    }

    def line(self, lineno: int, text: str) -> None:
        body = text.split("#", 1)[0]
        toks = [(m.start() + 1, m.group()) for m in re.finditer(r"\S+", body)]
        if not toks:
            return
        cur = _Cursor(toks, len(body.rstrip()))
        col, head = cur.col(), cur.next("a statement")
        handler = self.STATEMENTS.get(head)
        try:
            if handler is None:
                raise _Fail(col, f"unknown statement '{head}'")
            handler(self, cur, lineno, col)
        except _Fail as f:
            self.error(lineno, f.column, f.message, f.code)


def parse_sequence(source: str) -> ParseResult:
    """Parse a sequence file. Never raises; problems come back as diagnostics."""
    p = _Parser()
    lines = source.split("\n")
    for i, text in enumerate(lines, start=1):
        p.line(i, text.rstrip("\r"))
    if p.acquire_line is None:
        last = max(1, len(source.splitlines()))
        p.diags.append(Diagnostic("warning", last, 1, "program has no acquire statement", "no-acquire"))
    prog = SequenceProgram(p.gamma, p.b0, p.rest_k, tuple(p.domains), p.ensemble, tuple(p.events))
    diags = tuple(sorted(p.diags, key=lambda d: (d.line, d.column, d.severity)))
    return ParseResult(None if any(d.severity == "error" for d in diags) else prog, diags)


# --- pretty-printer --------------------------------------------------------------


def _num(v) -> str:
    return str(v) if isinstance(v, int) else repr(float(v))


def _q(q: Quantity) -> str:
    return f"{_num(q.value)} {q.unit}"


def format_program(p: SequenceProgram) -> str:
    """Canonical source text; ``parse_sequence(format_program(p))`` gives back ``p``."""
    out = []
    if p.gamma is not None:
        out.append(f"set gamma {_num(p.gamma)}")
    if p.b0 is not None:
        out.append(f"field b0 {_q(p.b0)}")
    if p.rest_k is not None:
        out.append(f"rest k {_q(p.rest_k)}")
    for d in p.domains:
        s = f"domain {d.name} spins {d.spins} field {' '.join(_num(x) for x in d.field)} {d.field_unit}"
        if d.position is not None:
            s += f" at {' '.join(_num(x) for x in d.position)} {d.position_unit}"
        out.append(s)
    e = p.ensemble
    if e is not None:
        pol = f"boltzmann {_q(e.temperature)}" if e.temperature is not None else _num(e.polarization)
        s = f"ensemble n {_num(e.n)} polarization {pol} seed {e.seed}"
        s += f" phases montecarlo {e.draws}" if e.phases == "montecarlo" else " phases analytic"
        out.append(s)
    for ev in p.events:
        q = ev.p
        if ev.kind == "rf_pulse":
            car = "resonant" if q["carrier"] == "resonant" else _q(q["carrier"])
            s = f"pulse rf amp {_q(q['amp'])} carrier {car} dur {_q(q['dur'])} phase {_q(q['phase'])}"
        elif ev.kind == "delay":
            s = f"delay {_q(q['dur'])}"
        elif ev.kind == "gradient":
            s = f"gradient {q['axis']} {_q(q['strength'])} dur {_q(q['dur'])}"
        else:
            s = f"acquire n {q['n']} dt {_q(q['dt'])}"
        if q.get("on"):
            s += f" on {q['on']}"
        out.append(s)
    return "\n".join(out) + "\n"


# --- compiler --------------------------------------------------------------------


@dataclass(frozen=True)
class ResolvedDomain:
    name: str
    spins: int
    omega: tuple  # (omega_x, omega_y, omega_z), rad/s
    position: tuple  # metres


@dataclass(frozen=True)
class Segment:
    """One compiled event. ``kind`` names the builder used to evolve it."""

    kind: str
    start: float
    duration: float
    inputs: dict
    event_index: int


@dataclass(frozen=True)
class CompiledProgram:
    program: SequenceProgram
    constants: PhysicalConstants
    domains: tuple
    k_rest: float
    omega0: float
    segments: tuple

    @property
    def duration(self) -> float:
        return sum(s.duration for s in self.segments)

    @property
    def acquire(self) -> Segment | None:
        return next((s for s in self.segments if s.kind == "acquire"), None)


def _field_omega(values, unit: str, gamma: float):
    if unit in TESLA_UNITS:
        return tuple(-gamma * v * TESLA_UNITS[unit] for v in values)
    return tuple(v * FREQ_UNITS[unit] for v in values)


def _unsupported(program: SequenceProgram, ev: Event, msg: str):
    return UnsupportedCombination(Diagnostic("error", ev.line, 1, msg, "unsupported-combination"))


def _free_kind(domains, k: float) -> str:
    if any(d.omega[0] or d.omega[1] for d in domains):
        return "general"
    return "rest" if k else "static"


def compile_sequence(program: SequenceProgram) -> CompiledProgram:
    """Map every event onto exactly one segment.

    delay            -> ``static`` / ``rest`` / ``general`` free evolution
    rf_pulse         -> ``rf``, or ``general`` in the carrier frame when K is declared
    gradient         -> ``gradient`` with per-domain omega_Z offsets
    acquire          -> ``acquire`` sampling window (free evolution while sampling)
    """
    c = program.constants
    g = c.gamma
    k = 0.0 if program.rest_k is None else program.rest_k.si(FREQ_UNITS)
    if program.domains:
        domains = tuple(
            ResolvedDomain(
                d.name,
                d.spins,
                _field_omega(d.field, d.field_unit, g),
                (0.0, 0.0, 0.0) if d.position is None else tuple(x * LENGTH_UNITS[d.position_unit] for x in d.position),
            )
            for d in program.domains
        )
    else:
        b0 = (0.0,) if program.b0 is None else _field_omega((program.b0.value,), program.b0.unit, g)
        domains = (ResolvedDomain("main", 1, (0.0, 0.0, b0[0]), (0.0, 0.0, 0.0)),)
    if program.b0 is not None:
        omega0 = _field_omega((program.b0.value,), program.b0.unit, g)[0]
    else:
        omega0 = domains[0].omega[2]
    by_name = {d.name: d for d in domains}

    segs = []
    for i, ev in enumerate(program.events):
        q = ev.p
        if ev.kind == "delay":
            segs.append(Segment(_free_kind(domains, k), ev.start, ev.duration, {}, i))
        elif ev.kind == "rf_pulse":
            targets = (q["on"],) if q["on"] else tuple(d.name for d in domains)
            if any(by_name[t].omega[0] or by_name[t].omega[1] for t in targets):
                raise _unsupported(program, ev, "RF pulse on a domain with a transverse static field")
            if q["carrier"] == "resonant":
                carrier = by_name[q["on"]].omega[2] if q["on"] else omega0
                if carrier == 0:
                    raise _unsupported(program, ev, "resonant carrier with zero main field")
            else:
                carrier = q["carrier"].si(FREQ_UNITS)
            amp = q["amp"]
            omega1 = abs(g) * amp.si(TESLA_UNITS) if amp.unit in TESLA_UNITS else amp.si(FREQ_UNITS)
            inputs = {
                "omega_rf": carrier,
                "omega1": omega1,
                "phase": q["phase"].si(ANGLE_UNITS),
                "targets": targets,
            }
            segs.append(Segment("general" if k else "rf", ev.start, ev.duration, inputs, i))
        elif ev.kind == "gradient":
            axis = AXES.index(q["axis"])
            gm = q["strength"].si(GRADIENT_UNITS)
            offsets = {d.name: -g * gm * d.position[axis] for d in domains}
            segs.append(Segment("gradient", ev.start, ev.duration, {"axis": q["axis"], "offsets": offsets}, i))
        else:
            dt = q["dt"].si(TIME_UNITS)
            targets = (q["on"],) if q["on"] else tuple(d.name for d in domains)
            segs.append(Segment("acquire", ev.start, ev.duration, {"n": q["n"], "dt": dt, "targets": targets}, i))
    return CompiledProgram(program, c, domains, k, omega0, tuple(segs))


# --- executor --------------------------------------------------------------------


def _free_unitary(d: ResolvedDomain, k: float, t: float, dz: float = 0.0) -> np.ndarray:
    wx, wy, wz = d.omega
    wz = wz + dz
    if wx == 0 and wy == 0:
        if k == 0:
            return static_propagator(wz, t)
        return rest_propagator(wz, k, t).product
    return general_propagator(FieldParams(omega_x=wx, omega_y=wy, omega_z=wz, k_rest=k), t).product


def _pulse_unitary(d: ResolvedDomain, k: float, s: Segment) -> np.ndarray:
    w, w1, ph = s.inputs["omega_rf"], s.inputs["omega1"], s.inputs["phase"]
    if k == 0:
        return rf_propagator(w, d.omega[2], w1, s.duration, ph).product
    # carrier frame: static drive plus rest constant, then back to the lab frame
    p = FieldParams(omega_x=w1 * math.cos(ph), omega_y=w1 * math.sin(ph), omega_z=d.omega[2] - w, k_rest=k)
    frame = static_propagator(w, s.duration)
    return frame @ general_propagator(p, s.duration).product


def _sample_coherence(d: ResolvedDomain, k: float, rho: np.ndarray, times: np.ndarray) -> np.ndarray:
    """``rho_01(t)`` under free evolution, vectorized over ``times``."""
    wx, wy, wz = d.omega
    ax = np.array([wx + k, wy, wz])
    delta = float(np.linalg.norm(ax))
    if delta == 0:
        return np.full(times.shape, rho[0, 1])
    n = ax / delta
    c = np.cos(delta * times / 2)
    s = np.sin(delta * times / 2)
    u = np.empty(times.shape + (2, 2), dtype=complex)
    u[:, 0, 0] = c - 1j * n[2] * s
    u[:, 0, 1] = (-1j * n[0] - n[1]) * s
    u[:, 1, 0] = (-1j * n[0] + n[1]) * s
    u[:, 1, 1] = c + 1j * n[2] * s
    r = u @ rho @ np.conj(np.swapaxes(u, -1, -2))
    return r[:, 0, 1]


@dataclass(frozen=True)
class RunResult:
    fid: Fid
    report: ExperimentReport
    compiled: CompiledProgram


def _initial_rho(compiled: CompiledProgram, d: ResolvedDomain, seed: int) -> np.ndarray:
    e = compiled.program.ensemble
    if e is None:
        pol = 1.0
    elif e.temperature is not None:
        pol = boltzmann_polarization(e.temperature.si(TEMPERATURE_UNITS), d.omega[2] or compiled.omega0,
                                     compiled.constants)
    else:
        pol = e.polarization
    p2, p1 = (1 + pol) / 2, (1 - pol) / 2
    coh = 0j
    if e is not None and e.phases == "montecarlo":
        coh = math.sqrt(p1 * p2) * phase_average(seed, e.draws).mean
    return np.array([[p2, coh], [np.conj(coh), p1]], dtype=complex)


def run_program(program: SequenceProgram, seed: int | None = None) -> RunResult:
    """Evolve the phase-averaged one-spin density matrix of every domain and sample ``rho_01``.

    ``rho_01 = <x2 conj(x1)>`` is the per-spin susceptibility in units of
    ``gamma hbar``. The FID is the spin-weighted mean over the acquired
    domains. ``seed`` overrides the ensemble seed.
    """
    compiled = compile_sequence(program)
    acq = compiled.acquire
    if acq is None:
        raise SequenceSyntaxError(Diagnostic("error", 1, 1, "program has no acquire statement", "no-acquire"))
    e = program.ensemble
    seed = seed if seed is not None else (e.seed if e is not None else 0)
    k = compiled.k_rest
    rhos = {d.name: _initial_rho(compiled, d, seed) for d in compiled.domains}
    by_name = {d.name: d for d in compiled.domains}
    for s in compiled.segments:
        if s.kind == "acquire":
            break
        for d in compiled.domains:
            if s.kind == "gradient":
                u = _free_unitary(d, k, s.duration, s.inputs["offsets"][d.name])
            elif s.kind in ("rf", "general") and "omega_rf" in s.inputs:
                u = _pulse_unitary(d, k, s) if d.name in s.inputs["targets"] else _free_unitary(d, k, s.duration)
            else:
                u = _free_unitary(d, k, s.duration)
            rhos[d.name] = u @ rhos[d.name] @ u.conj().T
    n, dt = acq.inputs["n"], acq.inputs["dt"]
    times = dt * np.arange(n)
    targets = [by_name[t] for t in acq.inputs["targets"]]
    total = sum(d.spins for d in targets)
    signal = sum(d.spins / total * _sample_coherence(d, k, rhos[d.name], times) for d in targets)
    fid = Fid(dt, signal, acq.start)
    peaks = find_peaks(spectrum_of(fid, "negative-frequency-folded"))[:8]
    details = {
        "duration_s": compiled.duration,
        "acquire_start_s": acq.start,
        "n_samples": n,
        "dt_s": dt,
        "seed": seed,
        "gamma": compiled.constants.gamma,
        "gamma_hbar": compiled.constants.gamma_hbar,
        "k_rest": k,
        "omega0": compiled.omega0,
        "normalization": "mean",
        "ensemble_n": None if e is None else e.n,
        "domains": [{"name": d.name, "spins": d.spins, "omega": list(d.omega)} for d in compiled.domains],
        "segments": [{"kind": s.kind, "start_s": s.start, "duration_s": s.duration} for s in compiled.segments],
    }
    return RunResult(fid, ExperimentReport("run", True, peaks, {}, "", details), compiled)
