import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spinor.core import SpinorError
from spinor.oracle import general_hamiltonian
from spinor.propagator import rotation_matrix
from spinor.sequence import (
    DuplicateAcquire,
    SequenceSyntaxError,
    UndeclaredDomain,
    UnknownUnit,
    UnsupportedCombination,
    compile_sequence,
    format_program,
    parse_sequence,
    run_program,
)

from .conftest import expm_taylor

GOLDEN = Path(__file__).parent / "golden"
CASES = sorted(p.stem for p in GOLDEN.glob("*.seq"))
GAMMA = 2.675e8


def _load(stem):
    src = (GOLDEN / f"{stem}.seq").read_text(encoding="utf-8")
    expected = json.loads((GOLDEN / f"{stem}.json").read_text(encoding="utf-8"))
    return src, expected


def test_corpus_has_twenty_cases():
    assert len(CASES) == 20
    assert all((GOLDEN / f"{c}.json").exists() for c in CASES)


@pytest.mark.parametrize("stem", CASES)
def test_golden_ast_and_diagnostics(stem):
    src, expected = _load(stem)
    r = parse_sequence(src)
    got_ast = r.program.to_dict() if r.program is not None else None
    assert got_ast == expected["ast"]
    assert [d.to_dict() for d in r.diagnostics] == expected["diagnostics"]


@pytest.mark.parametrize("stem", [c for c in CASES if _load(c)[1]["ast"] is not None])
def test_round_trip(stem):
    p = parse_sequence(_load(stem)[0]).unwrap()
    text = format_program(p)
    q = parse_sequence(text).unwrap()
    assert q == p
    assert format_program(q) == text


@pytest.mark.parametrize(
    "source, exc",
    [
        ("wait 1 s\n", SequenceSyntaxError),
        ("delay 1 fortnights\nacquire n 8 dt 1 us\n", UnknownUnit),
        ("acquire n 8 dt 1 us\nacquire n 8 dt 1 us\n", DuplicateAcquire),
        ("domain a spins 1 field 0 0 1 T\nacquire n 8 dt 1 us on b\n", UndeclaredDomain),
    ],
)
def test_unwrap_raises_typed_error(source, exc):
    r = parse_sequence(source)
    with pytest.raises(exc) as info:
        r.unwrap()
    assert isinstance(info.value, SpinorError)
    assert info.value.diagnostic.line >= 1 and info.value.diagnostic.column >= 1


def test_diagnostic_format_has_position():
    d = parse_sequence("delay 1 s\nwait\n").errors[0]
    assert d.format("x.seq") == "x.seq:2:1: error: unknown statement 'wait' [syntax]"


@given(
    dur=st.floats(1e-6, 10.0, allow_nan=False),
    n=st.integers(8, 10_000),
    unit=st.sampled_from(["s", "ms", "us", "ns"]),
    phase=st.floats(-360, 360, allow_nan=False),
)
def test_round_trip_property(dur, n, unit, phase):
    src = (
        "field b0 1.5 T\n"
        f"pulse rf amp 2e-6 T carrier resonant dur {dur!r} {unit} phase {phase!r} deg\n"
        f"delay {dur!r} {unit}\n"
        f"acquire n {n} dt 1 us\n"
    )
    p = parse_sequence(src).unwrap()
    assert parse_sequence(format_program(p)).unwrap() == p


def test_comment_and_blank_lines_do_not_shift_positions():
    r = parse_sequence("# header\n\n   delay -1 s   # bad\n")
    e = r.errors[0]
    assert (e.line, e.column, e.code) == (3, 10, "invalid-value")


# --- compilation -----------------------------------------------------------------


def test_half_pi_pulse_compiles_to_quarter_turn():
    x = math.pi / (2 * GAMMA * 1e-3)
    p = parse_sequence(
        f"set gamma {GAMMA!r}\nfield b0 1 T\npulse rf amp 1e-3 T carrier resonant dur {x!r} s\nacquire n 8 dt 1 us\n"
    ).unwrap()
    c = compile_sequence(p)
    seg = c.segments[0]
    assert seg.kind == "rf"
    assert seg.inputs["omega1"] * seg.duration == pytest.approx(math.pi / 2, rel=1e-14)
    # on resonance the rotating-frame factor is a quarter turn about x
    from spinor.propagator import rf_propagator

    r = rf_propagator(seg.inputs["omega_rf"], c.omega0, seg.inputs["omega1"], seg.duration).r_part
    assert np.abs(r - rotation_matrix((1, 0, 0), math.pi / 2)).max() < 1e-12


def test_gradient_splits_domains():
    p = parse_sequence(
        f"set gamma {GAMMA!r}\nfield b0 0.01 T\n"
        "domain a spins 1 field 0 0 0.01 T at -1 0 0 cm\n"
        "domain b spins 1 field 0 0 0.01 T at 1 0 0 cm\n"
        "gradient x 6e-3 T/m dur 1e-3 s\nacquire n 8 dt 1 us\n"
    ).unwrap()
    off = compile_sequence(p).segments[0].inputs["offsets"]
    assert abs(off["a"] - off["b"]) == pytest.approx(GAMMA * 6e-3 * 0.02, rel=1e-14)


def test_gradient_along_axis_without_extent_gives_no_split():
    p = parse_sequence(
        "domain a spins 1 field 0 0 1 T at -1 0 0 cm\ndomain b spins 1 field 0 0 1 T at 1 0 0 cm\n"
        "gradient z 6e-3 T/m dur 1e-3 s\nacquire n 8 dt 1 us\n"
    ).unwrap()
    off = compile_sequence(p).segments[0].inputs["offsets"]
    assert off["a"] == off["b"] == 0.0


@pytest.mark.parametrize(
    "header, kind",
    [("field b0 1 T\n", "static"), ("field b0 1 T\nrest k -6e-8 rad/s\n", "rest")],
)
def test_delay_builder_choice(header, kind):
    c = compile_sequence(parse_sequence(header + "delay 1 ms\nacquire n 8 dt 1 us\n").unwrap())
    assert c.segments[0].kind == kind
    assert c.k_rest == (0.0 if kind == "static" else -6e-8)


def test_delay_with_transverse_domain_field_uses_general():
    c = compile_sequence(parse_sequence("domain a spins 1 field 1e-6 0 1 T\ndelay 1 ms\nacquire n 8 dt 1 us\n").unwrap())
    assert c.segments[0].kind == "general"


def test_resonant_pulse_uses_omega0():
    c = compile_sequence(parse_sequence("field b0 2 T\npulse rf amp 1 uT carrier resonant dur 1 us\nacquire n 8 dt 1 us\n").unwrap())
    seg = c.segments[0]
    assert seg.kind == "rf"
    assert seg.inputs["omega_rf"] == c.omega0 == -c.constants.gamma * 2.0


def test_explicit_carrier_units():
    c = compile_sequence(parse_sequence("pulse rf amp 100 Hz carrier 1 Hz dur 1 ms phase 90 deg\nacquire n 8 dt 1 us\n").unwrap())
    seg = c.segments[0]
    assert seg.inputs["omega_rf"] == pytest.approx(2 * math.pi)
    assert seg.inputs["omega1"] == pytest.approx(200 * math.pi)
    assert seg.inputs["phase"] == pytest.approx(math.pi / 2)


@pytest.mark.parametrize("stem", [c for c in CASES if _load(c)[1]["ast"] is not None])
def test_compilation_is_total(stem):
    p = parse_sequence(_load(stem)[0]).unwrap()
    c = compile_sequence(p)
    assert [s.event_index for s in c.segments] == list(range(len(p.events)))
    assert c.duration == pytest.approx(p.duration, rel=1e-15, abs=0)


@pytest.mark.parametrize(
    "source",
    [
        "domain a spins 1 field 1e-6 0 1 T\npulse rf amp 1 uT carrier resonant dur 1 us\nacquire n 8 dt 1 us\n",
        "pulse rf amp 1 uT carrier resonant dur 1 us\nacquire n 8 dt 1 us\n",
    ],
)
def test_unsupported_combinations(source):
    with pytest.raises(UnsupportedCombination):
        compile_sequence(parse_sequence(source).unwrap())


# --- execution -------------------------------------------------------------------


def _coherence_oracle(wx, wz, k, pol, t_pre, times):
    """rho_01 by Taylor matrix exponential of the rest Hamiltonian."""
    h = general_hamiltonian(wx, 0.0, wz, k)(0.0)[0]
    rho = np.diag([(1 + pol) / 2, (1 - pol) / 2]).astype(complex)
    u = expm_taylor(-1j * h * t_pre)
    rho = u @ rho @ u.conj().T
    out = []
    for t in times:
        v = expm_taylor(-1j * h * t)
        out.append((v @ rho @ v.conj().T)[0, 1])
    return np.array(out)


def test_noise_imaging_without_rf():
    k = -50.0
    src = (
        f"set gamma {GAMMA!r}\nfield b0 1e-5 T\nrest k {k!r} rad/s\n"
        "domain a spins 1 field 0 0 1e-5 T at -1 0 0 cm\n"
        "domain b spins 3 field 0 0 1e-5 T at 1 0 0 cm\n"
        "ensemble n 1000 polarization 0.5 seed 3\n"
        "gradient x 1e-3 T/m dur 1 ms\n"
        "acquire n 64 dt 10 us\n"
    )
    res = run_program(parse_sequence(src).unwrap())
    w0 = -GAMMA * 1e-5
    times = 1e-5 * np.arange(64)
    per = {}
    for name, x in (("a", -0.01), ("b", 0.01)):
        # gradient interval then free sampling, each under its own Hamiltonian
        wz_g = w0 - GAMMA * 1e-3 * x
        hg = general_hamiltonian(0.0, 0.0, wz_g, k)(0.0)[0]
        rho = np.diag([0.75, 0.25]).astype(complex)
        u = expm_taylor(-1j * hg * 1e-3)
        rho = u @ rho @ u.conj().T
        hf = general_hamiltonian(0.0, 0.0, w0, k)(0.0)[0]
        per[name] = np.array([(expm_taylor(-1j * hf * t) @ rho @ expm_taylor(-1j * hf * t).conj().T)[0, 1] for t in times])
    expected = 0.25 * per["a"] + 0.75 * per["b"]
    assert np.abs(res.fid.samples - expected).max() < 1e-12
    # coherence comes from K alone: at most pol * |K| / |omega0|
    assert 0 < np.abs(res.fid.samples).max() <= 0.5 * abs(k) / abs(w0) * 1.01


def test_no_signal_without_rest_constant_or_pulse():
    res = run_program(parse_sequence("field b0 1 T\ndelay 1 ms\nacquire n 16 dt 1 us\n").unwrap())
    assert np.all(res.fid.samples == 0)


def test_half_pi_pulse_gives_half_coherence():
    x = math.pi / (2 * GAMMA * 1e-3)
    src = f"set gamma {GAMMA!r}\nfield b0 1e-3 T\npulse rf amp 1e-3 T carrier resonant dur {x!r} s\nacquire n 8 dt 1 us\n"
    res = run_program(parse_sequence(src).unwrap())
    assert abs(res.fid.samples[0]) == pytest.approx(0.5, abs=1e-12)


def test_rest_pulse_matches_oracle_without_pulse_targets():
    k = 30.0
    src = f"set gamma {GAMMA!r}\nfield b0 1e-5 T\nrest k {k!r} rad/s\ndelay 2 ms\nacquire n 16 dt 5 us\n"
    res = run_program(parse_sequence(src).unwrap())
    expected = _coherence_oracle(0.0, -GAMMA * 1e-5, k, 1.0, 2e-3, 5e-6 * np.arange(16))
    assert np.abs(res.fid.samples - expected).max() < 1e-12


def test_run_is_deterministic():
    src = (GOLDEN / "08_montecarlo.seq").read_text()
    a = run_program(parse_sequence(src).unwrap())
    b = run_program(parse_sequence(src).unwrap())
    assert a.report.to_json() == b.report.to_json()
    assert np.array_equal(a.fid.samples, b.fid.samples)
    c = run_program(parse_sequence(src).unwrap(), seed=8)
    assert c.report.details["seed"] == 8


def test_run_without_acquire_fails():
    with pytest.raises(SequenceSyntaxError):
        run_program(parse_sequence("delay 1 s\n").unwrap())
