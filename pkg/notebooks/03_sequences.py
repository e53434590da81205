# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # Sequence files
#
# A sequence is a short list of statements, one per line. Parsing keeps the
# literal units, compiling converts them and picks a propagator per event.

# %%
import numpy as np

from spinor import compile_sequence, format_program, parse_sequence, run_program

SRC = """\
set gamma 2.675e8
field b0 1e-5 T
rest k -50 rad/s
domain left spins 1 field 0 0 1e-5 T at -1 0 0 cm
domain right spins 3 field 0 0 1e-5 T at 1 0 0 cm
ensemble n 1000 polarization 0.5 seed 3
gradient x 1 mT/m dur 1 ms
acquire n 256 dt 10 us
"""

# %%
program = parse_sequence(SRC).unwrap()
print(format_program(program))

# %%
compiled = compile_sequence(program)
for s in compiled.segments:
    print(s.kind, s.start, s.duration, s.inputs.get("offsets", ""))

# %% [markdown]
# There is no RF pulse here. The signal comes only from the rest constant
# tilting the precession axis away from `z`. The initial state is then off-axis,
# so `rho_01` holds a constant offset plus a part precessing at `ω0`, both of
# order `pol·K/ω0`. The offset shows up as the zero-frequency bin.

# %%
res = run_program(program)
print("max |rho_01|:", np.abs(res.fid.samples).max())
print("peaks:", res.report.peaks[:2])

# %% [markdown]
# Errors carry their line and column.

# %%
for d in parse_sequence("delay 1 fortnights\nacquire n 4 dt 1 us\n").diagnostics:
    print(d.format("bad.seq"))
