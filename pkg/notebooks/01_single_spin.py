# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # One spin in a field
#
# Every propagator in `spinor` is a pair `E·R`: a diagonal phase matrix times a
# rotation. This notebook checks a few of them against brute-force integration.

# %%
import math

import numpy as np

from spinor import oracle
from spinor.core import SPIN_DOWN
from spinor.propagator import FieldParams, general_propagator, rf_propagator, static_propagator
from spinor.suscept import chi_from_state

# %% [markdown]
# A static field only adds phase. The operator returns to `+I` after `4π/ω0`
# and is `-I` halfway there.

# %%
w0 = 2 * math.pi * 1e5
print(np.round(static_propagator(w0, 2 * math.pi / w0), 12))
print(np.round(static_propagator(w0, 4 * math.pi / w0), 12))

# %% [markdown]
# On resonance the rotation factor turns the spin about `x` at rate `ω1`.
# Starting from `|->`, the transverse term `conj(x1)·x2` follows `|sin(ω1 t)|/2`.

# %%
w1 = 2 * math.pi * 1e3
for frac in (0.25, 0.5, 1.0):
    t = frac * math.pi / w1
    psi = rf_propagator(w0, w0, w1, t).apply(SPIN_DOWN)
    print(f"w1 t = {frac:.2f} pi  |chi| = {abs(chi_from_state(psi)):.6f}  expected {abs(math.sin(w1 * t)) / 2:.6f}")

# %% [markdown]
# The general builder takes a static transverse field plus the rest constant K.
# Here it is compared with the RK4 oracle over random draws.

# %%
rng = np.random.Generator(np.random.Philox(1))
for builder in ("static", "rf", "general"):
    params, t = oracle.random_draws(builder, 50, rng)
    r = oracle.compare_closed_form(builder, params, t)
    print(f"{builder:8s} max error {r.max_entry_error:.2e}  norm drift {r.max_norm_drift:.2e}")

# %%
p = FieldParams(omega_x=1e3, omega_z=1e5, k_rest=-50.0)
pair = general_propagator(p, 1e-3)
print("unitary:", np.allclose(pair.product @ pair.product.conj().T, np.eye(2)))
