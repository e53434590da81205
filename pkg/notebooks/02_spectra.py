# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # Synthetic spectra
#
# The canned experiments build an FID from closed-form susceptibilities and
# take its DFT on a grid where each line lands exactly on a bin.

# %%
from spinor import spectra

# %% [markdown]
# ## Weak main field
#
# A resonant drive shows two lines of equal height, at `ω0` and at `2ω0`.

# %%
r = spectra.experiment_low_field()
print(r.passed, r.details["line_ratio"])
for f, z in r.peaks[:2]:
    print(f"{f:12.1f} Hz  |X| = {abs(z):.6e}")

# %% [markdown]
# ## Methyl triplet
#
# Three lines split by the coupling with weights 1, 2 and 1.

# %%
r = spectra.experiment_ethanol_triplet()
print(r.passed, [round(a, 4) for a in r.details["relative_amplitudes"]])

# %% [markdown]
# ## Spin noise
#
# Without RF the rest constant alone produces a line at `ω0`. Its real part has
# the opposite sign to the pulsed reference and its size is `|K|/(√2 ωX)` of it.

# %%
r = spectra.experiment_spin_noise_sign()
d = r.details
print(r.passed, d["rf_peak"][0], d["noise_peak"][0], d["amplitude_ratio"])
