"""
Laying out the chain as waveguides
==================================

Evanescent coupling between neighbouring waveguides decays exponentially
with their separation, C(d) = C0 exp(-d/d0). Fitting that law to a
calibration table and inverting it gives the spacings that realize the
chain couplings. A synthetic camera frame of the output facet is then
integrated spot by spot to recover the exit probability, and coincidence
counts give the single-photon anti-correlation parameter.
"""

# %%
import numpy as np

from gluedtrees import chain_peak, reduce_to_chain
from gluedtrees.photonics import (
    CoincidenceCounts,
    alpha,
    design_layout,
    fit_coupling_model,
    frame_probabilities,
    render_frame,
)
from gluedtrees.walks import ChainPropagator

rng = np.random.default_rng(0)
d = np.linspace(8, 22, 8)                       # calibration spacings, mm
c = 1.8 * np.exp(-d / 7.5) * (1 + 0.01 * rng.normal(size=d.size))
model = fit_coupling_model(list(zip(d, c)))
print(f"fit: C0={model.C0:.4f}/mm  d0={model.d0:.4f}mm  rms log residual={model.rms_log_residual:.4f}")

# %%
gamma_phys = 0.17                               # per mm
peak = chain_peak(2, 2)
z = peak.tau_star / gamma_phys
layout = design_layout(2, 2, gamma_phys, model, z)
print(f"sample length {z:.2f} mm")
print("spacings (mm):", np.round(layout.spacings, 4))

# %%
weights = np.abs(ChainPropagator(reduce_to_chain(2, 2, 1.0)).state(peak.tau_star)) ** 2
frame, spots = render_frame(weights, width=140, height=31, pitch=20, sigma=3.0,
                            counts=5e4, rng=rng)
probs = frame_probabilities(frame, spots)
print("true     :", np.round(weights, 4))
print("measured :", np.round(probs, 4))

# %%
a, s = alpha(CoincidenceCounts(N3=4_000_000, N13=41_000, N23=39_500, N123=37))
print(f"alpha = {a:.3f} +/- {s:.3f}")
