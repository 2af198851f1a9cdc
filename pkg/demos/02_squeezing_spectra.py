"""
Two-mode squeezing of the outgoing fields
=========================================

Alice and Bob each receive one output field.  The sum V = V+ + V- of the
joint quadrature spectra drops below 4 (the vacuum level) when the two
fields are EPR entangled.  Here the pump of every chain is chosen so that
all chains burn the same total power N x^2.
"""

import numpy as np

from nopa_chain import epr_entangled, equal_power_x, scenario_config, squeezing_spectra
from nopa_chain.spectra import closed_form_v0, to_db
from nopa_chain.model import theta_defaults

omega = np.logspace(4, 10, 7)

for scenario in ("lossless", "transmission_only", "transmission_and_amplification"):
    print(scenario)
    for n in range(2, 7):
        spec = squeezing_spectra(scenario_config(n, equal_power_x(n), scenario), omega)
        row = " ".join(f"{v:8.3f}" for v in spec.v_sum_db)
        print(f"  N={n} x={equal_power_x(n):.4f}  V dB: {row}")
    print()

# At low frequency and without losses the spectrum is a rational function
# of x; the state-space result and the closed form agree to rounding.
n, x = 3, 0.2
spec = squeezing_spectra(scenario_config(n, x, "lossless"), [0.0])
print(f"V+(0) model       = {spec.v_plus[0]:.15f}")
print(f"V+(0) closed form = {closed_form_v0(n, x, sum(theta_defaults(n))):.15f}")
print(f"entangled: {epr_entangled(spec.v_sum[0])}  ({to_db(spec.v_sum[0]):.3f} dB)")
