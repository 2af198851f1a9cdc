"""
Where does a chain stop being stable?
=====================================

Every NOPA in the chain is pumped with the same strength x.  Past a certain
x the drift matrix picks up an eigenvalue with positive real part and the
chain runs away.  This script tabulates that threshold for chains of two to
six NOPAs, with and without losses.
"""

import math

from nopa_chain import scenario_config, stability_threshold, threshold_table
from nopa_chain.sweep import reported_threshold

# Without losses the threshold has a closed form, tan(pi / 4N).
for n in range(2, 7):
    x_th = stability_threshold(scenario_config(n, 0.1, "lossless"))
    print(f"N={n}: x_th = {x_th:.10f}   tan(pi/4N) = {math.tan(math.pi / (4 * n)):.10f}")

# Losses damp the chain, so the pump can be pushed a little harder.  With
# amplification loss the damping itself grows with x and the threshold is
# found by bisection instead of the eigenvalue reduction.
print()
print(f"{'N':>2} {'scenario':<32} {'x_th':>14} {'4-decimal':>10}  method")
for rep in threshold_table():
    print(
        f"{rep.n_nopas:>2} {rep.loss_scenario.value:<32} {rep.x_th:14.10f} "
        f"{reported_threshold(rep.x_th):10.4f}  {rep.method.value}"
    )
