"""
How much pump does a given squeezing level cost?
================================================

Two questions about pump power.  First, which x gives V(0) = -25 dB in a
lossless chain, and what does that x deliver once losses are switched on?
Second, when losses are present, which x squeezes best?  Longer chains
need less total power N x^2 for the same result.
"""

from nopa_chain.sweep import optimal_table, target_db_table, threshold_approach_curve

table = target_db_table(-25.0)
print(f"{'N':>2} {'scenario':<32} {'x':>8} {'N x^2':>8} {'V+-(0) dB':>10} {'V(0) dB':>9}")
for r in table.records:
    print(f"{r.n_nopas:>2} {r.scenario:<32} {r.x:8.4f} {r.power:8.4f} {r.v_pm_db:10.4f} {r.v_db:9.4f}")

# The optimum is picked from 1000 evenly spaced pumps up to the threshold.
for scenario in ("transmission_only", "transmission_and_amplification"):
    print()
    print(f"best pump, {scenario}")
    for r in optimal_table(scenario).records:
        print(f"  N={r.n_nopas}: x_opt={r.x:.4f}  N x^2={r.power:.4f}  V(0)={r.v_db:.4f} dB")

# Without losses there is no optimum: squeezing keeps improving all the way
# to the threshold.
curve = threshold_approach_curve(4, [0.5, 0.9, 0.99, 0.999])
print()
for r in curve.records:
    print(f"N=4, x = {r.k:.3f} x_th: V(0) = {r.v_db:9.3f} dB")
