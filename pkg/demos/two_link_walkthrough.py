"""The two-link story: what observing the channel buys you.

Two links, only one may transmit per slot, both channels ON half the time.
A channel-blind scheduler can do no better than a coin flip between the
links, giving peak age 8. A scheduler that sees the channel before deciding
can always favor an ON link and does strictly better: the fixed priority
rule reaches 6, and the optimal channel-aware policy reaches 16/3.
"""

import numpy as np

from aoisched import (
    KofN,
    Network,
    PriorityPolicy,
    SolverSettings,
    StationaryPolicy,
    VirtualQueuePolicy,
    kofn_waterfill,
    optimal_stationary_mixture,
    run,
    solve_aware_peak,
)

network = Network(weights=[1.0, 1.0], gamma=[0.5, 0.5])
interference = KofN(n_links=2, k=1)
horizon = 200_000

print("=== channel-blind optimum ===")
f, value = kofn_waterfill(network, k=1)
print(f"optimal activation marginals: {f}  ->  peak age {value}")

print("\n=== channel-aware optimum ===")
aware = solve_aware_peak(network, interference, SolverSettings(gap_tolerance=1e-8))
print(f"optimal success rates: {np.round(aware.rates, 4)}  ->  peak age {aware.value:.4f} (= 16/3)")
print(f"found in {aware.iterations} conditional-gradient iterations, duality gap {aware.gap:.1e}")

print("\n=== simulated policies ===")
blind = optimal_stationary_mixture(network, interference)
for label, policy in [
    ("blind optimal mixture  ", StationaryPolicy(blind.mixture)),
    ("priority (link 0 first)", PriorityPolicy([0, 1])),
    ("virtual queue (v=1)    ", VirtualQueuePolicy(v=1.0)),
    ("aware optimal mixture  ", aware.policy()),
]:
    _, metrics = run(network, interference, policy, horizon, seed=0)
    print(f"{label}  peak {metrics.peak_age:6.3f}   avg {metrics.avg_age:6.3f}")

print("\nThe priority rule already beats the best any channel-blind scheduler")
print("can do, and the adaptive policies sit at the channel-aware optimum.")
