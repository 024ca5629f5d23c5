"""Certify the performance guarantees on a random instance.

The virtual-queue policy carries an additive guarantee: its peak age stays
within (1/2 + 1/(2v)) * total weight of the channel-aware optimum. The
age-based policy carries multiplicative factor-4 guarantees for both peak
and average age. Here we solve the optima exactly on a random 8-link
instance, simulate both policies, and check every bound.
"""

import numpy as np

from aoisched import (
    AgeBasedPolicy,
    KofN,
    Network,
    SolverSettings,
    VirtualQueuePolicy,
    average_age_lower_bound,
    factor_four_bounds,
    run,
    solve_aware_peak,
    solve_blind_peak,
    virtual_queue_peak_bound,
)

rng = np.random.default_rng(7)
n = 8
network = Network(rng.uniform(0.5, 2.0, n), rng.uniform(0.3, 0.95, n))
interference = KofN(n, 3)
settings = SolverSettings(gap_tolerance=1e-4)

blind = solve_blind_peak(network, interference, settings)
aware = solve_aware_peak(network, interference, settings)
print(f"blind peak optimum : {blind.value:8.3f}")
print(f"aware peak optimum : {aware.value:8.3f}   (always <= blind)")
print(f"avg-age lower bound: {average_age_lower_bound(aware.rates, network.weights):8.3f}")

horizon, seeds = 100_000, range(5)
v, beta = 1.0, 1.0

vq_peaks = [run(network, interference, VirtualQueuePolicy(v), horizon, s)[1].peak_age for s in seeds]
vq_bound = virtual_queue_peak_bound(aware.value, network.weights, v)
print(f"\nvirtual queue  : simulated peak {np.mean(vq_peaks):7.3f}  <=  bound {vq_bound:7.3f}")

age_runs = [run(network, interference, AgeBasedPolicy(beta), horizon, s)[1] for s in seeds]
age_peak = np.mean([m.peak_age for m in age_runs])
age_avg = np.mean([m.avg_age for m in age_runs])
ref_avg = np.mean([run(network, interference, VirtualQueuePolicy(v), horizon, s)[1].avg_age for s in seeds])
peak_bound, avg_bound = factor_four_bounds(aware.value, ref_avg, network.weights, beta)
print(f"age based      : simulated peak {age_peak:7.3f}  <=  bound {peak_bound:7.3f}")
print(f"age based      : simulated avg  {age_avg:7.3f}  <=  bound {avg_bound:7.3f}")

ok = (np.mean(vq_peaks) <= vq_bound and age_peak <= peak_bound and age_avg <= avg_bound)
print("\nall bounds hold" if ok else "\nBOUND VIOLATED (should never happen)")
