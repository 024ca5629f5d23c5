"""Slotted-time simulation: age dynamics, estimators, and exact diagnostics.

Within each slot the order of events is fixed: observe the channel, let the
policy decide, resolve successes (scheduled AND ON), accumulate the running
sums with the pre-update age, then update ages. A link's age increments by
one each slot and resets to 1 on the slot after a success; all ages start
at 0.

Ages and all running sums are kept in 64-bit integers, so the telescoping
identities checked by :func:`conservation_residuals` and
:func:`squared_identity_residuals` hold exactly (to the last bit) on every
trajectory, not merely in expectation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import InterferenceModel, Network, RngStream, sample_channel_matrix
from .policies import SchedulingPolicy

__all__ = [
    "Trajectory",
    "MetricsReport",
    "DiagnosticsReport",
    "run",
    "run_with_checkpoints",
    "conservation_residuals",
    "squared_identity_residuals",
    "avg_age_identity_gap",
    "expected_identity_gap",
    "peak_vs_avg_slack",
    "slack_floor",
    "diagnose",
    "CHANNEL_SUBSTREAM",
    "POLICY_SUBSTREAM",
]

# Sub-stream derivation for one run: RngStream(seed).substream(k).
CHANNEL_SUBSTREAM = 0
POLICY_SUBSTREAM = 1


@dataclass(frozen=True)
class Trajectory:
    """Per-link running sums over ``horizon`` slots (all exact 64-bit integers).

    ``age_sum`` accumulates the pre-update age every slot, ``peak_sum`` and
    ``peak_sq_sum`` accumulate age and squared age on success slots only,
    ``success_count`` counts successes, and ``final_age`` is the age right
    after the last slot. ``zero_age_successes`` is 1 for a link that
    succeeded in slot 0 (the only slot where the age can still be 0), else 0;
    such an event is a success but not an age peak.
    """

    horizon: int
    seed: int
    age_sum: np.ndarray
    peak_sum: np.ndarray
    success_count: np.ndarray
    peak_sq_sum: np.ndarray
    final_age: np.ndarray
    zero_age_successes: np.ndarray


@dataclass(frozen=True)
class MetricsReport:
    """Estimators derived from a trajectory.

    Per-link peak age is the ratio of summed success-slot ages to the success
    count (infinite, and flagged, when a link never succeeded); per-link
    average age is the time average of the age process. Network values are
    weight-summed across links.
    """

    peak_age_per_link: np.ndarray
    avg_age_per_link: np.ndarray
    success_rate_per_link: np.ndarray
    zero_success_links: np.ndarray
    peak_age: float
    avg_age: float
    horizon: int

    @classmethod
    def from_trajectory(cls, trajectory: Trajectory, network: Network) -> "MetricsReport":
        t = float(trajectory.horizon)
        # An age-0 success (possible only in slot 0) is not a peak of the age
        # curve; it contributes to the success rate but not to the peak ratio.
        peaks = (trajectory.success_count - trajectory.zero_age_successes).astype(float)
        zero = peaks == 0
        peak = np.where(zero, np.inf, trajectory.peak_sum / np.maximum(peaks, 1.0))
        avg = trajectory.age_sum / t
        rate = trajectory.success_count / t
        w = network.weights
        return cls(
            peak_age_per_link=peak,
            avg_age_per_link=avg,
            success_rate_per_link=rate,
            zero_success_links=zero,
            peak_age=float(np.inf if zero.any() else w @ peak),
            avg_age=float(w @ avg),
            horizon=trajectory.horizon,
        )


def _decision_matrix(
    network: Network,
    interference: InterferenceModel,
    policy: SchedulingPolicy,
    channel: np.ndarray,
    policy_rng: RngStream,
) -> np.ndarray:
    """(T, n) boolean activation matrix produced by the policy."""
    policy.start(network, interference, policy_rng)
    scheduled = policy.decide_batch(channel)
    if scheduled is not None:
        return scheduled
    horizon, n = channel.shape
    scheduled = np.zeros((horizon, n), dtype=bool)
    ages = np.zeros(n) if policy.uses_ages else None
    for t in range(horizon):
        row = channel[t]
        dec = policy.decide(row, ages)
        if dec.size:
            scheduled[t, dec] = True
        if ages is not None:
            ages += 1.0
            if dec.size:
                served = dec[row[dec]]
                ages[served] = 1.0
    return scheduled


def _age_path(success: np.ndarray) -> np.ndarray:
    """Length T+1 age sequence of one link from its success indicator vector.

    The age at slot t is t minus the last success slot before t (or t when
    none), which is exactly the integer recurrence started from age 0.
    """
    horizon = success.shape[0]
    idx = np.arange(horizon, dtype=np.int64)
    marks = np.where(success, idx, np.int64(-1))
    last = np.maximum.accumulate(marks)
    ages = np.empty(horizon + 1, dtype=np.int64)
    ages[0] = 0
    ages[1:] = np.where(last >= 0, idx + 1 - last, idx + 1)
    return ages


def _trajectory_from_success(success: np.ndarray, seed: int) -> Trajectory:
    horizon, n = success.shape
    age_sum = np.zeros(n, dtype=np.int64)
    peak_sum = np.zeros(n, dtype=np.int64)
    count = np.zeros(n, dtype=np.int64)
    peak_sq = np.zeros(n, dtype=np.int64)
    final = np.zeros(n, dtype=np.int64)
    for e in range(n):
        z = success[:, e]
        ages = _age_path(z)
        pre = ages[:horizon]
        peaks = pre[z]
        age_sum[e] = pre.sum()
        peak_sum[e] = peaks.sum()
        count[e] = peaks.size
        peak_sq[e] = (peaks * peaks).sum()
        final[e] = ages[horizon]
    zero_age = success[0].astype(np.int64)
    return Trajectory(horizon, seed, age_sum, peak_sum, count, peak_sq, final, zero_age)


def _simulate(network, interference, policy, horizon, seed):
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    base = RngStream(seed)
    channel = sample_channel_matrix(network, base.substream(CHANNEL_SUBSTREAM), horizon)
    scheduled = _decision_matrix(
        network, interference, policy, channel, base.substream(POLICY_SUBSTREAM)
    )
    success = scheduled & channel
    return channel, scheduled, success


def run(
    network: Network,
    interference: InterferenceModel,
    policy: SchedulingPolicy,
    horizon: int,
    seed: int,
    return_arrays: bool = False,
):
    """Simulate ``horizon`` slots and return ``(Trajectory, MetricsReport)``.

    The channel stream and the policy's private randomness are derived from
    ``seed`` by the documented sub-stream rule, so identical inputs give a
    bit-identical trajectory. With ``return_arrays=True`` a third element is
    returned: the (channel, scheduled, success) boolean slot matrices.
    """
    channel, scheduled, success = _simulate(network, interference, policy, horizon, seed)
    trajectory = _trajectory_from_success(success, seed)
    metrics = MetricsReport.from_trajectory(trajectory, network)
    if return_arrays:
        return trajectory, metrics, (channel, scheduled, success)
    return trajectory, metrics


def run_with_checkpoints(
    network: Network,
    interference: InterferenceModel,
    policy: SchedulingPolicy,
    horizon: int,
    seed: int,
    checkpoints: Sequence[int],
):
    """Like :func:`run`, but also reports running metrics at given slot counts.

    Returns ``(Trajectory, [(t, MetricsReport), ...])`` where each report
    covers the first ``t`` slots of the same trajectory.
    """
    ts = sorted(set(int(t) for t in checkpoints))
    if not ts or ts[0] < 1 or ts[-1] > horizon:
        raise ValueError("checkpoints must lie in [1, horizon]")
    _, _, success = _simulate(network, interference, policy, horizon, seed)
    n = success.shape[1]
    m = len(ts)
    age_sum = np.zeros((m, n), dtype=np.int64)
    peak_sum = np.zeros((m, n), dtype=np.int64)
    count = np.zeros((m, n), dtype=np.int64)
    peak_sq = np.zeros((m, n), dtype=np.int64)
    final = np.zeros((m, n), dtype=np.int64)
    stops = np.array(ts, dtype=np.int64) - 1  # cumulative-sum index of slot t-1
    for e in range(n):
        z = success[:, e]
        ages = _age_path(z)
        pre = ages[:horizon]
        age_sum[:, e] = np.cumsum(pre)[stops]
        masked = np.where(z, pre, 0)
        peak_sum[:, e] = np.cumsum(masked)[stops]
        count[:, e] = np.cumsum(z.astype(np.int64))[stops]
        peak_sq[:, e] = np.cumsum(masked * masked)[stops]
        final[:, e] = ages[np.array(ts, dtype=np.int64)]
    zero_age = success[0].astype(np.int64)
    reports = []
    for i, t in enumerate(ts):
        traj_t = Trajectory(
            t, seed, age_sum[i], peak_sum[i], count[i], peak_sq[i], final[i], zero_age
        )
        reports.append((t, MetricsReport.from_trajectory(traj_t, network)))
    if ts[-1] == horizon:
        full = Trajectory(
            horizon, seed, age_sum[-1], peak_sum[-1], count[-1], peak_sq[-1],
            final[-1], zero_age,
        )
    else:
        full = _trajectory_from_success(success, seed)
    return full, reports


# ---------------------------------------------------------------------------
# Exact pathwise identities and inequality diagnostics
# ---------------------------------------------------------------------------

def conservation_residuals(trajectory: Trajectory) -> np.ndarray:
    """Per-link residual of the linear telescoping identity; exactly zero.

    Summing the age recurrence over the horizon gives
    ``sum(success-slot ages) + final age == horizon`` whenever ages start
    at 0. Integer arithmetic, no tolerance.
    """
    return trajectory.peak_sum + trajectory.final_age - trajectory.horizon


def squared_identity_residuals(trajectory: Trajectory) -> np.ndarray:
    """Per-link residual of the squared telescoping identity; exactly zero.

    Squaring the age recurrence and telescoping yields
    ``T + 2*sum(ages) - sum(success ages^2) - 2*sum(success ages) == final^2``.
    """
    return (
        trajectory.horizon
        + 2 * trajectory.age_sum
        - trajectory.peak_sq_sum
        - 2 * trajectory.peak_sum
        - trajectory.final_age * trajectory.final_age
    )


def avg_age_identity_gap(trajectory: Trajectory, beta: float) -> np.ndarray:
    """Gap between the direct average age and its success-weighted form.

    The average age can be rewritten through success-slot values of
    ``A^2 + beta*A``; on a finite horizon the two sides differ only by a
    boundary term of order ``final_age^2 / horizon`` (see
    :func:`expected_identity_gap` for the exact value).
    """
    t = float(trajectory.horizon)
    direct = trajectory.age_sum / t
    weighted = (trajectory.peak_sq_sum + beta * trajectory.peak_sum) / (2.0 * t)
    return direct - (weighted + (1.0 - beta) / 2.0)


def expected_identity_gap(trajectory: Trajectory, beta: float) -> np.ndarray:
    """Closed form of :func:`avg_age_identity_gap` from the two exact identities."""
    a = trajectory.final_age.astype(float)
    return (a * a - (2.0 - beta) * a) / (2.0 * trajectory.horizon)


def peak_vs_avg_slack(metrics: MetricsReport, weights: Sequence[float]) -> float:
    """Slack of ``peak <= 2*avg - total weight``; nonnegative up to sampling noise.

    Requires every link to have at least one success (otherwise the peak
    estimator is infinite and the slack is undefined).
    """
    if metrics.zero_success_links.any():
        raise ValueError("peak/avg slack undefined: some link has zero successes")
    w = np.asarray(weights, dtype=float)
    return float(2.0 * metrics.avg_age - w.sum() - metrics.peak_age)


def slack_floor(trajectory: Trajectory, metrics: MetricsReport, weights) -> float:
    """Deterministic lower bound on the finite-horizon slack.

    Pathwise, the per-link slack is at least ``-final_age*(peak+2)/horizon``;
    the weighted sum of those terms bounds how negative the network slack can
    legitimately be on one run.
    """
    w = np.asarray(weights, dtype=float)
    per_link = (
        trajectory.final_age.astype(float)
        * (metrics.peak_age_per_link + 2.0)
        / trajectory.horizon
    )
    return float(-(w @ per_link))


@dataclass(frozen=True)
class DiagnosticsReport:
    """Bundle of the exact identity residuals and inequality slacks for a run."""

    conservation: np.ndarray
    squared: np.ndarray
    identity_gap: np.ndarray
    identity_gap_expected: np.ndarray
    beta: float
    slack: float
    slack_floor: float

    @property
    def identities_exact(self) -> bool:
        return not self.conservation.any() and not self.squared.any()

    @property
    def passed(self) -> bool:
        gap_ok = np.allclose(self.identity_gap, self.identity_gap_expected, atol=1e-9)
        slack_ok = np.isnan(self.slack) or self.slack >= self.slack_floor - 1e-9
        return bool(self.identities_exact and gap_ok and slack_ok)


def diagnose(
    trajectory: Trajectory,
    metrics: MetricsReport,
    network: Network,
    beta: float = 1.0,
) -> DiagnosticsReport:
    return DiagnosticsReport(
        conservation=conservation_residuals(trajectory),
        squared=squared_identity_residuals(trajectory),
        identity_gap=avg_age_identity_gap(trajectory, beta),
        identity_gap_expected=expected_identity_gap(trajectory, beta),
        beta=beta,
        slack=peak_vs_avg_slack(metrics, network.weights)
        if not metrics.zero_success_links.any()
        else float("nan"),
        slack_floor=slack_floor(trajectory, metrics, network.weights)
        if not metrics.zero_success_links.any()
        else float("nan"),
    )
