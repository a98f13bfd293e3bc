"""Classical schedulers and the exact expected-loss oracle.

The oracle evaluates a fixed (periodic) schedule without sampling by
propagating, per subsystem, the covariance of the sensor/controller
estimate disagreement:

    Sigma_t = 0                                    if scheduled at t
    Sigma_t = A Sigma_{t-1} A' + K_t N_t K_t'      otherwise

where N_t = C P_pred[t] C' + V is the innovation covariance (the
disagreement is driven by the innovations the controller misses, pushed
through the sensor filter gain).  The expected loss of the schedule is
the perfect-communication floor plus sum_t sum_i tr(Gamma_t Sigma_t).
"""

import itertools
from dataclasses import dataclass

import numpy as np

from .control import closed_form_baseline_loss
from .errors import BudgetExceeded, ContractViolation
from .estimation import filter_covariances
from .subsets import action_to_subset, membership_matrix, n_actions


@dataclass(eq=False)
class PeriodicSchedule:
    """A sequence of channel subsets applied cyclically over the horizon.

    Entries are tuples of 1-based subsystem ids.  `validate` checks the
    entries against an environment's N and M; the oracle itself accepts
    any subset sizes (an all-subsystems schedule models M = N).
    """

    sequence: tuple

    def __post_init__(self):
        self.sequence = tuple(tuple(sorted(entry)) for entry in self.sequence)
        if not self.sequence:
            raise ContractViolation("PeriodicSchedule: empty sequence")

    @property
    def period(self):
        return len(self.sequence)

    def subset_at(self, t):
        return self.sequence[t % self.period]

    def validate(self, n_subsystems, n_channels):
        for idx, entry in enumerate(self.sequence):
            if len(entry) != n_channels or len(set(entry)) != len(entry):
                raise ContractViolation(
                    f"schedule entry {idx}: expected an {n_channels}-subset, got {entry}"
                )
            if entry and (entry[0] < 1 or entry[-1] > n_subsystems):
                raise ContractViolation(
                    f"schedule entry {idx}: members outside 1..{n_subsystems}"
                )
        return self


def _innovation_push(spec, covs):
    """K_t N_t K_t' for every stage, (T, n, n)."""
    kn = np.einsum("tij,tjk->tik", covs.gain, covs.innov_cov)
    return np.einsum("tij,tkj->tik", kn, covs.gain)


def schedule_error_term(cfg, gains, schedule, kf_covs=None):
    """Exact sum_t sum_i tr(Gamma_t Sigma_t) for a fixed schedule."""
    if kf_covs is None:
        kf_covs = [filter_covariances(spec, cfg.horizon) for spec in cfg.specs]
    total = 0.0
    for i, spec in enumerate(cfg.specs):
        push = _innovation_push(spec, kf_covs[i])
        gamma = gains[i].Gamma
        sigma = np.zeros((spec.n, spec.n))
        for t in range(cfg.horizon):
            sigma = spec.A @ sigma @ spec.A.T + push[t]
            if (i + 1) in schedule.subset_at(t):
                sigma = np.zeros_like(sigma)
                continue
            total += float(np.einsum("ij,ji->", gamma[t], sigma))
    return total


def expected_schedule_loss(cfg, gains, schedule, kf_covs=None):
    """Exact expected total control loss of a fixed schedule (no sampling)."""
    if kf_covs is None:
        kf_covs = [filter_covariances(spec, cfg.horizon) for spec in cfg.specs]
    baseline = sum(
        closed_form_baseline_loss(spec, gains[i], kf_covs[i])
        for i, spec in enumerate(cfg.specs)
    )
    return baseline + schedule_error_term(cfg, gains, schedule, kf_covs)


def _pattern_error_table(spec, gain_schedule, covs, period, horizon):
    """Error term of every periodic on/off pattern for one subsystem.

    Patterns are bitmasks over the period: bit r set means the subsystem
    is scheduled at stages t with t % period == r.  Returns (2^period,)
    totals, computed for all patterns simultaneously.
    """
    n_patterns = 1 << period
    push = _innovation_push(spec, covs)
    gamma = gain_schedule.Gamma
    pattern_ids = np.arange(n_patterns)
    scheduled = [(pattern_ids >> r) & 1 == 1 for r in range(period)]
    sigma = np.zeros((n_patterns, spec.n, spec.n))
    totals = np.zeros(n_patterns)
    for t in range(horizon):
        sigma = spec.A @ sigma @ spec.A.T + push[t]
        sigma[scheduled[t % period]] = 0.0
        totals += np.einsum("pij,ji->p", sigma, gamma[t])
    return totals


@dataclass
class SearchResult:
    schedule: PeriodicSchedule
    expected_loss: float
    candidates: int
    per_period: list  # (period, best PeriodicSchedule, expected loss) rows


def exhaustive_periodic_search(cfg, gains, p_min=2, p_max=11, budget=10_000_000, kf_covs=None):
    """Best periodic schedule over all periods in [p_min, p_max].

    Enumerates every sequence of channel subsets of each period and
    scores it with the exact oracle; refuses up front if the total
    candidate count exceeds `budget`.  Ties break toward the smaller
    period, then the lexicographically earlier action sequence.
    """
    if not 1 <= p_min <= p_max:
        raise ContractViolation(f"bad period range [{p_min}, {p_max}]")
    count = n_actions(cfg.n_subsystems, cfg.n_channels)
    n_candidates = sum(count**p for p in range(p_min, p_max + 1))
    if n_candidates > budget:
        raise BudgetExceeded(
            f"{n_candidates} candidate schedules exceed the budget of {budget}; "
            f"narrow the period range or raise the budget"
        )
    if kf_covs is None:
        kf_covs = [filter_covariances(spec, cfg.horizon) for spec in cfg.specs]
    baseline = sum(
        closed_form_baseline_loss(spec, gains[i], kf_covs[i])
        for i, spec in enumerate(cfg.specs)
    )
    members = membership_matrix(cfg.n_subsystems, cfg.n_channels)

    best_loss = np.inf
    best_actions = None
    per_period = []
    for period in range(p_min, p_max + 1):
        tables = [
            _pattern_error_table(cfg.specs[i], gains[i], kf_covs[i], period, cfg.horizon)
            for i in range(cfg.n_subsystems)
        ]
        n_seq = count**period
        seq_ids = np.arange(n_seq)
        # candidates in lexicographic order: position 0 most significant
        totals = np.zeros(n_seq)
        actions_by_pos = np.empty((period, n_seq), dtype=np.int64)
        for pos in range(period):
            actions_by_pos[pos] = (seq_ids // count ** (period - 1 - pos)) % count
        for i in range(cfg.n_subsystems):
            masks = np.zeros(n_seq, dtype=np.int64)
            for pos in range(period):
                masks |= members[actions_by_pos[pos], i].astype(np.int64) << pos
            totals += tables[i][masks]
        # argmin takes the first minimum, i.e. the lexicographically
        # earliest sequence; strict < keeps the smaller period on ties.
        idx = int(np.argmin(totals))
        period_actions = [int(a) for a in actions_by_pos[:, idx]]
        per_period.append(
            (
                period,
                PeriodicSchedule(
                    tuple(
                        action_to_subset(a, cfg.n_subsystems, cfg.n_channels)
                        for a in period_actions
                    )
                ),
                baseline + float(totals[idx]),
            )
        )
        if totals[idx] < best_loss:
            best_loss = float(totals[idx])
            best_actions = period_actions
    schedule = PeriodicSchedule(
        tuple(
            action_to_subset(a, cfg.n_subsystems, cfg.n_channels) for a in best_actions
        )
    )
    return SearchResult(
        schedule=schedule,
        expected_loss=baseline + best_loss,
        candidates=n_candidates,
        per_period=per_period,
    )


def round_robin(n_subsystems, n_channels, t):
    """Deterministic cycle granting each loop every N/M-th stage on average."""
    start = (t * n_channels) % n_subsystems
    return tuple(sorted((start + j) % n_subsystems + 1 for j in range(n_channels)))


def random_schedule(n_subsystems, n_channels, rng):
    """Uniformly random M-subset."""
    action = int(rng.integers(n_actions(n_subsystems, n_channels)))
    return action_to_subset(action, n_subsystems, n_channels)


def greedy_error(cfg, gains, t, observation):
    """Top-M loops by instantaneous error penalty e' Gamma_t e, ties by index."""
    observation = np.asarray(observation, dtype=float).reshape(-1)
    if observation.shape[0] != cfg.obs_dim:
        raise ContractViolation(
            f"greedy_error: observation dim {observation.shape[0]}, expected {cfg.obs_dim}"
        )
    penalties = np.empty(cfg.n_subsystems)
    offset = 0
    for i, spec in enumerate(cfg.specs):
        e = observation[offset : offset + spec.n]
        penalties[i] = float(e @ gains[i].Gamma[t] @ e)
        offset += spec.n
    order = np.lexsort((np.arange(cfg.n_subsystems), -penalties))
    return tuple(sorted(int(i) + 1 for i in order[: cfg.n_channels]))


def periodic_round_robin(n_subsystems, n_channels):
    """Round-robin expressed as a PeriodicSchedule (period N for gcd cases)."""
    period = n_subsystems if n_channels == 1 else int(
        np.lcm(n_subsystems, n_channels) // n_channels
    )
    return PeriodicSchedule(
        tuple(round_robin(n_subsystems, n_channels, t) for t in range(period))
    )


def all_schedules(n_subsystems, n_channels, period):
    """Iterate every subset sequence of one period (test/search helper)."""
    count = n_actions(n_subsystems, n_channels)
    subsets = [action_to_subset(a, n_subsystems, n_channels) for a in range(count)]
    for combo in itertools.product(subsets, repeat=period):
        yield PeriodicSchedule(combo)
