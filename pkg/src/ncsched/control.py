"""Finite-horizon LQG: backward Riccati recursion, certainty-equivalent
control law, and the expected-loss decomposition.

For one subsystem over horizon T the cost-to-go matrices S_t satisfy

    S_T = Qf
    S_t = A' S_{t+1} A + Q - A' S_{t+1} B (B' S_{t+1} B + R)^-1 B' S_{t+1} A

with feedback gains L_t = (B' S_{t+1} B + R)^-1 B' S_{t+1} A applied as
u_t = -L_t x̂ to the controller's estimate.  The error-weight matrices
Gamma_t = L_t' (B' S_{t+1} B + R) L_t convert the sensor/controller
estimate disagreement into its control-loss penalty.

The expected loss under perfect communication splits into

    x̄0' S_0 x̄0 + tr(S_0 X0) + Σ_t tr(S_{t+1} W) + Σ_t tr(P_filt[t] Gamma_t)

which is the floor any schedule can reach; intermittent communication
adds Σ_t E[e_t' Gamma_t e_t] on top.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, NumericalFailure
from .linalg import quad_form, symmetrize

# Refuse to invert B'SB + R past this conditioning.
CONDITION_LIMIT = 1e12


@dataclass(eq=False)
class GainSchedule:
    """Time-indexed Riccati solution for one subsystem.

    S has T+1 entries (S[0]..S[T], with S[T] = Qf exactly); L and Gamma
    have T entries each, valid for stages t = 0..T-1.  Immutable after
    construction and shared read-only by all simulation runs.
    """

    S: np.ndarray
    L: np.ndarray
    Gamma: np.ndarray
    horizon: int


def riccati_backward(spec, horizon):
    """Backward recursion from S_T = Qf; returns S, L, Gamma sequences."""
    if horizon < 1:
        raise ContractViolation(f"riccati_backward: horizon must be >= 1, got {horizon}")
    n, m = spec.n, spec.m
    S = np.empty((horizon + 1, n, n))
    L = np.empty((horizon, m, n))
    Gamma = np.empty((horizon, n, n))
    S[horizon] = spec.Qf
    for t in range(horizon - 1, -1, -1):
        s_next = S[t + 1]
        inner = symmetrize(spec.B.T @ s_next @ spec.B + spec.R)
        cond = float(np.linalg.cond(inner))
        if not np.isfinite(cond) or cond > CONDITION_LIMIT:
            raise NumericalFailure(
                f"riccati_backward: B'SB + R condition number {cond:.3e} at stage {t}"
            )
        bsa = spec.B.T @ s_next @ spec.A
        L[t] = np.linalg.solve(inner, bsa)
        S[t] = symmetrize(spec.A.T @ s_next @ spec.A + spec.Q - bsa.T @ L[t])
        Gamma[t] = symmetrize(L[t].T @ inner @ L[t])
    return GainSchedule(S=S, L=L, Gamma=Gamma, horizon=horizon)


def control_action(gain, estimate):
    """Certainty-equivalent input u = -L x̂."""
    gain = np.asarray(gain, dtype=float)
    estimate = np.asarray(estimate, dtype=float).reshape(-1)
    if gain.ndim != 2 or gain.shape[1] != estimate.shape[0]:
        raise ContractViolation(
            f"control_action: gain shape {gain.shape} incompatible with estimate "
            f"dim {estimate.shape}"
        )
    return -(gain @ estimate)


def stage_cost(x, u, Q, R):
    """Running cost x'Qx + u'Ru for one stage."""
    return quad_form(np.asarray(x, dtype=float).reshape(-1), Q) + quad_form(
        np.asarray(u, dtype=float).reshape(-1), R
    )


def terminal_cost(x, Qf):
    """Terminal cost x'Qf x (no input at the final stage)."""
    return quad_form(np.asarray(x, dtype=float).reshape(-1), Qf)


def error_loss_term(gamma, e):
    """Penalty e' Gamma e contributed by one stage of estimate disagreement."""
    return quad_form(np.asarray(e, dtype=float).reshape(-1), gamma)


def closed_form_baseline_loss(spec, sched, kf_covs):
    """Expected loss floor with perfect communication (zero error vectors).

    Sums the mean/covariance terms of the loss decomposition using the
    data-independent filtered-covariance sequence (stages 0..T-1).
    """
    T = sched.horizon
    if kf_covs.P_filt.shape[0] < T:
        raise ContractViolation(
            f"closed_form_baseline_loss: covariance sequence has "
            f"{kf_covs.P_filt.shape[0]} stages, need {T}"
        )
    total = quad_form(spec.x0_mean, sched.S[0]) + float(np.trace(sched.S[0] @ spec.X0))
    for t in range(T):
        total += float(np.trace(sched.S[t + 1] @ spec.W))
        total += float(np.trace(kf_covs.P_filt[t] @ sched.Gamma[t]))
    return total
