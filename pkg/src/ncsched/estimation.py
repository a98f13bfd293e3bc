"""Sensor-side Kalman filter and controller-side model predictor.

Each smart sensor runs the standard measurement-update Kalman filter on
its own loop, and mirrors the controller's estimator so it can compute
their disagreement (the communication error) at every stage.  The
controller's estimator propagates the model open loop and adopts the
sensor estimate whenever the loop is granted a channel.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, NumericalFailure
from .linalg import symmetrize


@dataclass
class SensorFilter:
    """Measurement-update Kalman filter state for one loop.

    x_pred/P_pred are the one-step-ahead prediction, x_filt/P_filt the
    filtered estimate after the current measurement, gain the current
    Kalman gain.  Covariances are kept symmetric by construction.
    """

    x_pred: np.ndarray
    P_pred: np.ndarray
    x_filt: np.ndarray
    P_filt: np.ndarray
    gain: np.ndarray


@dataclass
class ControllerEstimator:
    """Controller-side state estimate (open-loop between transmissions)."""

    x: np.ndarray


def kf1_init(spec):
    """Fresh sensor filter: prediction is the prior N(x0_mean, X0)."""
    return SensorFilter(
        x_pred=spec.x0_mean.copy(),
        P_pred=spec.X0.copy(),
        x_filt=spec.x0_mean.copy(),
        P_filt=spec.X0.copy(),
        gain=np.zeros((spec.n, spec.p)),
    )


def kf1_predict(spec, f, u_prev):
    """Time update: push the filtered estimate through the plant model."""
    u_prev = np.asarray(u_prev, dtype=float).reshape(-1)
    if u_prev.shape != (spec.m,):
        raise ContractViolation(f"kf1_predict: input dim {u_prev.shape}, expected ({spec.m},)")
    x_pred = spec.A @ f.x_filt + spec.B @ u_prev
    P_pred = symmetrize(spec.A @ f.P_filt @ spec.A.T + spec.W)
    return SensorFilter(x_pred=x_pred, P_pred=P_pred, x_filt=f.x_filt, P_filt=f.P_filt, gain=f.gain)


def kf1_update(spec, f, y):
    """Measurement update with output y.

    gain = P_pred C' (C P_pred C' + V)^-1, filtered covariance
    (I - gain C) P_pred, re-symmetrized.  V positive definite keeps the
    innovation covariance invertible.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape != (spec.p,):
        raise ContractViolation(f"kf1_update: measurement dim {y.shape}, expected ({spec.p},)")
    innov_cov = spec.C @ f.P_pred @ spec.C.T + spec.V
    try:
        gain = np.linalg.solve(innov_cov.T, (f.P_pred @ spec.C.T).T).T
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"kf1_update: singular innovation covariance ({exc})") from exc
    x_filt = f.x_pred + gain @ (y - spec.C @ f.x_pred)
    P_filt = symmetrize((np.eye(spec.n) - gain @ spec.C) @ f.P_pred)
    return SensorFilter(x_pred=f.x_pred, P_pred=f.P_pred, x_filt=x_filt, P_filt=P_filt, gain=gain)


def kf2_init(spec):
    return ControllerEstimator(x=spec.x0_mean.copy())


def kf2_advance(spec, c, u_prev):
    """Open-loop propagation of the controller's estimate."""
    u_prev = np.asarray(u_prev, dtype=float).reshape(-1)
    if c.x.shape != (spec.n,) or u_prev.shape != (spec.m,):
        raise ContractViolation(
            f"kf2_advance: estimate dim {c.x.shape} / input dim {u_prev.shape} "
            f"do not match spec (n={spec.n}, m={spec.m})"
        )
    return ControllerEstimator(x=spec.A @ c.x + spec.B @ u_prev)


def kf2_sync(c, sensor_estimate):
    """Transmission received: controller adopts the sensor estimate."""
    return ControllerEstimator(x=np.array(sensor_estimate, dtype=float))


def error_vector(f, c):
    """Sensor/controller estimate disagreement; zero right after a sync."""
    return f.x_filt - c.x


@dataclass(eq=False)
class FilterCovariances:
    """Data-independent covariance dry run of the sensor filter.

    Arrays are indexed by stage t = 0..T-1: predicted and filtered
    covariances, Kalman gains, and innovation covariances C P_pred C' + V.
    Measurements never enter the covariance recursion, so these equal the
    covariances observed during any simulation of the same spec.
    """

    P_pred: np.ndarray
    P_filt: np.ndarray
    gain: np.ndarray
    innov_cov: np.ndarray


def filter_covariances(spec, horizon):
    """Run the covariance recursion for `horizon` stages (t = 0..T-1)."""
    P_pred = np.empty((horizon, spec.n, spec.n))
    P_filt = np.empty((horizon, spec.n, spec.n))
    gain = np.empty((horizon, spec.n, spec.p))
    innov_cov = np.empty((horizon, spec.p, spec.p))
    f = kf1_init(spec)
    for t in range(horizon):
        if t > 0:
            f = kf1_predict(spec, f, np.zeros(spec.m))
        P_pred[t] = f.P_pred
        innov_cov[t] = spec.C @ f.P_pred @ spec.C.T + spec.V
        f = kf1_update(spec, f, np.zeros(spec.p))
        P_filt[t] = f.P_filt
        gain[t] = f.gain
    return FilterCovariances(P_pred=P_pred, P_filt=P_filt, gain=gain, innov_cov=innov_cov)
