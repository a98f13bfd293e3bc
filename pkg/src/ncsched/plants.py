"""Linear plant definitions and stochastic simulation primitives.

Each subsystem is a discrete-time LTI plant

    x[t+1] = A x[t] + B u[t] + w[t],      w ~ N(0, W)
    y[t]   = C x[t] + v[t],               v ~ N(0, V)

with Gaussian initial state x[0] ~ N(x0_mean, X0) and quadratic cost
weights Q, R and terminal weight Qf.
"""

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import ConfigError, ContractViolation


def _as_matrix(value, name, rows, cols):
    mat = np.asarray(value, dtype=float)
    if mat.shape != (rows, cols):
        raise ConfigError(f"{name}: expected shape ({rows}, {cols}), got {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise ConfigError(f"{name}: contains non-finite entries")
    return mat


@dataclass(eq=False)
class SubsystemSpec:
    """All matrices and noise statistics defining one control loop.

    Validated on construction: W, X0, Q, Qf symmetric PSD; V, R symmetric
    PD; all dimensions consistent.  Symmetric square roots of X0, W, V are
    precomputed for sampling.  Treat instances as immutable.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    W: np.ndarray
    V: np.ndarray
    x0_mean: np.ndarray
    X0: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    Qf: np.ndarray
    name: str = ""
    n: int = field(init=False)
    m: int = field(init=False)
    p: int = field(init=False)
    x0_sqrt: np.ndarray = field(init=False, repr=False)
    w_sqrt: np.ndarray = field(init=False, repr=False)
    v_sqrt: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        label = self.name or "subsystem"
        a = np.asarray(self.A, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ConfigError(f"{label}.A: expected a square matrix, got {a.shape}")
        self.n = a.shape[0]
        b = np.asarray(self.B, dtype=float)
        if b.ndim != 2 or b.shape[0] != self.n:
            raise ConfigError(f"{label}.B: expected {self.n} rows, got shape {b.shape}")
        self.m = b.shape[1]
        c = np.asarray(self.C, dtype=float)
        if c.ndim != 2 or c.shape[1] != self.n:
            raise ConfigError(f"{label}.C: expected {self.n} columns, got shape {c.shape}")
        self.p = c.shape[0]

        self.A = _as_matrix(a, f"{label}.A", self.n, self.n)
        self.B = _as_matrix(b, f"{label}.B", self.n, self.m)
        self.C = _as_matrix(c, f"{label}.C", self.p, self.n)
        self.W = linalg.check_spd(_as_matrix(self.W, f"{label}.W", self.n, self.n), f"{label}.W")
        self.V = linalg.check_spd(
            _as_matrix(self.V, f"{label}.V", self.p, self.p), f"{label}.V", definite=True
        )
        self.X0 = linalg.check_spd(_as_matrix(self.X0, f"{label}.X0", self.n, self.n), f"{label}.X0")
        self.Q = linalg.check_spd(_as_matrix(self.Q, f"{label}.Q", self.n, self.n), f"{label}.Q")
        self.R = linalg.check_spd(
            _as_matrix(self.R, f"{label}.R", self.m, self.m), f"{label}.R", definite=True
        )
        self.Qf = linalg.check_spd(_as_matrix(self.Qf, f"{label}.Qf", self.n, self.n), f"{label}.Qf")

        mean = np.asarray(self.x0_mean, dtype=float).reshape(-1)
        if mean.shape != (self.n,):
            raise ConfigError(f"{label}.x0_mean: expected length {self.n}, got {mean.shape}")
        self.x0_mean = mean

        self.x0_sqrt = linalg.psd_sqrt(self.X0, f"{label}.X0")
        self.w_sqrt = linalg.psd_sqrt(self.W, f"{label}.W")
        self.v_sqrt = linalg.psd_sqrt(self.V, f"{label}.V")


@dataclass
class PlantState:
    """True plant state at stage t."""

    x: np.ndarray
    t: int = 0


def sample_initial(spec, rng):
    """Draw x[0] ~ N(x0_mean, X0) via the symmetric square root of X0."""
    z = rng.standard_normal(spec.n)
    return PlantState(x=spec.x0_mean + spec.x0_sqrt @ z, t=0)


def step_plant(spec, state, u, rng):
    """Advance one stage: x' = A x + B u + w,  w ~ N(0, W)."""
    u = np.asarray(u, dtype=float).reshape(-1)
    if state.x.shape != (spec.n,) or u.shape != (spec.m,):
        raise ContractViolation(
            f"step_plant: state dim {state.x.shape} / input dim {u.shape} "
            f"do not match spec (n={spec.n}, m={spec.m})"
        )
    w = spec.w_sqrt @ rng.standard_normal(spec.n)
    return PlantState(x=spec.A @ state.x + spec.B @ u + w, t=state.t + 1)


def measure(spec, state, rng):
    """Noisy output y = C x + v,  v ~ N(0, V)."""
    if state.x.shape != (spec.n,):
        raise ContractViolation(
            f"measure: state dim {state.x.shape} does not match spec n={spec.n}"
        )
    v = spec.v_sqrt @ rng.standard_normal(spec.p)
    return spec.C @ state.x + v


def spectral_radius(mat, tol=1e-10, max_iter=10_000):
    """Largest |eigenvalue| of a square matrix, by power iteration.

    Stops when successive norm-growth estimates agree to `tol` or after
    `max_iter` iterations (defective dominant eigenvalues converge only
    like 1/k, so the cap matters).
    """
    a = np.asarray(mat, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ContractViolation(f"spectral_radius: expected a square matrix, got {a.shape}")
    n = a.shape[0]
    if n == 0:
        return 0.0
    x = np.full(n, 1.0 / np.sqrt(n))
    estimate = 0.0
    for _ in range(max_iter):
        y = a @ x
        norm = float(np.linalg.norm(y))
        if norm == 0.0:
            return 0.0
        x = y / norm
        if abs(norm - estimate) < tol:
            return norm
        estimate = norm
    return estimate
