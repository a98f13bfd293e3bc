import numpy as np
import pytest

from ncsched.errors import ConfigError, ContractViolation
from ncsched.plants import PlantState, SubsystemSpec, measure, sample_initial, spectral_radius, step_plant
from ncsched.seeding import substream

from conftest import scalar_spec


def test_zero_covariance_initial_state_is_exact():
    spec = SubsystemSpec(
        A=np.eye(2), B=np.zeros((2, 1)), C=np.eye(2),
        W=np.zeros((2, 2)), V=0.1 * np.eye(2),
        x0_mean=[1.0, 2.0], X0=np.zeros((2, 2)),
        Q=np.eye(2), R=[[1.0]], Qf=np.eye(2),
    )
    state = sample_initial(spec, substream(0))
    assert np.array_equal(state.x, [1.0, 2.0])
    assert state.t == 0


def test_initial_sampling_matches_prescribed_moments():
    spec = SubsystemSpec(
        A=np.eye(2), B=np.zeros((2, 1)), C=np.eye(2),
        W=np.zeros((2, 2)), V=0.1 * np.eye(2),
        x0_mean=[0.0, 0.0], X0=np.eye(2),
        Q=np.eye(2), R=[[1.0]], Qf=np.eye(2),
    )
    rng = substream(7)
    draws = np.array([sample_initial(spec, rng).x for _ in range(100_000)])
    assert np.max(np.abs(draws.mean(axis=0))) < 0.02
    assert np.max(np.abs(np.cov(draws.T) - np.eye(2))) < 0.05


def test_initial_sampling_scalar_std():
    spec = scalar_spec(x0m=1.0, x0c=4.0)
    rng = substream(8)
    draws = np.array([sample_initial(spec, rng).x[0] for _ in range(100_000)])
    assert 1.96 <= draws.std() <= 2.04


def test_step_plant_hand_values():
    spec = scalar_spec(w=0.0)
    state = PlantState(x=np.array([1.0]))
    rng = substream(0)
    assert step_plant(spec, state, [0.0], rng).x[0] == pytest.approx(1.2, abs=1e-15)
    nxt = step_plant(spec, state, [-0.6], rng)
    assert nxt.x[0] == pytest.approx(0.6, abs=1e-15)
    assert nxt.t == 1


def test_step_plant_identity_dynamics():
    spec = SubsystemSpec(
        A=np.eye(3), B=np.zeros((3, 1)), C=np.eye(3),
        W=np.zeros((3, 3)), V=0.1 * np.eye(3),
        x0_mean=np.zeros(3), X0=np.eye(3),
        Q=np.eye(3), R=[[1.0]], Qf=np.eye(3),
    )
    x = np.array([0.3, -1.5, 2.0])
    out = step_plant(spec, PlantState(x=x), [0.0], substream(1))
    assert np.array_equal(out.x, x)


def test_step_plant_dimension_mismatch():
    spec = scalar_spec()
    with pytest.raises(ContractViolation):
        step_plant(spec, PlantState(x=np.zeros(2)), [0.0], substream(0))
    with pytest.raises(ContractViolation):
        step_plant(spec, PlantState(x=np.zeros(1)), [0.0, 1.0], substream(0))


def test_measure_identity_and_projection():
    spec2 = SubsystemSpec(
        A=np.eye(2), B=np.zeros((2, 1)), C=np.eye(2),
        W=np.zeros((2, 2)), V=1e-12 * np.eye(2),
        x0_mean=np.zeros(2), X0=np.eye(2),
        Q=np.eye(2), R=[[1.0]], Qf=np.eye(2),
    )
    x = np.array([3.0, 7.0])
    y = measure(spec2, PlantState(x=x), substream(3))
    assert np.allclose(y, x, atol=1e-5)

    proj = SubsystemSpec(
        A=np.eye(2), B=np.zeros((2, 1)), C=[[1.0, 0.0]],
        W=np.zeros((2, 2)), V=[[1e-12]],
        x0_mean=np.zeros(2), X0=np.eye(2),
        Q=np.eye(2), R=[[1.0]], Qf=np.eye(2),
    )
    y = measure(proj, PlantState(x=x), substream(3))
    assert y.shape == (1,)
    assert y[0] == pytest.approx(3.0, abs=1e-5)


def test_measure_noise_variance():
    spec = scalar_spec(v=0.1, x0m=0.0, x0c=0.0)
    rng = substream(9)
    state = PlantState(x=np.zeros(1))
    ys = np.array([measure(spec, state, rng)[0] for _ in range(100_000)])
    assert 0.095 <= ys.var() <= 0.105


def test_noise_streams_mutually_independent():
    # Process-noise streams of two subsystems, plus lag-1 within a stream.
    g1 = substream(42, (0, 1))
    g2 = substream(42, (1, 1))
    w1 = g1.standard_normal(100_000)
    w2 = g2.standard_normal(100_000)
    assert abs(np.corrcoef(w1, w2)[0, 1]) < 0.02
    assert abs(np.corrcoef(w1[:-1], w1[1:])[0, 1]) < 0.02


def test_deterministic_with_zero_noise_any_seed():
    spec = scalar_spec(w=0.0, v=1e-6, x0c=0.0)
    outs = []
    for seed in (1, 2, 999):
        state = PlantState(x=np.array([1.0]))
        rng = substream(seed)
        for _ in range(5):
            state = step_plant(spec, state, [-0.1], rng)
        outs.append(state.x[0])
    assert outs[0] == outs[1] == outs[2]


def test_fixed_seed_reproducibility():
    spec = scalar_spec()
    def run():
        rng = substream(77)
        state = sample_initial(spec, rng)
        xs = []
        for _ in range(50):
            state = step_plant(spec, state, [0.0], rng)
            xs.append(state.x[0])
        return xs
    assert run() == run()


def test_spectral_radius_cases():
    assert spectral_radius(np.eye(2)) == pytest.approx(1.0, abs=1e-9)
    assert spectral_radius(np.diag([1.2, 0.5])) == pytest.approx(1.2, abs=1e-9)
    # defective double eigenvalue: power iteration converges only ~ 1/k
    assert spectral_radius([[0.0, 1.0], [-0.25, 1.0]]) == pytest.approx(0.5, abs=1e-3)
    with pytest.raises(ContractViolation):
        spectral_radius(np.zeros((2, 3)))


def test_spec_validation_rejects_bad_matrices():
    with pytest.raises(ConfigError):
        scalar_spec(v=0.0)  # V must be positive definite
    with pytest.raises(ConfigError):
        scalar_spec(w=-0.5)  # W must be PSD
    with pytest.raises(ConfigError):
        SubsystemSpec(
            A=np.eye(2), B=np.zeros((2, 1)), C=[[1.0, 0.0]],
            W=[[0.0, 1.0], [-1.0, 0.0]],  # not symmetric
            V=[[0.1]], x0_mean=np.zeros(2), X0=np.eye(2),
            Q=np.eye(2), R=[[1.0]], Qf=np.eye(2),
        )
    with pytest.raises(ConfigError):
        SubsystemSpec(
            A=np.eye(2), B=np.zeros((3, 1)), C=[[1.0, 0.0]],  # B rows mismatch
            W=np.zeros((2, 2)), V=[[0.1]], x0_mean=np.zeros(2), X0=np.eye(2),
            Q=np.eye(2), R=[[1.0]], Qf=np.eye(2),
        )


def test_indefinite_initial_covariance_rejected():
    with pytest.raises(ConfigError):
        scalar_spec(x0c=-1.0)
