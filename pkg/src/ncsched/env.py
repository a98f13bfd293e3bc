"""Channel-scheduling environment over N control loops and M channels.

One episode is one run of the control problem for T stages.  The
scheduler observes the stacked sensor/controller estimate disagreements
and, each stage, grants channels to an M-subset of the loops.

Per-stage event order (stage t):

    1. every plant is measured; each sensor runs the filter time update
       (with u[t-1]) followed by the measurement update;
    2. each sensor advances its mirror of the controller estimator with
       u[t-1], giving the controller's pre-transmission estimate;
    3. the observation is the stack of pre-transmission disagreements;
    4. the scheduler acts; scheduled loops sync the controller estimate
       to the sensor estimate (their disagreement becomes exactly zero);
    5. controls u[t] = -L_t x̂ are computed for every loop and the stage
       reward is evaluated;
    6. plants step to t+1.

``reset`` performs 1-3 for t = 0 (there is no u[-1]; the controller's
pre-transmission estimate is the shared prior mean) and ``step`` performs
4-6 for the current stage plus 1-3 for the next.  The observation an
action is chosen from therefore never depends on that action.

Reward modes:

    error_penalty   r = -sum_i e_i' Gamma_t e_i with the post-transmission
                    disagreements (zero contribution from scheduled loops);
    full_cost       r = -sum_i (x' Q x + u' R u) on the true plant state.

RNG stream consumption, for reproducibility across simulator
implementations: reset draws, per subsystem in order, n initial-state
normals then p measurement normals; each step draws, per subsystem in
order, n process normals then p measurement normals.
"""

import csv
from dataclasses import dataclass

import numpy as np

from . import estimation, plants, seeding
from .control import control_action, error_loss_term, riccati_backward, stage_cost, terminal_cost
from .errors import ConfigError, ContractViolation
from .subsets import action_to_subset, n_actions

REWARD_MODES = ("error_penalty", "full_cost")


@dataclass(eq=False)
class EnvConfig:
    """N subsystems sharing M < N channels for T stages per episode."""

    specs: tuple
    n_channels: int
    horizon: int
    reward_mode: str = "error_penalty"

    def __post_init__(self):
        self.specs = tuple(self.specs)
        if len(self.specs) < 2:
            raise ConfigError("env.subsystems: need at least 2 subsystems")
        if not 1 <= self.n_channels < len(self.specs):
            raise ConfigError(
                f"env.channels: need 1 <= M < N, got M={self.n_channels}, N={len(self.specs)}"
            )
        if self.horizon < 1:
            raise ConfigError(f"env.horizon: must be >= 1, got {self.horizon}")
        if self.reward_mode not in REWARD_MODES:
            raise ConfigError(
                f"env.reward_mode: expected one of {REWARD_MODES}, got {self.reward_mode!r}"
            )

    @property
    def n_subsystems(self):
        return len(self.specs)

    @property
    def obs_dim(self):
        return sum(spec.n for spec in self.specs)

    @property
    def action_count(self):
        return n_actions(self.n_subsystems, self.n_channels)


def build_gain_schedules(cfg):
    """Riccati solutions for every subsystem at the episode horizon."""
    return tuple(riccati_backward(spec, cfg.horizon) for spec in cfg.specs)


@dataclass
class LoopState:
    """Per-subsystem runtime state: plant, sensor filter, controller mirror."""

    plant: plants.PlantState
    sensor: estimation.SensorFilter
    ctrl: estimation.ControllerEstimator


@dataclass
class StageRecord:
    """Diagnostics for one stage, also the episode-log CSV row."""

    stage: int
    action: int
    subset: tuple
    reward: float
    stage_costs: np.ndarray
    error_penalties: np.ndarray
    post_error_norms: np.ndarray


@dataclass
class StepOutcome:
    next_obs: np.ndarray
    reward: float
    terminal: bool
    diagnostics: StageRecord


class SchedulingEnv:
    """Single-owner, sequential environment instance.

    Noise streams are derived from (seed, key) per the seeding module, one
    (init, process, measurement) triple per subsystem, so distinct
    environments never share randomness.
    """

    def __init__(self, cfg, gains, seed, key=()):
        if len(gains) != cfg.n_subsystems:
            raise ContractViolation("SchedulingEnv: one gain schedule per subsystem required")
        for g in gains:
            if g.horizon != cfg.horizon:
                raise ContractViolation("SchedulingEnv: gain schedule horizon != env horizon")
        self.cfg = cfg
        self.gains = tuple(gains)
        self._streams = [
            {
                tag: seeding.substream(seed, tuple(key) + (i, tag))
                for tag in (seeding.STREAM_INIT, seeding.STREAM_PROCESS, seeding.STREAM_MEAS)
            }
            for i in range(cfg.n_subsystems)
        ]
        self.loops = None
        self.stage = 0
        self.realized_loss = 0.0
        self.episode_log = []

    @property
    def terminal(self):
        return self.loops is not None and self.stage >= self.cfg.horizon

    def rng_states(self):
        return [
            {str(tag): seeding.generator_state(gen) for tag, gen in streams.items()}
            for streams in self._streams
        ]

    def set_rng_states(self, states):
        for streams, saved in zip(self._streams, states):
            for tag, gen in streams.items():
                gen.bit_generator.state = saved[str(tag)]

    def _observation(self):
        return np.concatenate(
            [estimation.error_vector(loop.sensor, loop.ctrl) for loop in self.loops]
        )

    def reset(self):
        """Start a fresh episode; returns the stage-0 observation."""
        self.loops = []
        for i, spec in enumerate(self.cfg.specs):
            streams = self._streams[i]
            plant = plants.sample_initial(spec, streams[seeding.STREAM_INIT])
            y0 = plants.measure(spec, plant, streams[seeding.STREAM_MEAS])
            sensor = estimation.kf1_update(spec, estimation.kf1_init(spec), y0)
            self.loops.append(
                LoopState(plant=plant, sensor=sensor, ctrl=estimation.kf2_init(spec))
            )
        self.stage = 0
        self.realized_loss = 0.0
        self.episode_log = []
        return self._observation()

    def step(self, action):
        """Apply one scheduling action; see the module docstring for order."""
        if self.loops is None:
            raise ContractViolation("step called before reset")
        if self.terminal:
            raise ContractViolation("step called on a terminal episode")
        cfg = self.cfg
        t = self.stage
        subset = action_to_subset(int(action), cfg.n_subsystems, cfg.n_channels)

        for member in subset:
            loop = self.loops[member - 1]
            loop.ctrl = estimation.kf2_sync(loop.ctrl, loop.sensor.x_filt)

        n_sub = cfg.n_subsystems
        stage_costs = np.empty(n_sub)
        error_penalties = np.empty(n_sub)
        post_error_norms = np.empty(n_sub)
        controls = []
        for i, (spec, loop) in enumerate(zip(cfg.specs, self.loops)):
            e = estimation.error_vector(loop.sensor, loop.ctrl)
            error_penalties[i] = error_loss_term(self.gains[i].Gamma[t], e)
            post_error_norms[i] = float(np.linalg.norm(e))
            u = control_action(self.gains[i].L[t], loop.ctrl.x)
            controls.append(u)
            stage_costs[i] = stage_cost(loop.plant.x, u, spec.Q, spec.R)

        if cfg.reward_mode == "error_penalty":
            reward = -float(np.sum(error_penalties))
        else:
            reward = -float(np.sum(stage_costs))
        self.realized_loss += float(np.sum(stage_costs))

        for i, (spec, loop) in enumerate(zip(cfg.specs, self.loops)):
            streams = self._streams[i]
            loop.plant = plants.step_plant(spec, loop.plant, controls[i], streams[seeding.STREAM_PROCESS])
            y = plants.measure(spec, loop.plant, streams[seeding.STREAM_MEAS])
            loop.sensor = estimation.kf1_update(
                spec, estimation.kf1_predict(spec, loop.sensor, controls[i]), y
            )
            loop.ctrl = estimation.kf2_advance(spec, loop.ctrl, controls[i])

        self.stage = t + 1
        done = self.stage >= cfg.horizon
        if done:
            self.realized_loss += sum(
                terminal_cost(loop.plant.x, spec.Qf)
                for spec, loop in zip(cfg.specs, self.loops)
            )
        record = StageRecord(
            stage=t,
            action=int(action),
            subset=subset,
            reward=reward,
            stage_costs=stage_costs,
            error_penalties=error_penalties,
            post_error_norms=post_error_norms,
        )
        self.episode_log.append(record)
        return StepOutcome(next_obs=self._observation(), reward=reward, terminal=done, diagnostics=record)


def allocation_fractions(episode_log, n_subsystems):
    """Fraction of stages each subsystem held a channel; sums to M."""
    if not episode_log:
        raise ContractViolation("allocation_fractions: empty episode log")
    counts = np.zeros(n_subsystems)
    for record in episode_log:
        subset = record.subset if isinstance(record, StageRecord) else record
        for member in subset:
            counts[member - 1] += 1
    return counts / len(episode_log)


def write_episode_csv(path, episode_log, n_subsystems):
    """Episode log as CSV: stage, action, subset, reward, per-loop costs."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["stage", "action", "subset", "reward"]
            + [f"cost_{i + 1}" for i in range(n_subsystems)]
        )
        for rec in episode_log:
            writer.writerow(
                [rec.stage, rec.action, "|".join(str(m) for m in rec.subset), repr(rec.reward)]
                + [repr(float(c)) for c in rec.stage_costs]
            )
