"""Training harness: epoch loop, Monte Carlo replication, evaluation,
metrics files, and checkpointing.

One epoch is one full episode of the control problem (horizon T) run
with epsilon-greedy scheduling and one minibatch update per stage once
the replay memory holds enough transitions.  Replay persists across
epochs within a run.  Every output byte is a function of (config,
master seed): seeds are derived per the seeding module, files carry no
timestamps, and floats are written with shortest round-trip repr.
"""

import concurrent.futures
import csv
import json
import os
import platform
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt
from . import dqn, seeding
from .config import config_hash, experiment_to_dict
from .env import SchedulingEnv, allocation_fractions, build_gain_schedules, write_episode_csv
from .errors import ContractViolation, TrainingFailure

TRAINING_CSV_COLUMNS = (
    "epoch",
    "epsilon",
    "learning_rate",
    "control_loss",
    "episode_return",
    "running_avg_loss",
)
CSV_SCHEMAS = {"training": "v1", "mc_curve": "v1", "mc_runs": "v1", "search": "v1"}

OUTPUT_DIR_ENV = "NCSCHED_OUTPUT_DIR"


def resolve_output_dir(cfg, explicit=None):
    """Precedence: explicit argument > NCSCHED_OUTPUT_DIR > config > ./runs/<name>."""
    if explicit:
        return Path(explicit)
    env_dir = os.environ.get(OUTPUT_DIR_ENV)
    if env_dir:
        return Path(env_dir) / cfg.name
    if cfg.output_dir:
        return Path(cfg.output_dir)
    return Path("runs") / cfg.name


@dataclass
class EpochMetrics:
    epoch: int
    epsilon: float
    learning_rate: float
    control_loss: float
    episode_return: float
    allocation: np.ndarray
    running_avg_loss: float = float("nan")


def learning_rate_at(dqn_cfg, epoch):
    return dqn_cfg.learning_rate / (1.0 + dqn_cfg.lr_decay * epoch)


class Trainer:
    """Single training run: owns the env, network, optimizer, and replay."""

    def __init__(self, cfg, run_index=0):
        self.cfg = cfg
        self.run_index = run_index
        self.gains = build_gain_schedules(cfg.env)
        self.env = SchedulingEnv(
            cfg.env, self.gains, seed=cfg.master_seed, key=(run_index,)
        )
        agent_key = (run_index, seeding.AGENT_NS)
        weights_rng = seeding.substream(cfg.master_seed, agent_key + (seeding.AGENT_WEIGHTS,))
        self.explore_rng = seeding.substream(cfg.master_seed, agent_key + (seeding.AGENT_EXPLORE,))
        self.replay_rng = seeding.substream(cfg.master_seed, agent_key + (seeding.AGENT_REPLAY,))
        self.params = dqn.init_params(
            cfg.env.obs_dim, cfg.env.action_count, cfg.dqn.hidden_units, weights_rng
        )
        self.adam = dqn.AdamState.for_params(
            self.params,
            lr=cfg.dqn.learning_rate,
            beta1=cfg.dqn.adam_beta1,
            beta2=cfg.dqn.adam_beta2,
            eps=cfg.dqn.adam_eps,
        )
        self.buffer = dqn.ReplayBuffer(cfg.dqn.replay_capacity, cfg.env.obs_dim)
        self.epoch = 0

    def run_epoch(self):
        """One episode with exploration and per-stage minibatch training."""
        cfg = self.cfg
        epsilon = dqn.epsilon_schedule(
            self.epoch, rate=cfg.dqn.epsilon_rate, floor=cfg.dqn.epsilon_floor
        )
        self.adam.lr = learning_rate_at(cfg.dqn, self.epoch)
        train_after = max(cfg.dqn.warmup_transitions, cfg.dqn.minibatch_size)
        obs = self.env.reset()
        episode_return = 0.0
        for _ in range(cfg.env.horizon):
            action = dqn.select_action(self.params, obs, epsilon, self.explore_rng)
            outcome = self.env.step(action)
            self.buffer.push(
                dqn.Transition(
                    obs=obs,
                    action=action,
                    reward=outcome.reward,
                    next_obs=outcome.next_obs,
                    terminal=outcome.terminal,
                )
            )
            if len(self.buffer) >= train_after:
                batch = self.buffer.sample_minibatch(cfg.dqn.minibatch_size, self.replay_rng)
                dqn.minibatch_step(self.params, self.adam, batch, cfg.dqn.discount)
            episode_return += outcome.reward
            obs = outcome.next_obs
        metrics = EpochMetrics(
            epoch=self.epoch,
            epsilon=epsilon,
            learning_rate=self.adam.lr,
            control_loss=self.env.realized_loss,
            episode_return=episode_return,
            allocation=allocation_fractions(self.env.episode_log, cfg.env.n_subsystems),
        )
        self.epoch += 1
        return metrics

    # -- checkpointing ----------------------------------------------------

    def _rng_meta(self):
        return {
            "env": self.env.rng_states(),
            "explore": seeding.generator_state(self.explore_rng),
            "replay": seeding.generator_state(self.replay_rng),
        }

    def checkpoint_payload(self):
        cfg = self.cfg
        meta = {
            "format": ckpt.FORMAT_TAG,
            "epoch": self.epoch,
            "run_index": self.run_index,
            "config_hash": config_hash(cfg),
            "master_seed": cfg.master_seed,
            "network": {
                "obs_dim": self.params.obs_dim,
                "hidden": self.params.hidden,
                "n_actions": self.params.n_actions,
            },
            "env": {
                "n_subsystems": cfg.env.n_subsystems,
                "n_channels": cfg.env.n_channels,
                "horizon": cfg.env.horizon,
                "reward_mode": cfg.env.reward_mode,
                "state_dims": [spec.n for spec in cfg.env.specs],
            },
            "adam": {"step": self.adam.step, "lr": self.adam.lr},
            "buffer": {
                "size": self.buffer.size,
                "cursor": self.buffer.cursor,
                "capacity": self.buffer.capacity,
            },
            "rng": self._rng_meta(),
        }
        arrays = {f"params/{k}": v for k, v in self.params.as_dict().items()}
        arrays.update({f"adam/m/{k}": v for k, v in self.adam.m.items()})
        arrays.update({f"adam/v/{k}": v for k, v in self.adam.v.items()})
        arrays.update(
            {
                "replay/obs": self.buffer.obs,
                "replay/actions": self.buffer.actions,
                "replay/rewards": self.buffer.rewards,
                "replay/next_obs": self.buffer.next_obs,
                "replay/terminal": self.buffer.terminal,
            }
        )
        return meta, arrays

    def save_checkpoint(self, path):
        meta, arrays = self.checkpoint_payload()
        ckpt.save_archive(path, meta, arrays)
        return path

    @classmethod
    def restore(cls, cfg, path):
        """Rebuild a trainer mid-run; continues training bit-exactly."""
        meta, arrays = ckpt.load_archive(path)
        ckpt.require(
            meta["config_hash"] == config_hash(cfg),
            f"{path}: checkpoint was written for a different config",
        )
        trainer = cls(cfg, run_index=meta["run_index"])
        for name in dqn.PARAM_NAMES:
            getattr(trainer.params, name)[...] = arrays[f"params/{name}"]
            trainer.adam.m[name][...] = arrays[f"adam/m/{name}"]
            trainer.adam.v[name][...] = arrays[f"adam/v/{name}"]
        trainer.adam.step = meta["adam"]["step"]
        trainer.adam.lr = meta["adam"]["lr"]
        buf = trainer.buffer
        buf.obs[...] = arrays["replay/obs"]
        buf.actions[...] = arrays["replay/actions"]
        buf.rewards[...] = arrays["replay/rewards"]
        buf.next_obs[...] = arrays["replay/next_obs"]
        buf.terminal[...] = arrays["replay/terminal"]
        buf.size = meta["buffer"]["size"]
        buf.cursor = meta["buffer"]["cursor"]
        trainer.epoch = meta["epoch"]
        trainer.env.set_rng_states(meta["rng"]["env"])
        trainer.explore_rng.bit_generator.state = meta["rng"]["explore"]
        trainer.replay_rng.bit_generator.state = meta["rng"]["replay"]
        return trainer


def load_policy(path):
    """Network weights and shape metadata from a checkpoint."""
    meta, arrays = ckpt.load_archive(path)
    params = dqn.QNetworkParams(
        w1=arrays["params/w1"],
        b1=arrays["params/b1"],
        w2=arrays["params/w2"],
        b2=arrays["params/b2"],
    )
    return params, meta


def _write_manifest(cfg, out_dir, extra=None):
    manifest = {
        "name": cfg.name,
        "config": experiment_to_dict(cfg),
        "config_hash": config_hash(cfg),
        "master_seed": cfg.master_seed,
        "csv_schemas": CSV_SCHEMAS,
        "versions": {
            "ncsched": _package_version(),
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
    }
    manifest.update(extra or {})
    path = Path(out_dir) / "manifest.json"
    path.write_text(json.dumps(manifest, sort_keys=True, indent=1))
    return path


def _package_version():
    from . import __version__

    return __version__


@dataclass
class TrainingResult:
    out_dir: Path
    metrics: list
    csv_path: Path
    checkpoint_path: Path


def _metrics_row(metrics):
    row = [
        str(metrics.epoch),
        repr(metrics.epsilon),
        repr(metrics.learning_rate),
        repr(metrics.control_loss),
        repr(metrics.episode_return),
        repr(metrics.running_avg_loss),
    ]
    row.extend(repr(float(f)) for f in metrics.allocation)
    return row


def run_training(cfg, out_dir=None, run_index=0, progress=None, manifest=True):
    """Train for cfg.epochs epochs; writes training.csv and checkpoints.

    If training aborts on non-finite values, the state at the last
    completed epoch is saved as checkpoint-aborted.npz before the error
    propagates.
    """
    out = Path(resolve_output_dir(cfg, out_dir))
    out.mkdir(parents=True, exist_ok=True)
    if manifest:
        _write_manifest(cfg, out, {"run_index": run_index, "kind": "train"})
    trainer = Trainer(cfg, run_index=run_index)
    csv_path = out / "training.csv"
    metrics_log = []
    loss_sum = 0.0
    last_good = None
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            list(TRAINING_CSV_COLUMNS)
            + [f"alloc_{i + 1}" for i in range(cfg.env.n_subsystems)]
        )
        for _ in range(cfg.epochs):
            try:
                metrics = trainer.run_epoch()
            except TrainingFailure:
                if last_good is not None:
                    ckpt.save_archive(out / "checkpoint-aborted.npz", *last_good)
                raise
            loss_sum += metrics.control_loss
            metrics.running_avg_loss = loss_sum / (metrics.epoch + 1)
            metrics_log.append(metrics)
            writer.writerow(_metrics_row(metrics))
            if progress is not None:
                progress(metrics)
            if cfg.checkpoint_every and trainer.epoch % cfg.checkpoint_every == 0:
                trainer.save_checkpoint(out / f"checkpoint-{trainer.epoch:05d}.npz")
            meta, arrays = trainer.checkpoint_payload()
            last_good = (meta, {name: arr.copy() for name, arr in arrays.items()})
    final_path = out / "checkpoint.npz"
    trainer.save_checkpoint(final_path)
    return TrainingResult(
        out_dir=out, metrics=metrics_log, csv_path=csv_path, checkpoint_path=final_path
    )


def _mc_worker(args):
    cfg, run_index, run_dir = args
    result = run_training(
        cfg, out_dir=run_dir, run_index=run_index, manifest=False
    )
    return run_index, [m.control_loss for m in result.metrics]


@dataclass
class MonteCarloResult:
    out_dir: Path
    losses: np.ndarray  # (runs, epochs)
    mean: np.ndarray
    stderr: np.ndarray
    curve_path: Path
    runs_path: Path


def run_monte_carlo(cfg, out_dir=None, workers=None, progress=None):
    """Independent trainings for run indices 0..monte_carlo_runs-1.

    Emits mc_runs.csv (run, epoch, control_loss) and mc_curve.csv (epoch,
    mean and standard error of the total control loss across runs).
    Aggregation is keyed by run index, so worker scheduling cannot change
    any output byte.
    """
    out = Path(resolve_output_dir(cfg, out_dir))
    out.mkdir(parents=True, exist_ok=True)
    _write_manifest(cfg, out, {"kind": "mc", "runs": cfg.monte_carlo_runs})
    jobs = [
        (cfg, r, out / f"run-{r:03d}") for r in range(cfg.monte_carlo_runs)
    ]
    losses = np.empty((cfg.monte_carlo_runs, cfg.epochs))
    if workers and workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            for run_index, run_losses in pool.map(_mc_worker, jobs):
                losses[run_index] = run_losses
                if progress is not None:
                    progress(run_index)
    else:
        for job in jobs:
            run_index, run_losses = _mc_worker(job)
            losses[run_index] = run_losses
            if progress is not None:
                progress(run_index)
    mean = losses.mean(axis=0)
    if cfg.monte_carlo_runs > 1:
        stderr = losses.std(axis=0, ddof=1) / np.sqrt(cfg.monte_carlo_runs)
    else:
        stderr = np.zeros(cfg.epochs)
    runs_path = out / "mc_runs.csv"
    with open(runs_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run", "epoch", "control_loss"])
        for r in range(cfg.monte_carlo_runs):
            for e in range(cfg.epochs):
                writer.writerow([r, e, repr(float(losses[r, e]))])
    curve_path = out / "mc_curve.csv"
    with open(curve_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "mean_loss", "stderr_loss"])
        for e in range(cfg.epochs):
            writer.writerow([e, repr(float(mean[e])), repr(float(stderr[e]))])
    return MonteCarloResult(
        out_dir=out,
        losses=losses,
        mean=mean,
        stderr=stderr,
        curve_path=curve_path,
        runs_path=runs_path,
    )


@dataclass
class EvalResult:
    mean_loss: float
    allocation: np.ndarray
    losses: np.ndarray
    allocations: np.ndarray


def check_policy_compatible(meta, env_cfg):
    net = meta["network"]
    env_meta = meta["env"]
    ckpt.require(
        env_meta["n_subsystems"] == env_cfg.n_subsystems
        and env_meta["n_channels"] == env_cfg.n_channels,
        f"checkpoint trained for N={env_meta['n_subsystems']}, M={env_meta['n_channels']}; "
        f"config has N={env_cfg.n_subsystems}, M={env_cfg.n_channels}",
    )
    ckpt.require(
        env_meta["state_dims"] == [spec.n for spec in env_cfg.specs],
        "checkpoint subsystem state dimensions do not match the config",
    )
    ckpt.require(
        net["obs_dim"] == env_cfg.obs_dim and net["n_actions"] == env_cfg.action_count,
        f"network shapes ({net['obs_dim']} -> {net['n_actions']}) do not match the "
        f"config ({env_cfg.obs_dim} -> {env_cfg.action_count})",
    )


def evaluate_policy(cfg, checkpoint_path, runs=20, episode_log_dir=None):
    """Greedy (epsilon = 0) rollouts of a trained policy, no learning.

    Returns the mean total control loss and mean allocation fractions
    over `runs` fresh episodes seeded from the evaluation namespace.
    """
    if runs < 1:
        raise ContractViolation(f"evaluate_policy: runs must be >= 1, got {runs}")
    params, meta = load_policy(checkpoint_path)
    check_policy_compatible(meta, cfg.env)
    gains = build_gain_schedules(cfg.env)
    losses = np.empty(runs)
    allocations = np.empty((runs, cfg.env.n_subsystems))
    for r in range(runs):
        env = SchedulingEnv(
            cfg.env, gains, seed=cfg.master_seed, key=(seeding.EVAL_NS, r)
        )
        obs = env.reset()
        while not env.terminal:
            action = dqn.select_action(params, obs, 0.0, rng=None)
            obs = env.step(action).next_obs
        losses[r] = env.realized_loss
        allocations[r] = allocation_fractions(env.episode_log, cfg.env.n_subsystems)
        if episode_log_dir is not None:
            log_dir = Path(episode_log_dir)
            log_dir.mkdir(parents=True, exist_ok=True)
            write_episode_csv(
                log_dir / f"episode-{r:03d}.csv", env.episode_log, cfg.env.n_subsystems
            )
    return EvalResult(
        mean_loss=float(losses.mean()),
        allocation=allocations.mean(axis=0),
        losses=losses,
        allocations=allocations,
    )


@dataclass
class StabilityDiagnostic:
    running_avg: np.ndarray
    flagged: bool
    last_quartile_mean: float
    median_running_avg: float


def stability_diagnostic(loss_stream, factor=2.0):
    """Running average of a per-stage loss stream plus a boundedness flag.

    Flags non-stationarity when the mean loss over the last quartile of
    the stream exceeds `factor` times the median of the running-average
    series, which a diverging stream does and a stationary one does not.
    """
    stream = np.asarray(loss_stream, dtype=float).reshape(-1)
    if stream.size == 0:
        raise ContractViolation("stability_diagnostic: empty loss stream")
    running_avg = np.cumsum(stream) / np.arange(1, stream.size + 1)
    last_quartile = stream[(3 * stream.size) // 4 :]
    last_quartile_mean = float(last_quartile.mean())
    median_running = float(np.median(running_avg))
    flagged = last_quartile_mean > factor * median_running
    return StabilityDiagnostic(
        running_avg=running_avg,
        flagged=bool(flagged),
        last_quartile_mean=last_quartile_mean,
        median_running_avg=median_running,
    )
