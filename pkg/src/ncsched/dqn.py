"""Q-learning with a two-layer rectifier network, trained from replay.

The network maps the stacked error observation to one Q-value per
scheduling action: q = W2 relu(W1 s + b1) + b2.  Training follows the
classic online recipe: epsilon-greedy behavior, uniform minibatches from
a fixed-capacity FIFO replay memory, squared TD error against targets
computed from the current weights (no separate target network), and one
optimizer step per environment stage.

Gradients are the semi-gradient of mean_j 0.5 (y_j - Q(s_j, a_j))^2 with
the targets y held constant.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import BufferNotReady, ContractViolation, TrainingFailure

PARAM_NAMES = ("w1", "b1", "w2", "b2")


@dataclass(eq=False)
class QNetworkParams:
    """Weights of the two-layer Q-network (hidden H, |A| outputs)."""

    w1: np.ndarray  # (H, D)
    b1: np.ndarray  # (H,)
    w2: np.ndarray  # (|A|, H)
    b2: np.ndarray  # (|A|,)

    @property
    def obs_dim(self):
        return self.w1.shape[1]

    @property
    def hidden(self):
        return self.w1.shape[0]

    @property
    def n_actions(self):
        return self.w2.shape[0]

    def as_dict(self):
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def copy(self):
        return QNetworkParams(**{k: v.copy() for k, v in self.as_dict().items()})


def init_params(obs_dim, n_actions, hidden, rng):
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights, zero biases."""
    lim1 = 1.0 / np.sqrt(obs_dim)
    lim2 = 1.0 / np.sqrt(hidden)
    return QNetworkParams(
        w1=rng.uniform(-lim1, lim1, size=(hidden, obs_dim)),
        b1=np.zeros(hidden),
        w2=rng.uniform(-lim2, lim2, size=(n_actions, hidden)),
        b2=np.zeros(n_actions),
    )


def forward(params, obs):
    """Q-values for a single observation."""
    obs = np.asarray(obs, dtype=float).reshape(-1)
    if obs.shape[0] != params.obs_dim:
        raise ContractViolation(
            f"forward: observation dim {obs.shape[0]}, network expects {params.obs_dim}"
        )
    hidden = np.maximum(params.w1 @ obs + params.b1, 0.0)
    return params.w2 @ hidden + params.b2


def forward_batch(params, obs_batch):
    """Q-values for a (B, D) batch; returns (B, |A|)."""
    hidden = np.maximum(obs_batch @ params.w1.T + params.b1, 0.0)
    return hidden @ params.w2.T + params.b2


def select_action(params, obs, epsilon, rng):
    """Epsilon-greedy action; greedy ties break toward the lowest index."""
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(params.n_actions))
    return int(np.argmax(forward(params, obs)))


@dataclass
class Transition:
    obs: np.ndarray
    action: int
    reward: float
    next_obs: np.ndarray
    terminal: bool


@dataclass
class TransitionBatch:
    obs: np.ndarray        # (B, D)
    actions: np.ndarray    # (B,)
    rewards: np.ndarray    # (B,)
    next_obs: np.ndarray   # (B, D)
    terminal: np.ndarray   # (B,) bool

    def __len__(self):
        return self.obs.shape[0]


class ReplayBuffer:
    """Fixed-capacity FIFO transition store with uniform sampling."""

    def __init__(self, capacity, obs_dim):
        if capacity < 1:
            raise ContractViolation(f"ReplayBuffer: capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.next_obs = np.zeros((capacity, obs_dim))
        self.terminal = np.zeros(capacity, dtype=bool)
        self.cursor = 0
        self.size = 0

    def __len__(self):
        return self.size

    def push(self, tr):
        """Append one transition, evicting the oldest when full."""
        i = self.cursor
        self.obs[i] = tr.obs
        self.actions[i] = tr.action
        self.rewards[i] = tr.reward
        self.next_obs[i] = tr.next_obs
        self.terminal[i] = tr.terminal
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample_minibatch(self, batch_size, rng):
        """Uniform sample with replacement over current contents."""
        if self.size < batch_size:
            raise BufferNotReady(
                f"replay holds {self.size} transitions, minibatch needs {batch_size}"
            )
        idx = rng.integers(self.size, size=batch_size)
        return TransitionBatch(
            obs=self.obs[idx],
            actions=self.actions[idx],
            rewards=self.rewards[idx],
            next_obs=self.next_obs[idx],
            terminal=self.terminal[idx],
        )


def td_targets(params, batch, gamma):
    """y = r + gamma max_a' Q(s', a'); terminal transitions use y = r."""
    bootstrap = np.max(forward_batch(params, batch.next_obs), axis=1)
    return batch.rewards + gamma * np.where(batch.terminal, 0.0, bootstrap)


def loss_and_gradients(params, batch, targets):
    """Mean squared TD loss and its gradients w.r.t. every parameter."""
    b = len(batch)
    pre = batch.obs @ params.w1.T + params.b1
    hidden = np.maximum(pre, 0.0)
    q_all = hidden @ params.w2.T + params.b2
    q_taken = q_all[np.arange(b), batch.actions]
    delta = q_taken - targets
    loss = 0.5 * float(np.mean(delta**2))

    d_q = np.zeros_like(q_all)
    d_q[np.arange(b), batch.actions] = delta / b
    grads = {
        "w2": d_q.T @ hidden,
        "b2": d_q.sum(axis=0),
    }
    d_hidden = (d_q @ params.w2) * (pre > 0.0)
    grads["w1"] = d_hidden.T @ batch.obs
    grads["b1"] = d_hidden.sum(axis=0)
    return loss, grads


@dataclass(eq=False)
class AdamState:
    """First/second-moment accumulators plus step counter.

    `lr` is the current learning rate; the trainer re-derives it from the
    base rate and decay at every epoch boundary.
    """

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    @classmethod
    def for_params(cls, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        state = cls(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
        for name, arr in params.as_dict().items():
            state.m[name] = np.zeros_like(arr)
            state.v[name] = np.zeros_like(arr)
        return state


def adam_update(params, adam, grads):
    """One optimizer step; mutates params and adam in place."""
    adam.step += 1
    bc1 = 1.0 - adam.beta1**adam.step
    bc2 = 1.0 - adam.beta2**adam.step
    for name in PARAM_NAMES:
        g = grads[name]
        m, v = adam.m[name], adam.v[name]
        m *= adam.beta1
        m += (1.0 - adam.beta1) * g
        v *= adam.beta2
        v += (1.0 - adam.beta2) * (g * g)
        getattr(params, name)[...] -= adam.lr * (m / bc1) / (np.sqrt(v / bc2) + adam.eps)
    return params


def _all_finite(arr):
    # a single reduction: any nan/inf entry makes the sum non-finite
    return np.isfinite(arr.sum())


def minibatch_step(params, adam, batch, gamma):
    """TD targets, semi-gradient, one Adam step.  Mutates params in place.

    Equivalent to td_targets + loss_and_gradients + adam_update with the
    two network passes fused into a single stacked forward.
    """
    b = len(batch)
    stacked = np.concatenate([batch.obs, batch.next_obs], axis=0)
    pre = stacked @ params.w1.T + params.b1
    hidden = np.maximum(pre, 0.0)
    q_all = hidden @ params.w2.T + params.b2
    bootstrap = np.max(q_all[b:], axis=1)
    targets = batch.rewards + gamma * np.where(batch.terminal, 0.0, bootstrap)
    delta = q_all[np.arange(b), batch.actions] - targets
    loss = 0.5 * float(np.mean(delta**2))

    d_q = np.zeros((b, params.n_actions))
    d_q[np.arange(b), batch.actions] = delta / b
    grads = {"w2": d_q.T @ hidden[:b], "b2": d_q.sum(axis=0)}
    d_hidden = (d_q @ params.w2) * (pre[:b] > 0.0)
    grads["w1"] = d_hidden.T @ batch.obs
    grads["b1"] = d_hidden.sum(axis=0)

    for name, g in grads.items():
        if not _all_finite(g):
            raise TrainingFailure(
                f"non-finite gradient in {name}",
                diagnostics={
                    "loss": loss,
                    "grad_norms": {k: float(np.linalg.norm(v)) for k, v in grads.items()},
                    "reward_range": (float(batch.rewards.min()), float(batch.rewards.max())),
                    "target_range": (float(targets.min()), float(targets.max())),
                },
            )
    adam_update(params, adam, grads)
    for name, arr in params.as_dict().items():
        if not _all_finite(arr):
            raise TrainingFailure(
                f"non-finite parameters in {name} after update",
                diagnostics={"loss": loss, "adam_step": adam.step},
            )
    return params


def epsilon_schedule(epoch, rate=0.9, floor=0.001):
    """Exploration probability: starts at 1, decays by `rate` per epoch,
    clipped at `floor`."""
    if epoch < 0:
        raise ContractViolation(f"epsilon_schedule: epoch must be >= 0, got {epoch}")
    return max(floor, rate**epoch)
