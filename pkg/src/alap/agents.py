"""DQN and DDPG agents trained from a prioritized / mirrored replay pair."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from alap import priority
from alap.attention import BetaEstimator
from alap.envs import CartPole, SimpleScene
from alap.nn import Mlp, copy_target
from alap.priority import Scheme, SchemeConfig
from alap.replay import Batch, NotReadyError, ReplayPair, Transition

ENV_ALGO = {"cartpole": "dqn", "simple": "ddpg"}


@dataclass
class RunConfig:
    """Everything one training run needs besides its seed."""

    env: str = "cartpole"
    algo: str = "dqn"
    scheme: Scheme = Scheme.ALAP
    batch_size: int = 64
    episodes: int = 200
    capacity: int = 20_000
    alpha: float = 0.6
    beta0: float = 0.4
    epsilon: float = 1e-6
    lr: float = 0.001
    gamma: float | None = None          # None: 0.99 for DQN, 0.95 for DDPG
    hidden: tuple[int, ...] | None = None  # None: (24, 24) for DQN, (64, 64) for DDPG
    target_update_interval: int = 100   # DQN hard copy period, in optimisation steps
    tau: float = 0.01                   # DDPG soft target rate
    explore_start: float = 1.0
    explore_decay: float = 0.0002
    explore_floor: float = 0.0001
    noise_scale: float = 0.1            # DDPG Gaussian noise, fraction of the action half-range
    buffer_max_weights: bool = False

    def __post_init__(self) -> None:
        self.env = str(self.env).lower()
        self.algo = str(self.algo).lower()
        self.scheme = Scheme(str(getattr(self.scheme, "value", self.scheme)).lower())
        if self.env not in ENV_ALGO:
            raise ValueError(f"unknown env {self.env!r}; choose from {sorted(ENV_ALGO)}")
        if ENV_ALGO[self.env] != self.algo:
            raise ValueError(f"env {self.env!r} requires algo {ENV_ALGO[self.env]!r}, got {self.algo!r}")
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2")
        if self.batch_size > self.capacity:
            raise ValueError("batch_size must not exceed buffer capacity")
        if self.episodes < 1:
            raise ValueError("episodes must be positive")
        if self.lr < 0:
            raise ValueError("lr must be non-negative")
        if self.target_update_interval < 1:
            raise ValueError("target_update_interval must be positive")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must be in (0, 1]")
        if self.gamma is None:
            self.gamma = 0.99 if self.algo == "dqn" else 0.95
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be in [0, 1]")
        if self.hidden is None:
            self.hidden = (24, 24) if self.algo == "dqn" else (64, 64)
        self.hidden = tuple(int(h) for h in self.hidden)
        # validates alpha / beta0 / epsilon
        self.scheme_config

    @property
    def scheme_config(self) -> SchemeConfig:
        return SchemeConfig(self.scheme, self.alpha, self.beta0, self.epsilon, self.buffer_max_weights)


# --- DQN ---------------------------------------------------------------------

class DqnAgent:
    def __init__(self, obs_dim: int, n_actions: int, rng: np.random.Generator,
                 hidden=(24, 24), lr: float = 0.001, gamma: float = 0.99,
                 target_update_interval: int = 100, epsilon: float = 1.0,
                 epsilon_decay: float = 0.0002, epsilon_floor: float = 0.0001) -> None:
        sizes = [obs_dim, *hidden, n_actions]
        acts = ["relu"] * len(hidden) + ["linear"]
        self.q_net = Mlp(sizes, acts, rng)
        self.q_target = self.q_net.copy()
        self.n_actions = n_actions
        self.lr = lr
        self.gamma = gamma
        self.target_update_interval = target_update_interval
        self.epsilon = epsilon
        self.epsilon_decay = epsilon_decay
        self.epsilon_floor = epsilon_floor
        self.updates = 0

    def act(self, state, rng: np.random.Generator, explore: bool = True) -> int:
        """Epsilon-greedy action; each exploring call decays epsilon once."""
        if explore:
            eps = self.epsilon
            self.epsilon = max(self.epsilon_floor, self.epsilon - self.epsilon_decay)
            if rng.random() < eps:
                return int(rng.integers(self.n_actions))
        return int(np.argmax(self.q_net(np.asarray(state, dtype=np.float64)[None, :])[0]))

    def _targets(self, batch: Batch) -> np.ndarray:
        next_q = self.q_target(batch.next_states).max(axis=1)
        return batch.rewards + self.gamma * next_q * (1.0 - batch.dones)

    def td_errors(self, batch: Batch) -> np.ndarray:
        """Q(s, a) - (r + gamma * max_a' Q_target(s', a') * (1 - done))."""
        a = np.argmax(batch.actions, axis=1)
        q = self.q_net(batch.states)[np.arange(len(batch)), a]
        return q - self._targets(batch)

    def update(self, batch: Batch, weights) -> tuple[np.ndarray, float]:
        """One weighted Huber gradient step. Returns ``(td_errors, loss)``."""
        m = len(batch)
        a = np.argmax(batch.actions, axis=1)
        rows = np.arange(m)
        q_all, cache = self.q_net.forward(batch.states)
        delta = q_all[rows, a] - self._targets(batch)
        loss, factors = priority.weighted_loss(delta, weights)
        out_grad = np.zeros_like(q_all)
        out_grad[rows, a] = factors
        grads, _ = self.q_net.backward(cache, out_grad)
        self.q_net.adam_step(grads, self.lr)
        self.updates += 1
        if self.updates % self.target_update_interval == 0:
            copy_target(self.q_net, self.q_target, 1.0)
        return delta, loss


# --- DDPG --------------------------------------------------------------------

class DdpgAgent:
    def __init__(self, obs_dim: int, action_dim: int, rng: np.random.Generator,
                 hidden=(64, 64), lr: float = 0.001, gamma: float = 0.95, tau: float = 0.01,
                 action_low: float = -1.0, action_high: float = 1.0,
                 noise_scale: float = 0.1) -> None:
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        relu = ["relu"] * len(hidden)
        self.actor = Mlp([obs_dim, *hidden, action_dim], relu + ["tanh"], rng)
        self.critic = Mlp([obs_dim + action_dim, *hidden, 1], relu + ["linear"], rng)
        self.actor_target = self.actor.copy()
        self.critic_target = self.critic.copy()
        self.lr = lr
        self.gamma = gamma
        self.tau = tau
        self.low = action_low
        self.high = action_high
        self.half_range = 0.5 * (action_high - action_low)
        self.mid = 0.5 * (action_high + action_low)
        self.noise_sigma = noise_scale * self.half_range

    def policy(self, states, target: bool = False) -> np.ndarray:
        net = self.actor_target if target else self.actor
        return self.mid + self.half_range * net(states)

    def act(self, state, rng: np.random.Generator, explore: bool = True) -> np.ndarray:
        a = self.policy(np.asarray(state, dtype=np.float64)[None, :])[0]
        if explore:
            a = a + rng.normal(0.0, self.noise_sigma, size=a.shape)
        return np.clip(a, self.low, self.high)

    def td_errors(self, batch: Batch) -> np.ndarray:
        q = self.critic(np.hstack([batch.states, batch.actions]))[:, 0]
        return q - self._targets(batch)

    def _targets(self, batch: Batch) -> np.ndarray:
        next_a = self.policy(batch.next_states, target=True)
        next_q = self.critic_target(np.hstack([batch.next_states, next_a]))[:, 0]
        return batch.rewards + self.gamma * next_q * (1.0 - batch.dones)

    def policy_gradients(self, states) -> tuple[list[np.ndarray], float]:
        """Gradients of ``-mean_i Q(s_i, mu(s_i))`` w.r.t. actor parameters."""
        m = states.shape[0]
        raw, actor_cache = self.actor.forward(states)
        acts = self.mid + self.half_range * raw
        q, critic_cache = self.critic.forward(np.hstack([states, acts]))
        _, in_grad = self.critic.backward(critic_cache, np.full_like(q, -1.0 / m))
        d_raw = in_grad[:, self.obs_dim:] * self.half_range
        grads, _ = self.actor.backward(actor_cache, d_raw)
        return grads, -float(q.mean())

    def update(self, batch: Batch, weights) -> tuple[np.ndarray, float, float]:
        """Critic step on weighted Huber TD loss, actor step on the policy gradient,
        then soft target updates. Returns ``(td_errors, critic_loss, actor_loss)``."""
        y = self._targets(batch)
        q, cache = self.critic.forward(np.hstack([batch.states, batch.actions]))
        delta = q[:, 0] - y
        critic_loss, factors = priority.weighted_loss(delta, weights)
        grads, _ = self.critic.backward(cache, factors[:, None])
        self.critic.adam_step(grads, self.lr)

        actor_grads, actor_loss = self.policy_gradients(batch.states)
        self.actor.adam_step(actor_grads, self.lr)

        copy_target(self.actor, self.actor_target, self.tau)
        copy_target(self.critic, self.critic_target, self.tau)
        return delta, critic_loss, actor_loss


# --- training loop -----------------------------------------------------------

@dataclass
class StepReport:
    loss: float
    beta: float
    mean_abs_td: float
    indices: np.ndarray = field(default=None, repr=False)
    td_errors: np.ndarray = field(default=None, repr=False)


@dataclass
class RunRecord:
    seed: int
    returns: list = field(default_factory=list)
    mean_beta: list = field(default_factory=list)
    mean_loss: list = field(default_factory=list)
    beta_trace: list = field(default_factory=list)


def train_step(agent, buffers: ReplayPair, scheme: SchemeConfig, estimator: BetaEstimator | None,
               rng: np.random.Generator, batch_size: int, scheduled_beta: float) -> StepReport:
    """One optimisation cycle: sample, TD errors, priorities, beta, weighted update.

    ``scheduled_beta`` is the linear-annealing value used by PER and LAP;
    ALAP ignores it and asks the estimator instead.
    """
    main = buffers.main
    n = len(main)
    if n < batch_size:
        raise NotReadyError(f"need {batch_size} transitions before training, have {n}")

    if not scheme.prioritized:
        idx, batch = main.sample_uniform(batch_size, rng)
        result = agent.update(batch, np.ones(batch_size))
        delta, loss = result[0], result[1]
        return StepReport(loss, math.nan, float(np.mean(np.abs(delta))), idx, delta)

    idx, batch, probs, serials = main.sample_prioritized(batch_size, rng)
    if scheme.scheme is Scheme.ALAP:
        _, uniform_batch = buffers.mirror.sample_uniform(batch_size, rng)
        beta = estimator.beta(uniform_batch)
    else:
        beta = scheduled_beta
    max_weight = None
    if scheme.buffer_max_weights:
        max_weight = (n * main.min_probability()) ** (-beta)
    weights = priority.importance_weights(probs, n, beta, max_weight)
    result = agent.update(batch, weights)
    delta, loss = result[0], result[1]
    main.update_priorities(idx, np.abs(delta), scheme.epsilon, serials)
    return StepReport(loss, beta, float(np.mean(np.abs(delta))), idx, delta)


def _one_hot(a: int, n: int) -> np.ndarray:
    v = np.zeros(n)
    v[a] = 1.0
    return v


class Run:
    """One isolated training run: environment, agent, buffers, estimator, RNG streams."""

    def __init__(self, config: RunConfig, seed: int) -> None:
        self.config = config
        self.seed = int(seed)
        env_ss, act_ss, net_ss, buf_ss, est_ss = np.random.SeedSequence(self.seed).spawn(5)
        self.act_rng = np.random.default_rng(act_ss)
        self.buffer_rng = np.random.default_rng(buf_ss)
        net_rng = np.random.default_rng(net_ss)
        c = config
        if c.env == "cartpole":
            self.env = CartPole(np.random.default_rng(env_ss))
            self.agent = DqnAgent(self.env.obs_dim, self.env.n_actions, net_rng, c.hidden, c.lr,
                                  c.gamma, c.target_update_interval, c.explore_start,
                                  c.explore_decay, c.explore_floor)
        else:
            self.env = SimpleScene(np.random.default_rng(env_ss))
            self.agent = DdpgAgent(self.env.obs_dim, self.env.action_dim, net_rng, c.hidden, c.lr,
                                   c.gamma, c.tau, self.env.action_low, self.env.action_high,
                                   c.noise_scale)
        sc = c.scheme_config
        self.scheme = sc
        self.buffers = ReplayPair(c.capacity, self.env.obs_dim, self.env.action_dim,
                                  sc.alpha, sc.epsilon, sc.clip_priorities)
        self.estimator = BetaEstimator(self.env.obs_dim, self.env.action_dim, sc.beta0,
                                       np.random.default_rng(est_ss))
        self.record = RunRecord(self.seed)

    def _store(self, s, a, r, terminal, s2) -> None:
        action = _one_hot(a, self.env.n_actions) if self.env.discrete else np.asarray(a, dtype=np.float64)
        self.buffers.push(Transition(s, action, r, terminal, s2))

    def episode(self, index: int) -> float:
        c = self.config
        scheduled = priority.linear_beta(index, c.episodes, c.beta0)
        s = self.env.reset()
        total, betas, losses = 0.0, [], []
        done = False
        while not done:
            a = self.agent.act(s, self.act_rng)
            s2, r, done, terminal = self.env.step(a)
            self._store(s, a, r, terminal, s2)
            total += r
            s = s2
            if len(self.buffers) >= c.batch_size:
                rep = train_step(self.agent, self.buffers, self.scheme, self.estimator,
                                 self.buffer_rng, c.batch_size, scheduled)
                betas.append(rep.beta)
                losses.append(rep.loss)
        self.record.returns.append(total)
        self.record.beta_trace.extend(betas)
        self.record.mean_beta.append(float(np.mean(betas)) if betas else math.nan)
        self.record.mean_loss.append(float(np.mean(losses)) if losses else math.nan)
        return total

    def run(self) -> RunRecord:
        for ep in range(self.config.episodes):
            self.episode(ep)
        return self.record


def train_run(config: RunConfig, seed: int) -> RunRecord:
    return Run(config, seed).run()
