"""Cart-pole (discrete) and single point-mass reaching scene (continuous)."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np


class EpisodeDoneError(RuntimeError):
    """Raised when stepping an environment whose episode already ended."""


# --- cart-pole ---------------------------------------------------------------

GRAVITY = 9.8
CART_MASS = 1.0
POLE_MASS = 0.1
TOTAL_MASS = CART_MASS + POLE_MASS
HALF_LENGTH = 0.5
POLE_MASS_LENGTH = POLE_MASS * HALF_LENGTH
FORCE_MAG = 10.0
TAU = 0.02
X_LIMIT = 2.4
THETA_LIMIT = 12 * 2 * math.pi / 360
CARTPOLE_MAX_STEPS = 200


@dataclass(frozen=True)
class CartpoleState:
    x: float
    x_dot: float
    theta: float
    theta_dot: float
    steps: int = 0

    def observation(self) -> np.ndarray:
        return np.array([self.x, self.x_dot, self.theta, self.theta_dot])

    @property
    def failed(self) -> bool:
        return abs(self.x) > X_LIMIT or abs(self.theta) > THETA_LIMIT

    @property
    def done(self) -> bool:
        return self.failed or self.steps >= CARTPOLE_MAX_STEPS


def cartpole_reset(rng: np.random.Generator) -> CartpoleState:
    x, x_dot, theta, theta_dot = rng.uniform(-0.05, 0.05, size=4)
    return CartpoleState(float(x), float(x_dot), float(theta), float(theta_dot), 0)


def cartpole_step(state: CartpoleState, action: int) -> tuple[CartpoleState, float, bool]:
    """Advance one Euler step of 0.02 s under a +/-10 N push. Reward is always 1."""
    if action not in (0, 1):
        raise ValueError(f"cart-pole action must be 0 or 1, got {action!r}")
    if state.done:
        raise EpisodeDoneError("episode has ended; call cartpole_reset")
    force = FORCE_MAG if action == 1 else -FORCE_MAG
    cos_t = math.cos(state.theta)
    sin_t = math.sin(state.theta)
    temp = (force + POLE_MASS_LENGTH * state.theta_dot ** 2 * sin_t) / TOTAL_MASS
    theta_acc = (GRAVITY * sin_t - cos_t * temp) / (
        HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * cos_t ** 2 / TOTAL_MASS))
    x_acc = temp - POLE_MASS_LENGTH * theta_acc * cos_t / TOTAL_MASS
    nxt = CartpoleState(
        x=state.x + TAU * state.x_dot,
        x_dot=state.x_dot + TAU * x_acc,
        theta=state.theta + TAU * state.theta_dot,
        theta_dot=state.theta_dot + TAU * theta_acc,
        steps=state.steps + 1,
    )
    return nxt, 1.0, nxt.done


# --- point-mass reaching scene -------------------------------------------------

SIMPLE_DT = 0.1
SIMPLE_DAMPING = 0.25
SIMPLE_ACCEL = 5.0
SIMPLE_MAX_STEPS = 25


@dataclass(frozen=True)
class SimpleState:
    pos: tuple[float, float]
    vel: tuple[float, float]
    landmark: tuple[float, float]
    steps: int = 0

    def observation(self) -> np.ndarray:
        """Own velocity followed by the landmark position relative to the agent."""
        return np.array([self.vel[0], self.vel[1],
                         self.landmark[0] - self.pos[0], self.landmark[1] - self.pos[1]])

    @property
    def done(self) -> bool:
        return self.steps >= SIMPLE_MAX_STEPS

    def reward(self) -> float:
        dx = self.pos[0] - self.landmark[0]
        dy = self.pos[1] - self.landmark[1]
        return -(dx * dx + dy * dy)


def simple_reset(rng: np.random.Generator) -> SimpleState:
    pos = rng.uniform(-1.0, 1.0, size=2)
    landmark = rng.uniform(-1.0, 1.0, size=2)
    return SimpleState((float(pos[0]), float(pos[1])), (0.0, 0.0),
                       (float(landmark[0]), float(landmark[1])), 0)


def simple_step(state: SimpleState, action) -> tuple[SimpleState, float, bool]:
    """Damped double-integrator step; reward is minus squared distance to the landmark."""
    if state.done:
        raise EpisodeDoneError("episode has ended; call simple_reset")
    a = np.asarray(action, dtype=np.float64).ravel()
    if a.size != 2 or not np.all(np.isfinite(a)):
        raise ValueError("action must be a finite 2-vector")
    ax, ay = np.clip(a, -1.0, 1.0)
    keep = 1.0 - SIMPLE_DAMPING
    vx = state.vel[0] * keep + ax * SIMPLE_ACCEL * SIMPLE_DT
    vy = state.vel[1] * keep + ay * SIMPLE_ACCEL * SIMPLE_DT
    nxt = replace(
        state,
        pos=(state.pos[0] + vx * SIMPLE_DT, state.pos[1] + vy * SIMPLE_DT),
        vel=(float(vx), float(vy)),
        steps=state.steps + 1,
    )
    return nxt, nxt.reward(), nxt.done


# --- stateful wrappers used by the training loop ------------------------------

class CartPole:
    obs_dim = 4
    n_actions = 2
    action_dim = 2          # one-hot width in replay
    discrete = True
    max_steps = CARTPOLE_MAX_STEPS

    def __init__(self, rng: np.random.Generator) -> None:
        self.rng = rng
        self.state: CartpoleState | None = None

    def reset(self) -> np.ndarray:
        self.state = cartpole_reset(self.rng)
        return self.state.observation()

    def step(self, action: int):
        """Returns ``(obs, reward, done, terminal)``; ``terminal`` excludes the time limit."""
        self.state, reward, done = cartpole_step(self.state, int(action))
        return self.state.observation(), reward, done, self.state.failed


class SimpleScene:
    obs_dim = 4
    action_dim = 2
    discrete = False
    action_low = -1.0
    action_high = 1.0
    max_steps = SIMPLE_MAX_STEPS

    def __init__(self, rng: np.random.Generator) -> None:
        self.rng = rng
        self.state: SimpleState | None = None

    def reset(self) -> np.ndarray:
        self.state = simple_reset(self.rng)
        return self.state.observation()

    def step(self, action):
        self.state, reward, done = simple_step(self.state, action)
        return self.state.observation(), reward, done, False
