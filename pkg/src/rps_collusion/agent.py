"""DQN player: observation encoding, epsilon-greedy play, replay memory and learning."""
from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .env import N_ACTIONS, N_PLAYERS, Action, GameHistory
from .modes import Role, message_feature, random_policy
from .network import (
    Optimizer,
    QNetwork,
    TrainBatch,
    clone_into_target,
    load_network,
    save_network,
    train_batch,
)

BLOCK = N_PLAYERS * N_ACTIONS  # one-hot width of one joint action

# one-hot rows for codes 0..2, row 3 (code -1, "no action yet") is all zero
_ONE_HOT = np.vstack([np.eye(N_ACTIONS), np.zeros((1, N_ACTIONS))])


def observation_width(frames: int, window: int, with_message: bool = False) -> int:
    return frames * window * BLOCK + int(with_message)


def encode_observation(history: GameHistory, frames: int, window: int, message=None) -> np.ndarray:
    """Frame-stacked one-hot rendering of the history.

    Index of (frame k, slot j, agent p, action a) is ``((k*W + j)*3 + p)*3 + a``.
    Frame 0 is the current window, frame k the window as it stood k steps
    ago; slot 0 is the newest joint action in that window. Slots with no
    action yet are all zero. A message, if given, is appended as one
    trailing value in {0, 0.5, 1}.
    """
    if frames < 1 or window < 1:
        raise ValueError("frames and window must be >= 1")
    span = window + frames - 1
    if span > history.window + history.lookback:
        raise ValueError(
            f"history retains {history.window + history.lookback} steps, need {span} "
            f"for {frames} frames of width {window}"
        )
    codes = np.full((span, N_PLAYERS), -1, dtype=np.int64)
    recent = history.recent(span)
    if recent:
        codes[: len(recent)] = recent
    idx = np.lib.stride_tricks.sliding_window_view(codes, (window, N_PLAYERS))[:, 0]
    vec = _ONE_HOT[idx].reshape(-1)
    if message is not None:
        vec = np.append(vec, message_feature(message))
    return vec


class Transition(NamedTuple):
    obs: np.ndarray
    action: int
    reward: float
    next_obs: np.ndarray
    terminal: bool


class ReplayBuffer:
    """FIFO experience memory with uniform sampling (with replacement).

    Observations are stored as uint8 twice-values, which is exact for
    one-hot entries and the {0, 0.5, 1} message feature.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._size = 0
        self._next = 0
        self._obs = self._next_obs = None
        self._actions = np.zeros(capacity, dtype=np.int8)
        self._rewards = np.zeros(capacity)
        self._terminal = np.zeros(capacity, dtype=bool)

    def __len__(self) -> int:
        return self._size

    @staticmethod
    def _pack(obs) -> np.ndarray:
        doubled = np.asarray(obs, dtype=np.float64) * 2
        packed = doubled.astype(np.uint8)
        if not np.array_equal(packed, doubled):
            raise ValueError("observation entries must be multiples of 0.5 in [0, 127]")
        return packed

    def remember(self, t: Transition) -> None:
        obs, next_obs = self._pack(t.obs), self._pack(t.next_obs)
        if obs.shape != next_obs.shape:
            raise ValueError("obs and next_obs widths differ")
        if self._obs is None:
            self._obs = np.zeros((self.capacity, obs.size), dtype=np.uint8)
            self._next_obs = np.zeros_like(self._obs)
        elif obs.size != self._obs.shape[1]:
            raise ValueError(f"observation width {obs.size} != buffer width {self._obs.shape[1]}")
        i = self._next
        self._obs[i] = obs
        self._next_obs[i] = next_obs
        self._actions[i] = int(t.action)
        self._rewards[i] = float(t.reward)
        self._terminal[i] = bool(t.terminal)
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def _order(self) -> np.ndarray:
        if self._size < self.capacity:
            return np.arange(self._size)
        return (np.arange(self.capacity) + self._next) % self.capacity

    def _get(self, idx) -> tuple:
        return (
            self._obs[idx] / 2.0,
            self._actions[idx].astype(np.int64),
            self._rewards[idx].copy(),
            self._next_obs[idx] / 2.0,
            self._terminal[idx].copy(),
        )

    def transitions(self) -> list[Transition]:
        """Contents oldest first."""
        obs, acts, rews, nxt, term = self._get(self._order())
        return [Transition(o, int(a), float(r), n, bool(d)) for o, a, r, n, d in zip(obs, acts, rews, nxt, term)]

    def sample_indices(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Positions (0 = oldest) drawn uniformly with replacement."""
        if self._size == 0:
            raise ValueError("cannot sample from an empty buffer")
        return rng.integers(self._size, size=n)

    def sample(self, n: int, rng: np.random.Generator) -> tuple:
        """(obs, actions, rewards, next_obs, terminal) arrays for ``n`` uniform draws."""
        return self._get(self._order()[self.sample_indices(n, rng)])


@dataclass
class AgentConfig:
    learning_rate: float = 0.001
    gamma: float = 0.0
    epsilon_start: float = 1.0
    epsilon_min: float = 0.01
    epsilon_decay: float = 0.95
    batch_size: int = 32
    buffer_capacity: int = 10_000
    target_sync_every: int = 300
    frames: int = 3
    window: int = 300
    hidden: tuple = (2700, 9)
    optimizer: str = "adam"
    role: Role = Role.FAIR

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        self.role = Role(self.role)
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0 <= self.gamma <= 1:
            raise ValueError("gamma must lie in [0, 1]")
        if not 0 <= self.epsilon_min <= self.epsilon_start <= 1:
            raise ValueError("need 0 <= epsilon_min <= epsilon_start <= 1")
        if not 0 < self.epsilon_decay <= 1:
            raise ValueError("epsilon_decay must lie in (0, 1]")
        for name in ("batch_size", "buffer_capacity", "target_sync_every", "frames", "window"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if any(h < 1 for h in self.hidden):
            raise ValueError("hidden widths must be positive")

    @property
    def receives_message(self) -> bool:
        return self.role is Role.CHEAT_RECEIVER

    @property
    def input_dim(self) -> int:
        return observation_width(self.frames, self.window, self.receives_message)

    @property
    def layer_dims(self) -> list[int]:
        return [self.input_dim, *self.hidden, N_ACTIONS]

    def replace(self, **changes) -> "AgentConfig":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return AgentConfig(**values)

    def to_strings(self) -> dict[str, str]:
        out = {}
        for key, value in asdict(self).items():
            if key == "hidden":
                value = ",".join(str(h) for h in value)
            elif key == "role":
                value = value.value
            out[key] = str(value)
        return out

    @classmethod
    def from_strings(cls, values: dict[str, str], base: "AgentConfig | None" = None) -> "AgentConfig":
        base = base or cls()
        known = {f.name: f for f in fields(cls)}
        changes = {}
        for key, text in values.items():
            if key not in known:
                raise ValueError(f"unknown agent key {key!r}")
            if key == "hidden":
                changes[key] = tuple(int(h) for h in text.split(",") if h.strip())
            elif key in ("optimizer", "role"):
                changes[key] = text.strip()
            elif isinstance(getattr(base, key), int) and not isinstance(getattr(base, key), bool):
                changes[key] = int(text)
            else:
                changes[key] = float(text)
        return base.replace(**changes)


def decay_epsilon(cfg: AgentConfig, episode_index: int) -> float:
    if episode_index < 0:
        raise ValueError("episode_index must be >= 0")
    return max(cfg.epsilon_min, cfg.epsilon_start * cfg.epsilon_decay ** episode_index)


def select_action(net: QNetwork, obs: np.ndarray, epsilon: float, rng: np.random.Generator) -> Action:
    """Epsilon-greedy; greedy ties go to the lowest action code."""
    if not 0 <= epsilon <= 1:
        raise ValueError("epsilon must lie in [0, 1]")
    if rng.random() < epsilon:
        return Action(int(rng.integers(N_ACTIONS)))
    return Action(int(np.argmax(net.forward(obs))))


def replay_update(net, target_net, opt, buffer: ReplayBuffer, cfg: AgentConfig, rng) -> float | None:
    """One Q-learning step on a uniform minibatch; None while the buffer is underfull."""
    if len(buffer) < cfg.batch_size:
        return None
    obs, actions, rewards, next_obs, terminal = buffer.sample(cfg.batch_size, rng)
    targets = q_targets(target_net, rewards, next_obs, terminal, cfg.gamma)
    return train_batch(net, opt, TrainBatch.for_actions(obs, actions, targets))


def q_targets(target_net: QNetwork, rewards, next_obs, terminal, gamma: float) -> np.ndarray:
    """``r`` for terminal transitions, else ``r + gamma * max_a' Q_target(s', a')``."""
    rewards = np.asarray(rewards, dtype=np.float64)
    terminal = np.asarray(terminal, dtype=bool)
    if gamma == 0 or terminal.all():
        return rewards.copy()
    best_next = target_net.forward(next_obs).max(axis=1)
    return np.where(terminal, rewards, rewards + gamma * best_next)


def maybe_sync_target(step_counter: int, cfg: AgentConfig, net: QNetwork, target_net: QNetwork) -> bool:
    if step_counter % cfg.target_sync_every == 0:
        clone_into_target(net, target_net)
        return True
    return False


def _rngs(seed, n: int) -> list[np.random.Generator]:
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in seed.spawn(n)]


class DQNAgent:
    learns = True

    def __init__(self, cfg: AgentConfig, seed=None):
        self.cfg = cfg
        init_rng, self.explore_rng, self.replay_rng = _rngs(seed, 3)
        self.net = QNetwork(cfg.layer_dims, rng=init_rng)
        self.target_net = self.net.copy()
        self.optimizer = Optimizer(cfg.optimizer, cfg.learning_rate)
        self.buffer = ReplayBuffer(cfg.buffer_capacity)
        self.steps = 0

    @property
    def receives_message(self) -> bool:
        return self.cfg.receives_message

    def epsilon(self, episode_index: int) -> float:
        return decay_epsilon(self.cfg, episode_index)

    def act(self, obs: np.ndarray, epsilon: float) -> Action:
        return select_action(self.net, obs, epsilon, self.explore_rng)

    def remember(self, t: Transition) -> None:
        self.buffer.remember(t)

    def learn(self) -> float | None:
        return replay_update(self.net, self.target_net, self.optimizer, self.buffer, self.cfg, self.replay_rng)

    def end_step(self) -> bool:
        self.steps += 1
        return maybe_sync_target(self.steps, self.cfg, self.net, self.target_net)

    def save(self, directory) -> None:
        """Checkpoint: ``network.qnet`` plus an ``agent.ini`` config section."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        save_network(self.net, directory / "network.qnet")
        parser = configparser.ConfigParser(interpolation=None)
        parser["agent"] = self.cfg.to_strings()
        with open(directory / "agent.ini", "w") as fh:
            parser.write(fh)

    @classmethod
    def load(cls, directory, seed=None) -> "DQNAgent":
        directory = Path(directory)
        parser = configparser.ConfigParser(interpolation=None)
        parser.read(directory / "agent.ini")
        cfg = AgentConfig.from_strings(dict(parser["agent"]))
        agent = cls(cfg, seed)
        net = load_network(directory / "network.qnet")
        if net.layer_dims != cfg.layer_dims:
            raise ValueError("checkpoint network does not match its agent config")
        agent.net = net
        agent.target_net = net.copy()
        return agent


@dataclass
class RandomAgent:
    """Control player: uniform random moves from its own stream."""

    rng: np.random.Generator = field(default_factory=np.random.default_rng)
    learns = False
    receives_message = False

    def epsilon(self, episode_index: int) -> float:
        return 1.0

    def act(self, obs, epsilon: float) -> Action:
        return random_policy(self.rng)


@dataclass
class FixedAgent:
    """Frozen opponent that always plays the same move."""

    action: Action = Action.ROCK
    learns = False
    receives_message = False

    def epsilon(self, episode_index: int) -> float:
        return 0.0

    def act(self, obs, epsilon: float) -> Action:
        return Action(self.action)
