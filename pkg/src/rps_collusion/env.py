"""Three-player rock-paper-scissors.

Action codes are fixed everywhere (docs, logs, network inputs)::

    0 = Rock, 1 = Paper, 2 = Scissors

Payoffs per joint action:

    all three equal / all three distinct   ->  (0, 0, 0)
    lone action beats the pair             ->  lone agent 2, others -1
    lone action loses to the pair          ->  lone agent -1, others 0.5

Rewards are kept as integer *halves* so every zero-sum check is exact;
they become floats only when handed to a network.
"""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

N_PLAYERS = 3
N_ACTIONS = 3


class Action(enum.IntEnum):
    ROCK = 0
    PAPER = 1
    SCISSORS = 2

    @property
    def symbol(self) -> str:
        return "RPS"[self]


ACTION_NAMES = {a.value: a.name.capitalize() for a in Action}


def beats(a: int, b: int) -> bool:
    """True if action ``a`` defeats action ``b`` (Paper>Rock, Rock>Scissors, Scissors>Paper)."""
    return (int(a) - int(b)) % 3 == 1


class JointAction(tuple):
    """Ordered (agent 0, agent 1, agent 2) triple of actions."""

    def __new__(cls, actions: Iterable[int]):
        acts = tuple(Action(int(a)) for a in actions)
        if len(acts) != N_PLAYERS:
            raise ValueError(f"joint action needs {N_PLAYERS} entries, got {len(acts)}")
        return super().__new__(cls, acts)

    def __repr__(self) -> str:
        return "JointAction(" + ",".join(a.symbol for a in self) + ")"


class OutcomeKind(enum.Enum):
    ALL_SAME = "all_same"
    ALL_DISTINCT = "all_distinct"
    SINGLE_WINNER = "single_winner"
    SINGLE_LOSER = "single_loser"


@dataclass(frozen=True)
class Outcome:
    kind: OutcomeKind
    index: int | None = None  # the odd-one-out agent for SINGLE_*


def classify_outcome(joint: Sequence[int]) -> Outcome:
    a, b, c = (int(x) for x in joint)
    if a == b == c:
        return Outcome(OutcomeKind.ALL_SAME)
    if len({a, b, c}) == 3:
        return Outcome(OutcomeKind.ALL_DISTINCT)
    if a == b:
        lone, pair = 2, a
    elif a == c:
        lone, pair = 1, a
    else:
        lone, pair = 0, b
    lone_action = (a, b, c)[lone]
    if beats(lone_action, pair):
        return Outcome(OutcomeKind.SINGLE_WINNER, lone)
    return Outcome(OutcomeKind.SINGLE_LOSER, lone)


@dataclass(frozen=True)
class RewardVector:
    """Per-agent rewards stored as integer halves: ``halves=(4, -2, -2)`` is (2, -1, -1)."""

    halves: tuple[int, int, int]

    def __post_init__(self):
        if len(self.halves) != N_PLAYERS:
            raise ValueError("reward vector needs 3 entries")

    @classmethod
    def from_values(cls, values: Iterable[float]) -> "RewardVector":
        halves = []
        for v in values:
            h = float(v) * 2
            if h != int(h):
                raise ValueError(f"reward {v!r} is not a multiple of 0.5")
            halves.append(int(h))
        return cls(tuple(halves))

    def __getitem__(self, i: int) -> float:
        return self.halves[i] / 2

    def __iter__(self) -> Iterator[float]:
        return (h / 2 for h in self.halves)

    def __len__(self) -> int:
        return N_PLAYERS

    def values(self) -> tuple[float, float, float]:
        return tuple(h / 2 for h in self.halves)

    def is_zero_sum(self) -> bool:
        return sum(self.halves) == 0

    def format(self) -> list[str]:
        """Exact decimal strings, e.g. ``['2', '-1', '-1']`` or ``['-1', '0.5', '0.5']``."""
        return [format_half(h) for h in self.halves]


def format_half(h: int) -> str:
    if h % 2 == 0:
        return str(h // 2)
    return f"{h / 2:g}"


def parse_reward(text: str) -> int:
    """Inverse of :func:`format_half`; returns halves."""
    value = float(text) * 2
    if value != int(value):
        raise ValueError(f"reward {text!r} is not a multiple of 0.5")
    return int(value)


def reward(joint: Sequence[int]) -> RewardVector:
    outcome = classify_outcome(joint)
    if outcome.kind is OutcomeKind.SINGLE_WINNER:
        halves = [-2, -2, -2]
        halves[outcome.index] = 4
    elif outcome.kind is OutcomeKind.SINGLE_LOSER:
        halves = [1, 1, 1]
        halves[outcome.index] = -2
    else:
        halves = [0, 0, 0]
    return RewardVector(tuple(halves))


# All 27 outcomes precomputed; reward() stays the reference path.
REWARD_TABLE = {
    (a, b, c): reward((a, b, c))
    for a in range(N_ACTIONS) for b in range(N_ACTIONS) for c in range(N_ACTIONS)
}


class GameHistory:
    """Rolling window of the last ``window`` joint actions, newest first on read-out.

    ``lookback`` extra entries are retained so the window can also be
    reconstructed as it stood up to ``lookback`` steps ago (frame stacking).
    ``len()`` and :meth:`window_entries` only ever expose ``window`` entries.
    """

    def __init__(self, window: int, lookback: int = 0):
        if window < 1:
            raise ValueError("window must be >= 1")
        if lookback < 0:
            raise ValueError("lookback must be >= 0")
        self.window = window
        self.lookback = lookback
        self._entries: deque[tuple[int, int, int]] = deque(maxlen=window + lookback)
        self.total_pushed = 0

    @property
    def fill_count(self) -> int:
        return min(self.total_pushed, self.window)

    def __len__(self) -> int:
        return self.fill_count

    def push(self, joint: Sequence[int]) -> "GameHistory":
        self._entries.append(tuple(int(Action(int(a))) for a in JointAction(joint)))
        self.total_pushed += 1
        return self

    def clear(self) -> None:
        self._entries.clear()
        self.total_pushed = 0

    def window_entries(self, steps_ago: int = 0) -> list[tuple[int, int, int]]:
        """The window as it stood ``steps_ago`` pushes earlier, newest first."""
        if steps_ago > self.lookback:
            raise ValueError(f"only {self.lookback} steps of lookback retained")
        entries = list(self._entries)
        end = len(entries) - steps_ago
        if end <= 0:
            return []
        return entries[max(0, end - self.window):end][::-1]

    def recent(self, n: int) -> list[tuple[int, int, int]]:
        """Up to ``n`` retained entries, newest first."""
        entries = list(self._entries)
        return entries[::-1][:n]


def push_history(history: GameHistory, joint: Sequence[int]) -> GameHistory:
    return history.push(joint)


class RPSEnv:
    """The environment: current joint action, payoffs and the shared history."""

    def __init__(self, window: int, lookback: int = 0):
        self.history = GameHistory(window, lookback)
        self.last_joint: JointAction | None = None

    def step(self, joint: Sequence[int]) -> RewardVector:
        joint = JointAction(joint)
        self.last_joint = joint
        self.history.push(joint)
        return REWARD_TABLE[tuple(int(a) for a in joint)]

    def reset(self) -> None:
        self.history.clear()
        self.last_joint = None
