"""Experimental regimes: fair play, explicit messaging and reward shaping."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .env import N_ACTIONS, N_PLAYERS, Action, RewardVector


class ModeKind(enum.Enum):
    FAIR = "fair"
    EXPLICIT = "explicit"
    IMPLICIT = "implicit"


class Role(enum.Enum):
    FAIR = "fair"
    CHEAT_SENDER = "cheat_sender"
    CHEAT_RECEIVER = "cheat_receiver"
    CHEATER = "cheater"  # colluder without a message channel (implicit mode)
    RANDOM = "random"


class Shaping(enum.Enum):
    DENOISED = "denoised"  # cheaters get +1 unless the fair agent won, then -1
    NEGATED = "negated"  # cheaters get the negated fair reward


@dataclass(frozen=True)
class Mode:
    kind: ModeKind = ModeKind.FAIR
    fair_index: int = 0
    sender: int = 1
    receiver: int = 2
    fair_is_random: bool = False
    shaping: Shaping = Shaping.DENOISED

    def __post_init__(self):
        for name in ("fair_index", "sender", "receiver"):
            if getattr(self, name) not in range(N_PLAYERS):
                raise ValueError(f"{name} must be an agent index in 0..2")
        if len({self.fair_index, self.sender, self.receiver}) != N_PLAYERS:
            raise ValueError("fair, sender and receiver indices must be distinct")
        if self.kind is ModeKind.FAIR and self.fair_is_random:
            raise ValueError("random control agent needs a colluding mode (explicit or implicit)")

    @property
    def cheater_indices(self) -> tuple[int, int]:
        return tuple(sorted((self.sender, self.receiver)))

    @property
    def has_cheaters(self) -> bool:
        return self.kind is not ModeKind.FAIR

    def role(self, agent: int) -> Role:
        if self.kind is ModeKind.FAIR:
            return Role.FAIR
        if agent == self.fair_index:
            return Role.RANDOM if self.fair_is_random else Role.FAIR
        if self.kind is ModeKind.EXPLICIT:
            return Role.CHEAT_SENDER if agent == self.sender else Role.CHEAT_RECEIVER
        return Role.CHEATER

    def tag(self) -> str:
        """Compact, comma-free mode label written into every log row."""
        if self.kind is ModeKind.FAIR:
            return "fair"
        parts = [self.kind.value, f"f{self.fair_index}"]
        if self.kind is ModeKind.EXPLICIT:
            parts += [f"s{self.sender}", f"r{self.receiver}"]
        else:
            parts.append("c" + "".join(str(i) for i in self.cheater_indices))
            if self.shaping is not Shaping.DENOISED:
                parts.append(self.shaping.value)
        if self.fair_is_random:
            parts.append("random")
        return ":".join(parts)

    @classmethod
    def from_tag(cls, tag: str) -> "Mode":
        parts = tag.strip().split(":")
        kind = ModeKind(parts[0])
        if kind is ModeKind.FAIR:
            if len(parts) != 1:
                raise ValueError(f"bad mode tag {tag!r}")
            return cls()
        fields: dict = {"kind": kind}
        for p in parts[1:]:
            if p == "random":
                fields["fair_is_random"] = True
            elif p in (s.value for s in Shaping):
                fields["shaping"] = Shaping(p)
            elif p[0] == "f":
                fields["fair_index"] = int(p[1:])
            elif p[0] == "s":
                fields["sender"] = int(p[1:])
            elif p[0] == "r":
                fields["receiver"] = int(p[1:])
            elif p[0] == "c" and len(p) == 3:
                fields["sender"], fields["receiver"] = int(p[1]), int(p[2])
            else:
                raise ValueError(f"bad mode tag {tag!r}")
        return cls(**fields)


@dataclass(frozen=True)
class StepPlan:
    """Order in which agents pick actions within one step."""

    order: tuple[int, ...]
    message_edge: tuple[int, int] | None  # (sender, receiver)
    shaping: bool


def step_order(mode: Mode) -> StepPlan:
    if mode.kind is ModeKind.EXPLICIT:
        # the sender commits first, the receiver sees the message, the fair agent is independent
        return StepPlan((mode.sender, mode.receiver, mode.fair_index), (mode.sender, mode.receiver), False)
    return StepPlan(tuple(range(N_PLAYERS)), None, mode.kind is ModeKind.IMPLICIT)


def shape_rewards(mode: Mode, raw: RewardVector) -> RewardVector:
    """Training rewards. Identity except for the cheaters in implicit mode."""
    if mode.kind is not ModeKind.IMPLICIT:
        return raw
    fair = raw.halves[mode.fair_index]
    if mode.shaping is Shaping.DENOISED:
        cheat = 2 if fair <= 0 else -2
    else:
        cheat = -fair
    halves = [cheat] * N_PLAYERS
    halves[mode.fair_index] = fair
    return RewardVector(tuple(halves))


def message_feature(action: int) -> float:
    """Receiver input for a message: action code scaled onto {0, 0.5, 1}."""
    return int(Action(int(action))) / (N_ACTIONS - 1)


def random_policy(rng: np.random.Generator) -> Action:
    return Action(int(rng.integers(N_ACTIONS)))
