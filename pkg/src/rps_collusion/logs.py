"""Step log records and their CSV form.

One UTF-8 CSV per run with header::

    run_id,lr,episode,step,a0,a1,a2,r0,r1,r2,sr0,sr1,sr2,eps0,eps1,eps2,msg,mode

Actions are integer codes (0 Rock, 1 Paper, 2 Scissors). Raw (``r*``) and
shaped (``sr*``) rewards are exact decimals (-1, 0, 0.5, 1, 2). ``msg`` is
empty outside explicit mode. ``mode`` is the tag from :meth:`Mode.tag`.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from .env import REWARD_TABLE, format_half, parse_reward

HEADER = [
    "run_id", "lr", "episode", "step",
    "a0", "a1", "a2", "r0", "r1", "r2", "sr0", "sr1", "sr2",
    "eps0", "eps1", "eps2", "msg", "mode",
]


class LogFormatError(ValueError):
    """A malformed or inconsistent log row; message carries file and line."""


@dataclass(frozen=True)
class StepRecord:
    run_id: int
    lr: float
    episode: int
    step: int
    actions: tuple[int, int, int]
    raw_halves: tuple[int, int, int]
    shaped_halves: tuple[int, int, int]
    epsilons: tuple[float, float, float]
    message: int | None
    mode: str

    @property
    def raw(self) -> tuple[float, float, float]:
        return tuple(h / 2 for h in self.raw_halves)

    @property
    def shaped(self) -> tuple[float, float, float]:
        return tuple(h / 2 for h in self.shaped_halves)

    def to_row(self) -> list[str]:
        return [
            str(self.run_id), repr(self.lr), str(self.episode), str(self.step),
            *(str(a) for a in self.actions),
            *(format_half(h) for h in self.raw_halves),
            *(format_half(h) for h in self.shaped_halves),
            *(repr(float(e)) for e in self.epsilons),
            "" if self.message is None else str(self.message),
            self.mode,
        ]

    @classmethod
    def from_row(cls, row: list[str]) -> "StepRecord":
        if len(row) != len(HEADER):
            raise ValueError(f"expected {len(HEADER)} fields, got {len(row)}")
        actions = tuple(int(x) for x in row[4:7])
        if any(a not in (0, 1, 2) for a in actions):
            raise ValueError(f"illegal action code in {actions}")
        raw = tuple(parse_reward(x) for x in row[7:10])
        if raw != REWARD_TABLE[actions].halves:
            raise ValueError(f"raw rewards {row[7:10]} do not match actions {actions}")
        return cls(
            run_id=int(row[0]),
            lr=float(row[1]),
            episode=int(row[2]),
            step=int(row[3]),
            actions=actions,
            raw_halves=raw,
            shaped_halves=tuple(parse_reward(x) for x in row[10:13]),
            epsilons=tuple(float(x) for x in row[13:16]),
            message=int(row[16]) if row[16] != "" else None,
            mode=row[17],
        )


class LogWriter:
    """Append-only CSV writer for one run."""

    def __init__(self, path):
        self.path = Path(path)
        self._fh = open(self.path, "w", newline="", encoding="utf-8")
        self._writer = csv.writer(self._fh, lineterminator="\n")
        self._writer.writerow(HEADER)
        self.count = 0

    def write(self, records: Iterable[StepRecord]) -> None:
        for rec in records:
            self._writer.writerow(rec.to_row())
            self.count += 1
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_log(path) -> Iterator[StepRecord]:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != HEADER:
            raise LogFormatError(f"{path}:1: bad header {header!r}")
        for row in reader:
            try:
                yield StepRecord.from_row(row)
            except ValueError as err:
                raise LogFormatError(f"{path}:{reader.line_num}: {err}") from None
