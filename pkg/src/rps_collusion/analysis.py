"""Offline analysis of step logs: episode metrics, periodicity, learning stages
and the plot-ready reward distributions.

Stage thresholds (all overridable through :class:`StageThresholds`):

===========================  =======  =========================================
name                         default  meaning
===========================  =======  =========================================
exploration_epsilon          0.5      epsilon above this -> Stage1
entropy_margin               0.15     every agent within this many bits of
                                      log2(3) -> Stage1
zero_reward                  0.1      every |mean reward| below this -> Stage3
dominance_margin             0.1      best agent ahead of the runner-up by at
                                      least this -> Stage2
repetition_stage2            0.6      any repetition rate above this -> Stage2
repetition_stage3a           0.8      some agent's mean repetition rate over a
                                      Stage3 segment above this -> Stage3a
min_segment                  3        shorter runs of episodes are absorbed
                                      by their predecessor
period_match                 0.9      fraction of lag-p matches for a period
===========================  =======  =========================================
"""
from __future__ import annotations

import csv
import enum
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .env import N_PLAYERS
from .logs import LogFormatError, StepRecord, read_log
from .modes import Mode

MAX_ENTROPY = math.log2(3)


@dataclass(frozen=True)
class StageThresholds:
    exploration_epsilon: float = 0.5
    entropy_margin: float = 0.15
    zero_reward: float = 0.1
    dominance_margin: float = 0.1
    repetition_stage2: float = 0.6
    repetition_stage3a: float = 0.8
    min_segment: int = 3
    period_match: float = 0.9
    alternation_periods: tuple = (2, 3)


DEFAULT_THRESHOLDS = StageThresholds()


class Stage(enum.Enum):
    STAGE1 = "Stage1"
    STAGE2 = "Stage2"
    STAGE3A = "Stage3a"
    STAGE3B = "Stage3b"


@dataclass(frozen=True)
class StageLabel:
    label: Stage
    first_episode: int
    last_episode: int


@dataclass(frozen=True)
class EpisodeStats:
    episode: int
    mean_reward: tuple
    repetition_rate: tuple
    entropy: tuple
    big_wins: tuple
    displacement_index: float
    dominant_period: tuple
    epsilon: float


def action_entropy(actions: Sequence[int]) -> float:
    """Empirical entropy of an action sequence in bits."""
    counts = np.bincount(np.asarray(actions, dtype=np.int64), minlength=3)
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log2(p)).sum()) + 0.0


def repetition_rate(actions: Sequence[int]) -> float:
    """Share of steps (after the first) that repeat the previous action."""
    a = np.asarray(actions)
    if len(a) < 2:
        return 0.0
    return float(np.mean(a[1:] == a[:-1]))


def detect_period(actions: Sequence[int], max_period: int, threshold: float = 0.9) -> int | None:
    """Smallest lag p <= max_period with a[t] == a[t-p] for at least ``threshold`` of t."""
    if max_period < 1:
        raise ValueError("max_period must be >= 1")
    a = np.asarray(actions)
    if len(a) < 3 * max_period:
        raise ValueError(f"need at least {3 * max_period} actions, got {len(a)}")
    for p in range(1, max_period + 1):
        if np.mean(a[p:] == a[:-p]) >= threshold:
            return p
    return None


def episode_stats(records: Sequence[StepRecord], mode: Mode | None = None, max_period: int = 6,
                  shaped: bool = False, thresholds: StageThresholds = DEFAULT_THRESHOLDS) -> EpisodeStats:
    if not records:
        raise ValueError("no records")
    first = records[0]
    steps = [r.step for r in records]
    if any(r.episode != first.episode or r.run_id != first.run_id for r in records):
        raise ValueError("records span more than one run/episode")
    if any(b <= a for a, b in zip(steps, steps[1:])):
        raise ValueError("records are not sorted by step")
    mode = mode or Mode.from_tag(first.mode)
    actions = np.array([r.actions for r in records])
    raw = np.array([r.raw_halves for r in records]) / 2
    rewards = np.array([r.shaped_halves for r in records]) / 2 if shaped else raw
    means = rewards.mean(axis=0)
    if mode.has_cheaters:
        cheat = np.mean([means[i] for i in mode.cheater_indices])
        displacement = float(cheat - means[mode.fair_index])
    else:
        displacement = 0.0
    periods = tuple(
        detect_period(actions[:, i], max_period, thresholds.period_match) if len(actions) >= 3 * max_period else None
        for i in range(N_PLAYERS)
    )
    learner_eps = [first.epsilons[i] for i in range(N_PLAYERS) if mode.role(i).value != "random"]
    return EpisodeStats(
        episode=first.episode,
        mean_reward=tuple(float(m) + 0.0 for m in means),
        repetition_rate=tuple(repetition_rate(actions[:, i]) for i in range(N_PLAYERS)),
        entropy=tuple(action_entropy(actions[:, i]) for i in range(N_PLAYERS)),
        big_wins=tuple(int(np.sum(raw[:, i] == 2)) for i in range(N_PLAYERS)),
        displacement_index=displacement + 0.0,
        dominant_period=periods,
        epsilon=max(learner_eps) if learner_eps else 0.0,
    )


def _classify(stats: EpisodeStats, eps: float, th: StageThresholds, previous: int) -> int:
    if eps > th.exploration_epsilon or all(MAX_ENTROPY - h <= th.entropy_margin for h in stats.entropy):
        return 1
    if all(abs(m) < th.zero_reward for m in stats.mean_reward):
        return 3
    ordered = sorted(stats.mean_reward, reverse=True)
    if ordered[0] - ordered[1] >= th.dominance_margin or max(stats.repetition_rate) > th.repetition_stage2:
        return 2
    return previous


def _segments(labels: list[int]) -> list[list[int]]:
    segs: list[list[int]] = []
    for i, lab in enumerate(labels):
        if segs and segs[-1][0] == lab:
            segs[-1][2] = i
        else:
            segs.append([lab, i, i])
    return segs


def _merge_equal(segs: list[list[int]]) -> list[list[int]]:
    out: list[list[int]] = []
    for seg in segs:
        if out and out[-1][0] == seg[0]:
            out[-1][2] = seg[2]
        else:
            out.append(list(seg))
    return out


def _smooth(segs: list[list[int]], min_len: int) -> list[list[int]]:
    while len(segs) > 1:
        short = next((i for i, s in enumerate(segs) if s[2] - s[1] + 1 < min_len), None)
        if short is None:
            break
        neighbour = short - 1 if short > 0 else 1
        segs[short][0] = segs[neighbour][0]
        segs = _merge_equal(segs)
    return segs


def label_stages(stats: Sequence[EpisodeStats], epsilons: Sequence[float] | None = None,
                 thresholds: StageThresholds = DEFAULT_THRESHOLDS) -> list[StageLabel]:
    """Segment a run's episodes into Stage1 / Stage2 / Stage3a / Stage3b.

    Episodes are classified one by one, segments shorter than
    ``min_segment`` are absorbed by their predecessor, and the sequence is
    made monotone (a run never falls back to an earlier stage).
    """
    if not stats:
        raise ValueError("empty episode series")
    episodes = [s.episode for s in stats]
    if episodes != list(range(episodes[0], episodes[0] + len(episodes))):
        raise ValueError("episode series is not contiguous")
    if epsilons is None:
        epsilons = [s.epsilon for s in stats]
    if len(epsilons) != len(stats):
        raise ValueError("epsilon schedule length differs from the episode series")

    labels, previous = [], 1
    for s, eps in zip(stats, epsilons):
        previous = _classify(s, eps, thresholds, previous)
        labels.append(previous)
    segs = _smooth(_segments(labels), thresholds.min_segment)
    highest = 1
    for seg in segs:
        highest = max(highest, seg[0])
        seg[0] = highest
    segs = _merge_equal(segs)

    out = []
    for lab, lo, hi in segs:
        if lab == 1:
            stage = Stage.STAGE1
        elif lab == 2:
            stage = Stage.STAGE2
        else:
            rep = np.mean([stats[i].repetition_rate for i in range(lo, hi + 1)], axis=0)
            stage = Stage.STAGE3A if rep.max() > thresholds.repetition_stage3a else Stage.STAGE3B
        out.append(StageLabel(stage, episodes[lo], episodes[hi]))
    return out


@dataclass
class RunAnalysis:
    run_id: int
    lr: float
    mode: Mode
    stats: list[EpisodeStats] = field(default_factory=list)
    stages: list[StageLabel] = field(default_factory=list)

    def mean_rewards(self) -> np.ndarray:
        """(episodes, 3) array of per-episode mean rewards."""
        return np.array([s.mean_reward for s in self.stats]).reshape(-1, N_PLAYERS)


def analyze_run(records: Sequence[StepRecord], max_period: int = 6, shaped: bool = False,
                thresholds: StageThresholds = DEFAULT_THRESHOLDS) -> RunAnalysis:
    if not records:
        raise ValueError("run log has no records")
    first = records[0]
    if any(r.run_id != first.run_id or r.mode != first.mode for r in records):
        raise ValueError("log mixes runs or modes")
    mode = Mode.from_tag(first.mode)
    by_episode: dict[int, list[StepRecord]] = defaultdict(list)
    for r in records:
        by_episode[r.episode].append(r)
    episodes = sorted(by_episode)
    if episodes != list(range(len(episodes))):
        raise ValueError(f"run {first.run_id}: episodes are not contiguous from 0")
    stats = [episode_stats(by_episode[e], mode, max_period, shaped, thresholds) for e in episodes]
    return RunAnalysis(first.run_id, first.lr, mode, stats, label_stages(stats, thresholds=thresholds))


def reward_distribution(runs: Sequence[RunAnalysis], bucket: int = 1) -> list[dict]:
    """Five-number summaries across runs of per-episode mean reward.

    Grouped by (learning rate, episode bucket, agent); a run contributes its
    average over the episodes of the bucket.
    """
    if bucket < 1:
        raise ValueError("bucket must be >= 1")
    groups: dict[tuple, list[float]] = defaultdict(list)
    for run in runs:
        means = run.mean_rewards()
        for b in range(0, len(means), bucket):
            chunk = means[b:b + bucket].mean(axis=0)
            for agent in range(N_PLAYERS):
                groups[(run.lr, b // bucket, agent)].append(float(chunk[agent]))
    rows = []
    for (lr, b, agent) in sorted(groups):
        q = np.quantile(groups[(lr, b, agent)], [0, 0.25, 0.5, 0.75, 1.0])
        rows.append({"lr": lr, "episode_bucket": b, "agent": agent,
                     "min": q[0], "q1": q[1], "median": q[2], "q3": q[3], "max": q[4]})
    return rows


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x) + 0.0:.10g}"


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) if not isinstance(v, str) else v for v in row])


def load_runs(input_dir, max_period: int = 6, shaped: bool = False,
              thresholds: StageThresholds = DEFAULT_THRESHOLDS) -> list[RunAnalysis]:
    input_dir = Path(input_dir)
    if not input_dir.is_dir():
        raise FileNotFoundError(f"{input_dir} is not a directory")
    paths = sorted(input_dir.glob("run_*.csv"))
    if not paths:
        raise FileNotFoundError(f"no run_*.csv logs in {input_dir}")
    runs = []
    for path in paths:
        records = list(read_log(path))
        try:
            runs.append(analyze_run(records, max_period, shaped, thresholds))
        except ValueError as err:
            raise LogFormatError(f"{path}: {err}") from None
    return runs


def stage_report(runs: Sequence[RunAnalysis]) -> str:
    lines = ["Learning stage report", "=" * 21, ""]
    for run in runs:
        means = run.mean_rewards()
        lines.append(f"run {run.run_id}  lr={run.lr!r}  mode={run.mode.tag()}  episodes={len(run.stats)}")
        for st in run.stages:
            lines.append(f"  {st.label.value:<8} episodes {st.first_episode}-{st.last_episode}")
        lines.append("  mean reward per agent: " + " ".join(_fmt(m) for m in means.mean(axis=0)))
        tail = means[-10:].mean(axis=0)
        lines.append("  last 10 episodes:      " + " ".join(_fmt(m) for m in tail))
        if run.mode.has_cheaters:
            disp = np.mean([s.displacement_index for s in run.stats])
            lines.append(f"  mean displacement index: {_fmt(disp)}")
        lines.append("")
    return "\n".join(lines)


def write_outputs(runs: Sequence[RunAnalysis], report_path, plot_dir, bucket: int = 1) -> list[Path]:
    """Stage report (text + CSV) and plot-data CSVs; returns the paths written."""
    report_path = Path(report_path)
    plot_dir = Path(plot_dir)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    plot_dir.mkdir(parents=True, exist_ok=True)
    written = []

    report_path.write_text(stage_report(runs), encoding="utf-8")
    written.append(report_path)
    stage_csv = report_path.with_suffix(".csv")
    _write_csv(stage_csv, ["run_id", "stage", "first_episode", "last_episode"],
               ([r.run_id, st.label.value, st.first_episode, st.last_episode] for r in runs for st in r.stages))
    written.append(stage_csv)

    header = ["lr", "episode_bucket", "agent", "min", "q1", "median", "q3", "max"]
    rows = reward_distribution(runs, bucket)
    for lr in sorted({r.lr for r in runs}):
        path = plot_dir / f"reward_distribution_lr{lr!r}.csv"
        _write_csv(path, header, ([row[k] for k in header] for row in rows if row["lr"] == lr))
        written.append(path)

    def displacement_rows():
        for run in runs:
            f = run.mode.fair_index
            c1, c2 = run.mode.cheater_indices
            for s in run.stats:
                yield [run.run_id, s.episode, s.displacement_index, s.big_wins[f], s.big_wins[c1], s.big_wins[c2]]

    path = plot_dir / "displacement.csv"
    _write_csv(path, ["run_id", "episode", "displacement_index", "bigwin_f", "bigwin_c1", "bigwin_c2"],
               displacement_rows())
    written.append(path)

    def stats_rows():
        for run in runs:
            for s in run.stats:
                yield [run.run_id, run.lr, s.episode, s.epsilon, *s.mean_reward, *s.repetition_rate,
                       *s.entropy, *s.big_wins, *("" if p is None else str(p) for p in s.dominant_period)]

    path = plot_dir / "episode_stats.csv"
    _write_csv(path, ["run_id", "lr", "episode", "epsilon", "mean_r0", "mean_r1", "mean_r2",
                      "rep0", "rep1", "rep2", "entropy0", "entropy1", "entropy2",
                      "bigwin0", "bigwin1", "bigwin2", "period0", "period1", "period2"], stats_rows())
    written.append(path)
    return written


def analyze_directory(input_dir, report_path=None, plot_dir=None, max_period: int = 6,
                      bucket: int = 1, shaped: bool = False) -> list[Path]:
    input_dir = Path(input_dir)
    runs = load_runs(input_dir, max_period, shaped)
    report_path = Path(report_path) if report_path else input_dir / "stage_report.txt"
    plot_dir = Path(plot_dir) if plot_dir else input_dir / "plot_data"
    return write_outputs(runs, report_path, plot_dir, bucket)
