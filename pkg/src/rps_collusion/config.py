"""Experiment configuration, scale presets and the INI config file format.

Config files are INI with three sections; every key is optional and
overrides the chosen scale preset::

    [experiment]
    scale = desk                  ; desk | paper
    runs_per_lr = 2
    control_runs_per_lr = 2       ; runs per lr when the fair agent is random
    learning_rates = 0.005        ; comma separated
    episodes = 20
    steps_per_episode = 100
    base_seed = 0
    output_dir = logs

    [mode]
    kind = implicit               ; fair | explicit | implicit
    fair_index = 0
    sender = 1
    receiver = 2
    fair_is_random = false
    shaping = denoised            ; denoised | negated

    [agent]
    gamma = 0.0
    epsilon_start = 1.0
    epsilon_min = 0.01
    epsilon_decay = 0.9
    batch_size = 32
    buffer_capacity = 10000
    target_sync_every = 100
    frames = 3
    window = 20
    hidden = 128,9
    optimizer = adam
"""
from __future__ import annotations

import configparser
import enum
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .agent import AgentConfig
from .modes import Mode, ModeKind, Shaping


class Scale(enum.Enum):
    DESK = "desk"
    PAPER = "paper"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    mode: Mode = field(default_factory=Mode)
    runs_per_lr: int = 2
    control_runs_per_lr: int = 2
    learning_rates: tuple = (0.005,)
    episodes: int = 20
    steps_per_episode: int = 100
    agent: AgentConfig = field(default_factory=lambda: desk_agent())
    base_seed: int = 0
    output_dir: str = "logs"
    scale: Scale = Scale.DESK

    def __post_init__(self):
        object.__setattr__(self, "learning_rates", tuple(float(x) for x in self.learning_rates))
        if not self.learning_rates or min(self.learning_rates) <= 0:
            raise ConfigError("learning_rates must be a non-empty list of positive values")
        for name in ("runs_per_lr", "control_runs_per_lr", "episodes", "steps_per_episode"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be a positive integer")

    @property
    def effective_runs_per_lr(self) -> int:
        return self.control_runs_per_lr if self.mode.fair_is_random else self.runs_per_lr

    @property
    def total_runs(self) -> int:
        return self.effective_runs_per_lr * len(self.learning_rates)

    @property
    def total_games(self) -> int:
        return self.total_runs * self.episodes * self.steps_per_episode

    def run_id(self, lr_index: int, run_index: int) -> int:
        return lr_index * self.effective_runs_per_lr + run_index

    def to_parser(self) -> configparser.ConfigParser:
        parser = configparser.ConfigParser(interpolation=None)
        parser["experiment"] = {
            "scale": self.scale.value,
            "runs_per_lr": str(self.runs_per_lr),
            "control_runs_per_lr": str(self.control_runs_per_lr),
            "learning_rates": ",".join(repr(x) for x in self.learning_rates),
            "episodes": str(self.episodes),
            "steps_per_episode": str(self.steps_per_episode),
            "base_seed": str(self.base_seed),
            "output_dir": str(self.output_dir),
        }
        m = self.mode
        parser["mode"] = {
            "kind": m.kind.value,
            "fair_index": str(m.fair_index),
            "sender": str(m.sender),
            "receiver": str(m.receiver),
            "fair_is_random": str(m.fair_is_random).lower(),
            "shaping": m.shaping.value,
        }
        agent = self.agent.to_strings()
        for per_run in ("learning_rate", "role"):
            agent.pop(per_run)
        parser["agent"] = agent
        return parser


def desk_agent() -> AgentConfig:
    # shorter horizon, so exploration decays faster
    return AgentConfig(window=20, frames=3, hidden=(128, 9), target_sync_every=100,
                       learning_rate=0.005, epsilon_decay=0.9)


def paper_agent() -> AgentConfig:
    return AgentConfig(window=300, frames=3, hidden=(2700, 9), target_sync_every=300)


def preset(scale: Scale | str, mode: Mode | None = None) -> ExperimentConfig:
    scale = Scale(scale)
    mode = mode or Mode()
    if scale is Scale.PAPER:
        return ExperimentConfig(
            mode=mode,
            runs_per_lr=10,
            control_runs_per_lr=5,
            learning_rates=(0.001, 0.005, 0.01),
            episodes=100,
            steps_per_episode=300,
            agent=paper_agent(),
            scale=scale,
        )
    return ExperimentConfig(mode=mode, scale=scale)


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def apply_overrides(cfg: ExperimentConfig, experiment: dict, mode: dict, agent: dict) -> ExperimentConfig:
    """Apply string-valued overrides, section by section."""
    try:
        mode_fields = {
            "kind": cfg.mode.kind, "fair_index": cfg.mode.fair_index, "sender": cfg.mode.sender,
            "receiver": cfg.mode.receiver, "fair_is_random": cfg.mode.fair_is_random,
            "shaping": cfg.mode.shaping,
        }
        for key, text in mode.items():
            if key == "kind":
                mode_fields[key] = ModeKind(text.strip())
            elif key == "shaping":
                mode_fields[key] = Shaping(text.strip())
            elif key == "fair_is_random":
                mode_fields[key] = _bool(text)
            elif key in ("fair_index", "sender", "receiver"):
                mode_fields[key] = int(text)
            else:
                raise ConfigError(f"unknown [mode] key {key!r}")
        new_mode = Mode(**mode_fields)

        exp = {}
        known = {f.name for f in fields(ExperimentConfig)} - {"mode", "agent"}
        for key, text in experiment.items():
            if key not in known:
                raise ConfigError(f"unknown [experiment] key {key!r}")
            if key == "learning_rates":
                exp[key] = tuple(float(x) for x in str(text).split(",") if x.strip())
            elif key == "scale":
                exp[key] = Scale(text.strip())
            elif key == "output_dir":
                exp[key] = str(text)
            else:
                exp[key] = int(text)

        for per_run in ("learning_rate", "role"):
            if per_run in agent:
                raise ConfigError(f"[agent] {per_run} is set per run, not in the config")
        new_agent = AgentConfig.from_strings(agent, cfg.agent)
        return replace(cfg, mode=new_mode, agent=new_agent, **exp)
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as err:
        raise ConfigError(str(err)) from None


def read_config_file(path) -> dict[str, dict[str, str]]:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    unknown = set(parser.sections()) - {"experiment", "mode", "agent"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    return {s: dict(parser[s]) if parser.has_section(s) else {} for s in ("experiment", "mode", "agent")}


def load_config(path=None, scale: str | None = None) -> ExperimentConfig:
    """Preset (from ``scale``, else the file's scale, else desk) overlaid with the file."""
    sections = read_config_file(path) if path else {"experiment": {}, "mode": {}, "agent": {}}
    chosen = scale or sections["experiment"].get("scale", "desk")
    try:
        base = preset(chosen)
    except ValueError as err:
        raise ConfigError(str(err)) from None
    return apply_overrides(base, sections["experiment"], sections["mode"], sections["agent"])


def write_config_file(cfg: ExperimentConfig, path) -> None:
    with open(Path(path), "w", encoding="utf-8") as fh:
        cfg.to_parser().write(fh)


def protocol_summary(cfg: ExperimentConfig) -> dict:
    """Run and game counts of a scenario, including its random-control campaign."""
    lrs = len(cfg.learning_rates)
    per_run = cfg.episodes * cfg.steps_per_episode
    runs = cfg.runs_per_lr * lrs
    control = cfg.control_runs_per_lr * lrs if cfg.mode.has_cheaters else 0
    return {
        "mode": cfg.mode.tag(),
        "learning_rates": list(cfg.learning_rates),
        "runs_per_lr": cfg.runs_per_lr,
        "runs": runs,
        "episodes": cfg.episodes,
        "steps_per_episode": cfg.steps_per_episode,
        "games": runs * per_run,
        "control_runs_per_lr": cfg.control_runs_per_lr if control else 0,
        "control_runs": control,
        "control_games": control * per_run,
        "campaign": "control" if cfg.mode.fair_is_random else "main",
        "campaign_runs": cfg.total_runs,
        "campaign_games": cfg.total_games,
        "input_width": cfg.agent.input_dim,
        "layer_dims": cfg.agent.layer_dims,
    }
