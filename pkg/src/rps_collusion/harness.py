"""Seeded training campaigns and step logging.

Seeds: every agent of a run gets ``SeedSequence(base_seed,
spawn_key=(lr_index, run_index, agent_index))``; its children 0..3 seed,
in order, network init, exploration, replay sampling and the random
control policy. Any single run can therefore be replayed in isolation.
"""
from __future__ import annotations

import configparser
import logging
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .agent import DQNAgent, RandomAgent, Transition, encode_observation
from .config import ExperimentConfig
from .env import RPSEnv
from .logs import LogWriter, StepRecord
from .modes import Mode, Role, message_feature, shape_rewards, step_order
from .network import DivergenceError

log = logging.getLogger(__name__)

RANDOM_POLICY_STREAM = 3


def agent_seed(base_seed: int, lr_index: int, run_index: int, agent_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(base_seed, spawn_key=(lr_index, run_index, agent_index))


def build_agents(cfg: ExperimentConfig, lr_index: int, run_index: int) -> list:
    lr = cfg.learning_rates[lr_index]
    agents = []
    for i in range(3):
        seed = agent_seed(cfg.base_seed, lr_index, run_index, i)
        role = cfg.mode.role(i)
        if role is Role.RANDOM:
            stream = seed.spawn(RANDOM_POLICY_STREAM + 1)[RANDOM_POLICY_STREAM]
            agents.append(RandomAgent(np.random.default_rng(stream)))
        else:
            agents.append(DQNAgent(cfg.agent.replace(learning_rate=lr, role=role), seed))
    return agents


def make_env(cfg: ExperimentConfig) -> RPSEnv:
    return RPSEnv(cfg.agent.window, lookback=cfg.agent.frames - 1)


def play_episode(agents, env: RPSEnv, mode: Mode, episode_index: int, steps: int,
                 run_id: int = 0, lr: float = 0.0) -> list[StepRecord]:
    """Play ``steps`` games, feeding transitions to and training every learning agent.

    The environment history carries over from earlier episodes. A
    transition is stored once the agent's next observation exists, so the
    receiver's next input already holds the next message; the final step
    is stored as terminal straight away.
    """
    plan = step_order(mode)
    frames = env.history.lookback + 1
    window = env.history.window
    sender, receiver = plan.message_edge or (None, None)
    epsilons = tuple(float(a.epsilon(episode_index)) for a in agents)
    tag = mode.tag()
    pending: list = [None] * 3
    records = []
    for step in range(steps):
        base = encode_observation(env.history, frames, window)
        actions = [0, 0, 0]
        obs = [base] * 3
        message = None
        for i in plan.order:
            agent = agents[i]
            o = base if i != receiver else np.append(base, message_feature(message))
            if pending[i] is not None:
                p_obs, p_act, p_rew = pending[i]
                agent.remember(Transition(p_obs, p_act, p_rew, o, False))
            actions[i] = int(agent.act(o, epsilons[i]))
            obs[i] = o
            if i == sender:
                message = actions[i]
        raw = env.step(actions)
        shaped = shape_rewards(mode, raw)
        terminal = step == steps - 1
        for i, agent in enumerate(agents):
            if not agent.learns:
                continue
            if terminal:
                agent.remember(Transition(obs[i], actions[i], shaped[i], obs[i], True))
                pending[i] = None
            else:
                pending[i] = (obs[i], actions[i], shaped[i])
            agent.learn()
            agent.end_step()
        records.append(StepRecord(
            run_id=run_id, lr=lr, episode=episode_index, step=step,
            actions=tuple(actions), raw_halves=raw.halves, shaped_halves=shaped.halves,
            epsilons=epsilons, message=message, mode=tag,
        ))
    return records


def log_path(out_dir, run_id: int) -> Path:
    return Path(out_dir) / f"run_{run_id:03d}.csv"


def run_single(cfg: ExperimentConfig, lr_index: int, run_index: int, out_dir=None) -> dict:
    """Train one run from scratch and write its log; returns a status dict."""
    out_dir = Path(out_dir or cfg.output_dir)
    run_id = cfg.run_id(lr_index, run_index)
    lr = cfg.learning_rates[lr_index]
    agents = build_agents(cfg, lr_index, run_index)
    env = make_env(cfg)
    status = {"run_id": run_id, "lr": lr, "lr_index": lr_index, "run_index": run_index,
              "episodes_done": 0, "status": "complete", "file": log_path(out_dir, run_id).name}
    with LogWriter(log_path(out_dir, run_id)) as writer:
        for episode in range(cfg.episodes):
            try:
                records = play_episode(agents, env, cfg.mode, episode, cfg.steps_per_episode, run_id, lr)
            except DivergenceError as err:
                status["status"] = f"partial: diverged in episode {episode}: {err}"
                log.error("run %d diverged in episode %d: %s", run_id, episode, err)
                break
            writer.write(records)
            status["episodes_done"] = episode + 1
        status["records"] = writer.count
    return status


def _run_job(args):
    return run_single(*args)


def check_writable(out_dir) -> Path:
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as err:
        raise PermissionError(f"output directory {out_dir} is not writable: {err}") from None
    return out_dir


def run_campaign(cfg: ExperimentConfig, workers: int = 1) -> Path:
    """All learning-rate x run combinations, one log per run, then the manifest."""
    out_dir = check_writable(cfg.output_dir)
    jobs = [(cfg, li, ri, out_dir)
            for li in range(len(cfg.learning_rates))
            for ri in range(cfg.effective_runs_per_lr)]
    started = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = [_run_job(job) for job in jobs]
    finished = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    write_manifest(cfg, out_dir, results, started, finished)
    return out_dir


def write_manifest(cfg: ExperimentConfig, out_dir: Path, results: list[dict], started: str, finished: str) -> None:
    parser = cfg.to_parser()
    parser["campaign"] = {
        "package_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "started": started,
        "finished": finished,
        "mode_tag": cfg.mode.tag(),
        "total_runs": str(cfg.total_runs),
        "total_records": str(sum(r["records"] for r in results)),
        "seed_scheme": "SeedSequence(base_seed, spawn_key=(lr_index, run_index, agent_index)); "
                       "children 0 init, 1 explore, 2 replay, 3 random policy",
    }
    parser["seeds"] = {
        str(r["run_id"]): f"base_seed={cfg.base_seed} lr_index={r['lr_index']} run_index={r['run_index']}"
        for r in results
    }
    parser["runs"] = {
        str(r["run_id"]): f"{r['status']}; lr={r['lr']!r}; episodes={r['episodes_done']}; "
                          f"records={r['records']}; file={r['file']}"
        for r in results
    }
    with open(out_dir / "manifest.ini", "w", encoding="utf-8") as fh:
        parser.write(fh)


def read_manifest(path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None)
    parser.read(path, encoding="utf-8")
    return parser


def default_workers() -> int:
    return max(1, min(os.cpu_count() or 1, 8))

