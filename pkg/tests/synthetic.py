"""Step logs generated from known scripted policies."""
import numpy as np

from rps_collusion.env import reward
from rps_collusion.logs import StepRecord
from rps_collusion.modes import Mode


def episode(actions, episode_index, epsilon=0.01, run_id=0, lr=0.005, mode=Mode()):
    out = []
    for step, joint in enumerate(actions):
        joint = tuple(int(a) for a in joint)
        rv = reward(joint)
        out.append(StepRecord(run_id=run_id, lr=lr, episode=episode_index, step=step, actions=joint,
                              raw_halves=rv.halves, shaped_halves=rv.halves,
                              epsilons=(epsilon,) * 3, message=None, mode=mode.tag()))
    return out


def uniform(rng, steps):
    return rng.integers(3, size=(steps, 3))


def dominant(rng, steps):
    """Agent 0 always plays Rock; the others mostly play Scissors."""
    acts = np.where(rng.random((steps, 2)) < 0.7, 2, rng.integers(3, size=(steps, 2)))
    return np.column_stack([np.zeros(steps, dtype=int), acts])


def alternating(steps):
    pattern = np.array([[0, 1, 2], [2, 0, 1]])
    return pattern[np.arange(steps) % 2]


def constant(steps, joint=(0, 0, 0)):
    return np.tile(joint, (steps, 1))


def timeline_run(seed=0, steps=100, run_id=0, decay=0.85):
    """5 exploratory, 35 one-agent-dominant, then 60 alternating zero-mean episodes."""
    rng = np.random.default_rng(seed)
    records = []
    for ep in range(100):
        eps = max(0.01, decay ** ep)
        if ep < 5:
            acts = uniform(rng, steps)
        elif ep < 40:
            acts = dominant(rng, steps)
        else:
            acts = alternating(steps)
        records += episode(acts, ep, eps, run_id)
    return records
