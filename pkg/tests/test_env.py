import itertools
from fractions import Fraction

import pytest

from rps_collusion.env import (
    REWARD_TABLE,
    Action,
    GameHistory,
    JointAction,
    OutcomeKind,
    RPSEnv,
    RewardVector,
    beats,
    classify_outcome,
    push_history,
    reward,
)

R, P, S = Action.ROCK, Action.PAPER, Action.SCISSORS
ALL_JOINT = list(itertools.product(range(3), repeat=3))


def pairwise_oracle(joint):
    """Payoff from each agent's (wins, losses) against the other two."""
    table = {(2, 0): 2, (0, 2): -1, (1, 0): Fraction(1, 2), (0, 1): -1, (1, 1): 0, (0, 0): 0}
    out = []
    for i, a in enumerate(joint):
        others = [b for j, b in enumerate(joint) if j != i]
        wins = sum(beats(a, b) for b in others)
        losses = sum(beats(b, a) for b in others)
        out.append(table[(wins, losses)])
    return tuple(out)


def test_action_codes():
    assert [int(a) for a in (R, P, S)] == [0, 1, 2]
    with pytest.raises(ValueError):
        Action(3)
    with pytest.raises(ValueError):
        JointAction((0, 1, 5))
    with pytest.raises(ValueError):
        JointAction((0, 1))


def test_dominance():
    assert beats(P, R) and beats(R, S) and beats(S, P)
    assert not beats(R, P) and not beats(R, R)


@pytest.mark.parametrize("joint, kind, index", [
    ((R, P, S), OutcomeKind.ALL_DISTINCT, None),
    ((P, R, R), OutcomeKind.SINGLE_WINNER, 0),
    ((S, R, R), OutcomeKind.SINGLE_LOSER, 0),
    ((R, R, R), OutcomeKind.ALL_SAME, None),
    ((R, S, R), OutcomeKind.SINGLE_LOSER, 1),
    ((P, P, S), OutcomeKind.SINGLE_WINNER, 2),
])
def test_classify_outcome(joint, kind, index):
    outcome = classify_outcome(joint)
    assert outcome.kind is kind
    assert outcome.index == index


@pytest.mark.parametrize("joint, expected", [
    ((R, R, R), (0, 0, 0)),
    ((S, S, S), (0, 0, 0)),
    ((P, P, P), (0, 0, 0)),
    ((R, P, S), (0, 0, 0)),
    ((S, R, R), (-1, 0.5, 0.5)),
    ((R, P, P), (-1, 0.5, 0.5)),
    ((P, S, S), (-1, 0.5, 0.5)),
    ((P, R, R), (2, -1, -1)),
    ((R, S, S), (2, -1, -1)),
    ((S, P, P), (2, -1, -1)),
])
def test_reward_table_rows(joint, expected):
    assert reward(joint).values() == expected


def test_reward_matches_pairwise_oracle():
    for joint in ALL_JOINT:
        assert tuple(Fraction(h, 2) for h in reward(joint).halves) == pairwise_oracle(joint)


def test_outcome_partition_counts():
    counts = {kind: 0 for kind in OutcomeKind}
    for joint in ALL_JOINT:
        counts[classify_outcome(joint).kind] += 1
    assert counts == {
        OutcomeKind.ALL_SAME: 3,
        OutcomeKind.ALL_DISTINCT: 6,
        OutcomeKind.SINGLE_WINNER: 9,
        OutcomeKind.SINGLE_LOSER: 9,
    }


def test_zero_sum_and_uniform_expectation_exact():
    totals = [0, 0, 0]
    for joint in ALL_JOINT:
        rv = reward(joint)
        assert rv.is_zero_sum()
        assert set(rv.values()) <= {-1, 0, 0.5, 2}
        for i in range(3):
            totals[i] += rv.halves[i]
    assert totals == [0, 0, 0]


def test_permutation_equivariance():
    for joint in ALL_JOINT:
        base = reward(joint).halves
        for perm in itertools.permutations(range(3)):
            permuted = tuple(joint[p] for p in perm)
            assert reward(permuted).halves == tuple(base[p] for p in perm)


def test_reward_table_agrees_with_reward():
    assert len(REWARD_TABLE) == 27
    for joint, rv in REWARD_TABLE.items():
        assert rv == reward(joint)


def test_reward_vector_formatting():
    assert reward((R, P, P)).format() == ["-1", "0.5", "0.5"]
    assert RewardVector.from_values([1, -1, 2]).format() == ["1", "-1", "2"]
    with pytest.raises(ValueError):
        RewardVector.from_values([0.25, 0, 0])


def test_push_history_empty():
    h = GameHistory(3)
    push_history(h, (R, P, S))
    assert len(h) == 1 and h.fill_count == 1
    assert h.window_entries() == [(0, 1, 2)]


def test_push_history_evicts_oldest():
    h = GameHistory(3)
    for joint in [(R, R, R), (P, P, P), (S, S, S)]:
        h.push(joint)
    h.push((R, P, S))
    assert len(h) == 3
    assert h.window_entries() == [(0, 1, 2), (2, 2, 2), (1, 1, 1)]


def test_fill_count_saturates():
    h = GameHistory(3)
    for i in range(10):
        h.push((i % 3, 0, 0))
        assert h.fill_count == min(i + 1, 3)
        assert len(h.window_entries()) <= 3


def test_lookback_reconstructs_older_windows():
    h = GameHistory(2, lookback=2)
    for code in range(4):
        h.push((code % 3, 0, 0))
    assert h.window_entries(0) == [(0, 0, 0), (2, 0, 0)]
    assert h.window_entries(1) == [(2, 0, 0), (1, 0, 0)]
    assert h.window_entries(2) == [(1, 0, 0), (0, 0, 0)]
    with pytest.raises(ValueError):
        h.window_entries(3)


def test_env_step_pushes_history_and_pays():
    env = RPSEnv(window=5)
    rv = env.step((P, R, R))
    assert rv.values() == (2, -1, -1)
    assert env.history.window_entries() == [(1, 0, 0)]
    env.reset()
    assert len(env.history) == 0
