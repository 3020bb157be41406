"""Dual reward: performance delta, depth-decay complexity, equal splits."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import make_regression_dataset
from tcto.agents import HEAD, OPERAND, OPERATION
from tcto.opset import OP_BY_NAME, apply_unary
from tcto.reward import (
    StepReward,
    complexity_reward,
    performance_reward,
    split_equally,
    step_reward,
)
from tcto.roadmap import Roadmap


def _roadmap(p=3, seed=0):
    d = make_regression_dataset(n=10, p=p, seed=seed)
    r = Roadmap.from_dataset(d, lineage="t")
    cols = {i: np.asarray(c) for i, c in enumerate(d.columns)}
    return r, cols


# -- performance -----------------------------------------------------------------


def test_performance_reward_is_the_score_delta():
    assert performance_reward(0.50, 0.55) == pytest.approx(0.05)
    assert performance_reward(0.9, 0.6) == pytest.approx(-0.3)
    assert performance_reward(0.7, 0.7) == 0.0


def test_episode_performance_rewards_telescope_exactly():
    scores = [k / 1024.0 for k in (512, 600, 580, 700, 701, 690)]
    deltas = [performance_reward(a, b) for a, b in zip(scores, scores[1:])]
    assert math.fsum(deltas) == scores[-1] - scores[0]
    assert sum(deltas) == scores[-1] - scores[0]


# -- complexity ------------------------------------------------------------------


def test_all_root_roadmap_scores_exactly_one():
    r, _ = _roadmap()
    assert complexity_reward(r) == 1.0


def test_even_mix_of_depth_zero_and_one():
    r, cols = _roadmap(p=2)
    square = OP_BY_NAME["square"]
    sin = OP_BY_NAME["sin"]
    r.add_node(square, (0,), apply_unary(square, cols[0]))
    r.add_node(sin, (1,), apply_unary(sin, cols[1]))
    assert complexity_reward(r) == pytest.approx((1.0 + math.exp(-1)) / 2.0, abs=1e-12)


def test_deeper_nodes_never_raise_the_complexity_reward():
    r, cols = _roadmap()
    before = complexity_reward(r)
    square = OP_BY_NAME["square"]
    added = r.add_node(square, (0,), apply_unary(square, cols[0]))
    after_one = complexity_reward(r)
    assert after_one < before
    cube = OP_BY_NAME["cube"]
    r.add_node(cube, (added.node_id,), (cols[0] ** 2) ** 3)
    assert complexity_reward(r) < after_one


def test_complexity_requires_an_alive_node():
    r, _ = _roadmap()
    for n in r.nodes:
        n.alive = False
    with pytest.raises(ValueError):
        complexity_reward(r)


# -- splitting --------------------------------------------------------------------


def test_three_way_split_of_a_clean_decimal():
    shares = split_equally(0.3, [HEAD, OPERATION, OPERAND])
    assert shares[HEAD] == pytest.approx(0.1)
    assert shares[OPERATION] == pytest.approx(0.1)
    assert shares[OPERAND] == pytest.approx(0.1)
    assert shares[HEAD] + shares[OPERATION] + shares[OPERAND] == 0.3


def test_two_way_split_for_unary_steps():
    shares = split_equally(0.3, [HEAD, OPERATION])
    assert shares == {HEAD: 0.15, OPERATION: 0.15}


def test_split_rejects_empty_or_duplicate_roles():
    with pytest.raises(ValueError):
        split_equally(1.0, [])
    with pytest.raises(ValueError):
        split_equally(1.0, [HEAD, HEAD])


@given(
    st.floats(-1e6, 1e6, allow_nan=False),
    st.lists(st.sampled_from([HEAD, OPERATION, OPERAND]), min_size=1, max_size=3, unique=True),
)
@settings(max_examples=200, deadline=None)
def test_split_shares_always_sum_back_exactly(total, roles):
    shares = split_equally(total, roles)
    assert set(shares) == set(roles)
    assert sum(shares[r] for r in roles) == total


# -- combined step reward --------------------------------------------------------------


def test_step_reward_combines_both_terms_with_weights():
    r, cols = _roadmap(p=2)
    square = OP_BY_NAME["square"]
    sin = OP_BY_NAME["sin"]
    r.add_node(square, (0,), apply_unary(square, cols[0]))
    r.add_node(sin, (1,), apply_unary(sin, cols[1]))
    got = step_reward(0.5, 0.55, r, [HEAD, OPERATION], w_performance=2.0, w_complexity=0.5)
    r_c = (1.0 + math.exp(-1)) / 2.0
    assert isinstance(got, StepReward)
    assert got.performance == pytest.approx(0.05)
    assert got.complexity == pytest.approx(r_c, abs=1e-12)
    assert got.total == pytest.approx(2.0 * 0.05 + 0.5 * r_c)
    assert got.shares[HEAD] + got.shares[OPERATION] == got.total


def test_zero_weights_silence_the_reward():
    r, _ = _roadmap()
    got = step_reward(0.2, 0.9, r, [HEAD], w_performance=0.0, w_complexity=0.0)
    assert got.total == 0.0
    assert got.shares == {HEAD: 0.0}
