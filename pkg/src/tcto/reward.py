"""Step rewards: performance delta plus a depth-decay complexity bonus,
split equally across the agents that acted."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class StepReward:
    performance: float
    complexity: float
    total: float
    shares: dict


def performance_reward(prev_score: float, curr_score: float) -> float:
    return float(curr_score) - float(prev_score)


def complexity_reward(roadmap) -> float:
    """Mean of exp(-depth) over alive nodes; rewards shallow roadmaps."""
    depths = np.array([n.depth for n in roadmap.alive_nodes()], dtype=float)
    if depths.size == 0:
        raise ValueError("complexity reward needs at least one alive node")
    return float(np.mean(np.exp(-depths)))


def split_equally(total: float, roles) -> dict:
    """Equal shares that sum back to the total exactly.

    The last role takes the residual, so float rounding can never leak
    reward in or out of the split.
    """
    roles = list(roles)
    if not roles:
        raise ValueError("at least one acting role is required")
    if len(set(roles)) != len(roles):
        raise ValueError(f"duplicate roles in {roles}")
    base = total / len(roles)
    shares = {role: base for role in roles[:-1]}
    shares[roles[-1]] = total - base * (len(roles) - 1)
    return shares


def step_reward(
    prev_score: float,
    curr_score: float,
    roadmap,
    acting_roles,
    *,
    w_performance: float = 1.0,
    w_complexity: float = 1.0,
) -> StepReward:
    r_p = performance_reward(prev_score, curr_score)
    r_c = complexity_reward(roadmap)
    total = w_performance * r_p + w_complexity * r_c
    return StepReward(
        performance=r_p,
        complexity=r_c,
        total=total,
        shares=split_equally(total, acting_roles),
    )
