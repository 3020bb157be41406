"""Cascading value agents: head cluster, operation, operand cluster.

Each agent is a DQN-style pair of prediction and target networks over a
small replay buffer. Head and operand agents score one (state, candidate)
pair per forward pass with a scalar output; the operation agent maps its
state to one Q-value per operation.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import encoder as enc
from .nnsub import DenseNet, backprop, clone, copy_params, forward, forward_cache, sgd_step
from .nnsub import add_grads, zero_grads

HEAD = "head"
OPERATION = "operation"
OPERAND = "operand"
ROLES = (HEAD, OPERATION, OPERAND)

BUFFER_CAPACITY = 16
BATCH_SIZE = 8


@dataclass
class Transition:
    """One replay entry.

    next_candidates holds the Q-network inputs available at the next
    decision point; terminal transitions may leave it empty. state_ctx
    optionally carries (GraphSnapshot, StateSpec) so training can recompute
    the state through the current encoder and push gradients into it.
    """

    state_input: np.ndarray
    action: int
    reward: float
    next_candidates: list
    terminal: bool
    state_ctx: tuple | None = None


@dataclass
class Agent:
    role: str
    prediction: DenseNet
    target: DenseNet
    buffer: deque = field(default_factory=lambda: deque(maxlen=BUFFER_CAPACITY))

    @property
    def output_dim(self) -> int:
        return self.prediction.dims[-1]


def make_agent(role: str, input_dim: int, n_outputs: int, hidden: int, rng) -> Agent:
    if role not in ROLES:
        raise ValueError(f"unknown role {role!r}")
    net = DenseNet.create((input_dim, hidden, n_outputs), rng)
    return Agent(role=role, prediction=net, target=clone(net))


def epsilon_greedy(q_values, epsilon: float, rng: np.random.Generator) -> int:
    """Argmax with probability 1-epsilon (ties to the first maximum)."""
    q_values = np.asarray(q_values, dtype=float)
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(q_values.shape[0]))
    return int(np.argmax(q_values))


def candidate_q_values(agent: Agent, candidates) -> np.ndarray:
    """Scalar prediction-net score per candidate input vector."""
    if agent.output_dim != 1:
        raise ValueError(f"{agent.role} agent does not score per-candidate inputs")
    return np.array([float(forward(agent.prediction, x)[0]) for x in candidates])


def select_candidate(agent: Agent, candidates, epsilon: float, rng) -> int:
    """Index of the chosen candidate under epsilon-greedy."""
    if not candidates:
        raise ValueError("no candidates to select from")
    return epsilon_greedy(candidate_q_values(agent, candidates), epsilon, rng)


def operation_q_values(agent: Agent, state_input) -> np.ndarray:
    return np.asarray(forward(agent.prediction, state_input), dtype=float)


def push_transition(agent: Agent, t: Transition) -> None:
    if not t.terminal and not t.next_candidates:
        raise ValueError("non-terminal transition needs at least one next candidate")
    agent.buffer.append(t)


def _max_target_q(agent: Agent, candidates) -> float:
    best = -np.inf
    for x in candidates:
        q = forward(agent.target, x)
        best = max(best, float(np.max(q)))
    return best


def train_step(
    agent: Agent,
    rng: np.random.Generator,
    *,
    gamma: float,
    lr: float,
    batch_size: int = BATCH_SIZE,
    encoder: "enc.Encoder | None" = None,
) -> float | None:
    """One squared-TD-error SGD step over a without-replacement minibatch.

    Returns the pre-update mean loss, or None while the buffer is short.
    When an encoder is given, transitions carrying state_ctx are re-encoded
    through it and the loss gradient also updates the encoder parameters.
    """
    if len(agent.buffer) < batch_size:
        return None
    picks = rng.choice(len(agent.buffer), size=batch_size, replace=False)
    batch = [agent.buffer[int(i)] for i in picks]

    acc = zero_grads(agent.prediction)
    enc_acc = enc.encoder_zero_grads(encoder) if encoder is not None else None
    enc_used = False
    total_loss = 0.0
    for t in batch:
        state_cache = None
        if encoder is not None and t.state_ctx is not None:
            x, state_cache = enc.state_forward(encoder, *t.state_ctx)
        else:
            x = t.state_input
        out, cache = forward_cache(agent.prediction, x)
        a = int(t.action) if agent.output_dim > 1 else 0
        q = float(out[a])
        if t.terminal or not t.next_candidates:
            y = t.reward
        else:
            y = t.reward + gamma * _max_target_q(agent, t.next_candidates)
        diff = q - y
        total_loss += diff * diff
        dy = np.zeros_like(out)
        dy[a] = 2.0 * diff
        grads, dx = backprop(agent.prediction, cache, dy)
        add_grads(acc, grads, 1.0 / batch_size)
        if state_cache is not None:
            rgrads, ograds = enc.state_backward(encoder, state_cache, dx)
            enc.encoder_add_grads(enc_acc, rgrads, ograds, 1.0 / batch_size)
            enc_used = True

    sgd_step(agent.prediction, acc, lr)
    if enc_used:
        enc.encoder_sgd_step(encoder, enc_acc, lr)
    return total_loss / batch_size


def sync_target(agent: Agent) -> None:
    copy_params(agent.prediction, agent.target)
