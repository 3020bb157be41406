"""Search driver.

Each step clusters the alive roadmap nodes, asks the three agents for a
head cluster, an operation and (for binary operations) an operand cluster,
grows the roadmap by group-wise crossing, scores the new feature set with
cross validation, rewards the agents and trains them from replay, and keeps
the node count inside budget by node-wise pruning early in training and by
backtracking to the episode's best snapshot later on.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import agents as ag
from . import encoder as enc
from .clustering import cluster_nodes
from .evaluator import EvalConfig, evaluate
from .opset import (
    N_OPERATIONS,
    OPERATIONS,
    UNARY_OPERATIONS,
    apply_binary,
    apply_unary,
)
from .reward import step_reward
from .roadmap import Roadmap
from .tabular import Dataset, stratified_split


class PipelineError(ValueError):
    """Pipeline misuse: missing policy, bad configuration, wrong order."""


class ConfigError(PipelineError):
    """A configuration value or key is not acceptable."""


@dataclass(frozen=True)
class RunConfig:
    episodes: int = 50
    steps_per_episode: int = 100
    application_episodes: int = 10
    seed: int = 0
    test_fraction: float = 0.2
    node_budget_factor: int = 4
    node_wise_fraction: float = 0.30
    candidate_cap: int = 64
    epsilon_start: float = 0.9
    epsilon_end: float = 0.05
    gamma: float = 0.95
    learning_rate: float = 0.01
    hidden_size: int = 100
    batch_size: int = 8
    target_sync_every: int = 10
    w_performance: float = 1.0
    w_complexity: float = 1.0
    use_rgcn: bool = True
    use_structure: bool = True
    use_similarity: bool = True
    random_policy: bool = False
    eval: EvalConfig = field(default_factory=EvalConfig)

    def __post_init__(self):
        if self.episodes < 0 or self.steps_per_episode < 1:
            raise ConfigError("episodes must be >= 0 and steps_per_episode >= 1")
        if self.application_episodes < 0:
            raise ConfigError("application_episodes must be >= 0")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError("test_fraction must lie strictly between 0 and 1")
        if self.node_budget_factor < 1:
            raise ConfigError("node_budget_factor must be >= 1")
        if not 0.0 <= self.node_wise_fraction <= 1.0:
            raise ConfigError("node_wise_fraction must lie in [0, 1]")
        if self.candidate_cap < 1:
            raise ConfigError("candidate_cap must be >= 1")
        if not 0.0 <= self.epsilon_end <= self.epsilon_start <= 1.0:
            raise ConfigError("need 0 <= epsilon_end <= epsilon_start <= 1")
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError("gamma must lie in [0, 1)")
        if self.learning_rate <= 0.0:
            raise ConfigError("learning_rate must be positive")
        if self.hidden_size < 1 or self.batch_size < 1 or self.target_sync_every < 1:
            raise ConfigError("hidden_size, batch_size, target_sync_every must be >= 1")


_EVAL_KEYS = {
    "folds": "folds",
    "trees": "trees",
    "max_depth": "max_depth",
    "model": "model",
    "eval_seed": "seed",
}
_RUN_KEYS = {f.name for f in fields(RunConfig)} - {"eval"}


def config_from_dict(obj) -> RunConfig:
    """Build a RunConfig from a flat mapping; unknown keys are rejected."""
    if not isinstance(obj, dict):
        raise ConfigError("configuration must be a JSON object")
    base, eval_kw = {}, {}
    for key, value in obj.items():
        if key in _EVAL_KEYS:
            eval_kw[_EVAL_KEYS[key]] = value
        elif key in _RUN_KEYS:
            base[key] = value
        else:
            raise ConfigError(f"unknown config key {key!r}")
    defaults = RunConfig()
    try:
        return replace(defaults, **base, eval=replace(defaults.eval, **eval_kw))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad configuration: {exc}") from exc


def config_to_dict(cfg: RunConfig) -> dict:
    out = {f.name: getattr(cfg, f.name) for f in fields(cfg) if f.name != "eval"}
    inverse = {v: k for k, v in _EVAL_KEYS.items()}
    for f in fields(cfg.eval):
        out[inverse[f.name]] = getattr(cfg.eval, f.name)
    return out


@dataclass
class StepRecord:
    episode: int
    step: int
    phase: str
    epsilon: float
    clusters: int
    head_cluster: int
    operation: str
    operand_cluster: int | None
    fallback: bool
    attempts: int
    created: int
    revived: int
    duplicates: int
    rejected: int
    alive: int
    score: float
    best_score: float
    reward_performance: float
    reward_complexity: float
    reward_total: float
    shares: dict
    losses: dict
    prune: str
    alive_after: int


@dataclass
class RunReport:
    phase: str
    task: str
    baseline_score: float
    best_score: float
    best_episode: int
    best_step: int
    test_baseline: float
    test_score: float
    best_roadmap_json: bytes
    records: list
    timings: dict


_TIMING_KEYS = (
    "clustering",
    "decision",
    "roadmap_update",
    "reward_estimation",
    "learning",
    "pruning",
)

EXPLORE = "explore"
APPLY = "apply"


@dataclass
class _Pending:
    state_input: np.ndarray
    action: int
    share: float
    ctx: tuple | None


@dataclass
class _Episode:
    roadmap: Roadmap
    columns: dict
    emb_cache: dict | None
    prev_score: float
    episode_best: object
    pending: dict


class Pipeline:
    """Holds the dataset split, the agents and the encoder across episodes."""

    def __init__(self, dataset: Dataset, cfg: RunConfig):
        self.cfg = cfg
        self.dataset = dataset
        self.train_data, self.test_data = stratified_split(
            dataset, cfg.test_fraction, cfg.seed
        )
        ss = np.random.SeedSequence([cfg.seed, 7])
        seed_params, seed_policy, seed_replay = ss.spawn(3)
        rng_params = np.random.default_rng(seed_params)
        self.rng_policy = np.random.default_rng(seed_policy)
        self.rng_replay = np.random.default_rng(seed_replay)

        if cfg.use_rgcn:
            self.encoder = enc.Encoder.create(rng_params)
            d_state = self.encoder.out_dim
            d_op = self.encoder.out_dim
        else:
            self.encoder = None
            d_state = enc.STAT_DIM
            d_op = N_OPERATIONS
        self.agents = {
            ag.HEAD: ag.make_agent(ag.HEAD, 2 * d_state, 1, cfg.hidden_size, rng_params),
            ag.OPERATION: ag.make_agent(
                ag.OPERATION, 2 * d_state, N_OPERATIONS, cfg.hidden_size, rng_params
            ),
            ag.OPERAND: ag.make_agent(
                ag.OPERAND, 3 * d_state + d_op, 1, cfg.hidden_size, rng_params
            ),
        }
        self.global_step = 0
        self._explore_budget = cfg.episodes * cfg.steps_per_episode
        self.trained = False

    # -- public entry points -------------------------------------------------

    def train(self) -> RunReport:
        report = self._run(EXPLORE, self.cfg.episodes)
        self.trained = True
        return report

    def apply_policy(self) -> RunReport:
        if not self.trained:
            raise PipelineError(
                "no trained policy available: run train() or load a checkpoint"
            )
        if self.cfg.application_episodes == 0:
            raise PipelineError("application_episodes is 0 in this configuration")
        return self._run(APPLY, self.cfg.application_episodes)

    # -- checkpointing ---------------------------------------------------------

    def checkpoint(self) -> dict:
        obj = {
            "version": 1,
            "use_rgcn": self.cfg.use_rgcn,
            "agents": {
                role: {
                    "prediction": _net_to_obj(a.prediction),
                    "target": _net_to_obj(a.target),
                }
                for role, a in self.agents.items()
            },
        }
        if self.encoder is not None:
            obj["encoder"] = {
                "n_relations": self.encoder.rgcn.n_relations,
                "layers": [
                    [w.tolist() for w in layer] for layer in self.encoder.rgcn.layers
                ],
                "op_table": self.encoder.op_table.tolist(),
            }
        else:
            obj["encoder"] = None
        return obj

    def load_checkpoint(self, source) -> None:
        if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
            try:
                with open(source, "r", encoding="utf-8") as fh:
                    source = json.load(fh)
            except OSError as exc:
                raise PipelineError(f"cannot read checkpoint: {exc}") from exc
            except json.JSONDecodeError as exc:
                raise PipelineError(f"malformed checkpoint JSON: {exc}") from exc
        if not isinstance(source, dict) or source.get("version") != 1:
            raise PipelineError("unsupported checkpoint format")
        if bool(source.get("use_rgcn")) != self.cfg.use_rgcn:
            raise PipelineError("checkpoint encoder mode does not match use_rgcn")
        try:
            for role, a in self.agents.items():
                _obj_into_net(source["agents"][role]["prediction"], a.prediction)
                _obj_into_net(source["agents"][role]["target"], a.target)
            if self.cfg.use_rgcn:
                stored = source["encoder"]
                for layer, arrs in zip(self.encoder.rgcn.layers, stored["layers"]):
                    for w, arr in zip(layer, arrs):
                        w[...] = np.asarray(arr, dtype=float).reshape(w.shape)
                self.encoder.op_table[...] = np.asarray(
                    stored["op_table"], dtype=float
                ).reshape(self.encoder.op_table.shape)
        except (KeyError, TypeError, ValueError) as exc:
            raise PipelineError(f"checkpoint does not fit this pipeline: {exc}") from exc
        self.trained = True

    # -- internals ---------------------------------------------------------

    def _epsilon(self, phase: str) -> float:
        if phase == APPLY:
            return 0.0
        if self._explore_budget <= 1:
            return self.cfg.epsilon_start
        frac = min(self.global_step / (self._explore_budget - 1), 1.0)
        return self.cfg.epsilon_start + (self.cfg.epsilon_end - self.cfg.epsilon_start) * frac

    def _node_wise_episodes(self) -> int:
        return int(math.floor(self.cfg.episodes * self.cfg.node_wise_fraction))

    def _run(self, phase: str, episodes: int) -> RunReport:
        cfg = self.cfg
        timings = {k: 0.0 for k in _TIMING_KEYS}
        t_total = time.perf_counter()

        t0 = time.perf_counter()
        baseline = evaluate(
            self.train_data.matrix(), self.train_data.labels, self.train_data.task, cfg.eval
        )
        timings["reward_estimation"] += time.perf_counter() - t0

        best_score = baseline
        best_episode, best_step = -1, -1
        best_bytes = Roadmap.from_dataset(self.train_data, lineage="init").export_json()
        records: list[StepRecord] = []

        for e in range(episodes):
            roadmap = Roadmap.from_dataset(self.train_data, lineage=f"{phase}{e}")
            episode = _Episode(
                roadmap=roadmap,
                columns={
                    n.id: np.asarray(col, dtype=float)
                    for n, col in zip(roadmap.nodes, self.train_data.columns)
                },
                emb_cache=None,
                prev_score=baseline,
                episode_best=roadmap.take_snapshot(baseline),
                pending={},
            )
            for s in range(cfg.steps_per_episode):
                rec, improved = self._step(episode, e, s, phase, best_score, timings)
                if improved is not None:
                    best_score, best_bytes = improved
                    best_episode, best_step = e, s
                    rec.best_score = best_score
                records.append(rec)
            if phase == EXPLORE and not cfg.random_policy:
                for role, p in episode.pending.items():
                    ag.push_transition(
                        self.agents[role],
                        ag.Transition(p.state_input, p.action, p.share, [], True, p.ctx),
                    )

        t0 = time.perf_counter()
        test_baseline = evaluate(
            self.test_data.matrix(), self.test_data.labels, self.test_data.task, cfg.eval
        )
        best_roadmap = Roadmap.import_json(best_bytes)
        test_matrix = best_roadmap.materialize(self.test_data)
        test_score = evaluate(
            test_matrix, self.test_data.labels, self.test_data.task, cfg.eval
        )
        timings["reward_estimation"] += time.perf_counter() - t0

        timings["total"] = time.perf_counter() - t_total
        return RunReport(
            phase=phase,
            task=self.train_data.task,
            baseline_score=baseline,
            best_score=best_score,
            best_episode=best_episode,
            best_step=best_step,
            test_baseline=test_baseline,
            test_score=test_score,
            best_roadmap_json=best_bytes,
            records=records,
            timings=timings,
        )

    def _pick_index(self, agent_role: str, inputs: list, epsilon: float) -> int:
        if self.cfg.random_policy:
            return int(self.rng_policy.integers(len(inputs)))
        return ag.select_candidate(
            self.agents[agent_role], inputs, epsilon, self.rng_policy
        )

    def _pick_operation(self, state_input: np.ndarray, epsilon: float) -> int:
        if self.cfg.random_policy:
            return int(self.rng_policy.integers(N_OPERATIONS))
        q = ag.operation_q_values(self.agents[ag.OPERATION], state_input)
        return ag.epsilon_greedy(q, epsilon, self.rng_policy)

    def _fallback_unary(self, state_input: np.ndarray) -> int:
        if self.cfg.random_policy:
            return int(self.rng_policy.integers(len(UNARY_OPERATIONS)))
        q = ag.operation_q_values(self.agents[ag.OPERATION], state_input)
        unary_ids = [op.id for op in UNARY_OPERATIONS]
        return unary_ids[int(np.argmax(q[unary_ids]))]

    def _step(self, ep: _Episode, e: int, s: int, phase: str, best_score: float, timings):
        cfg = self.cfg
        roadmap = ep.roadmap
        labels = self.train_data.labels
        task = self.train_data.task
        learning = phase == EXPLORE and not cfg.random_policy
        epsilon = self._epsilon(phase)

        # clustering
        t0 = time.perf_counter()
        alive_ids = roadmap.alive_ids()
        graph = enc.snapshot_from_roadmap(roadmap)
        if ep.emb_cache is not None and all(i in ep.emb_cache for i in alive_ids):
            sim_rows = np.stack([ep.emb_cache[i] for i in alive_ids])
        else:
            sim_rows = np.asarray(graph.stats)
        assignment = cluster_nodes(
            roadmap.adjacency_matrix(),
            sim_rows,
            alive_ids,
            use_structure=cfg.use_structure,
            use_similarity=cfg.use_similarity,
        )
        groups = assignment.groups()
        timings["clustering"] += time.perf_counter() - t0

        # decision
        t0 = time.perf_counter()
        pos = {nid: k for k, nid in enumerate(alive_ids)}
        if cfg.use_rgcn:
            h, _ = enc.rgcn_forward(graph, self.encoder.rgcn)
        else:
            h = np.asarray(graph.stats, dtype=float)
        group_pos = [tuple(pos[i] for i in g) for g in groups]
        all_pos = tuple(range(len(alive_ids)))
        reps = [enc.cluster_rep(h, g) for g in group_pos]
        g_rep = enc.cluster_rep(h, all_pos)
        head_inputs = [np.concatenate([r, g_rep]) for r in reps]

        if learning:
            self._complete_pending(ep, ag.HEAD, head_inputs)
        head_idx = self._pick_index(ag.HEAD, head_inputs, epsilon)
        op_state = head_inputs[head_idx]
        if learning:
            self._complete_pending(ep, ag.OPERATION, [op_state])
        op = OPERATIONS[self._pick_operation(op_state, epsilon)]

        fallback = False
        operand_idx = None
        operand_inputs = None
        operand_choice = None
        if op.arity == 2:
            if assignment.k >= 2:
                o_rep = enc.op_rep(self.encoder, op.id)
                tail_indices = [j for j in range(assignment.k) if j != head_idx]
                operand_inputs = [
                    np.concatenate([reps[head_idx], g_rep, reps[j], o_rep])
                    for j in tail_indices
                ]
                if learning:
                    self._complete_pending(ep, ag.OPERAND, operand_inputs)
                operand_choice = self._pick_index(ag.OPERAND, operand_inputs, epsilon)
                operand_idx = tail_indices[operand_choice]
            else:
                op = OPERATIONS[self._fallback_unary(op_state)]
                fallback = True
        timings["decision"] += time.perf_counter() - t0

        # roadmap update
        t0 = time.perf_counter()
        created = revived = duplicates = rejected = 0
        if op.arity == 1:
            pairs = [(nid, None) for nid in sorted(groups[head_idx])]
        else:
            pairs = [
                (h_id, t_id)
                for h_id in sorted(groups[head_idx])
                for t_id in sorted(groups[operand_idx])
            ]
        attempts = len(pairs)
        for h_id, t_id in pairs:
            if created + revived >= cfg.candidate_cap:
                break
            if t_id is None:
                vals = apply_unary(op, ep.columns[h_id])
                parents = (h_id,)
            else:
                vals = apply_binary(op, ep.columns[h_id], ep.columns[t_id])
                parents = (h_id, t_id)
            if vals is None:
                rejected += 1
                continue
            res = roadmap.add_node(op, parents, vals)
            if res.created:
                created += 1
                ep.columns[res.node_id] = vals
            elif res.revived:
                revived += 1
                ep.columns[res.node_id] = vals
            else:
                duplicates += 1
        alive_grown = roadmap.alive_count
        timings["roadmap_update"] += time.perf_counter() - t0

        # reward estimation
        t0 = time.perf_counter()
        if created + revived > 0:
            matrix = np.column_stack([ep.columns[i] for i in roadmap.alive_ids()])
            score = evaluate(matrix, labels, task, cfg.eval)
        else:
            score = ep.prev_score
        acting = (ag.HEAD, ag.OPERATION) if operand_idx is None else (
            ag.HEAD,
            ag.OPERATION,
            ag.OPERAND,
        )
        rew = step_reward(
            ep.prev_score,
            score,
            roadmap,
            acting,
            w_performance=cfg.w_performance,
            w_complexity=cfg.w_complexity,
        )
        improved = None
        if score > best_score:
            improved = (score, roadmap.export_json())
        if score > ep.episode_best.score:
            ep.episode_best = roadmap.take_snapshot(score)
        ep.prev_score = score
        timings["reward_estimation"] += time.perf_counter() - t0

        # learning
        t0 = time.perf_counter()
        losses: dict = {role: None for role in acting}
        if learning:
            head_ctx = (graph, enc.StateSpec(groups=(group_pos[head_idx], all_pos)))
            ep.pending[ag.HEAD] = _Pending(
                head_inputs[head_idx], 0, rew.shares[ag.HEAD], head_ctx if cfg.use_rgcn else None
            )
            op_ctx = (graph, enc.StateSpec(groups=(group_pos[head_idx], all_pos)))
            ep.pending[ag.OPERATION] = _Pending(
                op_state, op.id, rew.shares[ag.OPERATION], op_ctx if cfg.use_rgcn else None
            )
            if operand_idx is not None:
                t_ctx = (
                    graph,
                    enc.StateSpec(
                        groups=(group_pos[head_idx], all_pos, group_pos[operand_idx]),
                        op_id=op.id,
                    ),
                )
                ep.pending[ag.OPERAND] = _Pending(
                    operand_inputs[operand_choice],
                    0,
                    rew.shares[ag.OPERAND],
                    t_ctx if cfg.use_rgcn else None,
                )
            for role in acting:
                losses[role] = ag.train_step(
                    self.agents[role],
                    self.rng_replay,
                    gamma=cfg.gamma,
                    lr=cfg.learning_rate,
                    batch_size=cfg.batch_size,
                    encoder=self.encoder,
                )
            self.global_step += 1
            if self.global_step % cfg.target_sync_every == 0:
                for a in self.agents.values():
                    ag.sync_target(a)
        timings["learning"] += time.perf_counter() - t0

        # pruning
        t0 = time.perf_counter()
        budget = cfg.node_budget_factor * roadmap.root_count
        prune_kind = "none"
        if roadmap.alive_count > budget:
            node_wise = phase == EXPLORE and e < self._node_wise_episodes()
            if node_wise:
                roadmap.prune_node_wise(ep.columns, labels, task, budget)
                prune_kind = "node_wise"
            else:
                roadmap.restore(ep.episode_best)
                prune_kind = "backtrack"
        timings["pruning"] += time.perf_counter() - t0

        # refresh the similarity embeddings for the next step's clustering
        t0 = time.perf_counter()
        if cfg.use_rgcn:
            h2, _ = enc.rgcn_forward(enc.snapshot_from_roadmap(roadmap), self.encoder.rgcn)
            ep.emb_cache = {nid: h2[k] for k, nid in enumerate(roadmap.alive_ids())}
        timings["clustering"] += time.perf_counter() - t0

        rec = StepRecord(
            episode=e,
            step=s,
            phase=phase,
            epsilon=epsilon,
            clusters=assignment.k,
            head_cluster=head_idx,
            operation=op.name,
            operand_cluster=operand_idx,
            fallback=fallback,
            attempts=attempts,
            created=created,
            revived=revived,
            duplicates=duplicates,
            rejected=rejected,
            alive=alive_grown,
            score=score,
            best_score=max(best_score, score),
            reward_performance=rew.performance,
            reward_complexity=rew.complexity,
            reward_total=rew.total,
            shares=dict(rew.shares),
            losses=losses,
            prune=prune_kind,
            alive_after=roadmap.alive_count,
        )
        return rec, improved

    def _complete_pending(self, ep: _Episode, role: str, next_candidates: list) -> None:
        p = ep.pending.pop(role, None)
        if p is None:
            return
        ag.push_transition(
            self.agents[role],
            ag.Transition(
                p.state_input, p.action, p.share, list(next_candidates), False, p.ctx
            ),
        )


def _net_to_obj(net) -> dict:
    return {
        "weights": [w.tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
    }


def _obj_into_net(obj: dict, net) -> None:
    for w, arr in zip(net.weights, obj["weights"], strict=True):
        w[...] = np.asarray(arr, dtype=float).reshape(w.shape)
    for b, arr in zip(net.biases, obj["biases"], strict=True):
        b[...] = np.asarray(arr, dtype=float).reshape(b.shape)


def run_training(dataset: Dataset, cfg: RunConfig) -> RunReport:
    return Pipeline(dataset, cfg).train()


def run_application(dataset: Dataset, cfg: RunConfig, checkpoint) -> RunReport:
    """Run greedy application episodes from a stored policy checkpoint."""
    if checkpoint is None:
        raise PipelineError("application requires a policy checkpoint")
    p = Pipeline(dataset, cfg)
    p.load_checkpoint(checkpoint)
    return p.apply_policy()


def record_to_json(rec: StepRecord) -> str:
    return json.dumps(asdict(rec), sort_keys=True)
