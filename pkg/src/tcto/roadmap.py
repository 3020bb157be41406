"""The transformation roadmap: a growing DAG of derived feature columns.

Nodes are feature states (roots = original columns), edges carry the
operation that produced the child. Deletion is a dead flag, never removal,
so node ids and signatures stay stable across pruning and backtracking.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

from .evaluator import mutual_information
from .opset import OP_BY_NAME, Operation, binary_values, unary_values
from .tabular import Dataset, StatEmbedding, column_stats

SCHEMA_VERSION = 1


class RoadmapError(ValueError):
    """Structural misuse of a roadmap."""


class SchemaError(ValueError):
    """A serialized roadmap does not conform to the JSON schema."""


@dataclass
class RoadmapNode:
    id: int
    op: Operation | None
    parents: tuple[int, ...]
    depth: int
    stats: StatEmbedding
    alive: bool = True
    origin_name: str | None = None

    @property
    def is_root(self) -> bool:
        return self.op is None


@dataclass(frozen=True)
class AddResult:
    node_id: int
    created: bool
    revived: bool

    @property
    def changed(self) -> bool:
        return self.created or self.revived


@dataclass(frozen=True)
class Snapshot:
    """Alive-set capture; restoring replays exactly this alive flags state."""

    lineage: str
    alive_ids: frozenset
    signatures: dict
    score: float


_lineage_counter = itertools.count()


def node_signature(op: Operation | None, parents, origin_name: str | None = None) -> str:
    if op is None:
        return f"root:{origin_name}"
    ids = list(parents)
    if op.commutative:
        ids = sorted(ids)
    return f"{op.name}({','.join(str(i) for i in ids)})"


class Roadmap:
    def __init__(self, original_columns, lineage: str | None = None):
        names = tuple(str(c) for c in original_columns)
        if not names:
            raise RoadmapError("roadmap needs at least one original column")
        if len(set(names)) != len(names):
            raise RoadmapError("original column names must be unique")
        self.original_columns = names
        self.lineage = lineage if lineage is not None else f"r{next(_lineage_counter)}"
        self.nodes: list[RoadmapNode] = []
        self._index: dict[str, int] = {}
        self._n_rows: int | None = None

    # -- construction -----------------------------------------------------

    @classmethod
    def from_dataset(cls, d: Dataset, lineage: str | None = None) -> "Roadmap":
        r = cls(d.column_names, lineage=lineage)
        r._n_rows = d.n_rows
        for name, col in zip(d.column_names, d.columns):
            node = RoadmapNode(
                id=len(r.nodes),
                op=None,
                parents=(),
                depth=0,
                stats=column_stats(col),
                origin_name=name,
            )
            r.nodes.append(node)
            r._index[node_signature(None, (), name)] = node.id
        return r

    def add_node(self, op: Operation, parents, values) -> AddResult:
        """Register a derived column; duplicates dedup, dead duplicates revive."""
        parents = tuple(int(p) for p in parents)
        if len(parents) != op.arity:
            raise RoadmapError(f"{op.name} takes {op.arity} parent(s), got {len(parents)}")
        for p in parents:
            if not 0 <= p < len(self.nodes):
                raise RoadmapError(f"unknown parent id {p}")
            if not self.nodes[p].alive:
                raise RoadmapError(f"parent {p} is dead")
        sig = node_signature(op, parents)
        if sig in self._index:
            node = self.nodes[self._index[sig]]
            if node.alive:
                return AddResult(node.id, created=False, revived=False)
            node.alive = True
            return AddResult(node.id, created=False, revived=True)

        values = np.asarray(values, dtype=float)
        if self._n_rows is None:
            self._n_rows = values.shape[0]
        if values.shape != (self._n_rows,):
            raise RoadmapError("column length does not match the roadmap's dataset")
        node = RoadmapNode(
            id=len(self.nodes),
            op=op,
            parents=parents,
            depth=max(self.nodes[p].depth for p in parents) + 1,
            stats=column_stats(values),
        )
        self.nodes.append(node)
        self._index[sig] = node.id
        return AddResult(node.id, created=True, revived=False)

    # -- views ------------------------------------------------------------

    def alive_nodes(self) -> list[RoadmapNode]:
        return [n for n in self.nodes if n.alive]

    def alive_ids(self) -> list[int]:
        return [n.id for n in self.nodes if n.alive]

    @property
    def alive_count(self) -> int:
        return sum(1 for n in self.nodes if n.alive)

    @property
    def root_count(self) -> int:
        return len(self.original_columns)

    def alive_edges(self):
        """(parent_id, child_id, op) for every edge between alive nodes."""
        out = []
        for n in self.nodes:
            if not n.alive or n.is_root:
                continue
            for p in n.parents:
                if self.nodes[p].alive:
                    out.append((p, n.id, n.op))
        return out

    def adjacency_matrix(self) -> np.ndarray:
        """Directed parent-to-child 0/1 matrix over alive nodes in id order."""
        ids = self.alive_ids()
        pos = {i: k for k, i in enumerate(ids)}
        a = np.zeros((len(ids), len(ids)))
        for p, c, _ in self.alive_edges():
            a[pos[p], pos[c]] = 1.0
        return a

    def stats_matrix(self) -> np.ndarray:
        alive = self.alive_nodes()
        return np.stack([n.stats.as_vector() for n in alive])

    # -- materialization --------------------------------------------------

    def materialize(self, d: Dataset) -> np.ndarray:
        """Recompute every alive column on a dataset, in alive-id order.

        Scaling operations refit their statistics on the given data.
        """
        if d.column_names != self.original_columns:
            raise RoadmapError(
                "dataset columns do not match the roadmap's original columns"
            )
        needed = set(self.alive_ids())
        stack = list(needed)
        while stack:
            i = stack.pop()
            for p in self.nodes[i].parents:
                if p not in needed:
                    needed.add(p)
                    stack.append(p)
        values: dict[int, np.ndarray] = {}
        for node in self.nodes:
            if node.id not in needed:
                continue
            if node.is_root:
                values[node.id] = np.asarray(d.columns[node.id], dtype=float)
            elif node.op.arity == 1:
                values[node.id] = unary_values(node.op, values[node.parents[0]])
            else:
                values[node.id] = binary_values(
                    node.op, values[node.parents[0]], values[node.parents[1]]
                )
        return np.column_stack([values[i] for i in self.alive_ids()])

    # -- pruning and backtracking ------------------------------------------

    def take_snapshot(self, score: float) -> Snapshot:
        return Snapshot(
            lineage=self.lineage,
            alive_ids=frozenset(self.alive_ids()),
            signatures=dict(self._index),
            score=float(score),
        )

    def restore(self, snap: Snapshot) -> None:
        if snap.lineage != self.lineage:
            raise RoadmapError("snapshot comes from a different roadmap lineage")
        for node in self.nodes:
            node.alive = node.id in snap.alive_ids

    def prune_node_wise(self, columns, labels, task: str, budget: int) -> list[int]:
        """Keep the budget-many highest-MI alive nodes plus every original.

        columns maps alive node id to its materialized values. MI ties break
        toward the lower node id. Returns the ids switched off, ascending.
        """
        alive = self.alive_nodes()
        if len(alive) <= budget:
            return []
        scored = []
        for n in alive:
            if n.id not in columns:
                raise RoadmapError(f"no column provided for alive node {n.id}")
            scored.append((-mutual_information(columns[n.id], labels, task), n.id))
        scored.sort()
        keep = {nid for _, nid in scored[:budget]}
        killed = []
        for n in alive:
            if n.is_root or n.id in keep:
                continue
            n.alive = False
            killed.append(n.id)
        return killed

    # -- serialization ------------------------------------------------------

    def export_json(self) -> bytes:
        nodes = []
        for n in self.nodes:
            obj = {
                "id": n.id,
                "op": "root" if n.is_root else n.op.name,
                "parents": list(n.parents),
                "depth": n.depth,
                "alive": n.alive,
                "stats": [float(x) for x in n.stats.as_vector()],
            }
            if n.is_root:
                obj["origin_name"] = n.origin_name
            nodes.append(obj)
        doc = {
            "version": SCHEMA_VERSION,
            "lineage": self.lineage,
            "original_columns": list(self.original_columns),
            "nodes": nodes,
        }
        return json.dumps(doc, separators=(",", ":")).encode("utf-8")

    @classmethod
    def import_json(cls, data) -> "Roadmap":
        if isinstance(data, bytes):
            data = data.decode("utf-8")
        try:
            doc = json.loads(data)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"malformed roadmap JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise SchemaError("roadmap document must be a JSON object")
        if doc.get("version") != SCHEMA_VERSION:
            raise SchemaError(f"unsupported schema version {doc.get('version')!r}")
        try:
            columns = doc["original_columns"]
            raw_nodes = doc["nodes"]
            lineage = doc["lineage"]
        except KeyError as exc:
            raise SchemaError(f"missing roadmap key {exc}") from exc
        if not isinstance(raw_nodes, list) or len(raw_nodes) < len(columns):
            raise SchemaError("node list shorter than the original column list")

        r = cls(columns, lineage=str(lineage))
        for k, obj in enumerate(raw_nodes):
            try:
                nid = obj["id"]
                op_name = obj["op"]
                parents = tuple(int(p) for p in obj["parents"])
                depth = int(obj["depth"])
                alive = bool(obj["alive"])
                stats = StatEmbedding.from_vector(obj["stats"])
            except (KeyError, TypeError, ValueError) as exc:
                raise SchemaError(f"bad node record at position {k}: {exc}") from exc
            if nid != k:
                raise SchemaError(f"node ids must be 0..N-1 in order, got {nid} at {k}")
            if op_name == "root":
                if k >= len(columns) or obj.get("origin_name") != columns[k]:
                    raise SchemaError(f"root node {k} does not match column order")
                node = RoadmapNode(k, None, (), 0, stats, alive, str(columns[k]))
            else:
                if op_name not in OP_BY_NAME:
                    raise SchemaError(f"unknown operation {op_name!r}")
                op = OP_BY_NAME[op_name]
                if len(parents) != op.arity or any(p >= k for p in parents):
                    raise SchemaError(f"node {k} has invalid parents {parents}")
                want = max(r.nodes[p].depth for p in parents) + 1
                if depth != want:
                    raise SchemaError(f"node {k} depth {depth} inconsistent, want {want}")
                node = RoadmapNode(k, op, parents, depth, stats, alive)
            sig = node_signature(node.op, node.parents, node.origin_name)
            if sig in r._index:
                raise SchemaError(f"duplicate node signature {sig!r}")
            r.nodes.append(node)
            r._index[sig] = k
        if any(not r.nodes[i].is_root for i in range(len(columns))):
            raise SchemaError("the first nodes must be the original columns")
        return r

    def export_dot(self) -> str:
        lines = ["digraph roadmap {"]
        for n in self.alive_nodes():
            label = f"{n.id}:{n.origin_name}" if n.is_root else f"{n.id}:{n.op.name}"
            lines.append(f'  n{n.id} [label="{label}"];')
        for p, c, op in self.alive_edges():
            lines.append(f'  n{p} -> n{c} [label="{op.name}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def init_roadmap(d: Dataset, lineage: str | None = None) -> Roadmap:
    return Roadmap.from_dataset(d, lineage=lineage)
