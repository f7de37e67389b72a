"""Event causality graph construction and the identify-encode loop.

An edge enters the graph only when its class probability is the (first-max,
ties toward NONE then CAUSE) winner and clears the confidence threshold.
The loop re-encodes node vectors on the previous graph, rebuilds the graph
from fresh pair scores, and stops when the structural difference between
consecutive graphs falls to the threshold or the iteration cap is hit.
The final graph is not forced acyclic; callers may report its acyclicity
score as a diagnostic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph_encoder import EdgeType, encode_graph
from .pair_classifier import Label, RelationVector, enumerate_pairs, score_pairs


class EcgError(ValueError):
    pass


@dataclass
class ECG:
    """Directed heterogeneous graph over one document's events."""

    node_ids: tuple
    adjacency: np.ndarray  # (n, n) int8, pairwise antisymmetric
    edge_types: dict  # (i, j) -> EdgeType
    confidences: dict = field(default_factory=dict)  # (i, j) -> float

    def __post_init__(self):
        n = len(self.node_ids)
        if self.adjacency.shape != (n, n):
            raise EcgError(
                f"adjacency shape {self.adjacency.shape} for {n} nodes"
            )
        if np.diagonal(self.adjacency).any():
            raise EcgError("self-loop in adjacency")
        both = np.logical_and(self.adjacency, self.adjacency.T)
        if both.any():
            i, j = np.argwhere(both)[0]
            raise EcgError(f"edges in both directions between nodes {i} and {j}")
        if set(self.edge_types) != {tuple(e) for e in np.argwhere(self.adjacency)}:
            raise EcgError("edge_types keys do not match adjacency")

    @property
    def n(self) -> int:
        return len(self.node_ids)

    def incoming(self, i: int, etype: EdgeType) -> list:
        return [
            j for j in np.flatnonzero(self.adjacency[:, i])
            if self.edge_types[(int(j), i)] is etype
        ]

    def edges(self) -> list:
        return sorted(self.edge_types)

    def edge_ids(self) -> list:
        return [(self.node_ids[i], self.node_ids[j]) for i, j in self.edges()]


def empty_ecg(node_ids) -> ECG:
    n = len(node_ids)
    return ECG(tuple(node_ids), np.zeros((n, n), dtype=np.int8), {})


def build_ecg(scores: dict, doc, omega: float) -> ECG:
    """Graph from per-pair relation vectors at confidence threshold omega."""
    if not 0.0 < omega:
        raise EcgError(f"omega must be positive, got {omega}")
    n = len(doc.events)
    adj = np.zeros((n, n), dtype=np.int8)
    etypes = {}
    confidences = {}
    for (i, j), vec in scores.items():
        label = vec.label()
        if label is Label.NONE:
            continue
        if label is Label.CAUSE:
            src, dst, conf = i, j, vec.p_cause
        else:
            src, dst, conf = j, i, vec.p_effect
        if conf < omega:
            continue
        adj[src, dst] = 1
        same = doc.events[src].sentence_idx == doc.events[dst].sentence_idx
        etypes[(src, dst)] = EdgeType.INTRA if same else EdgeType.INTER
        confidences[(src, dst)] = conf
    return ECG(
        tuple(ev.event_id for ev in doc.events), adj, etypes, confidences
    )


def structural_difference(a: np.ndarray, b: np.ndarray) -> int:
    if a.shape != b.shape:
        raise EcgError(f"adjacency shapes differ: {a.shape} vs {b.shape}")
    return int(np.abs(a.astype(np.int64) - b.astype(np.int64)).sum())


def effective_max_iterations(max_iterations: int, n_sentences: int) -> int:
    if max_iterations < 1 or n_sentences < 1:
        raise ValueError("max_iterations and n_sentences must be >= 1")
    return min(max_iterations, n_sentences)


@dataclass
class IterationRecord:
    ecg: ECG
    structural_diff: int | None  # None for the initial graph
    scores: object | None  # (n_pairs, 3) probability tensor in train mode


def _scores_to_map(probs, pairs) -> dict:
    return {
        pair: RelationVector.from_array(probs.values[idx])
        for idx, pair in enumerate(pairs)
    }


def run_identification(doc, event_ids, h, params, config,
                       train_mode: bool = False, rng=None,
                       keep_scores: bool | None = None):
    """Initialize-iterate-terminate loop for one document.

    ``h`` is the (n, F) text representation tensor. Returns the final ECG
    and the full iteration trace (initial graph at index 0). Score tensors
    are kept on the trace only in train mode unless ``keep_scores`` says
    otherwise (loss reporting on held-out data wants scores, no dropout).
    """
    keep = train_mode if keep_scores is None else keep_scores
    pairs = enumerate_pairs(doc)
    z = h  # z^(0)
    probs = score_pairs(h, z, pairs, params.classifier, train_mode, rng)
    graph = build_ecg(_scores_to_map(probs, pairs), doc, config.omega)
    trace = [IterationRecord(graph, None, probs if keep else None)]

    limit = effective_max_iterations(config.max_iterations, len(doc.sentences))
    for _ in range(limit):
        z = encode_graph(graph, z, params.graph, config.beta)
        probs = score_pairs(h, z, pairs, params.classifier, train_mode, rng)
        new_graph = build_ecg(_scores_to_map(probs, pairs), doc, config.omega)
        diff = structural_difference(new_graph.adjacency, graph.adjacency)
        trace.append(IterationRecord(new_graph, diff, probs if keep else None))
        graph = new_graph
        if diff <= config.delta:
            break
    return graph, trace


def to_dot(ecg: ECG, triggers: dict | None = None) -> str:
    """Graphviz rendering: solid intra-sentence edges, dashed inter."""
    lines = ["digraph ecg {"]
    for idx, node in enumerate(ecg.node_ids):
        label = node
        if triggers and node in triggers:
            label = f"{node}\\n{triggers[node]}"
        lines.append(f'  n{idx} [label="{label}"];')
    for i, j in ecg.edges():
        style = "solid" if ecg.edge_types[(i, j)] is EdgeType.INTRA else "dashed"
        lines.append(f"  n{i} -> n{j} [style={style}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
