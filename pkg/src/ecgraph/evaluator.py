"""Micro-averaged precision/recall/F1 over identified causal edges.

Two settings: direction (a predicted edge counts only if its orientation
matches gold) and existence (edges collapse to unordered CAUSAL pairs).
Each is split into intra-sentence, inter-sentence, and intra+inter.
Zero-denominator convention: P, R, and F1 all fall back to 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

SPLITS = ("intra", "inter", "intra+inter")


class EvalError(ValueError):
    pass


@dataclass
class Metrics:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float:
        denom = self.tp + self.fp
        return self.tp / denom if denom else 0.0

    @property
    def recall(self) -> float:
        denom = self.tp + self.fn
        return self.tp / denom if denom else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0


@dataclass
class EvalReport:
    direction: dict = field(default_factory=dict)  # split -> Metrics
    existence: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def pack(metrics):
            return {
                split: {
                    "precision": m.precision,
                    "recall": m.recall,
                    "f1": m.f1,
                    "tp": m.tp,
                    "fp": m.fp,
                    "fn": m.fn,
                }
                for split, m in metrics.items()
            }

        return {"direction": pack(self.direction), "existence": pack(self.existence)}


def _check_docs(pred_edges: dict, gold_docs):
    gold_ids = {doc.doc_id for doc in gold_docs}
    pred_ids = set(pred_edges)
    if gold_ids != pred_ids:
        raise EvalError(
            f"document mismatch: only-gold={sorted(gold_ids - pred_ids)}, "
            f"only-pred={sorted(pred_ids - gold_ids)}"
        )


def _split_of(sent_of: dict, a: str, b: str) -> str:
    for eid in (a, b):
        if eid not in sent_of:
            raise EvalError(f"edge references unknown event {eid}")
    return "intra" if sent_of[a] == sent_of[b] else "inter"


def _count(pred_edges: dict, gold_docs, collapse: bool) -> dict:
    metrics = {split: Metrics() for split in SPLITS}
    for doc in gold_docs:
        sent_of = {ev.event_id: ev.sentence_idx for ev in doc.events}
        gold = {(r.source_event, r.target_event) for r in doc.gold_relations}
        pred = set(tuple(e) for e in pred_edges[doc.doc_id])
        if collapse:
            gold = {frozenset(e) for e in gold}
            pred = {frozenset(e) for e in pred}
        for edge in pred | gold:
            a, b = tuple(edge)
            split = _split_of(sent_of, a, b)
            if edge in pred and edge in gold:
                metrics[split].tp += 1
            elif edge in pred:
                metrics[split].fp += 1
            else:
                metrics[split].fn += 1
    total = metrics["intra+inter"]
    total.tp = metrics["intra"].tp + metrics["inter"].tp
    total.fp = metrics["intra"].fp + metrics["inter"].fp
    total.fn = metrics["intra"].fn + metrics["inter"].fn
    return metrics


def evaluate_direction(pred_edges: dict, gold_docs) -> dict:
    """pred_edges: doc_id -> iterable of (source_id, target_id)."""
    _check_docs(pred_edges, gold_docs)
    return _count(pred_edges, gold_docs, collapse=False)


def evaluate_existence(pred_edges: dict, gold_docs) -> dict:
    _check_docs(pred_edges, gold_docs)
    return _count(pred_edges, gold_docs, collapse=True)


def build_report(pred_edges: dict, gold_docs) -> EvalReport:
    return EvalReport(
        direction=evaluate_direction(pred_edges, gold_docs),
        existence=evaluate_existence(pred_edges, gold_docs),
    )


def format_report(report: EvalReport) -> str:
    header = f"{'setting':<11}" + "".join(
        f"{split + ' ' + m:>18}" for split in SPLITS for m in ("P", "R", "F1")
    )
    lines = [header]
    for name, metrics in (("direction", report.direction), ("existence", report.existence)):
        cells = []
        for split in SPLITS:
            m = metrics[split]
            cells += [m.precision, m.recall, m.f1]
        lines.append(f"{name:<11}" + "".join(f"{c:>18.4f}" for c in cells))
    return "\n".join(lines)
