"""Training loop: per-iteration focal loss, harmonic iteration discounting,
and a decoupled-weight-decay adaptive optimizer with linear warmup.

Batch size is one document. Each constructed iteration graph contributes a
loss term from that iteration's pair scores against the gold labels; the
terms are combined with weight 1/l for the l-th iteration and the whole
unrolled computation is backpropagated in one pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .ecg_builder import run_identification
from .evaluator import build_report
from .model import ModelParams, named_parameters
from .pair_classifier import Label, enumerate_pairs
from .text_encoder import encode_document, encode_document_external

PROB_FLOOR = 1e-12  # clamp before log; softmax outputs may underflow


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class LossConfig:
    gamma: float = 2.0
    alpha_causal: float = 0.75

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if not 0.0 < self.alpha_causal < 1.0:
            raise ValueError("alpha_causal must be in (0, 1)")

    def alpha(self, label: Label) -> float:
        return self.alpha_causal if label is not Label.NONE else 1.0 - self.alpha_causal


def focal_loss(p_hat: float, true_class: Label, cfg: LossConfig) -> float:
    """Single-pair alpha-balanced focal term, natural log."""
    if not 0.0 < p_hat <= 1.0:
        raise ValueError(f"p_hat must be in (0, 1], got {p_hat}")
    return cfg.alpha(true_class) * (1.0 - p_hat) ** cfg.gamma * -math.log(p_hat)


def assign_gold_label(pair, doc) -> Label:
    """Label of a canonically ordered pair of event indices."""
    i, j = pair
    src, dst = doc.events[i].event_id, doc.events[j].event_id
    forward = backward = False
    for rel in doc.gold_relations:
        if rel.source_event == src and rel.target_event == dst:
            forward = True
        elif rel.source_event == dst and rel.target_event == src:
            backward = True
    if forward and backward:
        raise TrainingError(
            f"doc {doc.doc_id}: contradictory gold relations for pair {pair}"
        )
    if forward:
        return Label.CAUSE
    if backward:
        return Label.EFFECT
    return Label.NONE


def gold_labels(doc, pairs) -> list:
    return [assign_gold_label(p, doc) for p in pairs]


def iteration_loss(scores: Tensor, labels, cfg: LossConfig) -> Tensor:
    """Sum of focal terms over a document's pairs for one iteration."""
    n = scores.shape[0]
    if n == 0:
        return Tensor(0.0)
    onehot = np.zeros((n, 3))
    alphas = np.zeros(n)
    for row, label in enumerate(labels):
        onehot[row, int(label)] = 1.0
        alphas[row] = cfg.alpha(label)
    p_true = ad.tsum(ad.mul(scores, onehot), axis=1)
    p_true = ad.clamp(p_true, PROB_FLOOR, 1.0)
    terms = ad.mul(
        ad.mul(ad.power(ad.sub(1.0, p_true), cfg.gamma), -ad.log(p_true)),
        alphas,
    )
    return ad.tsum(terms)


def discounted_total_loss(iter_losses):
    """Sum of iteration losses weighted by 1/l (1-indexed).

    Works on plain floats and on autodiff tensors alike.
    """
    losses = list(iter_losses)
    if not losses:
        raise ValueError("discounted_total_loss needs at least one entry")
    total = None
    for l, x in enumerate(losses, start=1):
        term = x * (1.0 / l)
        total = term if total is None else total + term
    return total


# -- optimizer ----------------------------------------------------------------


class AdamW:
    """Adam with decoupled weight decay and linear warmup."""

    def __init__(self, params: dict, lr=1e-4, betas=(0.9, 0.999), eps=1e-8,
                 weight_decay=0.01, warmup_frac=0.1, total_steps=1,
                 schedule="constant"):
        if schedule not in ("constant", "linear"):
            raise ValueError(f"unknown lr schedule {schedule!r}")
        self.params = dict(params)
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.warmup_steps = max(1, int(round(warmup_frac * total_steps)))
        self.total_steps = total_steps
        self.schedule = schedule
        self.step_count = 0
        self._m = {k: np.zeros_like(t.values) for k, t in self.params.items()}
        self._v = {k: np.zeros_like(t.values) for k, t in self.params.items()}

    def lr_at(self, step: int) -> float:
        if step <= self.warmup_steps:
            return self.lr * step / self.warmup_steps
        if self.schedule == "linear":
            remaining = max(self.total_steps - self.warmup_steps, 1)
            frac = (self.total_steps - step) / remaining
            return self.lr * max(frac, 0.0)
        return self.lr

    def zero_grad(self):
        for t in self.params.values():
            t.zero_grad()

    def step(self):
        self.step_count += 1
        b1, b2 = self.betas
        lr = self.lr_at(self.step_count)
        bc1 = 1.0 - b1**self.step_count
        bc2 = 1.0 - b2**self.step_count
        for name, t in self.params.items():
            g = t.grad if t.grad is not None else np.zeros_like(t.values)
            m = self._m[name]
            v = self._v[name]
            m += (1.0 - b1) * (g - m)
            v += (1.0 - b2) * (g * g - v)
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            t.values -= lr * (update + self.weight_decay * t.values)


# -- training loop -------------------------------------------------------------


def encode_for(doc, params: ModelParams, config, external=None):
    if config.encoder == "toy":
        return encode_document(doc, params.encoder)
    return encode_document_external(doc, external, config.hidden_dim)


def document_loss(doc, params: ModelParams, config, train_mode=True, rng=None,
                  external=None):
    """Run the identification loop and return (discounted loss, trace)."""
    _, h = encode_for(doc, params, config, external)
    _, trace = run_identification(
        doc, [ev.event_id for ev in doc.events], h, params, config,
        train_mode=train_mode, rng=rng, keep_scores=True,
    )
    pairs = enumerate_pairs(doc)
    labels = gold_labels(doc, pairs)
    cfg = LossConfig(gamma=config.gamma, alpha_causal=config.alpha_causal)
    iter_losses = [iteration_loss(rec.scores, labels, cfg) for rec in trace[1:]]
    return discounted_total_loss(iter_losses), trace


def predict_docs(docs, params: ModelParams, config, external=None) -> dict:
    """Inference pass; returns doc_id -> (final ECG, trace)."""
    out = {}
    for doc in docs:
        _, h = encode_for(doc, params, config, external)
        ecg, trace = run_identification(
            doc, [ev.event_id for ev in doc.events], h, params, config,
            train_mode=False,
        )
        out[doc.doc_id] = (ecg, trace)
    return out


def _dev_f1s(dev_docs, params, config, external):
    preds = {
        doc_id: set(ecg.edge_ids())
        for doc_id, (ecg, _) in predict_docs(dev_docs, params, config, external).items()
    }
    report = build_report(preds, dev_docs)
    return (
        report.direction["intra+inter"].f1,
        report.existence["intra+inter"].f1,
    )


def train(train_docs, params: ModelParams, config, dev_docs=None, external=None):
    """Optimize the model, one document per step.

    Returns (params, per-epoch log records). When a dev set is given the
    returned parameters are the checkpoint with the best overall direction
    F1 on it; otherwise the final parameters.
    """
    if not train_docs:
        raise TrainingError("empty training corpus")
    named = named_parameters(params)
    opt = AdamW(
        named,
        lr=config.learning_rate,
        weight_decay=config.weight_decay,
        warmup_frac=config.warmup_frac,
        total_steps=config.epochs * len(train_docs),
        schedule=config.lr_schedule,
    )
    rng = np.random.default_rng(config.seed)
    log = []
    best_f1 = -1.0
    best_values = None
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(train_docs))
        epoch_losses = []
        for idx in order:
            doc = train_docs[int(idx)]
            total, trace = document_loss(
                doc, params, config, train_mode=True, rng=rng, external=external
            )
            if not np.isfinite(total.values).all():
                raise TrainingError(
                    f"non-finite loss on doc {doc.doc_id} "
                    f"(iterations run: {len(trace) - 1})"
                )
            opt.zero_grad()
            total.backward()
            opt.step()
            epoch_losses.append(total.item())
        record = {
            "epoch": epoch,
            "mean_train_loss": float(np.mean(epoch_losses)),
        }
        if dev_docs:
            dir_f1, exi_f1 = _dev_f1s(dev_docs, params, config, external)
            record["dev_direction_f1"] = dir_f1
            record["dev_existence_f1"] = exi_f1
            if dir_f1 > best_f1:
                best_f1 = dir_f1
                best_values = {k: t.values.copy() for k, t in named.items()}
        log.append(record)
    if best_values is not None:
        for k, t in named.items():
            t.values = best_values[k]
    return params, log
