"""Three-class scoring of ordered event pairs.

Each unordered pair is scored exactly once, in canonical document order
(sentence index, then token start). The input of the two-layer MLP is
[h_i (+) h_j (+) (z_i - z_j)]; the z-subtraction carries the direction
signal. EFFECT means the later-ordered event causes the earlier one.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


class Label(enum.IntEnum):
    NONE = 0
    CAUSE = 1
    EFFECT = 2


@dataclass(frozen=True)
class RelationVector:
    p_none: float
    p_cause: float
    p_effect: float

    @classmethod
    def from_array(cls, arr) -> "RelationVector":
        return cls(float(arr[0]), float(arr[1]), float(arr[2]))

    def as_array(self) -> np.ndarray:
        return np.array([self.p_none, self.p_cause, self.p_effect])

    def label(self) -> Label:
        # ties break toward NONE, then CAUSE (first max wins)
        return Label(int(np.argmax(self.as_array())))


@dataclass
class ClassifierParams:
    w1: Tensor  # (3F, F_mid)
    b1: Tensor  # (F_mid,)
    w2: Tensor  # (F_mid, 3)
    b2: Tensor  # (3,)
    leaky_slope: float
    dropout: float


def init_classifier(dim, mid_dim, dropout, leaky_slope, rng) -> ClassifierParams:
    s1 = 1.0 / (3 * dim) ** 0.5
    s2 = 1.0 / mid_dim**0.5
    return ClassifierParams(
        w1=Tensor(rng.normal(0.0, s1, size=(3 * dim, mid_dim)), requires_grad=True),
        b1=Tensor(np.zeros(mid_dim), requires_grad=True),
        w2=Tensor(rng.normal(0.0, s2, size=(mid_dim, 3)), requires_grad=True),
        b2=Tensor(np.zeros(3), requires_grad=True),
        leaky_slope=leaky_slope,
        dropout=dropout,
    )


def score_pairs(h: Tensor, z: Tensor, pairs, params: ClassifierParams,
                train_mode: bool = False, rng=None) -> Tensor:
    """Probability matrix (n_pairs, 3) over (NONE, CAUSE, EFFECT)."""
    if not pairs:
        return Tensor(np.zeros((0, 3)))
    left = [i for i, _ in pairs]
    right = [j for _, j in pairs]
    x = ad.concat(
        [
            ad.gather_rows(h, left),
            ad.gather_rows(h, right),
            ad.sub(ad.gather_rows(z, left), ad.gather_rows(z, right)),
        ],
        axis=1,
    )
    hidden = ad.leaky_relu(ad.add(ad.matmul(x, params.w1), params.b1), params.leaky_slope)
    hidden = ad.dropout(hidden, params.dropout, train_mode, rng)
    logits = ad.add(ad.matmul(hidden, params.w2), params.b2)
    return ad.softmax(logits, axis=1)


def score_pair(h_i, h_j, z_i, z_j, params: ClassifierParams,
               train_mode: bool = False, rng=None) -> RelationVector:
    """Single-pair convenience wrapper returning plain probabilities."""
    if h_i.shape != h_j.shape or z_i.shape != z_j.shape or h_i.shape != z_i.shape:
        raise ad.ShapeError(
            f"score_pair: mismatched input shapes "
            f"{h_i.shape}/{h_j.shape}/{z_i.shape}/{z_j.shape}"
        )
    h = ad.stack_rows([h_i, h_j])
    z = ad.stack_rows([z_i, z_j])
    probs = score_pairs(h, z, [(0, 1)], params, train_mode, rng)
    return RelationVector.from_array(probs.values[0])


def canonical_event_order(doc) -> list:
    """Event indices sorted by (sentence, token start, original index)."""
    keyed = [
        (ev.sentence_idx, ev.start, idx) for idx, ev in enumerate(doc.events)
    ]
    return [idx for _, _, idx in sorted(keyed)]


def enumerate_pairs(doc) -> list:
    """One ordered pair (i, j) per unordered pair, i before j in document
    order; indices refer to doc.events positions."""
    order = canonical_event_order(doc)
    pairs = []
    for a in range(len(order)):
        for b in range(a + 1, len(order)):
            pairs.append((order[a], order[b]))
    return pairs
