"""Directed heterogeneous graph attention over the event causality graph.

Each node's causal-structure vector is updated from its incoming
neighbors, with separate multi-head attention parameters per edge type
(intra- vs inter-sentence). Nodes carrying both edge types mix the two
aggregates with a fixed weight favoring the intra-sentence side; nodes
with no incoming edges keep their previous vector.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from . import autodiff as ad
from .autodiff import Tensor

ATTENTION_SLOPE = 0.2  # LeakyReLU slope of the attention coefficient


class EdgeType(enum.Enum):
    INTRA = "intra"
    INTER = "inter"


@dataclass
class GraphEncoderParams:
    """Per edge type, per head: projection W (F x F') and attention
    vector a (2F'), with K * F' == F."""

    heads: dict  # EdgeType -> list of (W, a)
    n_heads: int
    dim: int

    @property
    def head_dim(self) -> int:
        return self.dim // self.n_heads

    def head(self, etype: EdgeType, k: int):
        return self.heads[etype][k]


def init_graph_encoder(dim, n_heads, rng) -> GraphEncoderParams:
    if dim % n_heads != 0:
        raise ValueError(f"dim {dim} not divisible by {n_heads} heads")
    fprime = dim // n_heads
    scale = 1.0 / dim**0.5
    heads = {}
    for etype in EdgeType:
        per_type = []
        for _ in range(n_heads):
            w = Tensor(rng.normal(0.0, scale, size=(dim, fprime)), requires_grad=True)
            a = Tensor(rng.normal(0.0, scale, size=(2 * fprime,)), requires_grad=True)
            per_type.append((w, a))
        heads[etype] = per_type
    return GraphEncoderParams(heads=heads, n_heads=n_heads, dim=dim)


def attention_coeff(z_i, z_j, etype: EdgeType, k: int, params: GraphEncoderParams) -> Tensor:
    """Type-specific importance coefficient
    LeakyReLU(a . [W z_i (+) W z_j]) as a scalar tensor."""
    w, a = params.head(etype, k)
    proj = ad.concat([ad.matmul(z_i, w), ad.matmul(z_j, w)])
    return ad.leaky_relu(ad.matmul(a, proj), ATTENTION_SLOPE)


def neighbor_weights(coeffs) -> Tensor:
    """Softmax-normalized weights over incoming-edge coefficients."""
    if isinstance(coeffs, Tensor):
        vec = coeffs
    else:
        coeffs = list(coeffs)
        if not coeffs:
            raise ValueError("neighbor_weights needs a nonempty coefficient set")
        vec = ad.stack_scalars([ad._coerce(c) for c in coeffs])
    return ad.softmax(vec)


def update_node(i: int, etype: EdgeType, z: Tensor, neighbors, params: GraphEncoderParams) -> Tensor:
    """Multi-head attention aggregate of node i's incoming neighbors of
    one edge type; heads are ELU-activated and concatenated back to F."""
    if not neighbors:
        raise ValueError(f"update_node on node {i} with no {etype.value} neighbors")
    fprime = params.head_dim
    z_i = ad.take_row(z, i)
    z_nb = ad.gather_rows(z, list(neighbors))
    outs = []
    for k in range(params.n_heads):
        w, a = params.head(etype, k)
        a_src = ad.narrow(a, 0, fprime)
        a_dst = ad.narrow(a, fprime, 2 * fprime)
        proj = ad.matmul(z_nb, w)  # (N, F')
        proj_i = ad.matmul(z_i, w)  # (F',)
        # coefficient of edge j -> i is a . [W z_j (+) W z_i]
        coeff = ad.leaky_relu(
            ad.add(ad.matmul(proj, a_src), ad.matmul(proj_i, a_dst)),
            ATTENTION_SLOPE,
        )
        weights = ad.softmax(coeff)
        outs.append(ad.elu(ad.matmul(weights, proj)))
    return ad.concat(outs)


def combine_types(z_intra: Tensor, z_inter: Tensor, beta: float) -> Tensor:
    return ad.add(ad.mul(z_intra, beta), ad.mul(z_inter, 1.0 - beta))


def encode_graph(ecg, prev: Tensor, params: GraphEncoderParams, beta: float) -> Tensor:
    """One attention pass over the current graph.

    ``ecg`` must expose ``n`` and ``incoming(i, etype) -> list of source
    node indices``. Returns the updated (n, F) representation matrix.
    """
    rows = []
    for i in range(ecg.n):
        intra = ecg.incoming(i, EdgeType.INTRA)
        inter = ecg.incoming(i, EdgeType.INTER)
        if intra and inter:
            rows.append(
                combine_types(
                    update_node(i, EdgeType.INTRA, prev, intra, params),
                    update_node(i, EdgeType.INTER, prev, inter, params),
                    beta,
                )
            )
        elif intra:
            rows.append(update_node(i, EdgeType.INTRA, prev, intra, params))
        elif inter:
            rows.append(update_node(i, EdgeType.INTER, prev, inter, params))
        else:
            rows.append(ad.take_row(prev, i))
    if not rows:
        return prev
    return ad.stack_rows(rows)
