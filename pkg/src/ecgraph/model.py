"""Parameter container tying the encoder, graph attention, and classifier
together, with named-parameter access for the optimizer and checkpoints."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .graph_encoder import EdgeType, GraphEncoderParams, init_graph_encoder
from .pair_classifier import ClassifierParams, init_classifier
from .text_encoder import ToyEncoderParams, init_toy_encoder


@dataclass
class ModelParams:
    encoder: ToyEncoderParams | None  # None when using external vectors
    graph: GraphEncoderParams
    classifier: ClassifierParams


def init_model(config, rng=None) -> ModelParams:
    if rng is None:
        rng = np.random.default_rng(config.seed)
    encoder = None
    if config.encoder == "toy":
        encoder = init_toy_encoder(
            config.vocab_size,
            config.hidden_dim,
            config.max_sentences,
            config.sentence_positions,
            rng,
        )
    graph = init_graph_encoder(config.hidden_dim, config.heads, rng)
    classifier = init_classifier(
        config.hidden_dim,
        config.mid_dim or config.hidden_dim,
        config.dropout,
        config.leaky_slope,
        rng,
    )
    return ModelParams(encoder=encoder, graph=graph, classifier=classifier)


def named_parameters(params: ModelParams) -> dict:
    out = {}
    if params.encoder is not None:
        out["encoder.tok_emb"] = params.encoder.tok_emb
        if params.encoder.pos_emb is not None:
            out["encoder.pos_emb"] = params.encoder.pos_emb
    for etype in EdgeType:
        for k, (w, a) in enumerate(params.graph.heads[etype]):
            out[f"graph.{etype.value}.h{k}.w"] = w
            out[f"graph.{etype.value}.h{k}.a"] = a
    out["classifier.w1"] = params.classifier.w1
    out["classifier.b1"] = params.classifier.b1
    out["classifier.w2"] = params.classifier.w2
    out["classifier.b2"] = params.classifier.b2
    return out


def save_model(params: ModelParams, path):
    ad.save_params(named_parameters(params), path)


def load_model(path, config) -> ModelParams:
    """Rebuild a ModelParams from a checkpoint written by save_model.

    ``config`` supplies the architecture; shapes are verified against it.
    """
    params = init_model(config, rng=np.random.default_rng(0))
    stored = ad.load_params(path)
    named = named_parameters(params)
    if set(stored) != set(named):
        missing = set(named) - set(stored)
        extra = set(stored) - set(named)
        raise ValueError(
            f"checkpoint does not match config (missing={sorted(missing)}, "
            f"unexpected={sorted(extra)})"
        )
    for name, tensor in named.items():
        if stored[name].shape != tensor.shape:
            raise ValueError(
                f"checkpoint parameter {name} has shape {stored[name].shape}, "
                f"config expects {tensor.shape}"
            )
        tensor.values = stored[name].values
    return params
