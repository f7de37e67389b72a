"""Contextual text representations for event mentions.

The built-in trainable encoder hashes tokens into a shared embedding table
(64-bit FNV-1a of the case-folded UTF-8 bytes, modulo the table size) and
mean-pools the trigger tokens, optionally adding a sentence-position
embedding. Externally computed per-event vectors can be imported instead;
those are treated as constants.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


class EncoderError(ValueError):
    pass


def hash_token(token: str, vocab_size: int) -> int:
    """Stable case-folded token index in [0, vocab_size)."""
    if vocab_size <= 0:
        raise ValueError("vocab_size must be positive")
    h = _FNV_OFFSET
    for b in token.casefold().encode("utf-8"):
        h ^= b
        h = (h * _FNV_PRIME) & _MASK64
    return h % vocab_size


@dataclass
class ToyEncoderParams:
    tok_emb: Tensor  # (V, H)
    pos_emb: Tensor | None  # (S_max, H) or None when positions disabled

    @property
    def vocab_size(self) -> int:
        return self.tok_emb.shape[0]

    @property
    def dim(self) -> int:
        return self.tok_emb.shape[1]


def init_toy_encoder(vocab_size, dim, max_sentences, use_positions, rng) -> ToyEncoderParams:
    if vocab_size < 2 or dim < 2:
        raise EncoderError("vocab_size and dim must both be >= 2")
    tok = Tensor(rng.normal(0.0, 1.0, size=(vocab_size, dim)), requires_grad=True)
    pos = None
    if use_positions:
        pos = Tensor(rng.normal(0.0, 0.1, size=(max_sentences, dim)), requires_grad=True)
    return ToyEncoderParams(tok_emb=tok, pos_emb=pos)


def encode_document(doc, params: ToyEncoderParams):
    """Per-event mean-pooled trigger embeddings.

    Returns (event ids in document event order, Tensor of shape (n, H)).
    Differentiable w.r.t. the embedding tables.
    """
    rows = []
    for ev in doc.events:
        tokens = doc.trigger_tokens(ev)
        idx = [hash_token(t, params.vocab_size) for t in tokens]
        emb = ad.gather_rows(params.tok_emb, idx)
        if params.pos_emb is not None:
            p = min(ev.sentence_idx, params.pos_emb.shape[0] - 1)
            emb = ad.add(emb, ad.gather_rows(params.pos_emb, [p]))
        rows.append(ad.mean(emb, axis=0))
    if not rows:
        return [], Tensor(np.zeros((0, params.dim)))
    return [ev.event_id for ev in doc.events], ad.stack_rows(rows)


def import_external(path, dim: int) -> dict:
    """Load (doc_id, event_id) -> vector from a JSONL file of
    {doc_id, event_id, vector:[...]} rows."""
    out = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                key = (str(rec["doc_id"]), str(rec["event_id"]))
                vec = np.asarray(rec["vector"], dtype=np.float64)
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise EncoderError(f"{path}:{lineno}: malformed row: {exc}") from exc
            if vec.shape != (dim,):
                raise EncoderError(
                    f"{path}:{lineno}: event {key[1]} has dimension "
                    f"{vec.shape}, expected ({dim},)"
                )
            if key in out:
                raise EncoderError(f"{path}:{lineno}: duplicate entry for {key}")
            out[key] = vec
    return out


def encode_document_external(doc, vectors: dict, dim: int):
    """Constant (no-gradient) representations from imported vectors."""
    rows = []
    for ev in doc.events:
        key = (doc.doc_id, ev.event_id)
        if key not in vectors:
            raise EncoderError(f"no external vector for event {key}")
        rows.append(vectors[key])
    if not rows:
        return [], Tensor(np.zeros((0, dim)))
    return [ev.event_id for ev in doc.events], Tensor(np.stack(rows))
