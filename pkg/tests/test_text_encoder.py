import numpy as np
import pytest

from ecgraph import autodiff as ad
from ecgraph.corpus import Document, EventMention
from ecgraph.text_encoder import (
    EncoderError,
    ToyEncoderParams,
    encode_document,
    encode_document_external,
    hash_token,
    import_external,
    init_toy_encoder,
)


def doc_with_triggers(tokens, spans, sentence_of=None):
    """One- or two-sentence doc with events over the given token spans."""
    sentence_of = sentence_of or [0] * len(spans)
    n_sent = max(sentence_of) + 1
    sentences = tuple(tuple(tokens) for _ in range(n_sent))
    events = tuple(
        EventMention(f"e{i}", sentence_of[i], s, e, " ".join(tokens[s:e]))
        for i, (s, e) in enumerate(spans)
    )
    return Document("d", sentences, events, ())


def test_hash_case_folding():
    assert hash_token("Shooting", 1024) == hash_token("shooting", 1024)


def test_hash_stability():
    # frozen values; the hash must never change across runs or platforms
    assert hash_token("shooting", 2**32) == 3907559768
    assert hash_token("a", 97) == hash_token("a", 97)


def test_hash_v1():
    assert hash_token("anything", 1) == 0


def test_hash_rejects_nonpositive_v():
    with pytest.raises(ValueError):
        hash_token("x", 0)


def make_params(vocab=64, dim=8, positions=False):
    rng = np.random.default_rng(9)
    return init_toy_encoder(vocab, dim, 4, positions, rng)


def test_single_token_trigger_is_embedding_row():
    params = make_params()
    doc = doc_with_triggers(["fire", "spread"], [(0, 1)])
    _, h = encode_document(doc, params)
    row = params.tok_emb.values[hash_token("fire", params.vocab_size)]
    assert np.allclose(h.values[0], row)


def test_two_token_trigger_is_mean():
    params = make_params()
    doc = doc_with_triggers(["fire", "spread"], [(0, 2)])
    _, h = encode_document(doc, params)
    u = params.tok_emb.values[hash_token("fire", params.vocab_size)]
    v = params.tok_emb.values[hash_token("spread", params.vocab_size)]
    assert np.allclose(h.values[0], (u + v) / 2)


def test_positions_added():
    params = make_params(positions=True)
    doc = doc_with_triggers(["fire"], [(0, 1)], sentence_of=[0])
    _, h = encode_document(doc, params)
    row = params.tok_emb.values[hash_token("fire", params.vocab_size)]
    assert np.allclose(h.values[0], row + params.pos_emb.values[0])


def test_same_trigger_same_position_same_vector():
    params = make_params(positions=True)
    d1 = doc_with_triggers(["fire", "x"], [(0, 1)])
    d2 = doc_with_triggers(["fire", "y"], [(0, 1)])
    _, h1 = encode_document(d1, params)
    _, h2 = encode_document(d2, params)
    assert (h1.values[0] == h2.values[0]).all()


def test_mean_pooling_coordinate_bounds():
    params = make_params()
    doc = doc_with_triggers(["a", "b", "c"], [(0, 3)])
    _, h = encode_document(doc, params)
    rows = params.tok_emb.values[
        [hash_token(t, params.vocab_size) for t in ("a", "b", "c")]
    ]
    assert (h.values[0] >= rows.min(axis=0) - 1e-12).all()
    assert (h.values[0] <= rows.max(axis=0) + 1e-12).all()


def test_unused_vocab_row_gets_zero_grad():
    params = make_params(vocab=16)
    doc = doc_with_triggers(["a"], [(0, 1)])
    _, h = encode_document(doc, params)
    ad.tsum(h).backward()
    used = hash_token("a", 16)
    grads = params.tok_emb.grad
    mask = np.ones(16, dtype=bool)
    mask[used] = False
    assert (grads[mask] == 0).all()
    assert grads[used].any()


def test_permutation_equivariance():
    params = make_params()
    doc = doc_with_triggers(["a", "b", "c"], [(0, 1), (1, 2), (2, 3)])
    swapped = Document("d", doc.sentences, doc.events[::-1], ())
    _, h = encode_document(doc, params)
    _, h2 = encode_document(swapped, params)
    assert (h2.values == h.values[::-1]).all()


def test_import_external_roundtrip(tmp_path):
    path = tmp_path / "vecs.jsonl"
    path.write_text('{"doc_id": "d", "event_id": "e0", "vector": [1.0, 2.0]}\n')
    vecs = import_external(path, 2)
    assert len(vecs) == 1
    assert np.allclose(vecs[("d", "e0")], [1.0, 2.0])


def test_import_external_dim_mismatch(tmp_path):
    path = tmp_path / "vecs.jsonl"
    path.write_text('{"doc_id": "d", "event_id": "e0", "vector": [1.0]}\n')
    with pytest.raises(EncoderError, match="e0"):
        import_external(path, 2)


def test_import_external_duplicate(tmp_path):
    path = tmp_path / "vecs.jsonl"
    row = '{"doc_id": "d", "event_id": "e0", "vector": [1.0, 2.0]}\n'
    path.write_text(row + row)
    with pytest.raises(EncoderError, match="duplicate"):
        import_external(path, 2)


def test_encode_external_missing_event():
    doc = doc_with_triggers(["a"], [(0, 1)])
    with pytest.raises(EncoderError, match="e0"):
        encode_document_external(doc, {}, 2)


def test_encode_external_is_constant():
    doc = doc_with_triggers(["a"], [(0, 1)])
    _, h = encode_document_external(doc, {("d", "e0"): np.array([1.0, 2.0])}, 2)
    assert not h.requires_grad and not h._parents
