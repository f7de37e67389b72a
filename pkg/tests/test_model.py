import numpy as np
import pytest

from ecgraph.config import RunConfig
from ecgraph.model import init_model, load_model, named_parameters, save_model


def cfg(**overrides):
    base = dict(hidden_dim=16, heads=2, vocab_size=64, max_sentences=8)
    base.update(overrides)
    return RunConfig(**base).validate()


def test_named_parameters_complete():
    params = init_model(cfg())
    names = set(named_parameters(params))
    assert {"encoder.tok_emb", "encoder.pos_emb",
            "classifier.w1", "classifier.b1",
            "classifier.w2", "classifier.b2"} <= names
    for etype in ("intra", "inter"):
        for k in range(2):
            assert f"graph.{etype}.h{k}.w" in names
            assert f"graph.{etype}.h{k}.a" in names
    assert len(names) == 2 + 2 * 2 * 2 + 4


def test_no_position_table_when_disabled():
    params = init_model(cfg(sentence_positions=False))
    assert "encoder.pos_emb" not in named_parameters(params)


def test_external_encoder_has_no_embedding_table():
    params = init_model(cfg(encoder="external", external_vectors="v.jsonl"))
    assert params.encoder is None
    assert not any(n.startswith("encoder.") for n in named_parameters(params))


def test_init_deterministic_in_seed():
    a = named_parameters(init_model(cfg(seed=4)))
    b = named_parameters(init_model(cfg(seed=4)))
    c = named_parameters(init_model(cfg(seed=5)))
    for name in a:
        assert (a[name].values == b[name].values).all()
    assert any((a[n].values != c[n].values).any() for n in a)


def test_save_load_roundtrip(tmp_path):
    conf = cfg(seed=1)
    params = init_model(conf)
    path = tmp_path / "model.json"
    save_model(params, path)
    loaded = load_model(path, conf)
    orig = named_parameters(params)
    back = named_parameters(loaded)
    for name in orig:
        assert (orig[name].values == back[name].values).all()


def test_load_rejects_wrong_architecture(tmp_path):
    params = init_model(cfg())
    path = tmp_path / "model.json"
    save_model(params, path)
    with pytest.raises(ValueError, match="shape"):
        load_model(path, cfg(hidden_dim=32))
    with pytest.raises(ValueError, match="match"):
        load_model(path, cfg(sentence_positions=False))
