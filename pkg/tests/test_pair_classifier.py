import numpy as np
import pytest

from ecgraph import autodiff as ad
from ecgraph.autodiff import Tensor
from ecgraph.corpus import Document, EventMention
from ecgraph.pair_classifier import (
    ClassifierParams,
    Label,
    RelationVector,
    canonical_event_order,
    enumerate_pairs,
    init_classifier,
    score_pair,
    score_pairs,
)


def make_params(dim=4, mid=6, dropout=0.0, seed=0):
    return init_classifier(dim, mid, dropout, 0.2, np.random.default_rng(seed))


def test_label_argmax():
    assert RelationVector(0.1, 0.7, 0.2).label() is Label.CAUSE
    assert RelationVector(0.1, 0.2, 0.7).label() is Label.EFFECT
    assert RelationVector(0.8, 0.1, 0.1).label() is Label.NONE


def test_label_ties_favor_none_then_cause():
    third = 1.0 / 3.0
    assert RelationVector(third, third, third).label() is Label.NONE
    assert RelationVector(0.2, 0.4, 0.4).label() is Label.CAUSE


def test_scores_are_distributions():
    params = make_params()
    rng = np.random.default_rng(1)
    h = Tensor(rng.normal(size=(4, 4)))
    probs = score_pairs(h, h, [(0, 1), (2, 3), (1, 3)], params).values
    assert probs.shape == (3, 3)
    assert (probs > 0).all()
    assert np.allclose(probs.sum(axis=1), 1.0)


def test_no_pairs_gives_empty_matrix():
    params = make_params()
    h = Tensor(np.zeros((1, 4)))
    assert score_pairs(h, h, [], params).values.shape == (0, 3)


def test_score_pair_matches_batch():
    params = make_params()
    rng = np.random.default_rng(2)
    h = Tensor(rng.normal(size=(2, 4)))
    z = Tensor(rng.normal(size=(2, 4)))
    batch = score_pairs(h, z, [(0, 1)], params).values[0]
    single = score_pair(
        ad.take_row(h, 0), ad.take_row(h, 1),
        ad.take_row(z, 0), ad.take_row(z, 1), params,
    )
    assert np.allclose(single.as_array(), batch)


def test_score_pair_shape_mismatch():
    params = make_params()
    a, b = Tensor(np.zeros(4)), Tensor(np.zeros(5))
    with pytest.raises(ad.ShapeError):
        score_pair(a, b, a, a, params)


def test_direction_signal_comes_from_z_difference():
    # with z_i == z_j the direction feature vanishes, so swapping z's sign
    # while keeping h fixed must change the output unless z_i - z_j == 0
    params = make_params()
    rng = np.random.default_rng(3)
    h = Tensor(rng.normal(size=(2, 4)))
    z_eq = Tensor(np.tile(rng.normal(size=4), (2, 1)))
    z_ne = Tensor(rng.normal(size=(2, 4)))
    p_eq1 = score_pairs(h, z_eq, [(0, 1)], params).values
    p_eq2 = score_pairs(h, z_eq, [(0, 1)], params).values
    assert np.allclose(p_eq1, p_eq2)
    p_ne = score_pairs(h, z_ne, [(0, 1)], params).values
    assert np.abs(p_ne - p_eq1).max() > 1e-9


def test_zero_hidden_weights_give_uniform():
    params = ClassifierParams(
        w1=Tensor(np.zeros((12, 6))), b1=Tensor(np.zeros(6)),
        w2=Tensor(np.zeros((6, 3))), b2=Tensor(np.zeros(3)),
        leaky_slope=0.2, dropout=0.0,
    )
    h = Tensor(np.ones((2, 4)))
    probs = score_pairs(h, h, [(0, 1)], params).values
    assert np.allclose(probs, 1.0 / 3.0)


def test_bias_shifts_logits():
    params = ClassifierParams(
        w1=Tensor(np.zeros((12, 6))), b1=Tensor(np.zeros(6)),
        w2=Tensor(np.zeros((6, 3))), b2=Tensor(np.array([0.0, np.log(2.0), 0.0])),
        leaky_slope=0.2, dropout=0.0,
    )
    h = Tensor(np.ones((2, 4)))
    probs = score_pairs(h, h, [(0, 1)], params).values[0]
    assert np.allclose(probs, [0.25, 0.5, 0.25])


def test_dropout_train_mode_is_stochastic():
    params = make_params(dropout=0.5)
    rng_h = np.random.default_rng(4)
    h = Tensor(rng_h.normal(size=(2, 4)))
    a = score_pairs(h, h, [(0, 1)], params, train_mode=True,
                    rng=np.random.default_rng(1)).values
    b = score_pairs(h, h, [(0, 1)], params, train_mode=True,
                    rng=np.random.default_rng(2)).values
    assert not np.allclose(a, b)


def test_gradients_flow_to_all_parameters():
    params = make_params()
    rng = np.random.default_rng(5)
    h = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    z = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    probs = score_pairs(h, z, [(0, 1), (0, 2)], params)
    ad.tsum(ad.log(probs)).backward()
    for t in (params.w1, params.b1, params.w2, params.b2, h, z):
        assert t.grad is not None and np.abs(t.grad).sum() > 0


def test_classifier_gradient_check():
    params = make_params()
    rng = np.random.default_rng(6)
    h = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    z = Tensor(rng.normal(size=(3, 4)), requires_grad=True)

    def f():
        probs = score_pairs(h, z, [(0, 1), (1, 2)], params)
        return ad.tsum(ad.mul(probs, probs))

    named = {"w1": params.w1, "b1": params.b1, "w2": params.w2,
             "b2": params.b2, "h": h, "z": z}
    report = ad.gradient_check(f, named, eps=1e-5, rel_tol=1e-4)
    assert report.passed, report


def doc_with_layout(layout):
    """layout: list of (sentence_idx, start) per event, one-token spans."""
    n_sent = max(s for s, _ in layout) + 1
    width = max(t for _, t in layout) + 1
    sentences = tuple(tuple(f"t{k}" for k in range(width)) for _ in range(n_sent))
    events = tuple(
        EventMention(f"e{i}", s, t, t + 1, f"t{t}")
        for i, (s, t) in enumerate(layout)
    )
    return Document("d", sentences, events, ())


def test_canonical_order_by_sentence_then_start():
    doc = doc_with_layout([(1, 0), (0, 2), (0, 0)])
    assert canonical_event_order(doc) == [2, 1, 0]


def test_enumerate_pairs_canonical_and_complete():
    doc = doc_with_layout([(1, 0), (0, 2), (0, 0)])
    pairs = enumerate_pairs(doc)
    assert pairs == [(2, 1), (2, 0), (1, 0)]
    # every unordered pair appears exactly once
    assert len({frozenset(p) for p in pairs}) == len(pairs) == 3


def test_enumerate_pairs_single_event():
    assert enumerate_pairs(doc_with_layout([(0, 0)])) == []
