import math

import numpy as np
import pytest

from ecgraph import autodiff as ad
from ecgraph import config, model
from ecgraph.autodiff import Tensor
from ecgraph.corpus import (
    CausalRelation,
    Document,
    EventMention,
    SynthSpec,
    gen_synthetic,
)
from ecgraph.pair_classifier import Label
from ecgraph.trainer import (
    AdamW,
    LossConfig,
    TrainingError,
    assign_gold_label,
    discounted_total_loss,
    document_loss,
    focal_loss,
    gold_labels,
    iteration_loss,
    predict_docs,
    train,
)


# -- focal loss -----------------------------------------------------------------


def focal_oracle(p, label, gamma=2.0, alpha_causal=0.75):
    alpha = alpha_causal if label != Label.NONE else 1 - alpha_causal
    return alpha * (1 - p) ** gamma * -math.log(p)


def test_focal_loss_hand_value():
    cfg = LossConfig()
    got = focal_loss(0.5, Label.CAUSE, cfg)
    assert got == pytest.approx(0.75 * 0.25 * math.log(2.0), abs=1e-15)


def test_focal_loss_matches_oracle_grid():
    cfg = LossConfig(gamma=2.0, alpha_causal=0.75)
    for p in (0.01, 0.1, 0.5, 0.9, 1.0):
        for label in Label:
            assert focal_loss(p, label, cfg) == pytest.approx(
                focal_oracle(p, label), rel=1e-12
            )


def test_focal_loss_perfect_prediction_is_zero():
    assert focal_loss(1.0, Label.NONE, LossConfig()) == 0.0


def test_focal_loss_rejects_zero_probability():
    with pytest.raises(ValueError):
        focal_loss(0.0, Label.CAUSE, LossConfig())


def test_focal_gamma_zero_is_weighted_cross_entropy():
    cfg = LossConfig(gamma=0.0)
    assert focal_loss(0.5, Label.CAUSE, cfg) == pytest.approx(0.75 * math.log(2.0))


def test_loss_config_validation():
    with pytest.raises(ValueError):
        LossConfig(gamma=-1.0)
    with pytest.raises(ValueError):
        LossConfig(alpha_causal=1.0)


def test_iteration_loss_matches_scalar_path():
    cfg = LossConfig()
    probs = np.array([[0.2, 0.5, 0.3], [0.7, 0.2, 0.1], [0.1, 0.1, 0.8]])
    labels = [Label.CAUSE, Label.NONE, Label.EFFECT]
    got = iteration_loss(Tensor(probs), labels, cfg).item()
    want = sum(
        focal_loss(probs[r, int(lab)], lab, cfg) for r, lab in enumerate(labels)
    )
    assert got == pytest.approx(want, rel=1e-12)


def test_iteration_loss_empty():
    assert iteration_loss(Tensor(np.zeros((0, 3))), [], LossConfig()).item() == 0.0


def test_iteration_loss_gradient_check():
    cfg = LossConfig()
    logits = Tensor(np.random.default_rng(0).normal(size=(4, 3)), requires_grad=True)
    labels = [Label.CAUSE, Label.NONE, Label.EFFECT, Label.CAUSE]

    def f():
        return iteration_loss(ad.softmax(logits, axis=1), labels, cfg)

    report = ad.gradient_check(f, {"logits": logits}, eps=1e-6, rel_tol=1e-5)
    assert report.passed, report


# -- discounting ------------------------------------------------------------------


def test_discounted_total_harmonic():
    assert discounted_total_loss([1.0, 1.0, 1.0]) == pytest.approx(11.0 / 6.0, abs=1e-12)


def test_discounted_total_single():
    assert discounted_total_loss([4.0]) == 4.0


def test_discounted_total_weights_decay():
    assert discounted_total_loss([0.0, 2.0]) == pytest.approx(1.0)


def test_discounted_total_empty_raises():
    with pytest.raises(ValueError):
        discounted_total_loss([])


def test_discounted_total_on_tensors_backprops():
    xs = [Tensor(1.0, requires_grad=True) for _ in range(3)]
    discounted_total_loss(xs).backward()
    for l, x in enumerate(xs, start=1):
        assert np.allclose(x.grad, 1.0 / l)


# -- gold labels --------------------------------------------------------------------


def label_doc(relations):
    sentences = (("a", "b", "c"),)
    events = tuple(EventMention(f"e{i}", 0, i, i + 1, "x") for i in range(3))
    return Document("d", sentences, events,
                    tuple(CausalRelation(s, t) for s, t in relations))


def test_assign_gold_label_directions():
    d = label_doc([("e0", "e1"), ("e2", "e1")])
    assert assign_gold_label((0, 1), d) is Label.CAUSE
    assert assign_gold_label((1, 2), d) is Label.EFFECT
    assert assign_gold_label((0, 2), d) is Label.NONE


def test_assign_gold_label_contradiction():
    events = tuple(EventMention(f"e{i}", 0, i, i + 1, "x") for i in range(2))
    d = Document.__new__(Document)
    object.__setattr__(d, "doc_id", "d")
    object.__setattr__(d, "sentences", (("a", "b"),))
    object.__setattr__(d, "events", events)
    object.__setattr__(
        d, "gold_relations",
        (CausalRelation("e0", "e1"), CausalRelation("e1", "e0")),
    )
    object.__setattr__(d, "coref_chains", None)
    with pytest.raises(TrainingError, match="contradictory"):
        assign_gold_label((0, 1), d)


def test_gold_labels_counts():
    d = label_doc([("e0", "e1")])
    labels = gold_labels(d, [(0, 1), (0, 2), (1, 2)])
    assert labels == [Label.CAUSE, Label.NONE, Label.NONE]


# -- optimizer ---------------------------------------------------------------------


def test_adamw_first_step_size_is_lr():
    # with warmup done, Adam's bias-corrected first step is lr * sign(grad)
    t = Tensor(np.array([1.0, -1.0]), requires_grad=True)
    opt = AdamW({"t": t}, lr=0.1, weight_decay=0.0, warmup_frac=0.0, total_steps=10)
    t.grad = np.array([3.0, -0.5])
    before = t.values.copy()
    opt.step()
    assert np.allclose(before - t.values, [0.1, -0.1], atol=1e-6)


def test_adamw_warmup_ramps_linearly():
    t = Tensor(np.zeros(1), requires_grad=True)
    opt = AdamW({"t": t}, lr=1.0, warmup_frac=0.5, total_steps=10)
    assert opt.lr_at(1) == pytest.approx(0.2)
    assert opt.lr_at(5) == pytest.approx(1.0)
    assert opt.lr_at(9) == pytest.approx(1.0)  # constant after warmup


def test_adamw_linear_decay():
    t = Tensor(np.zeros(1), requires_grad=True)
    opt = AdamW({"t": t}, lr=1.0, warmup_frac=0.0, total_steps=10, schedule="linear")
    assert opt.lr_at(10) == pytest.approx(0.0, abs=1e-12)
    assert opt.lr_at(5) > opt.lr_at(8)


def test_adamw_weight_decay_decoupled():
    t = Tensor(np.array([2.0]), requires_grad=True)
    opt = AdamW({"t": t}, lr=0.1, weight_decay=0.5, warmup_frac=0.0, total_steps=1)
    t.grad = np.zeros(1)
    opt.step()
    # zero gradient: only the decay term moves the weight
    assert np.allclose(t.values, 2.0 - 0.1 * 0.5 * 2.0)


def test_adamw_rejects_unknown_schedule():
    with pytest.raises(ValueError):
        AdamW({}, schedule="cosine")


# -- end-to-end training ------------------------------------------------------------


def tiny_config(**overrides):
    base = dict(hidden_dim=16, heads=2, vocab_size=256, epochs=2, seed=0)
    base.update(overrides)
    return config.RunConfig(**base).validate()


def test_document_loss_is_positive_and_finite():
    cfg = tiny_config()
    params = model.init_model(cfg)
    doc = gen_synthetic(11, 1, SynthSpec())[0]
    loss, trace = document_loss(doc, params, cfg, train_mode=False)
    assert np.isfinite(loss.values)
    assert loss.item() > 0
    assert len(trace) >= 2


def test_train_reduces_loss():
    cfg = tiny_config(epochs=3)
    params = model.init_model(cfg)
    docs = gen_synthetic(12, 8, SynthSpec())
    params, log = train(docs, params, cfg)
    assert len(log) == 3
    assert log[-1]["mean_train_loss"] < log[0]["mean_train_loss"]


def test_train_empty_corpus_raises():
    cfg = tiny_config()
    with pytest.raises(TrainingError, match="empty"):
        train([], model.init_model(cfg), cfg)


def test_train_dev_selects_best_checkpoint():
    cfg = tiny_config(epochs=2)
    params = model.init_model(cfg)
    docs = gen_synthetic(13, 6, SynthSpec())
    dev = gen_synthetic(14, 3, SynthSpec())
    params, log = train(docs, params, cfg, dev_docs=dev)
    assert all("dev_direction_f1" in r and "dev_existence_f1" in r for r in log)


def test_train_deterministic():
    cfg = tiny_config()
    docs = gen_synthetic(15, 5, SynthSpec())

    def run():
        p, log = train(docs, model.init_model(cfg), cfg)
        from ecgraph.model import named_parameters
        return {k: t.values.copy() for k, t in named_parameters(p).items()}, log

    a_params, a_log = run()
    b_params, b_log = run()
    assert a_log == b_log
    for k in a_params:
        assert (a_params[k] == b_params[k]).all()


def test_predict_docs_covers_all_documents():
    cfg = tiny_config()
    params = model.init_model(cfg)
    docs = gen_synthetic(16, 4, SynthSpec())
    preds = predict_docs(docs, params, cfg)
    assert set(preds) == {d.doc_id for d in docs}
    for doc in docs:
        ecg, trace = preds[doc.doc_id]
        assert ecg.n == len(doc.events)
        assert trace[0].structural_diff is None
