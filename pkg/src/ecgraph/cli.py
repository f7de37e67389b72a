"""Command-line entry point.

Subcommands: validate, gen-synth, train, predict, eval, export-dot.
Exit codes: 0 success, 1 validation/metric failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from . import corpus as corpus_mod
from . import trainer as trainer_mod
from .config import ConfigError, RunConfig, apply_overrides, load_config, parse_kv
from .corpus import CorpusError, SynthSpec, gen_synthetic, load_corpus, save_corpus
from .ecg_builder import to_dot
from .evaluator import EvalError, build_report, format_report
from .graph_encoder import EdgeType
from .model import init_model, load_model, save_model
from .text_encoder import EncoderError, import_external


class UsageError(Exception):
    pass


@dataclasses.dataclass(frozen=True)
class SynthFileSpec(SynthSpec):
    """SynthSpec plus the generation-run keys allowed in a spec file."""

    seed: int = 0
    n_docs: int = 10

    def base(self) -> SynthSpec:
        names = {f.name for f in dataclasses.fields(SynthSpec)}
        return SynthSpec(**{n: getattr(self, n) for n in names})


def _load_config(path, seed_override=None) -> RunConfig:
    cfg = load_config(path)
    if seed_override is not None:
        cfg.seed = seed_override
    return cfg


def _external(cfg: RunConfig):
    if cfg.encoder != "external":
        return None
    return import_external(cfg.external_vectors, cfg.hidden_dim)


def cmd_validate(args) -> int:
    docs = load_corpus(args.corpus)
    lines = corpus_mod.corpus_report(docs)
    for line in lines:
        print(line)
    if lines:
        print(f"{len(lines)} violation(s) in {len(docs)} document(s)")
        return 1
    print(f"ok: {len(docs)} document(s), no violations")
    return 0


def cmd_gen_synth(args) -> int:
    spec = apply_overrides(SynthFileSpec, parse_kv(args.spec))
    seed = args.seed if args.seed is not None else spec.seed
    docs = gen_synthetic(seed, spec.n_docs, spec.base())
    save_corpus(docs, args.out)
    print(f"wrote {len(docs)} document(s) to {args.out}")
    return 0


def cmd_train(args) -> int:
    cfg = _load_config(args.config, args.seed)
    if not cfg.train_path:
        raise UsageError("config must set train_path")
    train_docs, report = corpus_mod.preprocess(load_corpus(cfg.train_path))
    for line in report:
        print(f"preprocess: {line}", file=sys.stderr)
    dev_docs = None
    if cfg.dev_path:
        dev_docs, _ = corpus_mod.preprocess(load_corpus(cfg.dev_path))
    external = _external(cfg)
    params = init_model(cfg)
    params, log = trainer_mod.train(train_docs, params, cfg, dev_docs, external)
    save_model(params, cfg.checkpoint_path)
    with open(cfg.log_path, "w", encoding="utf-8") as f:
        for record in log:
            f.write(json.dumps(record) + "\n")
    last = log[-1]
    print(
        f"trained {cfg.epochs} epoch(s); final mean loss "
        f"{last['mean_train_loss']:.6f}; checkpoint at {cfg.checkpoint_path}"
    )
    return 0


def _prediction_record(doc, ecg, trace) -> dict:
    return {
        "doc_id": doc.doc_id,
        "nodes": [
            {"event_id": ev.event_id, "trigger": ev.trigger_text}
            for ev in doc.events
        ],
        "edges": [
            {
                "source": ecg.node_ids[i],
                "target": ecg.node_ids[j],
                "type": ecg.edge_types[(i, j)].value,
                "confidence": ecg.confidences[(i, j)],
            }
            for i, j in ecg.edges()
        ],
        "iterations_used": len(trace) - 1,
        "final_structural_difference": trace[-1].structural_diff or 0,
        "acyclicity_score": corpus_mod.acyclicity_score(ecg.adjacency),
    }


def cmd_predict(args) -> int:
    cfg = _load_config(args.config, args.seed)
    params = load_model(args.checkpoint, cfg)
    docs = load_corpus(args.corpus)
    external = _external(cfg)
    results = trainer_mod.predict_docs(docs, params, cfg, external)
    with open(args.out, "w", encoding="utf-8") as f:
        for doc in docs:
            ecg, trace = results[doc.doc_id]
            f.write(json.dumps(_prediction_record(doc, ecg, trace)) + "\n")
    print(f"wrote predictions for {len(docs)} document(s) to {args.out}")
    return 0


def _load_predictions(path) -> dict:
    records = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                records[rec["doc_id"]] = rec
            except (json.JSONDecodeError, KeyError) as exc:
                raise UsageError(f"{path}:{lineno}: malformed prediction: {exc}")
    return records


def cmd_eval(args) -> int:
    records = _load_predictions(args.predictions)
    gold = load_corpus(args.gold)
    pred_edges = {
        doc_id: [(e["source"], e["target"]) for e in rec["edges"]]
        for doc_id, rec in records.items()
    }
    report = build_report(pred_edges, gold)
    print(format_report(report))
    if args.json:
        with open(args.json, "w", encoding="utf-8") as f:
            json.dump(report.to_dict(), f, indent=2)
    return 0


def cmd_export_dot(args) -> int:
    records = _load_predictions(args.predictions)
    if args.doc_id not in records:
        raise UsageError(f"doc_id {args.doc_id!r} not found in {args.predictions}")
    rec = records[args.doc_id]
    node_ids = [n["event_id"] for n in rec["nodes"]]
    triggers = {n["event_id"]: n["trigger"] for n in rec["nodes"]}
    index = {eid: i for i, eid in enumerate(node_ids)}
    import numpy as np

    from .ecg_builder import ECG

    n = len(node_ids)
    adj = np.zeros((n, n), dtype=np.int8)
    etypes = {}
    for e in rec["edges"]:
        i, j = index[e["source"]], index[e["target"]]
        adj[i, j] = 1
        etypes[(i, j)] = EdgeType(e["type"])
    ecg = ECG(tuple(node_ids), adj, etypes)
    with open(args.out, "w", encoding="utf-8") as f:
        f.write(to_dot(ecg, triggers))
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ecgraph",
        description="Iterative document-level event causality identification.",
    )
    parser.add_argument("--seed", type=int, default=None,
                        help="override the configured random seed")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a corpus for DAG/coref violations")
    p.add_argument("corpus")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("gen-synth", help="generate a synthetic corpus")
    p.add_argument("spec")
    p.add_argument("out")
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("train", help="train a model from a config file")
    p.add_argument("config")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="write final-graph predictions")
    p.add_argument("config")
    p.add_argument("checkpoint")
    p.add_argument("corpus")
    p.add_argument("out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="score predictions against gold")
    p.add_argument("predictions")
    p.add_argument("gold")
    p.add_argument("--json", default=None, help="also write a JSON report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export-dot", help="render one document's graph as DOT")
    p.add_argument("predictions")
    p.add_argument("doc_id")
    p.add_argument("out")
    p.set_defaults(func=cmd_export_dot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError, CorpusError, EncoderError, EvalError,
            FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
