"""Command-line entry point wiring the pipeline stages."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .corpus import TRAITS, TRAIT_SHORT, label_distribution, load_corpus
from .embeddings import hash_embed, read_bundle_dir, validate_bundle, write_bundle_dir
from .errors import HyperPersonaError, StageError
from .hiergraph import LevelConfig, hiergraph_to_json, to_hiergraph
from .hypergraph import build_hypergraph, hypergraph_to_json
from .pipeline import (
    Pipeline,
    RunConfig,
    apply_overrides,
    corpus_report,
    run_ablation,
    run_pipeline,
)
from .segmenter import read_segments, segment_corpus, write_segments
from .synth import SyntheticSpec, make_synthetic_corpus, write_corpus_csv

_SHORT_TO_TRAIT = {v: k for k, v in TRAIT_SHORT.items()}


def _load_column_map(raw: str | None) -> dict | None:
    if raw is None:
        return None
    path = Path(raw)
    if path.exists():
        return json.loads(path.read_text(encoding="utf-8"))
    return json.loads(raw)


def _load_config(args) -> RunConfig:
    config_dict = json.loads(Path(args.config).read_text(encoding="utf-8"))
    if getattr(args, "set", None):
        config_dict = apply_overrides(config_dict, args.set)
    if getattr(args, "workdir", None):
        config_dict["workdir"] = args.workdir
    return RunConfig.from_dict(config_dict)


def _cmd_ingest(args) -> int:
    records = load_corpus(args.input, _load_column_map(args.column_map))
    print(f"loaded {len(records)} records from {args.input}")
    if args.report:
        dist = label_distribution(records)
        for trait in TRAITS:
            false_count, true_count = dist.counts[trait]
            print(f"  {TRAIT_SHORT[trait]} ({trait}): false={false_count} true={true_count}")
    return 0


def _cmd_segment(args) -> int:
    records = load_corpus(args.input, _load_column_map(args.column_map))
    result = segment_corpus(records)
    write_segments(result.documents, args.out)
    print(f"segmented {len(result.documents)} documents -> {args.out}")
    for doc_id, reason in result.skipped:
        print(f"  skipped {doc_id}: {reason}", file=sys.stderr)
    return 0


def _cmd_embed(args) -> int:
    segdocs = read_segments(args.segments)
    if args.mode == "hash":
        bundles = [hash_embed(doc, args.dim, args.seed) for doc in segdocs]
        write_bundle_dir(bundles, args.out)
        print(f"wrote {len(bundles)} hash bundles (dim={args.dim}) -> {args.out}")
        return 0
    bundles = read_bundle_dir(args.bundles)
    by_doc = {d.doc_id: d for d in segdocs}
    bad = 0
    for bundle in bundles:
        seg = by_doc.get(bundle.doc_id)
        if seg is None:
            print(f"  no segmentation for bundle {bundle.doc_id}", file=sys.stderr)
            bad += 1
            continue
        violations = validate_bundle(bundle, seg)
        for violation in violations:
            print(f"  {bundle.doc_id}: {violation}", file=sys.stderr)
        bad += bool(violations)
    print(f"validated {len(bundles)} imported bundles, {bad} with problems")
    return 1 if bad else 0


def _cmd_graphs(args) -> int:
    segdocs = read_segments(args.segments)
    bundles = {b.doc_id: b for b in read_bundle_dir(args.bundles)}
    count = 0
    with open(args.out, "w", encoding="utf-8") as fh:
        for doc in segdocs:
            bundle = bundles.get(doc.doc_id)
            if bundle is None:
                continue
            hg = build_hypergraph(doc, bundle)
            if args.graphs_cmd == "export-hypergraph":
                fh.write(json.dumps(hypergraph_to_json(hg)) + "\n")
            else:
                level = LevelConfig.from_string(args.levels)
                fh.write(json.dumps(hiergraph_to_json(to_hiergraph(hg, level))) + "\n")
            count += 1
    print(f"wrote {count} graphs -> {args.out}")
    return 0


def _cmd_train(args) -> int:
    config = _load_config(args)
    trait = _SHORT_TO_TRAIT.get(args.trait, args.trait)
    if trait not in TRAITS:
        raise StageError("train", ValueError(f"unknown trait {args.trait!r}"))
    pipeline = Pipeline(config)
    records = pipeline.ingest()
    segdocs, _ = pipeline.segment(records)
    bundles, _ = pipeline.embed(segdocs)
    level = config.train.level_config
    graphs = pipeline.build_graphs(segdocs, bundles, level)
    train_records, test_records = pipeline.split(records)
    params, ckpt = pipeline.train_one(trait, level, graphs, train_records, test_records)
    if args.checkpoint:
        from .model import save_checkpoint

        save_checkpoint(params, args.checkpoint)
        print(f"checkpoint -> {args.checkpoint}")
    else:
        print(f"checkpoint -> {ckpt}")
    return 0


def _cmd_evaluate(args) -> int:
    config = _load_config(args)
    if args.checkpoints:
        from .metrics import render_markdown
        from .pipeline import evaluate_checkpoints

        result = evaluate_checkpoints(config, args.checkpoints)
        out = Path(args.out) if args.out else Path(config.workdir) / "report.json"
        if out.suffix == ".md":
            out.write_text(render_markdown(result["report"]) + "\n", encoding="utf-8")
        else:
            out.write_text(json.dumps({"metrics": result["metrics"]}, sort_keys=True, indent=2),
                           encoding="utf-8")
        avg = result["metrics"]["Average"]
    else:
        report = run_pipeline(config)
        out = Path(args.out) if args.out else Path(config.workdir) / "report.json"
        if out.suffix == ".md":
            out.write_text((Path(config.workdir) / "report.md").read_text(), encoding="utf-8")
        else:
            out.write_text(json.dumps(report, sort_keys=True, indent=2), encoding="utf-8")
        avg = report["metrics"]["Average"]
    print(f"report -> {out}")
    print(f"average accuracy {avg['accuracy']:.2f}%  f1 {avg['f1']:.2f}%")
    return 0


def _cmd_ablate(args) -> int:
    config = _load_config(args)
    report = run_ablation(config)
    print(f"ablation report -> {Path(config.workdir) / 'ablation.json'}")
    for level in report["order"]:
        print(f"  {level}: avg accuracy {report['rows'][level]['Average']:.2f}%")
    return 0


def _cmd_synth(args) -> int:
    kwargs = {}
    if args.rule == "same-sentence":
        kwargs["positive_occurrences"] = (3, 4)  # burst must fit one sentence
    spec = SyntheticSpec(
        num_docs=args.docs,
        seed=args.seed,
        marker_rule=args.rule,
        **kwargs,
    )
    records, markers = make_synthetic_corpus(spec)
    write_corpus_csv(records, args.out)
    if args.markers:
        Path(args.markers).write_text(
            json.dumps({t: list(m) for t, m in markers.items()}, indent=2),
            encoding="utf-8",
        )
    print(f"synthetic corpus of {len(records)} docs -> {args.out}")
    return 0


def _cmd_report(args) -> int:
    stats = corpus_report(args.input, _load_column_map(args.column_map))
    print(json.dumps(stats, indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hyperpersona",
        description="Multi-level text graphs for binary Big Five trait prediction",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load and validate a corpus CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--column-map", default=None, help="JSON string or path")
    p.add_argument("--report", action="store_true", help="print label distribution")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("segment", help="corpus -> segments JSONL")
    p.add_argument("--input", required=True)
    p.add_argument("--column-map", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_segment)

    p = sub.add_parser("embed", help="produce or import embedding bundles")
    p.add_argument("--mode", choices=("hash", "import"), required=True)
    p.add_argument("--segments", required=True)
    p.add_argument("--out", help="output bundle dir (hash mode)")
    p.add_argument("--bundles", help="existing bundle dir (import mode)")
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_embed)

    p = sub.add_parser("graphs", help="build level graphs or export hypergraphs")
    p.add_argument("graphs_cmd", choices=("build", "export-hypergraph"))
    p.add_argument("--segments", required=True)
    p.add_argument("--bundles", required=True)
    p.add_argument("--levels", default="full",
                   choices=[m.value for m in LevelConfig])
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_graphs)

    p = sub.add_parser("train", help="train one trait through the cached pipeline")
    p.add_argument("--trait", required=True, help="O|C|E|A|N or full name")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--workdir", default=None)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="full pipeline run; writes report.json/.md")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoints", default=None,
                   help="score existing O.ckpt..N.ckpt from this dir instead of training")
    p.add_argument("--out", default=None)
    p.add_argument("--workdir", default=None)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("ablate", help="train/evaluate all five level variants")
    p.add_argument("--config", required=True)
    p.add_argument("--workdir", default=None)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("synth", help="generate a planted-marker synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--docs", type=int, default=200)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--rule", choices=("count", "same-sentence"), default="count")
    p.add_argument("--markers", default=None, help="also write the marker sets as JSON")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("report", help="dataset statistics for a corpus CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--column-map", default=None)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except HyperPersonaError as exc:
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
