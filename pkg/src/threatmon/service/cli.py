"""Command-line entry points: ingest, train, evaluate, report, serve, export."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .. import cluster, features, ioc
from .pipeline import (
    ModelBundle,
    Pipeline,
    PipelineConfig,
    evaluate_clustering,
    posts_from_log,
    read_labeled_jsonl,
    reduction_report_for,
    run_stream,
    train,
    write_grid_csv,
)

logger = logging.getLogger("threatmon")


def _load_config(path: str | None) -> PipelineConfig:
    resolved = path or os.environ.get("THREATMON_CONFIG")
    if not resolved:
        raise SystemExit("no config given: pass --config or set THREATMON_CONFIG")
    return PipelineConfig.from_file(resolved)


def _load_bundle(config: PipelineConfig) -> ModelBundle:
    model_dir = Path(config.model_dir)
    if (model_dir / "tfidf.json").is_file():
        return ModelBundle.load(model_dir)
    if config.bootstrap_mode:
        # No trained model yet: hashed term counts (uniform idf) are enough
        # for bootstrap clustering geometry.
        tfidf = features.TfIdfModel(
            dimension=config.feature_dimension,
            idf=[1.0] * config.feature_dimension,
            doc_count=1,
            hash_seed=config.hash_seed,
        )
        return ModelBundle(tfidf=tfidf, classifier=None, classifier_kind=config.classifier)
    raise SystemExit(
        f"no model found in {model_dir}; run 'threatmon train' first "
        "or enable bootstrap_mode"
    )


def _cmd_ingest(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    pipeline = Pipeline(config, _load_bundle(config))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.input:
        with open(args.input, encoding="utf-8") as handle:
            result = run_stream(pipeline, handle, event_log=out_dir / "events.jsonl")
    elif args.listen:
        return _serve(pipeline, args.listen)
    else:
        result = run_stream(pipeline, sys.stdin, event_log=out_dir / "events.jsonl")
    pipeline.save_snapshot(out_dir / "snapshot.json")
    pipeline.write_metrics(out_dir / "metrics_daily.jsonl")
    pipeline.export_iocs(out_dir / "iocs")
    print(
        f"processed={result.processed} malformed={result.malformed} "
        f"relevant={result.relevant} active_clusters={result.active_clusters} "
        f"archived_clusters={result.archived_clusters}"
    )
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    corpus = read_labeled_jsonl(args.corpus)
    report = train(config, corpus, grid=args.grid, k_folds=args.k_folds)
    model_dir = Path(config.model_dir)
    report.bundle.save(model_dir)
    meta = {
        "classifier": config.classifier,
        "examples": report.examples,
        "positives": report.positives,
        "negatives": report.negatives,
        "feature_dimension": config.feature_dimension,
        "train_seed": config.train_seed,
        "grid": args.grid,
        "chosen_config": repr(report.chosen_config) if report.chosen_config else None,
    }
    (model_dir / "training_meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    if args.grid:
        write_grid_csv(report, model_dir / "grid_report.csv")
        print(f"grid report: {model_dir / 'grid_report.csv'}")
    print(f"trained {config.classifier} on {report.examples} examples -> {model_dir}")
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    bundle = _load_bundle(config)
    posts = posts_from_log(args.log)
    rows = evaluate_clustering(posts, config, bundle, no_reclustering=args.no_reclustering)
    out = Path(args.out) if args.out else None
    lines = [json.dumps(r.to_json(), sort_keys=True) for r in rows]
    if out:
        out.write_text("\n".join(lines) + "\n", encoding="utf-8")
        print(f"wrote {len(rows)} daily rows -> {out}")
    else:
        for line in lines:
            print(line)
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    bundle = _load_bundle(config)
    posts = posts_from_log(args.log)
    report = reduction_report_for(posts, config, bundle)
    text = json.dumps(report.to_json(), indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        print(f"wrote reduction report -> {args.out}")
    else:
        print(text)
    return 0


def _serve(pipeline: Pipeline, addr: str, dashboard_dir: str | None = None) -> int:
    import uvicorn

    from .api import create_app

    host, _, port = addr.rpartition(":")
    app = create_app(pipeline, dashboard_dir=dashboard_dir)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    pipeline = Pipeline(config, _load_bundle(config))
    addr = args.addr or os.environ.get("THREATMON_ADDR", "127.0.0.1:8000")
    return _serve(pipeline, addr, dashboard_dir=args.dashboard)


def _cmd_export(args: argparse.Namespace) -> int:
    if args.format != "misp-json":
        raise SystemExit(f"unsupported export format: {args.format}")
    config = _load_config(args.config)
    bundle = _load_bundle(config)
    pipeline = Pipeline(config, bundle)
    state, now = cluster.load_state(
        args.snapshot, lambda tokens: features.transform_tokens(bundle.tfidf, tokens)
    )
    pipeline.clusterer.state = state
    pipeline.clusterer.now = now
    for c in pipeline.clusterer.active_clusters():
        pipeline.iocs[c.id] = ioc.generate_ioc(c, pipeline.rules)
    written = pipeline.export_iocs(args.out)
    print(f"exported {len(written)} events -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="threatmon")
    parser.add_argument("--log-level", default=os.environ.get("THREATMON_LOG_LEVEL", "INFO"))
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="run the pipeline over a post stream")
    p.add_argument("--config", help="pipeline config JSON")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--input", help="JSONL file of posts (default: stdin)")
    group.add_argument("--listen", help="host:port to accept posts over HTTP instead")
    p.add_argument("--out-dir", default="out", help="artifact directory")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("train", help="train the classifier from a labeled corpus")
    p.add_argument("--config")
    p.add_argument("--corpus", required=True, help="labeled JSONL corpus")
    p.add_argument("--grid", action="store_true", help="hyperparameter grid + Pareto pick")
    p.add_argument("--k-folds", type=int, default=10)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="daily cluster-quality series for a stream")
    p.add_argument("--config")
    p.add_argument("--log", required=True, help="posts JSONL or ingest event log")
    p.add_argument("--no-reclustering", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("report", help="volume-reduction report vs naive baseline")
    p.add_argument("--config")
    p.add_argument("--log", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("serve", help="run the HTTP API")
    p.add_argument("--config")
    p.add_argument("--addr", help="host:port (default 127.0.0.1:8000)")
    p.add_argument("--dashboard", help="static dashboard build to mount at /ui")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("export", help="export IoCs from a snapshot")
    p.add_argument("--config")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--format", default="misp-json")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_export)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.INFO))
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
