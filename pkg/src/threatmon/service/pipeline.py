"""End-to-end pipeline: ingest -> filter -> classify -> cluster -> IoC.

A Pipeline instance owns the trained models, the stream clusterer, the
label store and the per-day counters. Everything it emits (event log,
snapshots, metrics, IoC exports) is a pure function of the input stream,
the configuration and the seeds, so replaying the same stream twice
produces byte-identical artifacts.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import dataclass, field, replace
from datetime import date, datetime, time, timedelta, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .. import classify, cluster, features, filtering, ioc
from ..corpus import (
    Post,
    StopwordList,
    default_stopwords,
    format_timestamp,
    normalize,
    parse_post_json,
)

logger = logging.getLogger(__name__)

RELEVANT = "relevant"
IRRELEVANT = "irrelevant"
VALID_LABELS = (RELEVANT, IRRELEVANT)


@dataclass(frozen=True)
class PipelineConfig:
    """Startup configuration; all referenced files must exist and parse."""

    asset_keywords_file: Path
    stopword_file: Path | None = None
    taxonomy_rules_file: Path | None = None
    security_keywords_file: Path | None = None
    exclusions_file: Path | None = None
    feature_dimension: int = features.DEFAULT_DIMENSION
    hash_seed: int = features.DEFAULT_HASH_SEED
    classifier: str = "svm"
    svm: classify.SvmConfig = classify.SvmConfig()
    mlp: classify.MlpConfig = classify.MlpConfig()
    train_seed: int = 0
    bootstrap_mode: bool = False
    clustering: cluster.ClusteringConfig = cluster.ClusteringConfig()
    model_dir: Path = Path("models")

    def __post_init__(self) -> None:
        if self.classifier not in ("svm", "mlp"):
            raise ValueError(f"classifier must be 'svm' or 'mlp': {self.classifier}")

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        raw = json.loads(path.read_text(encoding="utf-8"))
        base = path.parent

        def resolve(key: str) -> Path | None:
            value = raw.get(key)
            return (base / value) if value else None

        clustering_raw = raw.get("clustering", {})
        clustering = cluster.ClusteringConfig(
            tau=clustering_raw.get("tau", cluster.DEFAULT_TAU),
            theta=timedelta(days=clustering_raw.get("theta_days", 7.0)),
            kmeans_max_iterations=clustering_raw.get("kmeans_max_iterations", 50),
            kmeans_min_k=clustering_raw.get("kmeans_min_k", 2),
            rng_seed=clustering_raw.get("rng_seed", 0),
            reclustering=clustering_raw.get("reclustering", True),
        )
        svm_raw = raw.get("svm", {})
        mlp_raw = raw.get("mlp", {})
        config = cls(
            asset_keywords_file=base / raw["asset_keywords_file"],
            stopword_file=resolve("stopword_file"),
            taxonomy_rules_file=resolve("taxonomy_rules_file"),
            security_keywords_file=resolve("security_keywords_file"),
            exclusions_file=resolve("exclusions_file"),
            feature_dimension=raw.get("feature_dimension", features.DEFAULT_DIMENSION),
            hash_seed=raw.get("hash_seed", features.DEFAULT_HASH_SEED),
            classifier=raw.get("classifier", "svm"),
            svm=classify.SvmConfig(
                c=svm_raw.get("c", classify.DEFAULT_SVM_C),
                step_size=svm_raw.get("step_size", classify.DEFAULT_SVM_STEP_SIZE),
                max_iterations=svm_raw.get("max_iterations", classify.DEFAULT_SVM_ITERATIONS),
            ),
            mlp=classify.MlpConfig(
                hidden_layers=tuple(mlp_raw.get("hidden_layers", classify.DEFAULT_MLP_HIDDEN)),
                max_iterations=mlp_raw.get("max_iterations", classify.DEFAULT_MLP_ITERATIONS),
                learning_rate=mlp_raw.get("learning_rate", classify.DEFAULT_MLP_LEARNING_RATE),
            ),
            train_seed=raw.get("train_seed", 0),
            bootstrap_mode=raw.get("bootstrap_mode", False),
            clustering=clustering,
            model_dir=base / raw.get("model_dir", "models"),
        )
        config.validate_files()
        return config

    def validate_files(self) -> None:
        referenced = [
            self.asset_keywords_file, self.stopword_file, self.taxonomy_rules_file,
            self.security_keywords_file, self.exclusions_file,
        ]
        for path in referenced:
            if path is not None and not Path(path).is_file():
                raise FileNotFoundError(f"configured file missing: {path}")


@dataclass
class ModelBundle:
    """The fitted TF-IDF model plus the trained relevance classifier."""

    tfidf: features.TfIdfModel
    classifier: classify.LinearSvmModel | classify.MlpModel | None
    classifier_kind: str = "svm"

    def save(self, model_dir: str | Path) -> None:
        model_dir = Path(model_dir)
        model_dir.mkdir(parents=True, exist_ok=True)
        self.tfidf.save(model_dir / "tfidf.json")
        if self.classifier is not None:
            save_classifier(self.classifier, model_dir / "classifier.json")

    @classmethod
    def load(cls, model_dir: str | Path) -> "ModelBundle":
        model_dir = Path(model_dir)
        tfidf = features.TfIdfModel.load(model_dir / "tfidf.json")
        classifier_path = model_dir / "classifier.json"
        model = load_classifier(classifier_path) if classifier_path.is_file() else None
        kind = "mlp" if isinstance(model, classify.MlpModel) else "svm"
        return cls(tfidf=tfidf, classifier=model, classifier_kind=kind)


def save_classifier(model, path: str | Path) -> None:
    if isinstance(model, classify.LinearSvmModel):
        payload = {
            "format": "threatmon-svm-v1",
            "weights": model.weights.tolist(),
            "bias": model.bias,
            "c": model.c,
            "step_size": model.step_size,
            "max_iterations": model.max_iterations,
        }
    elif isinstance(model, classify.MlpModel):
        payload = {
            "format": "threatmon-mlp-v1",
            "layer_sizes": list(model.layer_sizes),
            "weights": [w.tolist() for w in model.weights],
            "biases": [b.tolist() for b in model.biases],
            "max_iterations": model.max_iterations,
        }
    else:
        raise TypeError(f"unsupported classifier type: {type(model)!r}")
    Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")


def load_classifier(path: str | Path):
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    kind = payload.get("format")
    if kind == "threatmon-svm-v1":
        return classify.LinearSvmModel(
            weights=np.asarray(payload["weights"], dtype=np.float64),
            bias=payload["bias"],
            c=payload["c"],
            step_size=payload["step_size"],
            max_iterations=payload["max_iterations"],
        )
    if kind == "threatmon-mlp-v1":
        return classify.MlpModel(
            layer_sizes=tuple(payload["layer_sizes"]),
            weights=[np.asarray(w, dtype=np.float64) for w in payload["weights"]],
            biases=[np.asarray(b, dtype=np.float64) for b in payload["biases"]],
            max_iterations=payload["max_iterations"],
        )
    raise ValueError(f"unsupported classifier file format: {kind}")


@dataclass
class LabelRecord:
    post_id: str
    label: str
    labeled_at: datetime
    source: str = "analyst"

    def to_json(self) -> dict:
        return {
            "post_id": self.post_id,
            "label": self.label,
            "labeled_at": format_timestamp(self.labeled_at),
            "source": self.source,
        }


class LabelStore:
    """Current label per post (last write wins) with a full audit trail."""

    def __init__(self) -> None:
        self.current: dict[str, LabelRecord] = {}
        self.audit: list[LabelRecord] = []

    def submit(
        self,
        post_id: str,
        label: str,
        source: str = "analyst",
        at: datetime | None = None,
    ) -> tuple[LabelRecord, bool]:
        """Record a label; returns (record, changed)."""
        if label not in VALID_LABELS:
            raise ValueError(f"label must be one of {VALID_LABELS}: {label!r}")
        existing = self.current.get(post_id)
        if existing is not None and existing.label == label and existing.source == source:
            return existing, False
        record = LabelRecord(
            post_id=post_id,
            label=label,
            labeled_at=at or datetime.now(timezone.utc),
            source=source,
        )
        self.current[post_id] = record
        self.audit.append(record)
        return record, True


@dataclass
class PostRecord:
    """Stage outcomes for one processed post (one event-log line)."""

    post: Post
    dropped: bool = False
    asset_passed: bool = False
    baseline_passed: bool | None = None
    verdict: str | None = None
    cluster_kind: str | None = None
    cluster_id: int | None = None
    expired_ids: tuple[int, ...] = ()
    offline_ran: bool = False

    @property
    def relevant(self) -> bool:
        return self.verdict in (RELEVANT, "bootstrap")

    def to_json(self) -> dict:
        return {
            "type": "post",
            "post": {
                "id": self.post.id,
                "author": self.post.author,
                "timestamp": format_timestamp(self.post.timestamp),
                "text": self.post.text,
            },
            "dropped": self.dropped,
            "asset_passed": self.asset_passed,
            "baseline_passed": self.baseline_passed,
            "verdict": self.verdict,
            "cluster_kind": self.cluster_kind,
            "cluster_id": self.cluster_id,
            "expired_ids": list(self.expired_ids),
            "offline_ran": self.offline_ran,
        }


@dataclass
class DailyClusterMetrics:
    day: date
    mean_wts: float | None
    max_jaccard: float | None
    active_clusters: int
    ingested: int
    asset_filtered: int
    relevant: int

    def to_json(self) -> dict:
        return {
            "date": self.day.isoformat(),
            "mean_wts": self.mean_wts,
            "max_jaccard": self.max_jaccard,
            "active_clusters": self.active_clusters,
            "ingested": self.ingested,
            "asset_filtered": self.asset_filtered,
            "relevant": self.relevant,
        }


@dataclass
class ReductionRow:
    day: date
    collected: int
    baseline_selected: int
    relevant: int
    clusters_touched: int
    baseline_active_pool: int

    def to_json(self) -> dict:
        return {
            "date": self.day.isoformat(),
            "collected": self.collected,
            "baseline_selected": self.baseline_selected,
            "relevant": self.relevant,
            "clusters_touched": self.clusters_touched,
            "baseline_active_pool": self.baseline_active_pool,
        }


@dataclass
class ReductionReport:
    rows: list[ReductionRow]
    total_collected: int
    total_baseline: int
    total_relevant: int
    total_clusters: int

    @property
    def classifier_reduction(self) -> float | None:
        if self.total_baseline == 0:
            return None
        return 1.0 - self.total_relevant / self.total_baseline

    @property
    def clustering_reduction(self) -> float | None:
        if self.total_relevant == 0:
            return None
        return 1.0 - self.total_clusters / self.total_relevant

    @property
    def end_to_end_reduction(self) -> float | None:
        if self.total_baseline == 0:
            return None
        return 1.0 - self.total_clusters / self.total_baseline

    def to_json(self) -> dict:
        return {
            "rows": [row.to_json() for row in self.rows],
            "total_collected": self.total_collected,
            "total_baseline": self.total_baseline,
            "total_relevant": self.total_relevant,
            "total_clusters": self.total_clusters,
            "classifier_reduction": self.classifier_reduction,
            "clustering_reduction": self.clustering_reduction,
            "end_to_end_reduction": self.end_to_end_reduction,
        }


class _DayCounter:
    def __init__(self) -> None:
        self.collected = 0
        self.asset_filtered = 0
        self.baseline_selected = 0
        self.relevant = 0


def _day_end(day: date) -> datetime:
    return datetime.combine(day + timedelta(days=1), time.min, tzinfo=timezone.utc)


class Pipeline:
    """Single-writer stream processor over one configuration + model bundle."""

    def __init__(self, config: PipelineConfig, models: ModelBundle | None = None):
        self.config = config
        self.models = models
        self.stopwords = (
            StopwordList.from_file(config.stopword_file)
            if config.stopword_file
            else default_stopwords()
        )
        self.assets = filtering.AssetKeywordSet.from_file(config.asset_keywords_file)
        self.rules = (
            ioc.load_taxonomy_rules(config.taxonomy_rules_file)
            if config.taxonomy_rules_file
            else ioc.default_taxonomy_rules()
        )
        self.security_keywords = (
            filtering.SecurityKeywordSet.from_file(config.security_keywords_file)
            if config.security_keywords_file
            else None
        )
        self.clusterer = cluster.StreamClusterer(config.clustering)
        self.labels = LabelStore()
        self.posts: dict[str, Post] = {}
        self.records: list[PostRecord] = []
        self.iocs: dict[int, ioc.MispEvent] = {}
        self.metrics_rows: list[DailyClusterMetrics] = []
        self.reduction_rows: list[ReductionRow] = []
        self.model_versions: list[dict] = []
        self._day: date | None = None
        self._counter = _DayCounter()
        self._baseline_dates: list[date] = []

    # ------------------------------------------------------------------ models

    def require_models(self) -> ModelBundle:
        if self.models is None or (
            self.models.classifier is None and not self.config.bootstrap_mode
        ):
            raise RuntimeError(
                "pipeline needs a fitted TF-IDF model and a trained classifier "
                "(or bootstrap_mode) before ingesting"
            )
        return self.models

    def vectorize_tokens(self, tokens: Sequence[str]) -> np.ndarray:
        return features.transform_tokens(self.require_models().tfidf, tokens)

    def verdict_for(self, post: Post) -> str:
        """Current-model verdict for a post (recomputed live)."""
        if self.config.bootstrap_mode:
            return "bootstrap"
        models = self.require_models()
        norm = normalize(post, self.stopwords)
        vector = features.transform(models.tfidf, norm)
        predicted = models.classifier.predict(vector)
        return RELEVANT if predicted == classify.POSITIVE else IRRELEVANT

    # ------------------------------------------------------------------ stream

    def process_post(self, post: Post) -> PostRecord:
        """Run one post through every stage; raises on duplicate ids."""
        if post.id in self.posts:
            raise ValueError(f"duplicate post id: {post.id!r}")
        models = self.require_models()
        self._roll_day(post.timestamp.date())
        self.posts[post.id] = post
        record = PostRecord(post=post)
        self._counter.collected += 1

        norm = normalize(post, self.stopwords)
        record.dropped = norm.dropped
        if self.security_keywords is not None:
            record.baseline_passed = filtering.baseline_filter(
                post.text, self.assets, self.security_keywords
            )
            if record.baseline_passed:
                self._counter.baseline_selected += 1
                self._baseline_dates.append(post.timestamp.date())
        if record.dropped:
            self._finish_record(record)
            return record

        record.asset_passed = filtering.asset_filter(post.text, self.assets)
        if not record.asset_passed:
            self._finish_record(record)
            return record
        self._counter.asset_filtered += 1

        vector = features.transform(models.tfidf, norm)
        if self.config.bootstrap_mode:
            record.verdict = "bootstrap"
        else:
            predicted = models.classifier.predict(vector)
            record.verdict = RELEVANT if predicted == classify.POSITIVE else IRRELEVANT
        if not record.relevant:
            self._finish_record(record)
            return record
        self._counter.relevant += 1

        clustered = cluster.ClusteredPost(
            post_id=post.id,
            token_set=norm.token_set,
            vector=vector,
            timestamp=post.timestamp,
            original_text=post.text,
            tokens=norm.tokens,
        )
        report = self.clusterer.ingest(clustered)
        record.cluster_kind = report.outcome.kind.value
        record.cluster_id = report.outcome.cluster_id
        record.expired_ids = report.expired_ids
        record.offline_ran = report.offline_ran
        self._refresh_iocs(report)
        self._finish_record(record)
        return record

    def _finish_record(self, record: PostRecord) -> None:
        self.records.append(record)

    def _refresh_iocs(self, report: cluster.IngestReport) -> None:
        for cid in report.expired_ids:
            self.iocs.pop(cid, None)
        if report.offline_ran:
            self.iocs = {
                c.id: ioc.generate_ioc(c, self.rules)
                for c in self.clusterer.active_clusters()
            }
        else:
            cid = report.outcome.cluster_id
            self.iocs[cid] = ioc.generate_ioc(self.clusterer.state.clusters[cid], self.rules)

    # ------------------------------------------------------------------ metrics

    def _roll_day(self, day: date) -> None:
        if self._day is None:
            self._day = day
            return
        while self._day < day:
            self._flush_day(self._day)
            self._day = self._day + timedelta(days=1)
            self._counter = _DayCounter()

    def _active_view(self, at: datetime) -> list[cluster.Cluster]:
        theta = self.config.clustering.theta
        return [
            c for c in self.clusterer.state.clusters.values()
            if at - c.last_update <= theta
        ]

    def _build_rows(self, day: date) -> tuple[DailyClusterMetrics, ReductionRow]:
        at = _day_end(day)
        active = self._active_view(at)
        if active:
            mean_wts = float(np.mean([cluster.wts(c) for c in active]))
        else:
            mean_wts = None
        if len(active) >= 2:
            max_jaccard = max(
                cluster.jaccard(a, b)
                for i, a in enumerate(active)
                for b in active[i + 1:]
            )
        elif active:
            max_jaccard = 0.0
        else:
            max_jaccard = None
        metrics_row = DailyClusterMetrics(
            day=day,
            mean_wts=mean_wts,
            max_jaccard=max_jaccard,
            active_clusters=len(active),
            ingested=self._counter.collected,
            asset_filtered=self._counter.asset_filtered,
            relevant=self._counter.relevant,
        )
        touched = sum(1 for c in active if c.last_update.date() == day)
        window_start = day - timedelta(days=7)
        pool = sum(1 for d in self._baseline_dates if window_start < d <= day)
        reduction_row = ReductionRow(
            day=day,
            collected=self._counter.collected,
            baseline_selected=self._counter.baseline_selected,
            relevant=self._counter.relevant,
            clusters_touched=touched,
            baseline_active_pool=pool,
        )
        return metrics_row, reduction_row

    def _flush_day(self, day: date) -> None:
        metrics_row, reduction_row = self._build_rows(day)
        self.metrics_rows.append(metrics_row)
        self.reduction_rows.append(reduction_row)

    def finish(self) -> None:
        """Flush the trailing day; call once after the stream ends."""
        if self._day is not None:
            self._flush_day(self._day)
            self._day = None
            self._counter = _DayCounter()

    def metrics_view(self) -> list[DailyClusterMetrics]:
        """Flushed daily rows plus the still-open day, for live readers."""
        rows = list(self.metrics_rows)
        if self._day is not None:
            rows.append(self._build_rows(self._day)[0])
        return rows

    def _reduction_rows_view(self) -> list[ReductionRow]:
        rows = list(self.reduction_rows)
        if self._day is not None:
            rows.append(self._build_rows(self._day)[1])
        return rows

    # ------------------------------------------------------------------ labeling

    def submit_label(self, post_id: str, label: str, source: str = "analyst"):
        if post_id not in self.posts:
            raise KeyError(f"unknown post id: {post_id!r}")
        return self.labels.submit(post_id, label, source)

    def label_queue(self, source: str = "auto") -> list[dict]:
        """Reviewable posts with their live verdict and any submitted label.

        source 'classified' queues classifier-relevant posts, 'filtered'
        queues every asset-filtered post (the bootstrap labeling mode);
        'auto' picks by the configured bootstrap flag.
        """
        if source == "auto":
            source = "filtered" if self.config.bootstrap_mode else "classified"
        if source not in ("classified", "filtered"):
            raise ValueError(f"unknown queue source: {source!r}")
        items = []
        for record in self.records:
            if not record.asset_passed:
                continue
            if source == "classified" and not record.relevant:
                continue
            labeled = self.labels.current.get(record.post.id)
            items.append(
                {
                    "post_id": record.post.id,
                    "text": record.post.text,
                    "verdict": self.verdict_for(record.post),
                    "label": labeled.label if labeled else None,
                }
            )
        return items

    def retrain(self, horizon_days: float | None = None, source: str = "analyst") -> dict:
        """Retrain the classifier from the label store and swap it in.

        The fitted TF-IDF model is reused unchanged so cluster geometry
        stays in one feature space; only the classifier is replaced.
        """
        models = self.models
        if models is None:
            raise RuntimeError("no TF-IDF model loaded")
        cutoff = None
        if horizon_days is not None and self.clusterer.now is not None:
            cutoff = self.clusterer.now - timedelta(days=horizon_days)
        examples = []
        for post_id, record in sorted(self.labels.current.items()):
            post = self.posts.get(post_id)
            if post is None:
                continue
            if cutoff is not None and post.timestamp < cutoff:
                continue
            norm = normalize(post, self.stopwords)
            if norm.dropped:
                continue
            vector = features.transform(models.tfidf, norm)
            label = classify.POSITIVE if record.label == RELEVANT else classify.NEGATIVE
            examples.append(classify.LabeledExample(vector=vector, label=label, post_id=post_id))
        new_model = train_classifier(self.config, examples)
        models.classifier = new_model
        models.classifier_kind = self.config.classifier
        digest = hashlib.sha256(
            json.dumps(
                [[ex.post_id, int(ex.label)] for ex in examples], sort_keys=True
            ).encode()
        ).hexdigest()
        version = {
            "version": len(self.model_versions) + 1,
            "classifier": self.config.classifier,
            "examples": len(examples),
            "horizon_days": horizon_days,
            "data_digest": digest,
        }
        self.model_versions.append(version)
        return version

    # ------------------------------------------------------------------ artifacts

    def export_iocs(self, out_dir: str | Path) -> list[Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        for cid in sorted(self.iocs):
            path = out_dir / f"cluster-{cid:06d}.json"
            path.write_text(ioc.serialize_event(self.iocs[cid]), encoding="utf-8")
            written.append(path)
        manifest = out_dir / "manifest.json"
        manifest.write_text(
            json.dumps({"events": [p.name for p in written]}, sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )
        return written

    def save_snapshot(self, path: str | Path) -> None:
        cluster.save_state(self.clusterer.state, path, now=self.clusterer.now)

    def write_metrics(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            for row in self.metrics_rows:
                handle.write(json.dumps(row.to_json(), sort_keys=True) + "\n")

    def reduction_report(self) -> ReductionReport:
        if self.security_keywords is None:
            raise RuntimeError("reduction report needs a security keyword set (baseline)")
        rows = self._reduction_rows_view()
        total_clusters = len(self.clusterer.state.clusters) + len(self.clusterer.state.archived)
        return ReductionReport(
            rows=rows,
            total_collected=sum(r.collected for r in rows),
            total_baseline=sum(r.baseline_selected for r in rows),
            total_relevant=sum(r.relevant for r in rows),
            total_clusters=total_clusters,
        )

    def duration_histogram(self) -> dict[int, int]:
        """Cluster lifetime distribution in whole days (minimum bucket 1)."""
        histogram: dict[int, int] = {}
        state = self.clusterer.state
        for c in list(state.clusters.values()) + list(state.archived.values()):
            days = (c.last_update.date() - c.created_at.date()).days
            bucket = max(1, days)
            histogram[bucket] = histogram.get(bucket, 0) + 1
        return dict(sorted(histogram.items()))


@dataclass
class RunResult:
    processed: int
    malformed: int
    relevant: int
    active_clusters: int
    archived_clusters: int


def run_stream(
    pipeline: Pipeline,
    lines: Iterable[str],
    event_log: Path | None = None,
) -> RunResult:
    """Process a JSONL stream; malformed lines are logged and skipped."""
    pipeline.require_models()
    malformed = 0
    processed = 0
    log_handle = open(event_log, "w", encoding="utf-8") if event_log else None
    try:
        for line_no, line in enumerate(lines, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                post = parse_post_json(json.loads(line))
                record = pipeline.process_post(post)
            except (json.JSONDecodeError, ValueError) as exc:
                malformed += 1
                logger.warning("skipping malformed line %d: %s", line_no, exc)
                if log_handle:
                    log_handle.write(
                        json.dumps(
                            {"type": "error", "line": line_no, "error": str(exc)},
                            sort_keys=True,
                        )
                        + "\n"
                    )
                continue
            processed += 1
            if log_handle:
                log_handle.write(json.dumps(record.to_json(), sort_keys=True) + "\n")
    finally:
        if log_handle:
            log_handle.close()
    pipeline.finish()
    state = pipeline.clusterer.state
    return RunResult(
        processed=processed,
        malformed=malformed,
        relevant=sum(1 for r in pipeline.records if r.relevant),
        active_clusters=len(state.clusters),
        archived_clusters=len(state.archived),
    )


# ---------------------------------------------------------------------- train


def read_labeled_jsonl(path: str | Path) -> list[tuple[Post, str]]:
    """Read a labeled corpus: post fields plus a 'label' key per line."""
    rows = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            label = obj.get("label")
            if label not in VALID_LABELS:
                raise ValueError(f"{path}:{line_no}: label must be one of {VALID_LABELS}")
            rows.append((parse_post_json(obj), label))
    return rows


def build_examples(
    corpus: Sequence[tuple[Post, str]],
    tfidf: features.TfIdfModel,
    stopwords: StopwordList,
) -> list[classify.LabeledExample]:
    examples = []
    for post, label in corpus:
        norm = normalize(post, stopwords)
        if norm.dropped:
            continue
        examples.append(
            classify.LabeledExample(
                vector=features.transform(tfidf, norm),
                label=classify.POSITIVE if label == RELEVANT else classify.NEGATIVE,
                post_id=post.id,
            )
        )
    return examples


def train_classifier(config: PipelineConfig, examples: Sequence[classify.LabeledExample]):
    if config.classifier == "svm":
        return config.svm.train(examples, config.train_seed)
    return config.mlp.train(examples, config.train_seed)


@dataclass
class TrainReport:
    bundle: ModelBundle
    examples: int
    positives: int
    negatives: int
    grid_rows: list[dict] = field(default_factory=list)
    chosen_config: object | None = None


def train(
    config: PipelineConfig,
    corpus: Sequence[tuple[Post, str]],
    grid: bool = False,
    k_folds: int = 10,
) -> TrainReport:
    """Fit TF-IDF + classifier from a labeled corpus; optionally grid-search."""
    stopwords = (
        StopwordList.from_file(config.stopword_file)
        if config.stopword_file
        else default_stopwords()
    )
    normalized = [normalize(post, stopwords) for post, _ in corpus]
    usable = [n for n in normalized if not n.dropped]
    if not usable:
        raise ValueError("no usable training documents")
    tfidf = features.fit(usable, config.feature_dimension, config.hash_seed)
    examples = build_examples(corpus, tfidf, stopwords)
    positives = sum(1 for ex in examples if ex.label == classify.POSITIVE)
    negatives = len(examples) - positives
    report = TrainReport(
        bundle=ModelBundle(tfidf=tfidf, classifier=None, classifier_kind=config.classifier),
        examples=len(examples),
        positives=positives,
        negatives=negatives,
    )
    if grid:
        configs = (
            classify.default_svm_grid()
            if config.classifier == "svm"
            else classify.default_mlp_grid()
        )
        results = classify.grid_search(examples, configs, k_folds, config.train_seed)
        dominant, chosen = classify.pareto_select(results)
        dominant_set = {id(r) for r in dominant}
        report.grid_rows = [
            {
                "config": repr(r.config),
                "tpr": r.tpr,
                "tnr": r.tnr,
                "dominant": id(r) in dominant_set,
                "chosen": r is chosen,
            }
            for r in results
        ]
        report.chosen_config = chosen.config
        report.bundle.classifier = chosen.config.train(examples, config.train_seed)
    else:
        report.bundle.classifier = train_classifier(config, examples)
    return report


def write_grid_csv(report: TrainReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(
            handle, fieldnames=["config", "tpr", "tnr", "dominant", "chosen"]
        )
        writer.writeheader()
        for row in report.grid_rows:
            writer.writerow(row)


# ------------------------------------------------------------------ evaluation


def posts_from_log(path: str | Path) -> list[Post]:
    """Extract the post stream from a raw JSONL file or an event log."""
    posts = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if obj.get("type") == "error":
                continue
            body = obj["post"] if obj.get("type") == "post" else obj
            posts.append(parse_post_json(body))
    return posts


def evaluate_clustering(
    posts: Sequence[Post],
    config: PipelineConfig,
    models: ModelBundle,
    no_reclustering: bool = False,
) -> list[DailyClusterMetrics]:
    """Replay a stream and report the daily cluster-quality series."""
    if no_reclustering:
        config = replace(
            config, clustering=replace(config.clustering, reclustering=False)
        )
    pipeline = Pipeline(config, models)
    for post in posts:
        pipeline.process_post(post)
    pipeline.finish()
    return pipeline.metrics_rows


def reduction_report_for(
    posts: Sequence[Post],
    config: PipelineConfig,
    models: ModelBundle,
) -> ReductionReport:
    """Replay a stream and compare pipeline volume against the naive baseline."""
    pipeline = Pipeline(config, models)
    for post in posts:
        pipeline.process_post(post)
    pipeline.finish()
    return pipeline.reduction_report()
