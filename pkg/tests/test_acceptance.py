"""Acceptance suite: one test per release criterion, with its time budget.

Each test prints a single `[ACCEPTANCE] ...` PASS line (visible with -s or
-rA) so a release run reads as a checklist. Budgets are wall-clock upper
bounds; the assertions themselves pin the behavior.
"""

from __future__ import annotations

import time
from datetime import timedelta
from pathlib import Path

import numpy as np
import pytest

import synthetic
from threatmon import classify, cluster, corpus, ioc
from threatmon.service import pipeline as pl

from conftest import T0, make_clustered, make_posts
from test_ioc import CISCO_TEXTS, DOS_TAG
from test_pipeline import ASSET_LINES, SECURITY_WORDS


class _Budget:
    def __init__(self, name: str, seconds: float):
        self.name = name
        self.seconds = seconds

    def __enter__(self):
        self.start = time.monotonic()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.monotonic() - self.start
        if exc_type is None:
            assert elapsed < self.seconds, (
                f"{self.name} exceeded its {self.seconds:.0f}s budget: {elapsed:.1f}s"
            )
            print(f"[ACCEPTANCE] {self.name} PASS ({elapsed:.2f}s)")
        return False


@pytest.fixture(scope="module")
def env(tmp_path_factory):
    root = tmp_path_factory.mktemp("acceptance")
    assets = root / "assets.txt"
    assets.write_text(ASSET_LINES + "\n")
    security = root / "security.txt"
    security.write_text("# rho = 0.2\n" + "\n".join(SECURITY_WORDS.split()) + "\n")
    config = pl.PipelineConfig(
        asset_keywords_file=assets,
        security_keywords_file=security,
        feature_dimension=256,
    )
    trained = pl.train(
        config, synthetic.generate_labeled_corpus(seed=1, relevant=150, irrelevant=150)
    )
    return root, config, trained


def _bundle(trained: pl.TrainReport) -> pl.ModelBundle:
    return pl.ModelBundle(
        tfidf=trained.bundle.tfidf,
        classifier=trained.bundle.classifier,
        classifier_kind=trained.bundle.classifier_kind,
    )


def test_c01_normalization_golden(stopwords):
    with _Budget("C1 normalization golden example", 1.0):
        post = make_posts(
            [
                "#Oracle #Linux 6 / 7 : Unbreakable Enterprise kernel "
                "(ELSA-2016-3573) https://t.co/vLTel8NodG"
            ]
        )[0]
        tokens = corpus.normalize(post, stopwords).tokens
        assert list(tokens) == (
            "oracle linux six seven unbreakable enterprise kernel elsa hyphen "
            "two thousand and sixteen hyphen "
            "three thousand five hundred and seventy three"
        ).split()


def test_c02_wts_oracle_equivalence():
    with _Budget("C2 WTS brute-force equivalence (1000 random clusters)", 5.0):
        rng = np.random.default_rng(20)
        vocabulary = [f"w{i}" for i in range(30)]
        for trial in range(1000):
            size = int(rng.integers(2, 9))
            token_sets = []
            for _ in range(size):
                words = rng.choice(vocabulary, size=int(rng.integers(1, 11)), replace=False)
                token_sets.append(frozenset(words))
            posts = [
                cluster.ClusteredPost(
                    post_id=f"{trial}_{i}",
                    token_set=s,
                    vector=np.zeros(4),
                    timestamp=T0 + timedelta(seconds=i),
                )
                for i, s in enumerate(token_sets)
            ]
            built = cluster.Cluster(trial, posts[0])
            for p in posts[1:]:
                built.add(p)
            shared = frozenset.intersection(*token_sets)
            oracle = len(shared) / min(len(s) for s in token_sets)
            assert cluster.wts(built) == oracle
            singleton = cluster.Cluster(10_000 + trial, posts[0])
            assert cluster.wts(singleton) == 1.0


def test_c03_offline_cohesion_and_no_discard(stopwords):
    with _Budget("C3 offline cohesion + no-discard (100 randomized trials)", 60.0):
        config_tau = 2.0 / 3.0
        for trial in range(100):
            rng = np.random.default_rng(1000 + trial)
            target = int(rng.integers(20, 201))
            texts = []
            while len(texts) < target:
                kind = rng.random()
                if kind < 0.6:
                    slug = "".join(rng.choice(list("abcdefghijklmnop"), size=7))
                    base = f"Vuln: vendor {slug} module {trial} remote exploit advisory"
                    for j in range(int(rng.integers(2, 7))):
                        texts.append(base + (" #infosec" if j % 2 else ""))
                else:
                    word_salad = " ".join(
                        "".join(rng.choice(list("qrstuvwxyz"), size=6))
                        for _ in range(int(rng.integers(4, 9)))
                    )
                    texts.append(f"note {word_salad}")
            texts = texts[:target]
            posts = make_clustered(texts, stopwords, dimension=64)
            state = cluster.ClusterState()
            config = cluster.ClusteringConfig(rng_seed=trial)
            for p in posts:
                cluster.online_ingest(state, p, config)
            before = sorted(p.post_id for p in state.all_posts())
            result = cluster.offline_clustering(state, config)
            after = sorted(p.post_id for p in result.all_posts())
            assert before == after, f"trial {trial}: posts lost or duplicated"
            for c in result.clusters.values():
                assert cluster.wts(c) >= config_tau, f"trial {trial}: cluster below tau"


def test_c04_reclustering_benefit(stopwords):
    with _Budget("C4 re-clustering raises mean WTS (10x10 threads + 20 singletons)", 30.0):
        rng = np.random.default_rng(7)
        texts = []
        for t in range(10):
            slug = "".join(rng.choice(list("abcdefghijklmnop"), size=7))
            base = f"Alert: vendor {slug} component {t} denial of service vulnerability"
            for j in range(10):
                texts.append(base + (f" #tag{j % 3}" if j % 2 else ""))
        for s in range(20):
            salad = " ".join(
                "".join(rng.choice(list("qrstuvwxyz"), size=6)) for _ in range(6)
            )
            texts.append(f"odd report {salad}")
        posts = make_clustered(texts, stopwords, dimension=64)

        def run(reclustering: bool) -> float:
            state = cluster.ClusterState()
            config = cluster.ClusteringConfig(rng_seed=3, reclustering=reclustering)
            for p in posts:
                cluster.online_ingest(state, p, config)
            result = cluster.offline_clustering(state, config)
            return float(np.mean([cluster.wts(c) for c in result.clusters.values()]))

        with_reclustering = run(True)
        without_reclustering = run(False)
        assert with_reclustering >= 0.90
        assert with_reclustering > without_reclustering


def test_c05_elbow_correctness():
    with _Budget("C5 elbow recovers k=3 on planted blobs (100 trials)", 30.0):
        config = cluster.ClusteringConfig()
        recovered = 0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            while True:
                centers = rng.integers(-500, 500, size=(3, 16)).astype(float)
                if len(np.unique(centers, axis=0)) == 3:
                    break
            sizes = rng.integers(3, 11, size=3)
            points = np.concatenate(
                [np.repeat(c[None, :], s, axis=0) for c, s in zip(centers, sizes)]
            )
            rng.shuffle(points)
            labels, k = cluster.kmeans_auto_k(points, config, rng_seed=seed)
            assert k <= len(points)
            if k == 3:
                recovered += 1
        assert recovered >= 95, f"k=3 recovered only {recovered}/100"

        identical = np.ones((12, 6))
        _, k = cluster.kmeans_auto_k(identical, config, rng_seed=0)
        assert k == 2


def test_c06_window_model_duration_histogram(env):
    with _Budget("C6 per-cluster window yields designed durations {1,7,30,57}", 10.0):
        root, base_config, trained = env
        config = pl.PipelineConfig(
            asset_keywords_file=base_config.asset_keywords_file,
            feature_dimension=256,
            bootstrap_mode=True,
            clustering=cluster.ClusteringConfig(theta=timedelta(days=7)),
        )
        pipe = pl.Pipeline(config, pl.ModelBundle(trained.bundle.tfidf, None))
        posts = synthetic.lifetime_stream((1, 7, 30, 57))
        designed_members = {}
        for post in posts:
            record = pipe.process_post(post)
            assert record.verdict == "bootstrap"
            designed_members.setdefault(post.id.split("_")[0], set()).add(post.id)
        pipe.finish()

        # The short-lived threads expire during the stream; one topic per
        # designed lifetime must exist across active + archived.
        state = pipe.clusterer.state
        assert len(state.clusters) + len(state.archived) == 4

        final_now = max(p.timestamp for p in posts) + timedelta(days=8)
        still_active = sorted(state.clusters)
        removed = cluster.expire(state, final_now, config.clustering.theta)
        assert removed == still_active
        assert not state.clusters

        # Whole-cluster removals: each archived cluster holds exactly the
        # designed posts of one topic, none dropped.
        archived_sets = sorted(
            (frozenset(c.members) for c in state.archived.values()), key=sorted
        )
        expected_sets = sorted(
            (frozenset(ids) for ids in designed_members.values()), key=sorted
        )
        assert archived_sets == expected_sets
        assert pipe.duration_histogram() == {1: 1, 7: 1, 30: 1, 57: 1}


def test_c07_classifier_sanity(env, stopwords):
    with _Budget("C7 SVM CV >= 0.95, MLP XOR, gradient check", 120.0):
        root, config, trained = env
        corpus_rows = synthetic.generate_labeled_corpus(seed=5, relevant=250, irrelevant=250)
        examples = pl.build_examples(corpus_rows, trained.bundle.tfidf, stopwords)
        assert len(examples) == 500
        result = classify.cross_validate(
            examples, classify.SvmConfig(c=5.0, step_size=0.05, max_iterations=100),
            k_folds=10, rng_seed=0,
        )
        assert result.mean_tpr >= 0.95, f"CV TPR {result.mean_tpr:.3f}"
        assert result.mean_tnr >= 0.95, f"CV TNR {result.mean_tnr:.3f}"

        xor_data = [
            classify.LabeledExample(vector=np.array(v, dtype=float), label=l)
            for v, l in [
                ((0, 0), classify.NEGATIVE), ((1, 1), classify.NEGATIVE),
                ((0, 1), classify.POSITIVE), ((1, 0), classify.POSITIVE),
            ]
        ]
        mlp = classify.train_mlp(
            xor_data, layer_sizes=(2, 10, 10, 10, 2),
            max_iterations=2000, rng_seed=0, learning_rate=1.0,
        )
        assert all(mlp.predict(ex.vector) == ex.label for ex in xor_data)

        rng = np.random.default_rng(3)
        layer_sizes = (4, 6, 2)
        weights = [rng.normal(0, 0.7, size=(4, 6)), rng.normal(0, 0.7, size=(6, 2))]
        biases = [rng.normal(0, 0.3, size=6), rng.normal(0, 0.3, size=2)]
        x = rng.normal(size=(10, 4))
        y = rng.integers(0, 2, size=10)
        _, grad_w, grad_b = classify.mlp_loss_and_gradients(layer_sizes, weights, biases, x, y)
        h = 1e-5
        for arrays, grads in ((weights, grad_w), (biases, grad_b)):
            for arr, grad in zip(arrays, grads):
                it = np.nditer(arr, flags=["multi_index"])
                for _ in it:
                    idx = it.multi_index
                    original = arr[idx]
                    arr[idx] = original + h
                    lp, _, _ = classify.mlp_loss_and_gradients(layer_sizes, weights, biases, x, y)
                    arr[idx] = original - h
                    lm, _, _ = classify.mlp_loss_and_gradients(layer_sizes, weights, biases, x, y)
                    arr[idx] = original
                    fd = (lp - lm) / (2 * h)
                    denom = max(abs(fd), abs(float(grad[idx])), 1e-8)
                    assert abs(fd - float(grad[idx])) / denom < 1e-4


def test_c08_pareto_selection():
    with _Budget("C8 Pareto dominant sets and chosen configs", 1.0):
        dominant, chosen = classify.pareto_select(
            [classify.GridResult("A", 0.9, 0.9), classify.GridResult("B", 0.8, 0.8)]
        )
        assert [r.config for r in dominant] == ["A"] and chosen.config == "A"

        dominant, chosen = classify.pareto_select(
            [
                classify.GridResult("A", 1.0, 0.5),
                classify.GridResult("B", 0.5, 1.0),
                classify.GridResult("C", 0.9, 0.9),
            ]
        )
        assert {r.config for r in dominant} == {"A", "B", "C"}
        assert chosen.config == "C"

        # The chosen config is never strictly dominated (random stress).
        rng = np.random.default_rng(2)
        results = [
            classify.GridResult(f"c{i}", float(rng.uniform(0, 1)), float(rng.uniform(0, 1)))
            for i in range(200)
        ]
        dominant, chosen = classify.pareto_select(results)
        for other in results:
            assert not (
                other.tpr >= chosen.tpr and other.tnr >= chosen.tnr
                and (other.tpr > chosen.tpr or other.tnr > chosen.tnr)
            )


def test_c09_reduction_pipeline(env):
    with _Budget("C9 volume reduction: monotone counts, exemplars <= 0.3x relevant", 60.0):
        root, config, trained = env
        posts = synthetic.generate_stream(
            seed=9, n_threads=60, posts_per_thread=5, n_singletons=0,
            benign=150, noise=150, span_days=21,
        )
        pipe = pl.Pipeline(config, _bundle(trained))
        for post in posts:
            pipe.process_post(post)
        pipe.finish()
        report = pipe.reduction_report()
        for row in report.rows:
            assert (
                row.collected >= row.baseline_selected >= row.relevant
                >= row.clusters_touched
            )
        assert report.total_relevant > 0
        assert report.total_clusters <= 0.3 * report.total_relevant, (
            f"{report.total_clusters} clusters vs {report.total_relevant} relevant"
        )


def test_c10_ioc_validity(stopwords):
    with _Budget("C10 IoC schema validity + advisory cluster tags", 5.0):
        rules = ioc.default_taxonomy_rules()
        schema = ioc.load_event_schema()

        posts = make_clustered(CISCO_TEXTS, stopwords)
        state = cluster.ClusterState()
        config = cluster.ClusteringConfig()
        for p in posts:
            cluster.online_ingest(state, p, config)
        assert len(state.clusters) == 1
        event = ioc.generate_ioc(state.clusters[1], rules)
        data = ioc.to_misp_json(event)
        ioc.validate_event_json(data, schema)
        assert ioc.OSINT_TAG in event.tags
        assert DOS_TAG in event.tags
        assert len(data["Event"]["Object"]) == 2
        assert len(event.member_texts) == 6

        # Every event from a varied stream validates against the schema.
        rng = np.random.default_rng(4)
        texts = []
        for t in range(12):
            slug = "".join(rng.choice(list("abcdefghij"), size=6))
            texts.append(
                f"Vuln: vendor {slug} SQL injection exploit CVE-2016-{1000 + t} "
                f"https://t.co/{slug}"
            )
        varied_state = cluster.ClusterState()
        for p in make_clustered(texts, stopwords, dimension=64):
            cluster.online_ingest(varied_state, p, config)
        for c in varied_state.clusters.values():
            ioc.validate_event_json(ioc.to_misp_json(ioc.generate_ioc(c, rules)), schema)


def test_c11_replay_determinism(env, tmp_path):
    with _Budget("C11 two 5000-post replays are byte-identical", 120.0):
        root, config, trained = env
        posts = synthetic.generate_stream(
            seed=11, n_threads=150, posts_per_thread=6, n_singletons=120,
            benign=2200, noise=1780, span_days=60,
        )
        assert len(posts) == 5000
        stream_file = tmp_path / "stream.jsonl"
        synthetic.write_stream_jsonl(posts, stream_file)

        def replay(out_dir: Path) -> None:
            out_dir.mkdir()
            pipe = pl.Pipeline(config, _bundle(trained))
            with open(stream_file, encoding="utf-8") as handle:
                pl.run_stream(pipe, handle, event_log=out_dir / "events.jsonl")
            pipe.save_snapshot(out_dir / "snapshot.json")
            pipe.write_metrics(out_dir / "metrics.jsonl")
            pipe.export_iocs(out_dir / "iocs")

        replay(tmp_path / "run1")
        replay(tmp_path / "run2")

        for name in ("events.jsonl", "snapshot.json", "metrics.jsonl"):
            assert (tmp_path / "run1" / name).read_bytes() == (
                tmp_path / "run2" / name
            ).read_bytes(), f"{name} differs between replays"
        iocs1 = sorted((tmp_path / "run1" / "iocs").iterdir())
        iocs2 = sorted((tmp_path / "run2" / "iocs").iterdir())
        assert [f.name for f in iocs1] == [f.name for f in iocs2]
        for f1, f2 in zip(iocs1, iocs2):
            assert f1.read_bytes() == f2.read_bytes(), f"{f1.name} differs"
