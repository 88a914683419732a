"""Two-phase stream clustering of relevant posts into threat clusters.

The online phase places each incoming post using the within-cluster threat
similarity (WTS) of the would-be cluster: the number of words shared by all
members divided by the word count of the smallest member. A post that fits
no cluster starts a new one (new threats are never discarded as outliers); a
post that fits several marks the state for an offline rebuild.

The offline phase flattens the state and repeatedly applies k-means with an
automatic cluster count (stop increasing k when the sum of squared errors
stops improving), keeping only cohesive clusters (WTS >= tau) and
re-clustering the rest until every post sits in a cohesive cluster.

Clusters age individually: one that receives nothing for longer than theta
is archived whole, while active clusters keep all their members regardless
of age.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .corpus import format_timestamp, parse_timestamp

DEFAULT_TAU = 2.0 / 3.0
DEFAULT_THETA = timedelta(days=7)


@dataclass(frozen=True)
class ClusteredPost:
    """A relevant post as seen by the clustering stage."""

    post_id: str
    token_set: frozenset[str]
    vector: np.ndarray
    timestamp: datetime
    original_text: str = ""
    tokens: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.token_set:
            raise ValueError(f"post {self.post_id!r} has an empty token set")
        if not self.tokens:
            object.__setattr__(self, "tokens", tuple(sorted(self.token_set)))


@dataclass(frozen=True)
class ClusteringConfig:
    tau: float = DEFAULT_TAU
    theta: timedelta = DEFAULT_THETA
    kmeans_max_iterations: int = 50
    kmeans_min_k: int = 2
    rng_seed: int = 0
    reclustering: bool = True  # False gives the plain auto-k variant

    def __post_init__(self) -> None:
        if not 0 < self.tau <= 1:
            raise ValueError(f"tau must be in (0, 1]: {self.tau}")
        if self.theta <= timedelta(0):
            raise ValueError("theta must be positive")


class Cluster:
    """One threat cluster with incrementally maintained caches.

    Members only ever get added; the offline phase builds new clusters
    instead of removing posts from existing ones.
    """

    def __init__(self, cluster_id: int, first_post: ClusteredPost):
        self.id = cluster_id
        self.members: dict[str, ClusteredPost] = {}
        self.shared_words: frozenset[str] = first_post.token_set
        self.word_union: frozenset[str] = frozenset()
        self.min_token_count: int = len(first_post.token_set)
        self.vector_sum = np.zeros_like(first_post.vector)
        self.created_at = first_post.timestamp
        self.last_update = first_post.timestamp
        self.exemplar_id = first_post.post_id
        self.add(first_post)

    def add(self, post: ClusteredPost) -> None:
        if post.post_id in self.members:
            raise ValueError(f"post {post.post_id!r} already in cluster {self.id}")
        self.members[post.post_id] = post
        self.shared_words = self.shared_words & post.token_set
        self.word_union = self.word_union | post.token_set
        self.min_token_count = min(self.min_token_count, len(post.token_set))
        self.vector_sum = self.vector_sum + post.vector
        self.created_at = min(self.created_at, post.timestamp)
        self.last_update = max(self.last_update, post.timestamp)
        self._refresh_exemplar()

    @property
    def centroid(self) -> np.ndarray:
        return self.vector_sum / len(self.members)

    def _refresh_exemplar(self) -> None:
        centroid = self.centroid
        best_key = None
        for post in self.members.values():
            delta = post.vector - centroid
            key = (float(delta @ delta), post.timestamp, post.post_id)
            if best_key is None or key < best_key:
                best_key = key
                self.exemplar_id = post.post_id
        assert best_key is not None

    @property
    def exemplar(self) -> ClusteredPost:
        return self.members[self.exemplar_id]

    def candidate_wts(self, post: ClusteredPost) -> float:
        """WTS of this cluster with the post added, without mutating."""
        shared = len(self.shared_words & post.token_set)
        smallest = min(self.min_token_count, len(post.token_set))
        return shared / smallest


def wts(cluster: Cluster) -> float:
    """Within-cluster threat similarity: shared words over smallest member."""
    if not cluster.members:
        raise ValueError("WTS is undefined for an empty cluster")
    return len(cluster.shared_words) / cluster.min_token_count


def wts_of_token_sets(token_sets: Sequence[frozenset[str]]) -> float:
    """WTS for a bare group of token sets (used by the offline phase)."""
    if not token_sets:
        raise ValueError("WTS is undefined for an empty group")
    shared = frozenset.intersection(*token_sets)
    smallest = min(len(s) for s in token_sets)
    return len(shared) / smallest


def jaccard(c1: Cluster, c2: Cluster) -> float:
    """Separation of two clusters: shared words over all distinct words."""
    union = c1.word_union | c2.word_union
    if not union:
        return 0.0
    return len(c1.word_union & c2.word_union) / len(union)


class IngestKind(Enum):
    NEW_THREAT = "new_threat"
    UPDATE = "update"
    NEEDS_OFFLINE = "needs_offline"


@dataclass(frozen=True)
class IngestOutcome:
    kind: IngestKind
    cluster_id: int


@dataclass
class ClusterState:
    """Global live summary: the active clusters plus bookkeeping.

    Every ingested post is in exactly one active or archived cluster;
    archived clusters keep their full membership for duration reports but
    never receive new posts.
    """

    clusters: dict[int, Cluster] = field(default_factory=dict)
    archived: dict[int, Cluster] = field(default_factory=dict)
    pending_offline: bool = False
    saved_snapshot: "ClusterState | None" = field(default=None, repr=False)
    next_cluster_id: int = 1
    ingested_ids: set[str] = field(default_factory=set, repr=False)

    def new_cluster(self, post: ClusteredPost) -> Cluster:
        cluster = Cluster(self.next_cluster_id, post)
        self.clusters[cluster.id] = cluster
        self.next_cluster_id += 1
        return cluster

    def all_posts(self) -> list[ClusteredPost]:
        """Active posts in deterministic (timestamp, id) order."""
        posts = [p for c in self.clusters.values() for p in c.members.values()]
        posts.sort(key=lambda p: (p.timestamp, p.post_id))
        return posts


def membership_hits(
    state: ClusterState, post: ClusteredPost, tau: float
) -> list[tuple[int, float]]:
    """Clusters that would stay cohesive with the post added.

    Sorted by resulting WTS descending; ties broken by most recent
    last_update, then lowest cluster id, so the head of the list is the
    placement target for multi-hit posts.
    """
    hits = []
    for cluster in state.clusters.values():
        value = cluster.candidate_wts(post)
        if value >= tau:
            hits.append((cluster.id, value))
    hits.sort(key=lambda item: (-item[1], _recency_key(state, item[0]), item[0]))
    return hits


def _recency_key(state: ClusterState, cluster_id: int) -> float:
    return -state.clusters[cluster_id].last_update.timestamp()


def online_ingest(
    state: ClusterState, post: ClusteredPost, config: ClusteringConfig
) -> IngestOutcome:
    """Place one post: new cluster, single-cluster update, or flag offline."""
    if post.post_id in state.ingested_ids:
        raise ValueError(f"duplicate post id: {post.post_id!r}")
    hits = membership_hits(state, post, config.tau)
    if not hits:
        cluster = state.new_cluster(post)
        outcome = IngestOutcome(IngestKind.NEW_THREAT, cluster.id)
    elif len(hits) == 1:
        cluster_id = hits[0][0]
        state.clusters[cluster_id].add(post)
        outcome = IngestOutcome(IngestKind.UPDATE, cluster_id)
    else:
        cluster_id = hits[0][0]
        state.clusters[cluster_id].add(post)
        state.pending_offline = True
        outcome = IngestOutcome(IngestKind.NEEDS_OFFLINE, cluster_id)
    state.ingested_ids.add(post.post_id)
    return outcome


def _center_means(points: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    sums = np.zeros((k, points.shape[1]), dtype=np.float64)
    np.add.at(sums, labels, points)
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    return sums / counts[:, None]


def kmeans(
    points: np.ndarray,
    k: int,
    max_iterations: int = 50,
    rng_seed: int = 0,
    distinct: np.ndarray | None = None,
) -> tuple[np.ndarray, float]:
    """Lloyd's algorithm with seeded sampling of distinct initial centers.

    Initial centers are drawn from the distinct point values when there are
    enough of them (so duplicated points cannot starve the seeding), and an
    empty cluster is reseeded from the point farthest from its assigned
    center. ``distinct`` lets callers that run many k values pass the
    deduplicated points once. Returns (assignment, SSE).
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}]: {k}")
    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    rng = np.random.default_rng(rng_seed)
    unique = np.unique(points, axis=0) if distinct is None else distinct
    if len(unique) >= k:
        centers = unique[rng.choice(len(unique), size=k, replace=False)].copy()
    else:
        centers = points[rng.choice(n, size=k, replace=False)].copy()

    sq_points = (points**2).sum(axis=1)
    labels = np.full(n, -1, dtype=np.intp)
    for _ in range(max_iterations):
        # ||x - c||^2 = ||x||^2 - 2 x.c + ||c||^2; only the argmin matters.
        distances = (
            sq_points[:, None] - 2.0 * (points @ centers.T) + (centers**2).sum(axis=1)[None, :]
        )
        new_labels = distances.argmin(axis=1)
        for j in range(k):
            if not np.any(new_labels == j):
                # Reseed from the farthest point, but never steal the last
                # member of another cluster (that would just move the hole).
                own = ((points - centers[new_labels]) ** 2).sum(axis=1)
                sizes = np.bincount(new_labels, minlength=k)
                eligible = sizes[new_labels] >= 2
                own = np.where(eligible, own, -np.inf)
                farthest = int(own.argmax())
                centers[j] = points[farthest]
                new_labels[farthest] = j
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        centers = _center_means(points, labels, k)

    centers = _center_means(points, labels, k)
    sse = float(((points - centers[labels]) ** 2).sum())
    return labels, sse


def kmeans_auto_k(
    points: np.ndarray,
    config: ClusteringConfig,
    rng_seed: int | None = None,
) -> tuple[np.ndarray, int]:
    """k-means with the cluster count found by the SSE elbow rule.

    Starting from the configured minimum k, the count grows while the SSE
    of a seeded run strictly improves; the best-recorded assignment is
    returned. k never exceeds the number of points.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if n < 2:
        return np.zeros(n, dtype=np.intp), min(n, 1)
    seed_source = np.random.default_rng(
        config.rng_seed if rng_seed is None else rng_seed
    )
    distinct = np.unique(points, axis=0)
    k = min(config.kmeans_min_k, n)
    best_labels: np.ndarray | None = None
    best_k = k
    best_sse = np.inf
    while True:
        run_seed = int(seed_source.integers(0, 2**63))
        labels, sse = kmeans(
            points, k, config.kmeans_max_iterations, run_seed, distinct=distinct
        )
        if sse < best_sse:
            best_labels, best_sse, best_k = labels, sse, k
            k += 1
            if k < n:
                continue
        break
    assert best_labels is not None
    return best_labels, best_k


def _build_cluster(cluster_id: int, posts: Sequence[ClusteredPost]) -> Cluster:
    ordered = sorted(posts, key=lambda p: (p.timestamp, p.post_id))
    cluster = Cluster(cluster_id, ordered[0])
    for post in ordered[1:]:
        cluster.add(post)
    return cluster


def offline_clustering(snapshot: ClusterState, config: ClusteringConfig) -> ClusterState:
    """Rebuild the active clusters so that every cluster has WTS >= tau.

    Repeatedly clusters the remaining posts with the auto-k elbow and
    finalizes cohesive groups. A round that finalizes nothing would repeat
    forever on the same input, so it instead finalizes the oldest remaining
    post as a singleton (singletons are always cohesive), bounding the loop
    by the number of posts. With ``config.reclustering`` False a single
    auto-k pass is accepted wholesale.
    """
    remaining = snapshot.all_posts()
    result = ClusterState(
        archived=dict(snapshot.archived),
        pending_offline=False,
        next_cluster_id=snapshot.next_cluster_id,
        ingested_ids=set(snapshot.ingested_ids),
    )
    final_groups: list[list[ClusteredPost]] = []
    round_rng = np.random.default_rng(config.rng_seed)
    while remaining:
        round_seed = int(round_rng.integers(0, 2**63))
        vectors = np.asarray([p.vector for p in remaining])
        labels, k = kmeans_auto_k(vectors, config, rng_seed=round_seed)
        groups: list[list[ClusteredPost]] = [[] for _ in range(int(labels.max()) + 1)]
        for post, label in zip(remaining, labels):
            groups[label].append(post)
        groups = [g for g in groups if g]
        if not config.reclustering:
            final_groups.extend(groups)
            remaining = []
            break
        passed = [
            g for g in groups
            if wts_of_token_sets([p.token_set for p in g]) >= config.tau
        ]
        if passed:
            finalized = {p.post_id for g in passed for p in g}
            final_groups.extend(passed)
            remaining = [p for p in remaining if p.post_id not in finalized]
        else:
            final_groups.append([remaining[0]])
            remaining = remaining[1:]
    for group in final_groups:
        cluster = _build_cluster(result.next_cluster_id, group)
        result.clusters[cluster.id] = cluster
        result.next_cluster_id += 1
    return result


def merge_cluster_state(
    s_star: ClusterState,
    pending: Iterable[ClusteredPost],
    config: ClusteringConfig,
) -> ClusterState:
    """Re-ingest posts that arrived during an offline run, oldest first."""
    ordered = sorted(pending, key=lambda p: (p.timestamp, p.post_id))
    for post in ordered:
        s_star.ingested_ids.discard(post.post_id)
        online_ingest(s_star, post, config)
    return s_star


def expire(state: ClusterState, now: datetime, theta: timedelta) -> list[int]:
    """Archive whole clusters stale for longer than theta; return their ids."""
    removed = [
        cid for cid, cluster in state.clusters.items()
        if now - cluster.last_update > theta
    ]
    for cid in removed:
        state.archived[cid] = state.clusters.pop(cid)
    return removed


@dataclass(frozen=True)
class IngestReport:
    """What one engine step did: placement, expiries, offline rebuild."""

    outcome: IngestOutcome
    expired_ids: tuple[int, ...]
    offline_ran: bool


class StreamClusterer:
    """Single-writer engine tying the online phase, expiry and offline runs.

    The offline rebuild runs synchronously at the ingestion point that set
    the pending flag, which keeps replays deterministic; merge_cluster_state
    covers the general case of posts arriving mid-run.
    """

    def __init__(self, config: ClusteringConfig):
        self.config = config
        self.state = ClusterState()
        self.now: datetime | None = None

    def ingest(self, post: ClusteredPost) -> IngestReport:
        self.now = post.timestamp if self.now is None else max(self.now, post.timestamp)
        expired = expire(self.state, self.now, self.config.theta)
        outcome = online_ingest(self.state, post, self.config)
        offline_ran = False
        if self.state.pending_offline:
            # Synchronous run: the saved snapshot is the live state and no
            # posts can arrive before the merge, so pending is empty.
            rebuilt = offline_clustering(self.state, self.config)
            self.state = merge_cluster_state(rebuilt, [], self.config)
            offline_ran = True
        return IngestReport(
            outcome=outcome, expired_ids=tuple(expired), offline_ran=offline_ran
        )

    def active_clusters(self) -> list[Cluster]:
        return [self.state.clusters[cid] for cid in sorted(self.state.clusters)]

    def archived_clusters(self) -> list[Cluster]:
        return [self.state.archived[cid] for cid in sorted(self.state.archived)]


def _post_to_dict(post: ClusteredPost) -> dict:
    return {
        "post_id": post.post_id,
        "tokens": list(post.tokens),
        "timestamp": format_timestamp(post.timestamp),
        "original_text": post.original_text,
    }


def _cluster_to_dict(cluster: Cluster) -> dict:
    return {
        "id": cluster.id,
        "created_at": format_timestamp(cluster.created_at),
        "last_update": format_timestamp(cluster.last_update),
        "exemplar_id": cluster.exemplar_id,
        "shared_words": sorted(cluster.shared_words),
        "members": [_post_to_dict(p) for p in cluster.members.values()],
    }


def state_to_dict(state: ClusterState, now: datetime | None = None) -> dict:
    """JSON-ready snapshot of a cluster state (vectors are re-derived on load)."""
    return {
        "format": "threatmon-cluster-state-v1",
        "now": format_timestamp(now) if now is not None else None,
        "pending_offline": state.pending_offline,
        "next_cluster_id": state.next_cluster_id,
        "clusters": [_cluster_to_dict(state.clusters[cid]) for cid in sorted(state.clusters)],
        "archived": [_cluster_to_dict(state.archived[cid]) for cid in sorted(state.archived)],
    }


Vectorizer = Callable[[Sequence[str]], np.ndarray]


def _cluster_from_dict(data: dict, vectorize: Vectorizer) -> Cluster:
    members = [
        ClusteredPost(
            post_id=m["post_id"],
            token_set=frozenset(m["tokens"]),
            vector=vectorize(m["tokens"]),
            timestamp=parse_timestamp(m["timestamp"]),
            original_text=m["original_text"],
            tokens=tuple(m["tokens"]),
        )
        for m in data["members"]
    ]
    cluster = Cluster(data["id"], members[0])
    for post in members[1:]:
        cluster.add(post)
    return cluster


def state_from_dict(data: dict, vectorize: Vectorizer) -> tuple[ClusterState, datetime | None]:
    """Rebuild a ClusterState from a snapshot dict.

    Members are re-added in their stored order, so all derived caches
    (centroid, exemplar, shared words) reproduce the saved state exactly.
    """
    if data.get("format") != "threatmon-cluster-state-v1":
        raise ValueError(f"unsupported snapshot format: {data.get('format')}")
    state = ClusterState(
        pending_offline=data["pending_offline"],
        next_cluster_id=data["next_cluster_id"],
    )
    for cluster_data in data["clusters"]:
        cluster = _cluster_from_dict(cluster_data, vectorize)
        state.clusters[cluster.id] = cluster
        state.ingested_ids.update(cluster.members)
    for cluster_data in data["archived"]:
        cluster = _cluster_from_dict(cluster_data, vectorize)
        state.archived[cluster.id] = cluster
        state.ingested_ids.update(cluster.members)
    now = parse_timestamp(data["now"]) if data.get("now") else None
    return state, now


def save_state(state: ClusterState, path: str | Path, now: datetime | None = None) -> None:
    payload = state_to_dict(state, now)
    Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")


def load_state(path: str | Path, vectorize: Vectorizer) -> tuple[ClusterState, datetime | None]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return state_from_dict(payload, vectorize)
