from __future__ import annotations

import sys
from datetime import datetime, timedelta, timezone
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from threatmon import cluster, corpus, features

T0 = datetime(2016, 5, 18, 10, 0, tzinfo=timezone.utc)


@pytest.fixture(scope="session")
def stopwords() -> corpus.StopwordList:
    return corpus.default_stopwords()


def make_posts(texts: list[str], start: datetime = T0, step_minutes: float = 10.0):
    return [
        corpus.Post(
            id=f"p{i}",
            author="feed",
            timestamp=start + timedelta(minutes=step_minutes * i),
            text=text,
        )
        for i, text in enumerate(texts)
    ]


def make_clustered(
    texts: list[str],
    stopword_list: corpus.StopwordList,
    dimension: int = 256,
    start: datetime = T0,
    step_minutes: float = 10.0,
) -> list[cluster.ClusteredPost]:
    """Normalize and vectorize raw texts into clustering-ready posts."""
    posts = make_posts(texts, start, step_minutes)
    norms = [corpus.normalize(p, stopword_list) for p in posts]
    model = features.fit([n for n in norms if not n.dropped], dimension=dimension)
    return [
        cluster.ClusteredPost(
            post_id=p.id,
            token_set=n.token_set,
            vector=features.transform(model, n),
            timestamp=p.timestamp,
            original_text=p.text,
            tokens=n.tokens,
        )
        for p, n in zip(posts, norms)
        if not n.dropped
    ]
