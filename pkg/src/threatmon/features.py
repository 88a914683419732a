"""Fixed-dimension hashed TF-IDF vectors for normalized posts.

Tokens map to vector positions with the hashing trick, so the vector size
stays constant regardless of vocabulary growth and colliding tokens simply
accumulate. The hash is a seeded 32-bit FNV-1a over the token's UTF-8 bytes;
the constants below are frozen so any reimplementation can reproduce the
exact same buckets:

    h = (2166136261 XOR seed) mod 2^32
    for each byte b:  h = ((h XOR b) * 16777619) mod 2^32
    index = h mod dimension

idf uses the smoothed form ln((N + 1) / (df + 1)) + 1, which keeps every
weight strictly positive and never divides by zero for unseen buckets.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import NormalizedPost

FNV_OFFSET_BASIS = 2166136261
FNV_PRIME = 16777619
_MASK32 = 0xFFFFFFFF

DEFAULT_DIMENSION = 3000
DEFAULT_HASH_SEED = 0

_MODEL_FORMAT = "threatmon-tfidf-v1"

FeatureVector = np.ndarray


def hash_token(token: str, dimension: int, seed: int = DEFAULT_HASH_SEED) -> int:
    """Deterministic, platform-independent bucket index for a token."""
    if not token:
        raise ValueError("token must be non-empty")
    if dimension < 1:
        raise ValueError("dimension must be >= 1")
    h = (FNV_OFFSET_BASIS ^ seed) & _MASK32
    for byte in token.encode("utf-8"):
        h = ((h ^ byte) * FNV_PRIME) & _MASK32
    return h % dimension


@dataclass
class TfIdfModel:
    """Fitted idf weights over a fixed hashed vocabulary."""

    dimension: int
    idf: np.ndarray
    doc_count: int
    hash_seed: int = DEFAULT_HASH_SEED

    def __post_init__(self) -> None:
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        self.idf = np.asarray(self.idf, dtype=np.float64)
        if self.idf.shape != (self.dimension,):
            raise ValueError("idf length must equal dimension")
        if np.any(self.idf < 0):
            raise ValueError("idf weights must be non-negative")
        if self.doc_count < 1:
            raise ValueError("doc_count must be >= 1 after fitting")

    def save(self, path: str | Path) -> None:
        payload = {
            "format": _MODEL_FORMAT,
            "dimension": self.dimension,
            "hash_seed": self.hash_seed,
            "doc_count": self.doc_count,
            "idf": self.idf.tolist(),
        }
        Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "TfIdfModel":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if payload.get("format") != _MODEL_FORMAT:
            raise ValueError(f"unsupported model file format: {payload.get('format')}")
        return cls(
            dimension=payload["dimension"],
            idf=np.asarray(payload["idf"], dtype=np.float64),
            doc_count=payload["doc_count"],
            hash_seed=payload["hash_seed"],
        )


def fit(
    corpus: Sequence[NormalizedPost],
    dimension: int = DEFAULT_DIMENSION,
    hash_seed: int = DEFAULT_HASH_SEED,
) -> TfIdfModel:
    """Fit idf weights from document frequencies per hash bucket."""
    docs = [p for p in corpus if not p.dropped]
    if not docs:
        raise ValueError("cannot fit TF-IDF on an empty corpus")
    df = np.zeros(dimension, dtype=np.float64)
    for doc in docs:
        buckets = {hash_token(t, dimension, hash_seed) for t in doc.token_set}
        for b in buckets:
            df[b] += 1
    n_docs = len(docs)
    idf = np.log((n_docs + 1) / (df + 1)) + 1.0
    return TfIdfModel(dimension=dimension, idf=idf, doc_count=n_docs, hash_seed=hash_seed)


def transform(model: TfIdfModel, post: NormalizedPost) -> FeatureVector:
    """tf * idf vector for one post; colliding tokens accumulate."""
    values = np.zeros(model.dimension, dtype=np.float64)
    for token in post.tokens:
        values[hash_token(token, model.dimension, model.hash_seed)] += 1.0
    return values * model.idf


def transform_tokens(model: TfIdfModel, tokens: Sequence[str]) -> FeatureVector:
    """Like transform, for a bare token sequence."""
    values = np.zeros(model.dimension, dtype=np.float64)
    for token in tokens:
        values[hash_token(token, model.dimension, model.hash_seed)] += 1.0
    return values * model.idf
