"""Asset-keyword filtering and the naive security-keyword baseline.

Asset matching runs on the raw lowercased text (not on normalized tokens)
because asset phrases may contain spaces or digits that normalization would
mangle. A phrase matches only on whole-word boundaries, so the asset "edge"
matches "Microsoft Edge update" but not "edgecase bug".
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import NormalizedPost

_BOUNDARY = "a-z0-9"


@dataclass(frozen=True)
class AssetKeywordSet:
    """Ordered set of lowercase phrases describing the monitored assets."""

    keywords: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.keywords:
            raise ValueError("asset keyword set must be non-empty")
        cleaned = tuple(dict.fromkeys(k.strip().lower() for k in self.keywords))
        if any(not k for k in cleaned):
            raise ValueError("asset keywords must be non-blank")
        object.__setattr__(self, "keywords", cleaned)

    @classmethod
    def from_file(cls, path: str | Path) -> "AssetKeywordSet":
        """Load asset phrases: one per line, '#' comments allowed."""
        phrases = [
            line.strip()
            for line in Path(path).read_text(encoding="utf-8").splitlines()
            if line.strip() and not line.lstrip().startswith("#")
        ]
        return cls(tuple(phrases))


@dataclass(frozen=True)
class SecurityKeywordSet:
    """Generic security words for the naive baseline filter."""

    keywords: frozenset[str]
    rho: float = 0.2

    def __post_init__(self) -> None:
        # rho = 0 is allowed only as the degenerate "select nothing" bound.
        if not 0 <= self.rho <= 1:
            raise ValueError(f"rho must be in [0, 1]: {self.rho}")
        object.__setattr__(self, "keywords", frozenset(k.lower() for k in self.keywords))

    @classmethod
    def from_file(cls, path: str | Path) -> "SecurityKeywordSet":
        rho = 0.2
        words = set()
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if line.startswith("# rho ="):
                rho = float(line.split("=", 1)[1])
            elif line and not line.startswith("#"):
                words.add(line.lower())
        return cls(frozenset(words), rho)

    def to_file(self, path: str | Path) -> None:
        lines = [f"# rho = {self.rho}"] + sorted(self.keywords)
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _phrase_pattern(phrase: str) -> re.Pattern:
    return re.compile(
        rf"(?<![{_BOUNDARY}]){re.escape(phrase)}(?![{_BOUNDARY}])"
    )


def contains_keyword(text: str, phrase: str) -> bool:
    """Whole-word-bounded, case-insensitive phrase match on raw text."""
    return _phrase_pattern(phrase.lower()).search(text.lower()) is not None


def asset_filter(text: str, assets: AssetKeywordSet) -> bool:
    """True iff the text mentions at least one monitored asset."""
    lowered = text.lower()
    return any(_phrase_pattern(k).search(lowered) for k in assets.keywords)


def baseline_filter(text: str, assets: AssetKeywordSet, sec: SecurityKeywordSet) -> bool:
    """Naive keyword selection: asset mention plus a generic security word."""
    if not sec.keywords:
        raise ValueError("security keyword set is empty")
    if not asset_filter(text, assets):
        return False
    lowered = text.lower()
    return any(_phrase_pattern(k).search(lowered) for k in sec.keywords)


def derive_security_keywords(
    positives: Sequence[NormalizedPost],
    rho: float,
    exclusions: Iterable[str] = (),
) -> SecurityKeywordSet:
    """Derive generic security words from positive training posts.

    Fits an un-hashed TF-IDF over the positive posts and keeps every word
    whose maximum per-document weight stays below ``rho``: words spread over
    almost all documents get a near-zero idf and weight, so small ``rho``
    values select exactly the ubiquitous security vocabulary. The exclusions
    set replaces a manual scrub of non-security content.

    idf here is the unsmoothed ln((N + 1) / (df + 1)); with the +1-smoothed
    variant every weight would exceed 1 and no word could pass a small rho.
    """
    docs = [p for p in positives if not p.dropped]
    if not docs:
        raise ValueError("no training documents")
    n_docs = len(docs)
    df: Counter[str] = Counter()
    for doc in docs:
        df.update(doc.token_set)
    idf = {w: math.log((n_docs + 1) / (df[w] + 1)) for w in df}
    max_weight: dict[str, float] = {}
    for doc in docs:
        counts = Counter(doc.tokens)
        for word, count in counts.items():
            weight = count * idf[word]
            if weight > max_weight.get(word, -1.0):
                max_weight[word] = weight
    excluded = {w.lower() for w in exclusions}
    selected = frozenset(
        w for w, weight in max_weight.items() if weight < rho and w not in excluded
    )
    return SecurityKeywordSet(selected, rho)
