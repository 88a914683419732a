"""Post data model and deterministic text normalization.

Normalization turns a raw short post into a sequence of lowercase ``[a-z]+``
tokens. The rules run in a fixed order so that identical input always yields
identical tokens, on any platform:

1. lowercase the text
2. drop hyperlink tokens (``http://``, ``https://``, ``www.`` prefixes)
3. drop stopwords
4. replace ``.`` between non-space characters with the word ``dot``, spell
   out every maximal digit run as an English cardinal, replace ``-`` with
   the word ``hyphen``
5. delete every remaining character outside ``[a-z ]``
6. collapse whitespace and split into tokens

Digit runs become British-style cardinals ("2016" -> "two thousand and
sixteen") because version strings and identifiers carry meaning that a bare
digit strip would destroy.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator

_URL_PREFIXES = ("http://", "https://", "www.")
_DOT_BETWEEN_RE = re.compile(r"(?<=\S)\.(?=\S)")
_DIGIT_RUN_RE = re.compile(r"[0-9]+")
_NON_ALNUM_RE = re.compile(r"[^a-z0-9]+")
_SWEEP_RE = re.compile(r"[^a-z ]")

_ONES = (
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight",
    "nine", "ten", "eleven", "twelve", "thirteen", "fourteen", "fifteen",
    "sixteen", "seventeen", "eighteen", "nineteen",
)
_TENS = (
    "", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy",
    "eighty", "ninety",
)
# Long-scale unit names; anything above quintillion (or with leading zeros)
# is read digit by digit.
_LONG_SCALE = (
    (10 ** 30, "quintillion"),
    (10 ** 24, "quadrillion"),
    (10 ** 18, "trillion"),
    (10 ** 12, "billion"),
    (10 ** 6, "million"),
)
_MAX_VERBAL_DIGITS = 36


@dataclass(frozen=True)
class Post:
    """A raw short text item from the monitored stream."""

    id: str
    author: str
    timestamp: datetime
    text: str

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("post id must be non-empty")


@dataclass(frozen=True)
class NormalizedPost:
    """Deterministic lowercase-token form of a post.

    ``original_text`` is kept untouched for presentation; ``dropped`` flags
    posts whose token sequence came out empty.
    """

    post_id: str
    tokens: tuple[str, ...]
    token_set: frozenset[str] = field(init=False)
    original_text: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "token_set", frozenset(self.tokens))

    @property
    def dropped(self) -> bool:
        return not self.tokens


@dataclass(frozen=True)
class StopwordList:
    """Set of lowercase words removed during normalization."""

    words: frozenset[str]

    def __post_init__(self) -> None:
        bad = [w for w in self.words if w != w.lower()]
        if bad:
            raise ValueError(f"stopwords must be lowercase: {bad[:5]}")

    @classmethod
    def from_file(cls, path: str | Path) -> "StopwordList":
        """Load a stopword file: UTF-8, one word per line, '#' comments."""
        words = set()
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            word = line.strip()
            if word and not word.startswith("#"):
                words.add(word.lower())
        return cls(frozenset(words))

    @classmethod
    def empty(cls) -> "StopwordList":
        return cls(frozenset())


def default_stopwords() -> StopwordList:
    """The fixed stopword list shipped with the package."""
    ref = resources.files("threatmon.data").joinpath("stopwords.txt")
    with resources.as_file(ref) as path:
        return StopwordList.from_file(path)


def _cardinal(n: int) -> list[str]:
    if n < 20:
        return [_ONES[n]]
    if n < 100:
        tens, unit = divmod(n, 10)
        words = [_TENS[tens]]
        if unit:
            words.append(_ONES[unit])
        return words
    if n < 1000:
        hundreds, rem = divmod(n, 100)
        words = [_ONES[hundreds], "hundred"]
        if rem:
            words.append("and")
            words.extend(_cardinal(rem))
        return words
    if n < 10 ** 6:
        thousands, rem = divmod(n, 1000)
        words = _cardinal(thousands) + ["thousand"]
    else:
        for unit_value, unit_name in _LONG_SCALE:
            if n >= unit_value:
                count, rem = divmod(n, unit_value)
                words = _cardinal(count) + [unit_name]
                break
    if rem:
        if rem < 100:
            words.append("and")
        words.extend(_cardinal(rem))
    return words


def verbalize_number(digits: str) -> list[str]:
    """Spell out a digit run as lowercase English cardinal words.

    Uses long-scale names with "and" before a trailing tens/units group
    ("2016" -> ``two thousand and sixteen``). Runs with leading zeros, and
    runs too long for the supported scale names, are read digit by digit
    ("007" -> ``zero zero seven``).
    """
    if not digits or _DIGIT_RUN_RE.fullmatch(digits) is None:
        raise ValueError(f"not a digit run: {digits!r}")
    if len(digits) > 1 and digits[0] == "0":
        return [_ONES[int(d)] for d in digits]
    if len(digits) > _MAX_VERBAL_DIGITS:
        return [_ONES[int(d)] for d in digits]
    return _cardinal(int(digits))


def _strip_non_alnum(token: str) -> str:
    return _NON_ALNUM_RE.sub("", token)


def normalize(post: Post, stopwords: StopwordList) -> NormalizedPost:
    """Normalize a post's text into lowercase ``[a-z]+`` tokens.

    Deterministic for a given (text, stopword list); an empty result is
    allowed and flagged via ``NormalizedPost.dropped``.
    """
    tokens = post.text.lower().split()
    tokens = [t for t in tokens if not t.startswith(_URL_PREFIXES)]
    tokens = [t for t in tokens if _strip_non_alnum(t) not in stopwords.words]
    text = " ".join(tokens)
    text = _DOT_BETWEEN_RE.sub(" dot ", text)
    text = _DIGIT_RUN_RE.sub(lambda m: " " + " ".join(verbalize_number(m.group())) + " ", text)
    text = text.replace("-", " hyphen ")
    text = _SWEEP_RE.sub("", text)
    return NormalizedPost(post_id=post.id, tokens=tuple(text.split()), original_text=post.text)


def parse_timestamp(value: str) -> datetime:
    """Parse an RFC 3339 timestamp into a UTC-aware datetime."""
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    stamp = datetime.fromisoformat(text)
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    return stamp.astimezone(timezone.utc)


def format_timestamp(stamp: datetime) -> str:
    """Render a datetime as RFC 3339 UTC with second precision."""
    return stamp.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_post_json(obj: dict) -> Post:
    """Build a Post from one decoded JSON-lines object."""
    try:
        return Post(
            id=str(obj["id"]),
            author=str(obj.get("author", "")),
            timestamp=parse_timestamp(obj["timestamp"]),
            text=str(obj.get("text", "")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed post object: {exc}") from exc


def read_posts_jsonl(path: str | Path) -> Iterator[Post]:
    """Yield posts from a JSON-lines file, raising on the first bad line."""
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield parse_post_json(json.loads(line))
            except (json.JSONDecodeError, ValueError) as exc:
                raise ValueError(f"{path}:{line_no}: {exc}") from exc


def post_to_json(post: Post) -> dict:
    return {
        "id": post.id,
        "author": post.author,
        "timestamp": format_timestamp(post.timestamp),
        "text": post.text,
    }


def write_posts_jsonl(posts: Iterable[Post], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for post in posts:
            handle.write(json.dumps(post_to_json(post), sort_keys=True) + "\n")
