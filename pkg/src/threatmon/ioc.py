"""MISP-compatible indicator-of-compromise events from threat clusters.

Each cluster becomes one MISP core-format event with exactly two objects:
an ``osint`` object carrying the exemplar message and its links, and a
``cluster-analysis`` object carrying the remaining member texts plus cluster
bookkeeping. Events are tagged by matching taxonomy regexes against the raw
exemplar text (raw, so "CVE-2016-..." and "0day" still match) and always
carry the OSINT tag marking automatic generation.

All UUIDs are name-based (UUIDv5) over the event content, so regenerating
the same cluster yields byte-identical JSON.
"""

from __future__ import annotations

import json
import re
import uuid
from dataclasses import dataclass, field
from datetime import date, datetime
from importlib import resources
from pathlib import Path
from typing import Sequence

import jsonschema

from .cluster import Cluster
from .corpus import format_timestamp, parse_timestamp

OSINT_TAG = 'osint:source-type="microblog-post"'

_NAMESPACE = uuid.UUID("1ff06e4c-9a0a-5d3e-8c9d-1b8f5a2f9b77")
_URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)

OSINT_OBJECT = "osint"
CLUSTER_OBJECT = "cluster-analysis"
_OBJECT_DESCRIPTIONS = {
    OSINT_OBJECT: "Exemplar post representing one monitored threat",
    CLUSTER_OBJECT: "Aggregated posts and lifetime of the threat cluster",
}


@dataclass(frozen=True)
class TaxonomyRule:
    """One tag plus the case-insensitive pattern that triggers it."""

    tag: str
    pattern: str
    regex: re.Pattern = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.tag:
            raise ValueError("taxonomy tag must be non-empty")
        object.__setattr__(self, "regex", re.compile(self.pattern, re.IGNORECASE))


def load_taxonomy_rules(path: str | Path) -> list[TaxonomyRule]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return [TaxonomyRule(tag=item["tag"], pattern=item["pattern"]) for item in data]


def default_taxonomy_rules() -> list[TaxonomyRule]:
    ref = resources.files("threatmon.data").joinpath("taxonomy_rules.json")
    with resources.as_file(ref) as path:
        return load_taxonomy_rules(path)


def classify_tags(exemplar_text: str, rules: Sequence[TaxonomyRule]) -> frozenset[str]:
    """OSINT tag plus one tag per rule matching the raw exemplar text."""
    if not rules:
        raise ValueError("taxonomy rule set must be non-empty")
    tags = {OSINT_TAG}
    tags.update(rule.tag for rule in rules if rule.regex.search(exemplar_text))
    return frozenset(tags)


def extract_links(text: str) -> tuple[str, ...]:
    return tuple(_URL_RE.findall(text))


@dataclass(frozen=True)
class MispEvent:
    """IoC for one cluster: exemplar object + cluster-analysis object + tags."""

    cluster_id: int
    info: str
    event_date: date
    tags: frozenset[str]
    links: tuple[str, ...]
    member_texts: tuple[str, ...]
    member_count: int
    first_seen: datetime
    last_seen: datetime

    def __post_init__(self) -> None:
        if OSINT_TAG not in self.tags:
            raise ValueError("every event must carry the OSINT tag")
        if self.member_count != len(self.member_texts) + 1:
            raise ValueError("member_count must equal exemplar + other member texts")


def generate_ioc(cluster: Cluster, rules: Sequence[TaxonomyRule]) -> MispEvent:
    """Assemble the MISP event for a cluster."""
    if not cluster.members:
        raise ValueError("cannot generate an IoC for an empty cluster")
    if cluster.exemplar_id not in cluster.members:
        raise ValueError(f"cluster {cluster.id} has no valid exemplar")
    exemplar = cluster.exemplar
    others = sorted(
        (p for p in cluster.members.values() if p.post_id != cluster.exemplar_id),
        key=lambda p: (p.timestamp, p.post_id),
    )
    stamps = [p.timestamp for p in cluster.members.values()]
    first_seen, last_seen = min(stamps), max(stamps)
    return MispEvent(
        cluster_id=cluster.id,
        info=exemplar.original_text,
        event_date=first_seen.date(),
        tags=classify_tags(exemplar.original_text, rules),
        links=extract_links(exemplar.original_text),
        member_texts=tuple(p.original_text for p in others),
        member_count=len(cluster.members),
        first_seen=first_seen,
        last_seen=last_seen,
    )


def _uuid_for(*parts: str) -> str:
    return str(uuid.uuid5(_NAMESPACE, "\x1f".join(parts)))


def _attribute(event_uid: str, obj: str, relation: str, a_type: str, value: str, n: int) -> dict:
    return {
        "uuid": _uuid_for(event_uid, obj, relation, str(n)),
        "type": a_type,
        "category": "External analysis",
        "object_relation": relation,
        "value": value,
    }


def _object(event_uid: str, name: str, attributes: list[dict]) -> dict:
    return {
        "name": name,
        "uuid": _uuid_for(event_uid, "object", name),
        "meta-category": "misc",
        "description": _OBJECT_DESCRIPTIONS[name],
        "template_uuid": _uuid_for("template", name),
        "template_version": "1",
        "Attribute": attributes,
    }


def to_misp_json(event: MispEvent) -> dict:
    """Render the event as a MISP core-format dict."""
    event_uid = _uuid_for(
        "event",
        str(event.cluster_id),
        event.info,
        format_timestamp(event.first_seen),
        format_timestamp(event.last_seen),
        *event.member_texts,
    )
    osint_attrs = [_attribute(event_uid, OSINT_OBJECT, "message", "text", event.info, 0)]
    osint_attrs += [
        _attribute(event_uid, OSINT_OBJECT, "link", "link", link, i)
        for i, link in enumerate(event.links)
    ]
    cluster_attrs = [
        _attribute(event_uid, CLUSTER_OBJECT, "tweet", "text", text, i)
        for i, text in enumerate(event.member_texts)
    ]
    cluster_attrs += [
        _attribute(
            event_uid, CLUSTER_OBJECT, "member-count", "counter", str(event.member_count), 0
        ),
        _attribute(
            event_uid, CLUSTER_OBJECT, "first-seen", "datetime",
            format_timestamp(event.first_seen), 0,
        ),
        _attribute(
            event_uid, CLUSTER_OBJECT, "last-seen", "datetime",
            format_timestamp(event.last_seen), 0,
        ),
        _attribute(
            event_uid, CLUSTER_OBJECT, "cluster-id", "text", str(event.cluster_id), 0
        ),
    ]
    return {
        "Event": {
            "uuid": event_uid,
            "info": event.info,
            "date": event.event_date.isoformat(),
            "analysis": "2",
            "threat_level_id": "4",
            "Tag": [{"name": tag} for tag in sorted(event.tags)],
            "Object": [
                _object(event_uid, OSINT_OBJECT, osint_attrs),
                _object(event_uid, CLUSTER_OBJECT, cluster_attrs),
            ],
        }
    }


def from_misp_json(data: dict) -> MispEvent:
    """Parse a MISP core-format dict back into a MispEvent."""
    body = data["Event"]
    objects = {obj["name"]: obj for obj in body["Object"]}
    osint = objects[OSINT_OBJECT]["Attribute"]
    analysis = objects[CLUSTER_OBJECT]["Attribute"]

    def values(attrs: list[dict], relation: str) -> list[str]:
        return [a["value"] for a in attrs if a["object_relation"] == relation]

    return MispEvent(
        cluster_id=int(values(analysis, "cluster-id")[0]),
        info=body["info"],
        event_date=date.fromisoformat(body["date"]),
        tags=frozenset(tag["name"] for tag in body["Tag"]),
        links=tuple(values(osint, "link")),
        member_texts=tuple(values(analysis, "tweet")),
        member_count=int(values(analysis, "member-count")[0]),
        first_seen=parse_timestamp(values(analysis, "first-seen")[0]),
        last_seen=parse_timestamp(values(analysis, "last-seen")[0]),
    )


def serialize_event(event: MispEvent) -> str:
    return json.dumps(to_misp_json(event), sort_keys=True, indent=2) + "\n"


def parse_event(text: str) -> MispEvent:
    return from_misp_json(json.loads(text))


def load_event_schema() -> dict:
    ref = resources.files("threatmon.data").joinpath("misp_event.schema.json")
    return json.loads(ref.read_text(encoding="utf-8"))


def validate_event_json(data: dict, schema: dict | None = None) -> None:
    """Raise jsonschema.ValidationError if the event violates the pinned schema."""
    jsonschema.validate(instance=data, schema=schema or load_event_schema())
