"""Corpus ingestion: name tokenization, stemming and sapling construction.

Input is JSON Lines, one collection record per line::

    {"user": "u1", "collection": "Animals",
     "sets": [{"name": "Cats and Dogs", "tags": {"cat": 3, "pet": 1}}],
     "children": [ ...nested records, "user" may be omitted... ]}

Multi-level hierarchies are decomposed into one sapling per collection.
"""

from __future__ import annotations

import json
import logging
import re
import string
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable

from nltk.stem.porter import PorterStemmer

from folkweave.model import FolkweaveError, Sapling, SaplingNode, TagStats, sum_all

logger = logging.getLogger(__name__)

BRIDGING_WORDS = frozenset({"at", "of", "in", "and", "or"})
SPECIAL_CHARS = "&<>:/"
DEFAULT_STOPLIST = frozenset({"me", "myself", "my", "misc", "other", "stuff", "untitled"})

_SPECIAL_RE = re.compile("[" + re.escape(SPECIAL_CHARS) + "]")
_EDGE_PUNCT = string.punctuation


class MalformedRecord(FolkweaveError):
    pass


@dataclass
class RawSet:
    name: str
    tags: dict[str, int] = field(default_factory=dict)


@dataclass
class RawRecord:
    user: str
    collection_name: str
    sets: list[RawSet] = field(default_factory=list)
    child_collections: list[RawRecord] = field(default_factory=list)

    def aggregate_tags(self) -> TagStats:
        """All tags below this collection, summed over its sets and sub-collections."""
        parts = [TagStats(s.tags) for s in self.sets]
        parts.extend(child.aggregate_tags() for child in self.child_collections)
        return sum_all(parts)

    def to_json(self) -> dict:
        out: dict = {"user": self.user, "collection": self.collection_name}
        out["sets"] = [{"name": s.name, "tags": dict(sorted(s.tags.items()))} for s in self.sets]
        if self.child_collections:
            out["children"] = [c.to_json() for c in self.child_collections]
        return out


def load_stoplist(path: str | Path) -> frozenset[str]:
    words = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip().lower()
        if line:
            words.add(line)
    return frozenset(words)


def tokenize_name(name: str, stoplist: Iterable[str] = DEFAULT_STOPLIST) -> list[str]:
    """Split a collection/set name into concept terms.

    Splits on bridging words (whole tokens only) and on ``& < > : /``.
    Whitespace alone never splits, so "South Africa" stays one term.
    """
    stop = stoplist if isinstance(stoplist, (set, frozenset)) else frozenset(stoplist)
    terms: list[str] = []
    for segment in _SPECIAL_RE.split(name.lower()):
        run: list[str] = []
        for word in segment.split():
            word = word.strip(_EDGE_PUNCT)
            if not word:
                continue
            if word in BRIDGING_WORDS:
                _flush(run, terms)
                run = []
            else:
                run.append(word)
        _flush(run, terms)
    return [t for t in terms if t not in stop]


def _flush(run: list[str], terms: list[str]) -> None:
    if not run:
        return
    term = " ".join(run)
    if any(ch.isalnum() for ch in term):
        terms.append(term)


_stemmer = PorterStemmer(mode=PorterStemmer.ORIGINAL_ALGORITHM)


@lru_cache(maxsize=65536)
def stem_term(term: str) -> str:
    """Porter-stem each whitespace-separated word of a lowercase term."""
    return " ".join(_stemmer.stem(w) for w in term.split())


def normalize_seed(seed: str) -> str:
    terms = tokenize_name(seed, stoplist=())
    return stem_term(terms[0] if terms else seed.lower().strip())


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def _parse_tags(raw) -> dict[str, int]:
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise MalformedRecord("tags must be an object")
    tags: dict[str, int] = {}
    for tag, count in raw.items():
        if not isinstance(count, int) or isinstance(count, bool):
            raise MalformedRecord(f"tag count for {tag!r} is not an integer")
        tag = str(tag).strip().lower()
        if tag and count >= 1:
            tags[tag] = tags.get(tag, 0) + count
    return tags


def parse_record(obj, inherited_user: str | None = None) -> RawRecord:
    if not isinstance(obj, dict):
        raise MalformedRecord("record must be a JSON object")
    user = obj.get("user", inherited_user)
    name = obj.get("collection")
    if not isinstance(user, str) or not user.strip():
        raise MalformedRecord("missing user")
    if not isinstance(name, str) or not name.strip():
        raise MalformedRecord("missing collection")
    sets = obj.get("sets", [])
    children = obj.get("children", [])
    if not isinstance(sets, list) or not isinstance(children, list):
        raise MalformedRecord("sets/children must be lists")
    raw_sets = []
    for s in sets:
        if not isinstance(s, dict) or not isinstance(s.get("name"), str):
            raise MalformedRecord("set without a name")
        raw_sets.append(RawSet(s["name"], _parse_tags(s.get("tags"))))
    kids = [parse_record(c, user) for c in children]
    return RawRecord(user, name, raw_sets, kids)


def load_records(path: str | Path) -> tuple[list[RawRecord], int]:
    """Read a JSONL corpus. Returns the parsed records and the number of skipped lines."""
    records, skipped = [], 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                records.append(parse_record(json.loads(line)))
            except (json.JSONDecodeError, MalformedRecord) as exc:
                skipped += 1
                logger.warning("skipping line %d: %s", lineno, exc)
    return records, skipped


def write_records(records: Iterable[RawRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json(), sort_keys=True, ensure_ascii=False))
            fh.write("\n")


# ---------------------------------------------------------------------------
# Sapling construction
# ---------------------------------------------------------------------------


@dataclass
class IngestReport:
    saplings: int = 0
    composite_roots: int = 0
    empty_roots: int = 0
    leafless: int = 0


def build_saplings(
    records: Iterable[RawRecord],
    stoplist: Iterable[str] = DEFAULT_STOPLIST,
    report: IngestReport | None = None,
) -> list[Sapling]:
    stop = frozenset(stoplist)
    report = report if report is not None else IngestReport()
    counters: dict[str, int] = {}
    out: list[tuple[str, int, Sapling]] = []

    def visit(rec: RawRecord) -> None:
        for child in rec.child_collections:
            visit(child)
        root_terms = tokenize_name(rec.collection_name, stop)
        if len(root_terms) > 1:
            report.composite_roots += 1
            return
        if not root_terms:
            report.empty_roots += 1
            return
        root_stem = stem_term(root_terms[0])

        leaves: dict[str, SaplingNode] = {}
        parts = [(s.name, TagStats(s.tags)) for s in rec.sets]
        parts.extend((c.collection_name, c.aggregate_tags()) for c in rec.child_collections)
        for name, tags in parts:
            for term in tokenize_name(name, stop):
                stem = stem_term(term)
                if stem == root_stem:
                    continue
                node = SaplingNode(term, stem, tags, frozenset({rec.user}))
                leaves[stem] = leaves[stem].merged_with(node) if stem in leaves else node
        if not leaves:
            report.leafless += 1
            return
        ordered = tuple(leaves.values())
        n = counters.get(rec.user, 0)
        counters[rec.user] = n + 1
        root = SaplingNode(root_terms[0], root_stem, sum_all(l.tags for l in ordered), frozenset({rec.user}))
        out.append((rec.user, n, Sapling(f"{rec.user}#{n}", rec.user, root, ordered)))

    for rec in records:
        visit(rec)
    out.sort(key=lambda item: (item[0], item[1]))
    report.saplings = len(out)
    return [s for _, _, s in out]
