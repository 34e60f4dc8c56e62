"""Versioned JSON store for saplings between ``ingest`` and later stages.

Layout::

    {
      "format": "folkweave-saplings",
      "version": 1,
      "schema": "<sha256 of SCHEMA>",
      "saplings": [
        {"id": str, "user": str,
         "root": {"name": str, "stem": str},
         "leaves": [{"name": str, "stem": str, "tags": {tag: count}}]}
      ]
    }

Root tags and contributing users are not stored; they are rebuilt from the
leaves and the sapling's user on load. A file written under another
version or schema is refused.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Iterable

from folkweave.model import FolkweaveError, Sapling, SaplingNode, TagStats, sum_all

FORMAT = "folkweave-saplings"
VERSION = 1
SCHEMA = "id:str;user:str;root{name:str,stem:str};leaves[{name:str,stem:str,tags{str:int}}]"
SCHEMA_HASH = hashlib.sha256(SCHEMA.encode("utf-8")).hexdigest()


class StoreError(FolkweaveError):
    pass


def _encode(s: Sapling) -> dict:
    return {
        "id": s.id,
        "user": s.user,
        "root": {"name": s.root.raw_name, "stem": s.root.stem},
        "leaves": [{"name": l.raw_name, "stem": l.stem, "tags": l.tags.as_dict()} for l in s.leaves],
    }


def _decode(obj: dict) -> Sapling:
    users = frozenset({obj["user"]})
    leaves = tuple(SaplingNode(l["name"], l["stem"], TagStats(l["tags"]), users) for l in obj["leaves"])
    root = SaplingNode(obj["root"]["name"], obj["root"]["stem"], sum_all(l.tags for l in leaves), users)
    return Sapling(obj["id"], obj["user"], root, leaves)


def dumps(saplings: Iterable[Sapling]) -> str:
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "schema": SCHEMA_HASH,
        "saplings": [_encode(s) for s in saplings],
    }
    return json.dumps(doc, sort_keys=True, ensure_ascii=False) + "\n"


def loads(text: str) -> list[Sapling]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise StoreError(f"sapling store is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise StoreError("not a folkweave sapling store")
    if doc.get("version") != VERSION or doc.get("schema") != SCHEMA_HASH:
        raise StoreError(
            f"sapling store version {doc.get('version')!r} (schema {str(doc.get('schema'))[:12]}) "
            f"does not match this build (version {VERSION}, schema {SCHEMA_HASH[:12]}); re-run ingest"
        )
    try:
        return [_decode(obj) for obj in doc["saplings"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise StoreError(f"corrupt sapling entry: {exc}") from None


def save(saplings: Iterable[Sapling], path: str | Path) -> None:
    Path(path).write_text(dumps(saplings), encoding="utf-8")


def load(path: str | Path) -> list[Sapling]:
    return loads(Path(path).read_text(encoding="utf-8"))
