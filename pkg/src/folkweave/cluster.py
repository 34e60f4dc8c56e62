"""Horizontal aggregation: grouping same-stem saplings into senses.

Saplings are ordered by a cheap key built from integer codes of their
most frequent tags, then scanned with a bounded queue of recently active
senses, so the expensive similarity is only evaluated against neighbours
in sort order. Passes repeat until the number of senses stops changing.
"""

from __future__ import annotations

import logging
import os
from collections import Counter, defaultdict
from concurrent.futures import ProcessPoolExecutor
from typing import Iterable, Sequence

from folkweave.model import GateViolation, MergedSense, Params, Sapling, SaplingNode
from folkweave.similarity import sense_sim_rr

logger = logging.getLogger(__name__)

BLOCK_KEY_WIDTH = 5

BlockKey = tuple[int, ...]


def build_tag_codebook(corpus: Iterable[Sapling]) -> dict[str, int]:
    """Integer id per tag by descending corpus frequency; ties go lexicographic."""
    freq: Counter[str] = Counter()
    for sapling in corpus:
        for tag, f in sapling.root.tags.items():
            freq[tag] += f
    ranked = sorted(freq.items(), key=lambda kv: (-kv[1], kv[0]))
    return {tag: i for i, (tag, _) in enumerate(ranked)}


def block_key(node, codebook: dict[str, int], width: int = BLOCK_KEY_WIDTH) -> BlockKey:
    unknown = len(codebook)
    return tuple(sorted(codebook.get(t, unknown) for t in node.tags.top_k(width)))


def merge_by_root(a: MergedSense, b: MergedSense) -> MergedSense:
    if a.stem != b.stem:
        raise GateViolation(f"merge_by_root on different stems {a.stem!r} / {b.stem!r}")
    leaves: dict[str, SaplingNode] = {leaf.stem: leaf for leaf in a.leaves}
    for leaf in b.leaves:
        leaves[leaf.stem] = leaves[leaf.stem].merged_with(leaf) if leaf.stem in leaves else leaf
    return MergedSense(
        stem=a.stem,
        members=tuple(sorted(a.members + b.members)),
        root_tags=a.root_tags + b.root_tags,
        leaves=tuple(leaves[s] for s in sorted(leaves)),
        users=a.users | b.users,
    )


def merge_all(senses: Sequence[MergedSense]) -> MergedSense:
    out = senses[0]
    for s in senses[1:]:
        out = merge_by_root(out, s)
    return out


class _Slot:
    """A sense being built during one scan.

    ``view`` carries merged tags only, which is all the similarity reads.
    Members and user sets are unioned once in ``finish`` rather than on
    every merge, so absorbing into a large sense costs O(tags), not O(users).
    """

    __slots__ = ("parts", "view", "size", "first")

    def __init__(self, sense: MergedSense):
        self.parts = [sense]
        self.view = sense
        self.size = len(sense.members)
        self.first = sense.id

    def absorb(self, sense: MergedSense) -> None:
        leaves: dict[str, SaplingNode] = {leaf.stem: leaf for leaf in self.view.leaves}
        for leaf in sense.leaves:
            old = leaves.get(leaf.stem)
            leaves[leaf.stem] = leaf if old is None else SaplingNode(old.raw_name, old.stem, old.tags + leaf.tags)
        self.view = MergedSense(
            stem=self.view.stem,
            members=(),
            root_tags=self.view.root_tags + sense.root_tags,
            leaves=tuple(leaves[s] for s in sorted(leaves)),
            users=frozenset(),
        )
        self.parts.append(sense)
        self.size += len(sense.members)
        self.first = min(self.first, sense.id)

    def rank(self, sim: float) -> tuple:
        # higher similarity, then more members, then smallest id
        return (-sim, -self.size, self.first)

    def finish(self) -> MergedSense:
        if len(self.parts) == 1:
            return self.parts[0]
        leaf_users: dict[str, list[frozenset[str]]] = defaultdict(list)
        for part in self.parts:
            for leaf in part.leaves:
                leaf_users[leaf.stem].append(leaf.contributing_users)
        return MergedSense(
            stem=self.view.stem,
            members=tuple(sorted(m for part in self.parts for m in part.members)),
            root_tags=self.view.root_tags,
            leaves=tuple(
                SaplingNode(l.raw_name, l.stem, l.tags, frozenset().union(*leaf_users[l.stem]))
                for l in self.view.leaves
            ),
            users=frozenset().union(*(part.users for part in self.parts)),
        )


def _scan(items: list[MergedSense], p: Params, codebook: dict[str, int]) -> list[MergedSense]:
    items = sorted(items, key=lambda s: (block_key(s, codebook), s.id))
    slots: list[_Slot] = []
    queue: list[_Slot] = []  # most recently touched first
    for item in items:
        best = None
        for slot in queue:
            sim = sense_sim_rr(item, slot.view, p)
            if sim > p.tau:
                rank = slot.rank(sim)
                if best is None or rank < best[0]:
                    best = (rank, slot)
        if best is not None:
            slot = best[1]
            slot.absorb(item)
            queue.remove(slot)
        else:
            slot = _Slot(item)
            slots.append(slot)
        queue.insert(0, slot)
        del queue[p.queue_size:]
    return sorted((slot.finish() for slot in slots), key=lambda s: s.id)


def cluster_senses(
    saplings: Sequence[Sapling | MergedSense],
    p: Params,
    codebook: dict[str, int],
    stats: dict | None = None,
) -> list[MergedSense]:
    """Cluster same-stem saplings into senses, sorted by sense id."""
    senses = [s if isinstance(s, MergedSense) else MergedSense.from_sapling(s) for s in saplings]
    if not senses:
        return []
    stems = {s.stem for s in senses}
    if len(stems) != 1:
        raise GateViolation(f"cluster_senses expects one stem, got {sorted(stems)}")
    passes = 0
    while passes < p.max_cluster_iters:
        passes += 1
        merged = _scan(senses, p, codebook)
        changed = len(merged) != len(senses)
        senses = merged
        if not changed:
            break
    if stats is not None:
        stats["passes"] = passes
        stats["senses"] = len(senses)
    return senses


def _cluster_job(args):
    stem, saplings, p, codebook = args
    stats: dict = {}
    return stem, cluster_senses(saplings, p, codebook, stats), stats


class SenseIndex:
    """Saplings grouped by root stem, clustered into senses on first use."""

    def __init__(self, saplings: Iterable[Sapling], p: Params, codebook: dict[str, int] | None = None):
        self.params = p
        self.by_stem: dict[str, list[Sapling]] = defaultdict(list)
        for s in saplings:
            self.by_stem[s.stem].append(s)
        all_saplings = [s for group in self.by_stem.values() for s in group]
        self.codebook = codebook if codebook is not None else build_tag_codebook(all_saplings)
        self._senses: dict[str, list[MergedSense]] = {}
        self.passes: dict[str, int] = {}

    def __contains__(self, stem: object) -> bool:
        return stem in self.by_stem

    def stems(self) -> list[str]:
        return sorted(self.by_stem)

    def senses(self, stem: str) -> list[MergedSense]:
        if stem not in self._senses:
            stats: dict = {}
            self._senses[stem] = cluster_senses(self.by_stem.get(stem, []), self.params, self.codebook, stats)
            self.passes[stem] = stats.get("passes", 0)
        return self._senses[stem]

    def cluster_all(self, threads: int | None = None) -> None:
        """Cluster every stem up front, optionally in worker processes."""
        if threads is None:
            threads = int(os.environ.get("FOLKWEAVE_THREADS", "1") or 1)
        todo = [s for s in self.stems() if s not in self._senses]
        if threads <= 1 or len(todo) < 2:
            for stem in todo:
                self.senses(stem)
            return
        jobs = [(stem, self.by_stem[stem], self.params, self.codebook) for stem in todo]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for stem, senses, stats in pool.map(_cluster_job, jobs, chunksize=8):
                self._senses[stem] = senses
                self.passes[stem] = stats.get("passes", 0)

    def sense_count(self) -> int:
        return sum(len(v) for v in self._senses.values())
