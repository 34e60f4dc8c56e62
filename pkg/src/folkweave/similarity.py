"""Pairwise similarity between sapling nodes.

Anything exposing ``.leaves`` (items with ``.stem`` and ``.tags``) can be
compared structurally: saplings, merged senses, or a view over a tree
node's children.

Comparisons are only defined between nodes sharing a stem, so the name
part of local similarity is constant and only tag overlap is scored.
"""

from __future__ import annotations

from typing import Protocol, Sequence

from folkweave.model import GateViolation, Params, StructSimBreakdown, TagStats, sum_all


class _Leaf(Protocol):
    stem: str
    tags: TagStats


class HasLeaves(Protocol):
    leaves: Sequence[_Leaf]


def tag_sim(a: TagStats, b: TagStats, p: Params) -> float:
    if not a or not b:
        return 0.0
    n = len(a.top_k_set(p.k_top_tags) & b.top_k_set(p.k_top_tags))
    if n >= p.j_common_tags:
        return 1.0
    return n / p.j_common_tags


def local_sim(a, b, p: Params) -> float:
    """Local similarity of two same-stem nodes; reduces to ``tag_sim``."""
    if a.stem != b.stem:
        raise GateViolation(f"local_sim on different stems {a.stem!r} / {b.stem!r}")
    return tag_sim(a.tags, b.tags, p)


def struct_sim_rr(a: HasLeaves, b: HasLeaves, p: Params) -> StructSimBreakdown:
    a_stems = {leaf.stem for leaf in a.leaves}
    b_stems = {leaf.stem for leaf in b.leaves}
    z = min(len(a_stems), len(b_stems))
    if z == 0:
        return StructSimBreakdown(0.0, 0, 0.0, 0.0)
    common = a_stems & b_stems
    cl = len(common) / z
    if cl >= 1.0:
        return StructSimBreakdown(1.0, z, 0.0, 1.0)
    rest_a = sum_all(leaf.tags for leaf in a.leaves if leaf.stem not in common)
    rest_b = sum_all(leaf.tags for leaf in b.leaves if leaf.stem not in common)
    tc = tag_sim(rest_a, rest_b, p)
    return StructSimBreakdown(cl, z, tc, cl + (1.0 - cl) * tc)


def struct_sim_lr(leaf: _Leaf, parent: HasLeaves, sense, p: Params) -> float | None:
    """Leaf-to-root structural similarity.

    ``parent`` holds the leaf and its siblings. Returns ``None`` when no
    sibling of the leaf appears among the sense's leaves, in which case the
    structural term is dropped from ``node_sim``.
    """
    if leaf.stem != sense.stem:
        raise GateViolation(f"struct_sim_lr on different stems {leaf.stem!r} / {sense.stem!r}")
    sense_stems = {l.stem for l in sense.leaves}
    if not any(s.stem != leaf.stem and s.stem in sense_stems for s in parent.leaves):
        return None
    return struct_sim_rr(parent, sense, p).total


def node_sim(local: float, structural: float | None, alpha: float) -> float:
    if structural is None:
        return local
    return (1.0 - alpha) * local + alpha * structural


def tag_sim_syn(x: TagStats, y: TagStats, p: Params) -> float:
    tx = x.top_k_set(p.k_top_tags)
    ty = y.top_k_set(p.k_top_tags)
    denom = min(len(tx), len(ty))
    if denom == 0:
        return 0.0
    return len(tx & ty) / denom


def struct_sim_syn(x: HasLeaves, y: HasLeaves) -> float:
    xs = {leaf.stem for leaf in x.leaves}
    ys = {leaf.stem for leaf in y.leaves}
    z = min(len(xs), len(ys))
    return len(xs & ys) / z if z else 0.0


def sense_sim_rr(a, b, p: Params) -> float:
    """Root-to-root node similarity used when clustering senses."""
    return node_sim(tag_sim(a.root_tags, b.root_tags, p), struct_sim_rr(a, b, p).total, p.alpha_rr)
