"""Vertical aggregation: growing a folksonomy tree from a seed term.

The tree is expanded breadth-first. For all unexpanded children of one
parent, candidate senses are retrieved first; only then are mutual
shortcuts, loops (and synonyms) and plain shortcuts resolved, and the
surviving senses attached.
"""

from __future__ import annotations

import logging
import math
import time
from collections import defaultdict
from dataclasses import dataclass, field

from folkweave.cluster import SenseIndex, merge_all
from folkweave.ingest import normalize_seed
from folkweave.model import (
    FolksonomyTree,
    FolkweaveError,
    MergedSense,
    Params,
    TreeNode,
)
from folkweave.similarity import (
    node_sim,
    struct_sim_lr,
    struct_sim_rr,
    struct_sim_syn,
    tag_sim,
    tag_sim_syn,
)

logger = logging.getLogger(__name__)

ATTACH, SKIP, DEFER = "attach", "skip", "defer"


class SeedNotFound(FolkweaveError):
    pass


@dataclass
class AttachDecision:
    leaf: int
    stem: str
    depth: int
    chosen_senses: list[str]
    similarity: float
    action: str
    reason: str = ""


@dataclass
class GrowStats:
    pruned_leaves: int = 0
    synonyms: int = 0
    loops_cut: int = 0
    shortcuts: int = 0
    mutual_shortcuts: int = 0
    # seconds spent building each depth, frontier bookkeeping included
    level_seconds: dict[int, float] = field(default_factory=lambda: defaultdict(float))


class _LeafSet:
    def __init__(self, leaves):
        self.leaves = leaves


def _children_view(tree: FolksonomyTree, node_id: int) -> _LeafSet:
    # a tree node's current children play the role of sapling leaves
    return _LeafSet(tree.children(node_id))


def prune_noise(sense: MergedSense, noise_fraction: float = 0.01) -> MergedSense:
    """Drop leaves contributed by fewer than max(2, ceil(fraction * users)) users."""
    n_users = len(sense.users)
    if n_users < 2:
        return sense
    # round first: 0.01 * 300 is 3.0000000000000004 in binary floating point
    threshold = max(2, math.ceil(round(noise_fraction * n_users, 9)))
    weak = [leaf.stem for leaf in sense.leaves if len(leaf.contributing_users) < threshold]
    return sense.without_leaves(weak)


def _parent_similarity(tree: FolksonomyTree, parent_id: int, sense: MergedSense, p: Params) -> float:
    parent = tree.node(parent_id)
    local = tag_sim(parent.tags, sense.root_tags, p)
    structural = struct_sim_rr(_children_view(tree, parent_id), sense, p).total
    return node_sim(local, structural, p.alpha_rr)


def resolve_mutual_shortcuts(
    tree: FolksonomyTree,
    parent_id: int,
    candidates: dict[int, MergedSense],
    p: Params,
) -> tuple[dict[int, MergedSense], list[int]]:
    """Keep, of every pair of siblings whose senses contain each other, the one closer to the parent.

    Pairs are settled greedily from the most similar sibling down, which
    also covers cycles of three or more. Losing leaves are removed from
    the tree. Returns the surviving candidates and the removed node ids.
    """
    if len(candidates) < 2:
        return dict(candidates), []
    score = {nid: _parent_similarity(tree, parent_id, s, p) for nid, s in candidates.items()}
    stems = {nid: tree.node(nid).stem for nid in candidates}
    leafsets = {nid: s.leaf_stems() for nid, s in candidates.items()}
    order = sorted(candidates, key=lambda nid: (-score[nid], stems[nid]))
    alive = set(candidates)
    dropped: list[int] = []
    for x in order:
        if x not in alive:
            continue
        for y in order:
            if y == x or y not in alive:
                continue
            if stems[y] in leafsets[x] and stems[x] in leafsets[y]:
                alive.discard(y)
                dropped.append(y)
    for nid in dropped:
        tree.remove_subtree(nid)
    return {nid: s for nid, s in candidates.items() if nid in alive}, dropped


def resolve_shortcut(tree: FolksonomyTree, node_id: int, sense: MergedSense) -> list[TreeNode]:
    """Remove siblings of ``node_id`` that the attaching sense will re-create one level deeper.

    Returns the removed sibling nodes.
    """
    node = tree.node(node_id)
    claimed = sense.leaf_stems()
    doomed = [c for c in tree.children(node.parent) if c.id != node_id and c.stem in claimed]
    for c in doomed:
        tree.remove_subtree(c.id)
    return doomed


def synonym_similarity(
    tree: FolksonomyTree,
    path_node: TreeNode,
    leaf_id: int,
    sense: MergedSense,
    p: Params,
) -> float:
    """Stricter root-to-root similarity between a sense and a node on the leaf's path.

    The stems that form the loop itself are left out of the leaf overlap.
    """
    on_path = tree.path(leaf_id)
    path_ids = {n.id for n in on_path}
    path_names = set().union(*(n.names() for n in on_path))
    node_side = _LeafSet([c for c in tree.children(path_node.id) if c.id not in path_ids])
    sense_side = _LeafSet([l for l in sense.leaves if l.stem not in path_names])
    local = tag_sim_syn(sense.root_tags, path_node.tags, p)
    return node_sim(local, struct_sim_syn(sense_side, node_side), p.alpha_syn)


def handle_loop(
    tree: FolksonomyTree,
    leaf_id: int,
    sense: MergedSense,
    p: Params,
    removed: set[tuple[int, str]] | None = None,
) -> tuple[MergedSense | None, TreeNode | None]:
    """Deal with sense leaves that repeat a name on the root path of ``leaf_id``.

    If the sense is a synonym of one of the matched path nodes, the leaf is
    folded into that node as an alias and ``(None, node)`` is returned.
    Otherwise the looping leaves are cut and the trimmed sense returned.
    """
    path = tree.path(leaf_id)
    leaf = path[-1]
    first_owner: dict[str, TreeNode] = {}
    for node in path:
        for name in node.names():
            first_owner.setdefault(name, node)
    looping = [l.stem for l in sense.leaves if l.stem in first_owner]
    if not looping:
        return sense, None
    matched = {}
    for stem in looping:
        owner = first_owner[stem]
        if owner.id != leaf.id:
            matched.setdefault(owner.id, owner)
    best: tuple[float, TreeNode] | None = None
    for owner in sorted(matched.values(), key=lambda n: n.depth):
        score = synonym_similarity(tree, owner, leaf_id, sense, p)
        if score >= p.tau_syn and (best is None or score > best[0]):
            best = (score, owner)
    if best is None:
        return sense.without_leaves(looping), None
    owner = best[1]
    _merge_synonym(tree, owner, leaf, sense, set(looping), removed if removed is not None else set())
    return None, owner


def _merge_synonym(tree, owner: TreeNode, leaf: TreeNode, sense: MergedSense, looping, removed) -> None:
    owner.aliases.add(sense.stem)
    owner.aliases |= leaf.aliases
    owner.tags = owner.tags + sense.root_tags
    owner.users = owner.users | sense.users
    new_names = {sense.stem} | leaf.aliases
    tree.remove_subtree(leaf.id)
    for desc in list(tree.descendants(owner.id)):
        if desc.id in tree and desc.names() & new_names:
            tree.remove_subtree(desc.id)
    forbidden = set().union(*(n.names() for n in tree.path(owner.id)))
    for sl in sorted(sense.leaves, key=lambda l: l.stem):
        if sl.stem in forbidden or sl.stem in looping:
            continue
        existing = tree.child_by_stem(owner.id, sl.stem)
        if existing is not None:
            existing.tags = existing.tags + sl.tags
            existing.users = existing.users | sl.contributing_users
        elif (owner.id, sl.stem) not in removed:
            tree.add_child(owner.id, sl.stem, sl.tags, sl.contributing_users)


@dataclass
class _Candidate:
    sense: MergedSense
    score: float
    chosen: list[str]


class Grower:
    """Single-writer growth of one tree; the sense index is only read."""

    def __init__(self, index: SenseIndex, p: Params | None = None, debug: bool = False):
        self.index = index
        self.p = p or index.params
        self.debug = debug
        self.decisions: list[AttachDecision] = []
        self.stats = GrowStats()

    def resolve_seed(self, seed: str) -> str:
        if seed in self.index:
            return seed
        stem = normalize_seed(seed)
        if stem not in self.index:
            raise SeedNotFound(f"no saplings rooted at {seed!r} (stem {stem!r})")
        return stem

    def start_sense(self, stem: str) -> MergedSense:
        senses = self.index.senses(stem)
        return min(senses, key=lambda s: (-len(s.users), -len(s.members), s.id))

    def grow(self, seed: str) -> FolksonomyTree:
        p = self.p
        stem = self.resolve_seed(seed)
        start = self._prune(self.start_sense(stem))
        tree = FolksonomyTree(stem, start.root_tags, start.users)
        t0 = time.perf_counter()
        for leaf in sorted(start.leaves, key=lambda l: l.stem):
            if leaf.stem != stem:
                tree.add_child(tree.root_id, leaf.stem, leaf.tags, leaf.contributing_users)
        self.stats.level_seconds[1] += time.perf_counter() - t0
        self._expanded = {tree.root_id}
        self._removed: set[tuple[int, str]] = set()
        self._check(tree)

        while True:
            t0 = time.perf_counter()
            pending = [n for n in tree.nodes.values() if n.id not in self._expanded and n.depth < p.max_depth]
            if not pending:
                closing = time.perf_counter() - t0
                break
            depth = min(n.depth for n in pending)
            groups: dict[int, list[TreeNode]] = defaultdict(list)
            for n in pending:
                if n.depth == depth:
                    groups[n.parent].append(n)
            for parent_id in sorted(groups, key=lambda pid: tree.path_stems(pid)):
                if parent_id not in tree:
                    continue
                members = [n for n in groups[parent_id] if n.id in tree]
                self._expand_group(tree, parent_id, members)
                self._check(tree)
            self.stats.level_seconds[depth + 1] += time.perf_counter() - t0
        # nodes at max depth are never expanded; the closing scan and final
        # check are charged to the deepest level
        t0 = time.perf_counter()
        tree.validate()
        deepest = tree.max_depth()
        self.stats.level_seconds[deepest] += closing + time.perf_counter() - t0
        return tree

    def _check(self, tree: FolksonomyTree) -> None:
        if self.debug:
            tree.validate()

    def _prune(self, sense: MergedSense) -> MergedSense:
        pruned = prune_noise(sense, self.p.noise_fraction)
        self.stats.pruned_leaves += len(sense.leaves) - len(pruned.leaves)
        return pruned

    def _decide(self, node: TreeNode, cand: _Candidate | None, action: str, reason: str = "") -> None:
        self.decisions.append(
            AttachDecision(
                leaf=node.id,
                stem=node.stem,
                depth=node.depth,
                chosen_senses=list(cand.chosen) if cand else [],
                similarity=cand.score if cand else 0.0,
                action=action,
                reason=reason,
            )
        )

    def _retrieve(self, tree: FolksonomyTree, parent_id: int, node: TreeNode) -> _Candidate | None:
        p = self.p
        if node.stem not in self.index:
            return None
        view = _children_view(tree, parent_id)
        scored = []
        for sense in self.index.senses(node.stem):
            local = tag_sim(node.tags, sense.root_tags, p)
            structural = struct_sim_lr(node, view, sense, p)
            sim = node_sim(local, structural, p.alpha_lr)
            if sim > p.tau:
                scored.append((sim, sense))
        if not scored:
            return None
        merged = merge_all([s for _, s in sorted(scored, key=lambda x: x[1].id)])
        sense = self._prune(merged).without_leaves([node.stem])
        return _Candidate(sense, max(sim for sim, _ in scored), [s.id for _, s in scored])

    def _expand_group(self, tree: FolksonomyTree, parent_id: int, members: list[TreeNode]) -> None:
        candidates: dict[int, _Candidate] = {}
        for node in sorted(members, key=lambda n: n.stem):
            self._expanded.add(node.id)
            cand = self._retrieve(tree, parent_id, node)
            if cand is None:
                self._decide(node, None, SKIP, "no similar sense")
            elif not cand.sense.leaves:
                self._decide(node, cand, SKIP, "sense has no leaves after pruning")
            else:
                candidates[node.id] = cand

        nodes = {nid: tree.node(nid) for nid in candidates}
        surviving, dropped = resolve_mutual_shortcuts(
            tree, parent_id, {nid: c.sense for nid, c in candidates.items()}, self.p
        )
        for nid in dropped:
            self.stats.mutual_shortcuts += 1
            self._removed.add((parent_id, nodes[nid].stem))
            self._decide(nodes[nid], candidates[nid], DEFER, "mutual shortcut")
        order = sorted(surviving, key=lambda nid: (-candidates[nid].score, nodes[nid].stem))

        # loops and synonyms
        attach: list[int] = []
        for nid in order:
            if nid not in tree:
                continue
            cand = candidates[nid]
            trimmed, owner = handle_loop(tree, nid, cand.sense, self.p, self._removed)
            if trimmed is None:
                self.stats.synonyms += 1
                self._decide(nodes[nid], cand, ATTACH, f"synonym of {owner.stem}")
                continue
            self.stats.loops_cut += len(cand.sense.leaves) - len(trimmed.leaves)
            cand.sense = trimmed
            if trimmed.leaves:
                attach.append(nid)
            else:
                self._decide(nodes[nid], cand, SKIP, "only looping leaves")

        # shortcuts, most similar first
        for nid in attach:
            if nid not in tree:
                continue
            for gone in resolve_shortcut(tree, nid, candidates[nid].sense):
                self.stats.shortcuts += 1
                self._removed.add((parent_id, gone.stem))
                if gone.id in candidates:
                    self._decide(gone, candidates[gone.id], DEFER, "shortcut")

        for nid in attach:
            if nid not in tree:
                continue
            node = tree.node(nid)
            cand = candidates[nid]
            node.tags = node.tags + cand.sense.root_tags
            node.users = node.users | cand.sense.users
            for leaf in sorted(cand.sense.leaves, key=lambda l: l.stem):
                if (nid, leaf.stem) not in self._removed:
                    tree.add_child(nid, leaf.stem, leaf.tags, leaf.contributing_users)
            self._decide(node, cand, ATTACH)


def grow_tree(
    seed: str,
    index: SenseIndex,
    p: Params | None = None,
    decisions: list[AttachDecision] | None = None,
    debug: bool = False,
) -> FolksonomyTree:
    grower = Grower(index, p, debug=debug)
    tree = grower.grow(seed)
    if decisions is not None:
        decisions.extend(grower.decisions)
    return tree
