"""Core domain types: tag statistics, saplings, merged senses and the output tree."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping


class FolkweaveError(Exception):
    """Base class for all package errors."""


class GateViolation(FolkweaveError):
    """Two nodes with different stems were handed to a same-stem operation."""


class InvariantViolation(FolkweaveError):
    """A structural invariant of a model object does not hold."""


class TagStats:
    """Immutable multiset of ``tag -> frequency``.

    Frequencies are positive integer counts. ``top_k`` orders tags by
    descending frequency with ties broken lexicographically, so repeated
    calls are deterministic.
    """

    __slots__ = ("_counts", "_total", "_top_cache", "_hash")

    def __init__(self, counts: Mapping[str, int] | Iterable[tuple[str, int]] = ()):
        items = counts.items() if isinstance(counts, Mapping) else counts
        merged: dict[str, int] = {}
        for tag, freq in items:
            if not tag:
                raise ValueError("empty tag")
            if not isinstance(freq, int) or isinstance(freq, bool) or freq < 1:
                raise ValueError(f"frequency for {tag!r} must be a positive int, got {freq!r}")
            merged[tag] = merged.get(tag, 0) + freq
        self._counts = merged
        self._total = sum(merged.values())
        self._top_cache: dict[int, tuple[str, ...]] = {}
        self._hash: int | None = None

    @classmethod
    def empty(cls) -> TagStats:
        return _EMPTY

    @classmethod
    def _unchecked(cls, merged: dict[str, int]) -> TagStats:
        # for sums of already-validated stats; takes ownership of ``merged``
        self = cls.__new__(cls)
        self._counts = merged
        self._total = sum(merged.values())
        self._top_cache = {}
        self._hash = None
        return self

    def __getitem__(self, tag: str) -> int:
        return self._counts.get(tag, 0)

    def __contains__(self, tag: object) -> bool:
        return tag in self._counts

    def __iter__(self) -> Iterator[str]:
        return iter(self._counts)

    def __len__(self) -> int:
        return len(self._counts)

    def __bool__(self) -> bool:
        return bool(self._counts)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TagStats):
            return NotImplemented
        return self._counts == other._counts

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._counts.items()))
        return self._hash

    def __add__(self, other: TagStats) -> TagStats:
        return sum_tags(self, other)

    def __repr__(self) -> str:
        body = ", ".join(f"{t}:{f}" for t, f in sorted(self._counts.items()))
        return f"TagStats({{{body}}})"

    def items(self):
        return self._counts.items()

    def as_dict(self) -> dict[str, int]:
        """Plain dict copy with keys in sorted order."""
        return {t: self._counts[t] for t in sorted(self._counts)}

    @property
    def total(self) -> int:
        return self._total

    def top_k(self, k: int) -> tuple[str, ...]:
        cached = self._top_cache.get(k)
        if cached is None:
            ranked = sorted(self._counts.items(), key=lambda kv: (-kv[1], kv[0]))
            cached = tuple(t for t, _ in ranked[:k])
            self._top_cache[k] = cached
        return cached

    def top_k_set(self, k: int) -> frozenset[str]:
        return frozenset(self.top_k(k))


_EMPTY = TagStats()


def sum_tags(a: TagStats, b: TagStats) -> TagStats:
    """Element-wise sum of two tag multisets."""
    if not b:
        return a
    if not a:
        return b
    merged = dict(a.items())
    for tag, freq in b.items():
        merged[tag] = merged.get(tag, 0) + freq
    return TagStats._unchecked(merged)


def sum_all(stats: Iterable[TagStats]) -> TagStats:
    merged: dict[str, int] = {}
    for s in stats:
        for tag, freq in s.items():
            merged[tag] = merged.get(tag, 0) + freq
    return TagStats._unchecked(merged) if merged else _EMPTY


@dataclass(frozen=True)
class SaplingNode:
    raw_name: str
    stem: str
    tags: TagStats = field(default_factory=TagStats.empty)
    contributing_users: frozenset[str] = frozenset()

    def __post_init__(self):
        if not self.stem or self.stem != self.stem.lower():
            raise InvariantViolation(f"stem must be nonempty lowercase, got {self.stem!r}")

    def merged_with(self, other: SaplingNode) -> SaplingNode:
        if other.stem != self.stem:
            raise GateViolation(f"{self.stem!r} != {other.stem!r}")
        return SaplingNode(
            self.raw_name,
            self.stem,
            self.tags + other.tags,
            self.contributing_users | other.contributing_users,
        )


@dataclass(frozen=True)
class Sapling:
    """One user's collection: a single-term root and its leaves."""

    id: str
    user: str
    root: SaplingNode
    leaves: tuple[SaplingNode, ...]

    def __post_init__(self):
        if not self.leaves:
            raise InvariantViolation(f"sapling {self.id} has no leaves")
        stems = [leaf.stem for leaf in self.leaves]
        if len(set(stems)) != len(stems):
            raise InvariantViolation(f"sapling {self.id} has duplicate leaf stems")
        if self.root.tags != sum_all(leaf.tags for leaf in self.leaves):
            raise InvariantViolation(f"sapling {self.id}: root tags are not the sum of leaf tags")

    @property
    def stem(self) -> str:
        return self.root.stem


@dataclass(frozen=True)
class MergedSense:
    """A cluster of same-stem saplings combined by merge-by-root.

    ``members`` holds sapling ids in sorted order.
    """

    stem: str
    members: tuple[str, ...]
    root_tags: TagStats
    leaves: tuple[SaplingNode, ...]
    users: frozenset[str]

    @classmethod
    def from_sapling(cls, sapling: Sapling) -> MergedSense:
        return cls(
            stem=sapling.stem,
            members=(sapling.id,),
            root_tags=sapling.root.tags,
            leaves=sapling.leaves,
            users=frozenset({sapling.user}) | sapling.root.contributing_users,
        )

    @property
    def id(self) -> str:
        # smallest member id; stable across merge order
        return self.members[0]

    @property
    def tags(self) -> TagStats:
        return self.root_tags

    def leaf_stems(self) -> frozenset[str]:
        return frozenset(leaf.stem for leaf in self.leaves)

    def without_leaves(self, stems: Iterable[str]) -> MergedSense:
        drop = set(stems)
        if not drop:
            return self
        kept = tuple(leaf for leaf in self.leaves if leaf.stem not in drop)
        return MergedSense(self.stem, self.members, self.root_tags, kept, self.users)


@dataclass(frozen=True)
class StructSimBreakdown:
    cl: float
    z: int
    tag_component: float
    total: float


@dataclass(frozen=True)
class Params:
    """Tunables. Defaults are the values the method was reported with."""

    k_top_tags: int = 40
    j_common_tags: int = 4
    alpha_rr: float = 0.1
    alpha_lr: float = 0.8
    beta: float = 0.0
    tau: float = 0.5
    tau_syn: float = 0.6
    alpha_syn: float = 0.5
    max_depth: int = 4
    noise_fraction: float = 0.01
    queue_size: int = 50
    max_cluster_iters: int = 10

    REAL_FIELDS = ("alpha_rr", "alpha_lr", "beta", "tau", "tau_syn", "alpha_syn", "noise_fraction")
    INT_FIELDS = ("k_top_tags", "j_common_tags", "max_depth", "queue_size", "max_cluster_iters")

    def __post_init__(self):
        for name in self.REAL_FIELDS:
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be a real in [0, 1], got {value!r}")
        for name in self.INT_FIELDS:
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ValueError(f"{name} must be an int >= 1, got {value!r}")
        if self.j_common_tags > self.k_top_tags:
            raise ValueError("j_common_tags must not exceed k_top_tags")


# ---------------------------------------------------------------------------
# Output tree
# ---------------------------------------------------------------------------


@dataclass
class TreeNode:
    id: int
    stem: str
    depth: int
    parent: int | None
    tags: TagStats = field(default_factory=TagStats.empty)
    users: frozenset[str] = frozenset()
    aliases: set[str] = field(default_factory=set)
    children: list[int] = field(default_factory=list)

    def names(self) -> set[str]:
        return {self.stem} | self.aliases


class FolksonomyTree:
    """Mutable rooted tree grown from a seed stem.

    Node identity is positional: the same stem may occur in different
    subtrees, never twice on one root path.
    """

    def __init__(self, seed_stem: str, tags: TagStats | None = None, users: Iterable[str] = ()):
        self.seed_stem = seed_stem
        self.nodes: dict[int, TreeNode] = {}
        self._next_id = 0
        self.root_id = self._new_node(seed_stem, 0, None, tags or TagStats.empty(), frozenset(users)).id

    def _new_node(self, stem, depth, parent, tags, users) -> TreeNode:
        node = TreeNode(self._next_id, stem, depth, parent, tags, frozenset(users))
        self.nodes[node.id] = node
        self._next_id += 1
        return node

    @property
    def root(self) -> TreeNode:
        return self.nodes[self.root_id]

    def __len__(self) -> int:
        return len(self.nodes)

    def __contains__(self, node_id: object) -> bool:
        return node_id in self.nodes

    def node(self, node_id: int) -> TreeNode:
        return self.nodes[node_id]

    def children(self, node_id: int) -> list[TreeNode]:
        return [self.nodes[c] for c in self.nodes[node_id].children]

    def child_by_stem(self, node_id: int, stem: str) -> TreeNode | None:
        for c in self.nodes[node_id].children:
            if self.nodes[c].stem == stem:
                return self.nodes[c]
        return None

    def add_child(
        self,
        parent_id: int,
        stem: str,
        tags: TagStats | None = None,
        users: Iterable[str] = (),
    ) -> TreeNode:
        parent = self.nodes[parent_id]
        node = self._new_node(stem, parent.depth + 1, parent_id, tags or TagStats.empty(), frozenset(users))
        parent.children.append(node.id)
        return node

    def remove_subtree(self, node_id: int) -> int:
        """Detach and delete a node with all its descendants; returns count removed."""
        if node_id == self.root_id:
            raise InvariantViolation("cannot remove the root")
        node = self.nodes[node_id]
        self.nodes[node.parent].children.remove(node_id)
        removed = 0
        stack = [node_id]
        while stack:
            nid = stack.pop()
            stack.extend(self.nodes[nid].children)
            del self.nodes[nid]
            removed += 1
        return removed

    def path(self, node_id: int) -> list[TreeNode]:
        """Nodes from the root down to ``node_id`` inclusive."""
        out = []
        cur: int | None = node_id
        while cur is not None:
            node = self.nodes[cur]
            out.append(node)
            cur = node.parent
        out.reverse()
        return out

    def path_stems(self, node_id: int) -> tuple[str, ...]:
        return tuple(n.stem for n in self.path(node_id))

    def descendants(self, node_id: int) -> Iterator[TreeNode]:
        stack = list(reversed(self.nodes[node_id].children))
        while stack:
            nid = stack.pop()
            node = self.nodes[nid]
            yield node
            stack.extend(reversed(node.children))

    def bfs(self) -> Iterator[TreeNode]:
        queue = deque([self.root_id])
        while queue:
            node = self.nodes[queue.popleft()]
            yield node
            queue.extend(sorted(node.children, key=lambda c: self.nodes[c].stem))

    def edges(self) -> list[tuple[int, int]]:
        return [(n.parent, n.id) for n in self.nodes.values() if n.parent is not None]

    def stem_edges(self) -> set[tuple[str, str]]:
        return {(self.nodes[p].stem, self.nodes[c].stem) for p, c in self.edges()}

    def leaves(self) -> list[TreeNode]:
        return [n for n in self.nodes.values() if not n.children]

    def level_counts(self) -> list[int]:
        counts: list[int] = []
        for node in self.nodes.values():
            while len(counts) <= node.depth:
                counts.append(0)
            counts[node.depth] += 1
        return counts

    def vocabulary(self, include_aliases: bool = True) -> set[str]:
        vocab = set()
        for node in self.nodes.values():
            vocab.add(node.stem)
            if include_aliases:
                vocab |= node.aliases
        return vocab

    def max_depth(self) -> int:
        return max(n.depth for n in self.nodes.values())

    def validate(self) -> None:
        """Check tree shape, depths and loop-freedom in O(nodes + edges)."""
        roots = [n for n in self.nodes.values() if n.parent is None]
        if len(roots) != 1 or roots[0].id != self.root_id:
            raise InvariantViolation("tree must have exactly one root")
        root = self.root
        if root.stem != self.seed_stem or root.depth != 0:
            raise InvariantViolation("root must carry the seed stem at depth 0")
        seen = 0
        # each stack entry carries the names on its root path
        stack: list[tuple[int, frozenset[str]]] = [(self.root_id, frozenset())]
        while stack:
            nid, above = stack.pop()
            node = self.nodes[nid]
            seen += 1
            names = node.names()
            if names & above:
                raise InvariantViolation(f"loop: {sorted(names & above)} repeats on the path to node {nid}")
            for cid in node.children:
                child = self.nodes.get(cid)
                if child is None or child.parent != nid:
                    raise InvariantViolation(f"broken edge {nid}->{cid}")
                if child.depth != node.depth + 1:
                    raise InvariantViolation(f"depth mismatch on edge {nid}->{cid}")
                stack.append((cid, above | names))
        if seen != len(self.nodes):
            raise InvariantViolation("unreachable or cyclic nodes present")

    # -- serialization --------------------------------------------------

    def to_dict(self, node_id: int | None = None) -> dict:
        node = self.nodes[self.root_id if node_id is None else node_id]
        kids = sorted(node.children, key=lambda c: self.nodes[c].stem)
        return {
            "stem": node.stem,
            "aliases": sorted(node.aliases),
            "users": sorted(node.users),
            "children": [self.to_dict(c) for c in kids],
        }

    @classmethod
    def from_dict(cls, data: dict) -> FolksonomyTree:
        tree = cls(data["stem"], users=data.get("users", ()))
        tree.root.aliases = set(data.get("aliases", ()))
        stack = [(tree.root_id, child) for child in data.get("children", ())]
        while stack:
            parent_id, item = stack.pop()
            node = tree.add_child(parent_id, item["stem"], users=item.get("users", ()))
            node.aliases = set(item.get("aliases", ()))
            stack.extend((node.id, child) for child in item.get("children", ()))
        return tree

    def to_dot(self) -> str:
        lines = ["digraph folksonomy {", "  node [shape=box];"]
        order = list(self.bfs())
        index = {n.id: i for i, n in enumerate(order)}
        for n in order:
            label = n.stem if not n.aliases else f"{n.stem}\\n({', '.join(sorted(n.aliases))})"
            lines.append(f'  n{index[n.id]} [label="{label}"];')
        for n in order:
            if n.parent is not None:
                lines.append(f"  n{index[n.parent]} -> n{index[n.id]};")
        lines.append("}")
        return "\n".join(lines) + "\n"
