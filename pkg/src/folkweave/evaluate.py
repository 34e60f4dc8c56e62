"""Tree quality metrics and comparison against a reference taxonomy.

Reference taxonomies are UTF-8 TSV edge lists, one ``parent<TAB>child``
per line, with names already normalized to stems.

Metric definitions used here:

* AUT sums trapezoids over consecutive per-level node counts.
* Lexical recall is the fraction of the carved reference vocabulary that
  appears anywhere in the learned tree (stems or aliases).
* fmTO compares, for each overlapping leaf candidate, the node set of the
  learned root path against the best-matching (max Jaccard) reference
  path, averages the two directional overlaps and takes their harmonic
  mean. This is a path-based approximation of taxonomic overlap.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from folkweave.model import FolksonomyTree, FolkweaveError


class SeedNotInReference(FolkweaveError):
    pass


class ReferenceTaxonomy:
    def __init__(self, edges: Iterable[tuple[str, str]] = (), nodes: Iterable[str] = ()):
        self.edges: set[tuple[str, str]] = set()
        self.nodes: set[str] = set(nodes)
        self.children: dict[str, list[str]] = defaultdict(list)
        self.parents: dict[str, list[str]] = defaultdict(list)
        for parent, child in edges:
            self.add_edge(parent, child)
        self._check_acyclic()

    def add_edge(self, parent: str, child: str) -> None:
        if (parent, child) in self.edges:
            return
        self.edges.add((parent, child))
        self.nodes.update((parent, child))
        self.children[parent].append(child)
        self.parents[child].append(parent)
        self.children[parent].sort()
        self.parents[child].sort()

    @property
    def roots(self) -> set[str]:
        return {n for n in self.nodes if not self.parents.get(n)}

    def _check_acyclic(self) -> None:
        state: dict[str, int] = {}
        for start in sorted(self.nodes):
            if start in state:
                continue
            stack = [(start, iter(self.children.get(start, ())))]
            state[start] = 1
            while stack:
                node, it = stack[-1]
                nxt = next(it, None)
                if nxt is None:
                    state[node] = 2
                    stack.pop()
                elif state.get(nxt) == 1:
                    raise ValueError(f"reference taxonomy has a cycle through {nxt!r}")
                elif nxt not in state:
                    state[nxt] = 1
                    stack.append((nxt, iter(self.children.get(nxt, ()))))

    def paths(self, source: str, target: str) -> list[tuple[str, ...]]:
        """All paths from ``source`` down to ``target``."""
        out: list[tuple[str, ...]] = []
        stack = [(source,)]
        while stack:
            path = stack.pop()
            if path[-1] == target:
                out.append(path)
                continue
            for child in self.children.get(path[-1], ()):
                stack.append(path + (child,))
        return sorted(out)

    @classmethod
    def load(cls, path: str | Path) -> ReferenceTaxonomy:
        edges = []
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
                raise ValueError(f"{path}:{lineno}: expected 'parent<TAB>child'")
            edges.append((parts[0].strip(), parts[1].strip()))
        return cls(edges)

    def dump(self, path: str | Path) -> None:
        lines = [f"{p}\t{c}\n" for p, c in sorted(self.edges)]
        Path(path).write_text("".join(lines), encoding="utf-8")


@dataclass
class EvalSetup:
    seed: str
    leaf_candidates: set[str]
    matched: set[str]
    reference_paths: list[tuple[str, ...]] = field(default_factory=list)

    @property
    def reference_vocabulary(self) -> set[str]:
        return {s for path in self.reference_paths for s in path}


def aut(tree: FolksonomyTree) -> float:
    counts = tree.level_counts()
    return sum(0.5 * (counts[k] + counts[k + 1]) for k in range(len(counts) - 1))


def _leaf_candidate_nodes(tree: FolksonomyTree):
    for node in tree.nodes.values():
        if node.depth == 2 or (node.depth == 1 and not node.children):
            yield node


def carve_reference(tree: FolksonomyTree, ref: ReferenceTaxonomy) -> EvalSetup:
    seed = tree.seed_stem
    if seed not in ref.nodes:
        raise SeedNotInReference(seed)
    lc = {n.stem for n in _leaf_candidate_nodes(tree)}
    lcd = lc & ref.nodes
    paths: list[tuple[str, ...]] = []
    for leaf in sorted(lcd):
        paths.extend(ref.paths(seed, leaf))
    return EvalSetup(seed, lc, lcd, paths)


def lexical_recall(tree: FolksonomyTree, setup: EvalSetup) -> float | None:
    vocab = setup.reference_vocabulary
    if not vocab:
        return None
    return len(tree.vocabulary() & vocab) / len(vocab)


def path_overlap(learned: Iterable[str], reference: Iterable[str]) -> tuple[float, float]:
    """Directional overlaps (learned->reference, reference->learned) of two paths' node sets."""
    pl, pr = set(learned), set(reference)
    common = len(pl & pr)
    return common / len(pl), common / len(pr)


def _harmonic(a: float, b: float) -> float:
    return 2 * a * b / (a + b) if a + b > 0 else 0.0


def matched_paths(tree: FolksonomyTree, setup: EvalSetup) -> list[tuple[tuple[str, ...], tuple[str, ...]]]:
    """For every comparable leaf, the (learned, reference) path pair that is compared."""
    learned: dict[str, list[tuple[str, ...]]] = defaultdict(list)
    for node in _leaf_candidate_nodes(tree):
        if node.stem in setup.matched:
            learned[node.stem].append(tree.path_stems(node.id))
    by_leaf: dict[str, list[tuple[str, ...]]] = defaultdict(list)
    for path in setup.reference_paths:
        by_leaf[path[-1]].append(path)
    pairs = []
    for leaf in sorted(setup.matched):
        if learned[leaf] and by_leaf[leaf]:
            options = [(pl, pr) for pl in learned[leaf] for pr in by_leaf[leaf]]
            pairs.append(min(options, key=_pair_rank))
    return pairs


def _pair_rank(pair):
    # highest Jaccard first, then lexicographic for determinism
    pl, pr = set(pair[0]), set(pair[1])
    return (-len(pl & pr) / len(pl | pr), pair[0], pair[1])


def fmto(tree: FolksonomyTree, setup: EvalSetup) -> float | None:
    pairs = matched_paths(tree, setup)
    if not pairs:
        return None
    scores = [path_overlap(pl, pr) for pl, pr in pairs]
    lr = sum(s[0] for s in scores) / len(scores)
    rl = sum(s[1] for s in scores) / len(scores)
    return _harmonic(lr, rl)


def avg_depth(tree: FolksonomyTree) -> float:
    leaves = [n.depth for n in tree.leaves() if n.id != tree.root_id]
    return sum(leaves) / len(leaves) if leaves else 0.0


def evaluate(tree: FolksonomyTree, ref: ReferenceTaxonomy) -> dict:
    setup = carve_reference(tree, ref)
    return {
        "leaves": sum(1 for n in tree.leaves() if n.id != tree.root_id),
        "aut": aut(tree),
        "overlap_leaves": len(setup.matched),
        "lexical_recall": lexical_recall(tree, setup),
        "fmto": fmto(tree, setup),
        "avg_depth": avg_depth(tree),
    }
