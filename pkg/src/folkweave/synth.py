"""Synthetic corpora planted from a known taxonomy.

Each simulated user picks a few internal nodes of the ground truth and
files photos of some of their children under a collection named after
the node. Tag vocabularies are per node, and every photo also carries
tags of all its ancestors, so related nodes share statistics.

Noise kinds, each a per-collection probability:

homonym
    an extra collection reusing a ground-truth name with an unrelated tag
    vocabulary and unrelated sets (a word with two meanings)
inverted
    an extra collection named after a child holding a set named after its
    parent (conflicting organisation)
shortcut
    a grandchild filed directly as a set of its grandparent
idiosyncratic
    a set with a made-up name no one else uses
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from folkweave.evaluate import ReferenceTaxonomy
from folkweave.ingest import RawRecord, RawSet, stem_term, tokenize_name

NOISE_KINDS = ("homonym", "inverted", "shortcut", "idiosyncratic")

_ONSETS = "bdfgklmnprstvz"
_VOWELS = "aiou"


class InvalidNoiseSpec(ValueError):
    pass


@dataclass(frozen=True)
class NoiseSpec:
    homonym: float = 0.0
    inverted: float = 0.0
    shortcut: float = 0.0
    idiosyncratic: float = 0.0

    def __post_init__(self):
        for kind in NOISE_KINDS:
            value = getattr(self, kind)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not 0.0 <= value <= 1.0:
                raise InvalidNoiseSpec(f"{kind} must be a fraction in [0, 1], got {value!r}")
        if self.total > 1.0 + 1e-12:
            raise InvalidNoiseSpec(f"noise fractions sum to {self.total} > 1")

    @property
    def total(self) -> float:
        return sum(getattr(self, k) for k in NOISE_KINDS)

    @classmethod
    def combined(cls, total: float) -> NoiseSpec:
        """Split ``total`` evenly across all noise kinds."""
        share = total / len(NOISE_KINDS)
        return cls(**{k: share for k in NOISE_KINDS})

    @classmethod
    def load(cls, path: str | Path) -> NoiseSpec:
        values: dict[str, float] = {}
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, raw = line.partition("=")
            key = key.strip()
            if not sep or key not in NOISE_KINDS + ("combined",):
                raise InvalidNoiseSpec(f"{path}:{lineno}: unknown or malformed entry {line!r}")
            try:
                values[key] = float(raw)
            except ValueError:
                raise InvalidNoiseSpec(f"{path}:{lineno}: {key} is not a number") from None
        if "combined" in values:
            base = cls.combined(values.pop("combined"))
            values = {k: getattr(base, k) + values.get(k, 0.0) for k in NOISE_KINDS}
        return cls(**values)


def _is_clean_name(name: str) -> bool:
    return tokenize_name(name) == [name] and stem_term(name) == name


def name_generator(rng: random.Random, taken: set[str], syllables: int = 3):
    """Yield fresh names that survive tokenization and stemming unchanged."""
    while True:
        name = "".join(rng.choice(_ONSETS) + rng.choice(_VOWELS) for _ in range(syllables))
        if name not in taken and _is_clean_name(name):
            taken.add(name)
            yield name


def balanced_taxonomy(branching: Sequence[int], rng_seed: int = 0) -> ReferenceTaxonomy:
    """A tree with ``branching[i]`` children under every node at depth ``i``."""
    rng = random.Random(rng_seed)
    names = name_generator(rng, set())
    root = next(names)
    ref = ReferenceTaxonomy(nodes=[root])
    level = [root]
    for width in branching:
        nxt = []
        for parent in level:
            for _ in range(width):
                child = next(names)
                ref.add_edge(parent, child)
                nxt.append(child)
        level = nxt
    return ref


class _World:
    def __init__(self, gt: ReferenceTaxonomy, rng_seed: int, vocab_size: int):
        self.gt = gt
        self.rng_seed = rng_seed
        self.vocab_size = vocab_size
        self.internal = sorted(n for n in gt.nodes if gt.children.get(n))
        self.non_root = sorted(n for n in gt.nodes if gt.parents.get(n))
        self.taken = set(gt.nodes)
        self._foreign: dict[str, list[str]] = {}

    def vocab(self, node: str) -> list[str]:
        return [f"{node}{i}" for i in range(self.vocab_size)]

    def ancestors(self, node: str) -> list[str]:
        out = []
        parents = self.gt.parents.get(node)
        while parents:
            node = parents[0]
            out.append(node)
            parents = self.gt.parents.get(node)
        return out

    def photo_tags(self, rng: random.Random, node: str) -> dict[str, int]:
        tags = {t: rng.randint(3, 8) for t in self.vocab(node)}
        for anc in self.ancestors(node):
            for t in self.vocab(anc):
                tags[t] = tags.get(t, 0) + rng.randint(1, 3)
        return tags

    def foreign_leaves(self, stem: str) -> list[str]:
        # fixed per stem so that repeated homonym collections agree with each other
        if stem not in self._foreign:
            rng = random.Random(f"{self.rng_seed}:homonym:{stem}")
            names = name_generator(rng, self.taken)
            self._foreign[stem] = [next(names) for _ in range(4)]
        return self._foreign[stem]

    def foreign_tags(self, rng: random.Random, stem: str, leaf: str) -> dict[str, int]:
        tags = {f"alt{stem}{i}": rng.randint(1, 3) for i in range(self.vocab_size)}
        for i in range(self.vocab_size):
            tags[f"{leaf}{i}"] = rng.randint(3, 8)
        return tags


def synth_corpus(
    ground_truth: ReferenceTaxonomy,
    n_users: int,
    noise: NoiseSpec | None = None,
    rng_seed: int = 0,
    collections_per_user: tuple[int, int] = (1, 3),
    vocab_size: int = 5,
) -> list[RawRecord]:
    noise = noise or NoiseSpec()
    rng = random.Random(rng_seed)
    world = _World(ground_truth, rng_seed, vocab_size)
    if not world.internal:
        raise ValueError("ground truth needs at least one edge")
    records: list[RawRecord] = []
    for u in range(n_users):
        user = f"user{u:05d}"
        lo, hi = collections_per_user
        picks = rng.sample(world.internal, min(rng.randint(lo, hi), len(world.internal)))
        for node in sorted(picks):
            kids = ground_truth.children[node]
            chosen = sorted(rng.sample(kids, rng.randint(min(2, len(kids)), len(kids))))
            sets = [RawSet(c, world.photo_tags(rng, c)) for c in chosen]
            extra: list[RawRecord] = []
            kind = _draw_noise(rng, noise)
            if kind == "shortcut":
                grandkids = sorted({g for c in kids for g in ground_truth.children.get(c, ())})
                if grandkids:
                    g = rng.choice(grandkids)
                    sets.append(RawSet(g, world.photo_tags(rng, g)))
            elif kind == "idiosyncratic":
                junk = next(name_generator(rng, world.taken, syllables=4))
                sets.append(RawSet(junk, world.photo_tags(rng, node)))
            elif kind == "inverted":
                child = rng.choice(chosen)
                extra.append(RawRecord(user, child, [RawSet(node, world.photo_tags(rng, child))]))
            elif kind == "homonym":
                stem = rng.choice(world.non_root)
                leaves = sorted(rng.sample(world.foreign_leaves(stem), 2))
                extra.append(
                    RawRecord(user, stem, [RawSet(l, world.foreign_tags(rng, stem, l)) for l in leaves])
                )
            records.append(RawRecord(user, node, sets))
            records.extend(extra)
    return records


def _draw_noise(rng: random.Random, noise: NoiseSpec) -> str | None:
    r = rng.random()
    acc = 0.0
    for kind in NOISE_KINDS:
        acc += getattr(noise, kind)
        if r < acc:
            return kind
    return None
