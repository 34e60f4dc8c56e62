"""Command-line entry point.

Commands:
    folkweave ingest   JSONL corpus -> sapling store
    folkweave senses   dump the senses of one stem as JSON
    folkweave grow     grow a tree from a seed term
    folkweave eval     score a tree against a reference taxonomy
    folkweave synth    generate a synthetic corpus from a taxonomy

Exit status is 0 on success, 1 for bad input and 2 when an internal
invariant is violated. Every run writes a one-line JSON summary to stderr,
or to the file given with ``--summary``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from pathlib import Path
from typing import Sequence

from folkweave import store
from folkweave.cluster import SenseIndex, build_tag_codebook
from folkweave.config import ConfigError, load_full_config
from folkweave.evaluate import ReferenceTaxonomy, SeedNotInReference, evaluate
from folkweave.grow import Grower, SeedNotFound
from folkweave.ingest import DEFAULT_STOPLIST, IngestReport, build_saplings, load_records, load_stoplist, write_records
from folkweave.model import FolksonomyTree, GateViolation, InvariantViolation, MergedSense, Sapling
from folkweave.synth import InvalidNoiseSpec, NoiseSpec, balanced_taxonomy, synth_corpus

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_INPUT, EXIT_INVARIANT = 0, 1, 2

INPUT_ERRORS = (
    OSError,
    ConfigError,
    store.StoreError,
    SeedNotFound,
    SeedNotInReference,
    InvalidNoiseSpec,
    json.JSONDecodeError,
    KeyError,
    ValueError,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def _sense_json(s: MergedSense) -> dict:
    return {
        "id": s.id,
        "stem": s.stem,
        "members": list(s.members),
        "users": sorted(s.users),
        "root_tags": s.root_tags.as_dict(),
        "leaves": [
            {"stem": l.stem, "users": sorted(l.contributing_users), "tags": l.tags.as_dict()} for l in s.leaves
        ],
    }


def _codebook(saplings: list[Sapling], cache: Path | None) -> dict[str, int]:
    if cache is None:
        return build_tag_codebook(saplings)
    digest = hashlib.sha256(store.dumps(saplings).encode("utf-8")).hexdigest()
    if cache.exists():
        try:
            doc = json.loads(cache.read_text(encoding="utf-8"))
            if doc.get("saplings_sha256") == digest:
                logger.info("codebook cache hit: %s", cache)
                return {str(k): int(v) for k, v in doc["codes"].items()}
        except (json.JSONDecodeError, KeyError, AttributeError, ValueError):
            pass
        logger.info("codebook cache stale, rebuilding: %s", cache)
    codes = build_tag_codebook(saplings)
    _write_json(cache, {"saplings_sha256": digest, "codes": codes})
    return codes


def _index(args) -> SenseIndex:
    cfg = load_full_config(args.config)
    saplings = store.load(args.saplings)
    return SenseIndex(saplings, cfg.params, _codebook(saplings, cfg.codebook_cache))


def cmd_ingest(args) -> dict:
    cfg = load_full_config(args.config)
    stop_path = args.stoplist or cfg.stoplist
    stoplist = load_stoplist(stop_path) if stop_path else DEFAULT_STOPLIST
    records, skipped = load_records(args.input)
    report = IngestReport()
    saplings = build_saplings(records, stoplist, report)
    store.save(saplings, args.output)
    logger.info("ingested %d records into %d saplings (%d lines skipped)", len(records), len(saplings), skipped)
    return {
        "records": len(records),
        "skipped": skipped,
        "saplings": report.saplings,
        "composite_roots": report.composite_roots,
        "empty_roots": report.empty_roots,
        "leafless": report.leafless,
        "stems": len({s.stem for s in saplings}),
    }


def cmd_senses(args) -> dict:
    index = _index(args)
    stem = Grower(index).resolve_seed(args.stem)
    senses = index.senses(stem)
    doc = {"stem": stem, "passes": index.passes.get(stem, 0), "senses": [_sense_json(s) for s in senses]}
    text = json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    logger.info("stem %s: %d saplings -> %d senses in %d passes",
                stem, len(index.by_stem[stem]), len(senses), doc["passes"])
    return {"stem": stem, "saplings": len(index.by_stem[stem]), "senses": len(senses), "passes": doc["passes"]}


def cmd_grow(args) -> dict:
    index = _index(args)
    index.cluster_all()
    grower = Grower(index, debug=args.debug)
    tree = grower.grow(args.seed)
    _write_json(Path(args.out), tree.to_dict())
    if args.dot:
        Path(args.dot).write_text(tree.to_dot(), encoding="utf-8")
    st = grower.stats
    passes = list(index.passes.values())
    logger.info("grew %d nodes (depth %d); pruned %d leaves, %d shortcuts, %d mutual, %d synonyms, %d loops cut",
                len(tree), tree.max_depth(), st.pruned_leaves, st.shortcuts, st.mutual_shortcuts,
                st.synonyms, st.loops_cut)
    return {
        "seed": tree.seed_stem,
        "nodes": len(tree),
        "depth": tree.max_depth(),
        "senses": index.sense_count(),
        "max_cluster_passes": max(passes, default=0),
        "pruned_leaves": st.pruned_leaves,
        "shortcuts": st.shortcuts,
        "mutual_shortcuts": st.mutual_shortcuts,
        "synonyms": st.synonyms,
        "loops_cut": st.loops_cut,
    }


def cmd_eval(args) -> dict:
    tree = FolksonomyTree.from_dict(json.loads(Path(args.tree).read_text(encoding="utf-8")))
    tree.validate()
    metrics = evaluate(tree, ReferenceTaxonomy.load(args.reference))
    _write_json(Path(args.out), metrics)
    return metrics


def cmd_synth(args) -> dict:
    if args.branching:
        widths = [int(w) for w in args.branching.split(",")]
        gt = balanced_taxonomy(widths, args.seed)
        gt.dump(args.taxonomy)
    else:
        gt = ReferenceTaxonomy.load(args.taxonomy)
    noise = NoiseSpec.load(args.noise) if args.noise else NoiseSpec()
    records = synth_corpus(gt, args.users, noise, args.seed)
    write_records(records, args.out)
    return {
        "records": len(records),
        "users": args.users,
        "taxonomy_nodes": len(gt.nodes),
        "roots": sorted(gt.roots),
        "noise": noise.total,
    }


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="folkweave", description="Learn folksonomies from user-made hierarchies.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    parser.add_argument("--summary", type=Path, help="write the JSON run summary here instead of stderr")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    p = sub.add_parser("ingest", help="parse a JSONL corpus into saplings")
    p.add_argument("--input", required=True, type=Path)
    p.add_argument("--output", required=True, type=Path)
    p.add_argument("--stoplist", type=Path)
    p.add_argument("--config", type=Path)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("senses", help="dump the clustered senses of one stem")
    p.add_argument("--stem", required=True)
    p.add_argument("--saplings", required=True, type=Path)
    p.add_argument("--config", type=Path)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_senses)

    p = sub.add_parser("grow", help="grow a folksonomy tree from a seed")
    p.add_argument("--seed", required=True)
    p.add_argument("--saplings", required=True, type=Path)
    p.add_argument("--config", type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--dot", type=Path)
    p.add_argument("--debug", action="store_true", help="validate the tree after every edit")
    p.set_defaults(func=cmd_grow)

    p = sub.add_parser("eval", help="score a tree against a reference taxonomy")
    p.add_argument("--tree", required=True, type=Path)
    p.add_argument("--reference", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--taxonomy", required=True, type=Path, help="ground-truth TSV (written when --branching is set)")
    p.add_argument("--branching", help="comma-separated widths, e.g. 5,5, to generate the taxonomy")
    p.add_argument("--users", type=int, default=200)
    p.add_argument("--noise", type=Path)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_usage(sys.stderr)
        return EXIT_INPUT
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    started = time.perf_counter()
    summary: dict = {"command": args.command}
    try:
        summary.update(args.func(args))
        status = EXIT_OK
    except (InvariantViolation, GateViolation) as exc:
        logger.error("internal invariant violated: %s", exc)
        summary["error"] = str(exc)
        status = EXIT_INVARIANT
    except INPUT_ERRORS as exc:
        logger.error("%s", exc)
        summary["error"] = str(exc)
        status = EXIT_INPUT
    summary["status"] = status
    summary["seconds"] = round(time.perf_counter() - started, 3)
    line = json.dumps(summary, sort_keys=True)
    if args.summary:
        args.summary.write_text(line + "\n", encoding="utf-8")
    else:
        print(line, file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
