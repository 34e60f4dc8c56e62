from __future__ import annotations

import json
import subprocess
import sys

import pytest

import corpora
from folkweave import store
from folkweave.cli import main
from folkweave.config import ParseError, RangeError, dump_config, load_config, load_full_config
from folkweave.ingest import build_saplings, write_records
from folkweave.model import Params


class TestConfig:
    def test_empty_file_gives_defaults(self, tmp_path):
        path = tmp_path / "params.conf"
        path.write_text("", encoding="utf-8")
        assert load_config(path) == Params()

    def test_values_and_comments(self, tmp_path):
        path = tmp_path / "params.conf"
        path.write_text("# tuned\ntau = 0.6\nk_top_tags=30  # fewer\nstoplist = stop.txt\n", encoding="utf-8")
        cfg = load_full_config(path)
        assert cfg.params.tau == 0.6 and cfg.params.k_top_tags == 30
        assert cfg.stoplist == tmp_path / "stop.txt"

    def test_alpha_zero_is_local_only(self, tmp_path):
        path = tmp_path / "params.conf"
        path.write_text("alpha_rr=0.0\n", encoding="utf-8")
        assert load_config(path).alpha_rr == 0.0

    def test_range_error_names_key(self, tmp_path):
        path = tmp_path / "params.conf"
        path.write_text("tau=1.5\n", encoding="utf-8")
        with pytest.raises(RangeError) as err:
            load_config(path)
        assert err.value.key == "tau"

    @pytest.mark.parametrize(
        "text, line",
        [("tau 0.5\n", 1), ("\nbogus=1\n", 2), ("k_top_tags=4.5\n", 1), ("tau=0.4\ntau=0.5\n", 2)],
    )
    def test_parse_errors_carry_line(self, tmp_path, text, line):
        path = tmp_path / "params.conf"
        path.write_text(text, encoding="utf-8")
        with pytest.raises(ParseError) as err:
            load_config(path)
        assert err.value.lineno == line

    def test_dump_round_trip(self, tmp_path):
        p = Params(tau=0.55, max_depth=3)
        path = tmp_path / "params.conf"
        path.write_text(dump_config(p), encoding="utf-8")
        assert load_config(path) == p


class TestStore:
    def test_round_trip(self, tmp_path):
        saplings = build_saplings(corpora.turkey_corpus())
        path = tmp_path / "s.json"
        store.save(saplings, path)
        assert store.load(path) == saplings

    def test_version_mismatch_rejected(self, tmp_path):
        path = tmp_path / "s.json"
        store.save(build_saplings(corpora.synonym_corpus()), path)
        doc = json.loads(path.read_text(encoding="utf-8"))
        doc["version"] = 99
        path.write_text(json.dumps(doc), encoding="utf-8")
        with pytest.raises(store.StoreError, match="version"):
            store.load(path)
        doc["version"], doc["schema"] = store.VERSION, "0" * 64
        path.write_text(json.dumps(doc), encoding="utf-8")
        with pytest.raises(store.StoreError):
            store.load(path)

    def test_not_a_store(self, tmp_path):
        path = tmp_path / "x.json"
        path.write_text("[]", encoding="utf-8")
        with pytest.raises(store.StoreError):
            store.load(path)


@pytest.fixture
def workspace(tmp_path):
    corpus = tmp_path / "corpus.jsonl"
    records = corpora.shortcut_corpus()
    write_records(records, corpus)
    with open(corpus, "a", encoding="utf-8") as fh:
        fh.write("not json\n")
    (tmp_path / "ref.tsv").write_text("uk\tscotland\nscotland\tglasgow\nuk\tlondon\n", encoding="utf-8")
    (tmp_path / "params.conf").write_text("codebook_cache = codes.json\n", encoding="utf-8")
    return tmp_path


def run(args, tmp_path):
    summary = tmp_path / "summary.json"
    code = main(["--summary", str(summary), *map(str, args)])
    return code, json.loads(summary.read_text(encoding="utf-8"))


class TestCommands:
    def test_pipeline(self, workspace, capsys):
        w = workspace
        code, s = run(["ingest", "--input", w / "corpus.jsonl", "--output", w / "saplings.json"], w)
        assert code == 0 and s["skipped"] == 1 and s["saplings"] == 8

        code, s = run(
            ["grow", "--seed", "UK", "--saplings", w / "saplings.json", "--config", w / "params.conf",
             "--out", w / "tree.json", "--dot", w / "tree.dot"],
            w,
        )
        assert code == 0 and s["shortcuts"] == 1
        assert (w / "codes.json").exists()
        tree = json.loads((w / "tree.json").read_text(encoding="utf-8"))
        assert tree["stem"] == "uk"
        assert [c["stem"] for c in tree["children"]] == ["edinburgh", "london", "scotland"]
        assert (w / "tree.dot").read_text(encoding="utf-8").startswith("digraph")

        code, s = run(["eval", "--tree", w / "tree.json", "--reference", w / "ref.tsv", "--out", w / "m.json"], w)
        assert code == 0
        metrics = json.loads((w / "m.json").read_text(encoding="utf-8"))
        assert set(metrics) == {"leaves", "aut", "overlap_leaves", "lexical_recall", "fmto", "avg_depth"}
        assert metrics["fmto"] == 1.0 and metrics["lexical_recall"] == 1.0

        capsys.readouterr()
        code, s = run(["senses", "--stem", "Scotland", "--saplings", w / "saplings.json"], w)
        assert code == 0 and s["senses"] == 1
        dumped = json.loads(capsys.readouterr().out)
        assert dumped["stem"] == "scotland" and len(dumped["senses"]) == 1

    def test_synth(self, tmp_path):
        noise = tmp_path / "noise.conf"
        noise.write_text("combined=0.05\n", encoding="utf-8")
        args = ["synth", "--taxonomy", tmp_path / "gt.tsv", "--branching", "2,2", "--users", 10,
                "--noise", noise, "--seed", 3, "--out", tmp_path / "c.jsonl"]
        code, s = run(args, tmp_path)
        assert code == 0 and s["taxonomy_nodes"] == 7
        first = (tmp_path / "c.jsonl").read_bytes()
        args[3:5] = []  # reuse the written taxonomy
        assert run(args, tmp_path)[0] == 0
        assert (tmp_path / "c.jsonl").read_bytes() == first

    def test_input_errors_exit_1(self, tmp_path):
        assert run(["ingest", "--input", tmp_path / "missing.jsonl", "--output", tmp_path / "s.json"], tmp_path)[0] == 1
        bad = tmp_path / "bad.conf"
        bad.write_text("tau=2\n", encoding="utf-8")
        store.save(build_saplings(corpora.synonym_corpus()), tmp_path / "s.json")
        code, s = run(["grow", "--seed", "anim", "--saplings", tmp_path / "s.json", "--config", bad,
                       "--out", tmp_path / "t.json"], tmp_path)
        assert code == 1 and "tau" in s["error"]
        code, s = run(["grow", "--seed", "zebra", "--saplings", tmp_path / "s.json", "--out", tmp_path / "t.json"],
                      tmp_path)
        assert code == 1

    def test_invariant_violation_exit_2(self, tmp_path, monkeypatch):
        from folkweave import cli
        from folkweave.model import InvariantViolation

        class Broken(cli.Grower):
            def grow(self, seed):
                raise InvariantViolation("boom")

        monkeypatch.setattr(cli, "Grower", Broken)
        store.save(build_saplings(corpora.synonym_corpus()), tmp_path / "s.json")
        code, s = run(["grow", "--seed", "anim", "--saplings", tmp_path / "s.json", "--out", tmp_path / "t.json"],
                      tmp_path)
        assert code == 2 and s["error"] == "boom"


def test_unknown_subcommand_prints_usage():
    proc = subprocess.run([sys.executable, "-m", "folkweave", "frobnicate"], capture_output=True, text=True)
    assert proc.returncode == 1
    assert "usage:" in proc.stderr


def test_no_subcommand():
    proc = subprocess.run([sys.executable, "-m", "folkweave"], capture_output=True, text=True)
    assert proc.returncode == 1 and "usage:" in proc.stderr
