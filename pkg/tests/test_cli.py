import json
import logging
import subprocess
import sys
from pathlib import Path

import pytest

from corefid.cli import main
from corefid.clustering import parse_predictions
from corefid.corpus import dump_corpus, gold_singletons, load_corpus
from corefid.metrics import conll_avg

FIXTURES = Path(__file__).parent / "fixtures"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--seed", "4", "--docs", "3", "--out", str(root / "c.jsonl"),
                 "--embeddings", str(root / "e.txt"), "--dim", "6"]) == 0
    return root


def train_args(ws, out, *extra):
    return ["train", "--corpus", ws / "c.jsonl", "--embeddings", ws / "e.txt", "--model-dir", out,
            "--epochs", "1", "--seed", "2", *extra]


@pytest.fixture(scope="module")
def models(workspace):
    assert main([str(a) for a in train_args(workspace, workspace / "m")]) == 0
    return workspace / "m"


class TestValidate:
    def test_valid(self, capsys, workspace):
        code, out, _ = run(capsys, "validate", workspace / "c.jsonl")
        assert code == 0 and "3 documents, 0 errors" in out

    def test_corrupted_entity(self, capsys, workspace, tmp_path):
        lines = (workspace / "c.jsonl").read_text().splitlines()
        rec = json.loads(lines[1])
        rec["entities"][0][0] = "m999"
        lines[1] = json.dumps(rec)
        (tmp_path / "bad.jsonl").write_text("\n".join(lines) + "\n")
        code, out, _ = run(capsys, "validate", tmp_path / "bad.jsonl")
        assert code == 1
        assert rec["doc_id"] in out and "m999" in out and "1 errors" in out

    def test_empty(self, capsys, tmp_path):
        (tmp_path / "e.jsonl").write_text("")
        code, out, _ = run(capsys, "validate", tmp_path / "e.jsonl")
        assert code == 0 and "0 documents" in out

    def test_unreadable(self, capsys, tmp_path):
        code, _, err = run(capsys, "validate", tmp_path / "missing.jsonl")
        assert code == 1 and "cannot read" in err


class TestGenPairs:
    def test_counts(self, capsys, workspace):
        code, out, err = run(capsys, "gen-pairs", "--corpus", workspace / "c.jsonl")
        docs = load_corpus(workspace / "c.jsonl")
        assert code == 0
        assert len(out.splitlines()) == sum(len(d.mentions) * (len(d.mentions) - 1) // 2 for d in docs)
        assert "positive" in err

    def test_reduced_flagged(self, capsys, workspace):
        code, _, err = run(capsys, "gen-pairs", "--corpus", workspace / "c.jsonl", "--pairs", "reduced")
        assert code == 0 and "approximation" in err


class TestTrain:
    def test_outputs(self, capsys, workspace, models):
        for name in ("coref.knn", "singleton.knn"):
            assert (models / name).exists()
            meta = json.loads((models / (name + ".json")).read_text())
            assert meta["seed"] == 2
        assert json.loads((models / "coref.knn.json").read_text())["pair_strategy"] == "default"

    def test_deterministic(self, capsys, workspace, models, tmp_path):
        assert run(capsys, *train_args(workspace, tmp_path / "again"))[0] == 0
        for name in ("coref.knn", "singleton.knn", "coref.knn.json", "singleton.knn.json"):
            assert (models / name).read_bytes() == (tmp_path / "again" / name).read_bytes()

    def test_logs_pairs_and_losses(self, capsys, workspace, tmp_path, caplog):
        with caplog.at_level(logging.INFO, logger="corefid"):
            code, out, _ = run(capsys, *train_args(workspace, tmp_path / "m", "--target", "coref"))
        assert code == 0 and "[coref] epoch 1/1 loss" in out
        docs = load_corpus(workspace / "c.jsonl")
        n = len(docs[0].mentions)
        assert f"{docs[0].doc_id}: {n} mentions -> {n * (n - 1) // 2} pairs" in caplog.text

    def test_wu_ma(self, capsys, workspace, tmp_path):
        code, out, _ = run(capsys, *train_args(workspace, tmp_path / "w", "--preset", "wu_ma", "--features", "2"))
        assert code == 0 and "[singleton] epoch 1/1" in out and "[coref] epoch 1/1" in out

    def test_missing_embeddings(self, capsys, workspace, tmp_path):
        code, _, err = run(capsys, "train", "--corpus", workspace / "c.jsonl", "--model-dir", tmp_path)
        assert code == 1 and "embeddings" in err

    def test_empty_corpus(self, capsys, workspace, tmp_path):
        (tmp_path / "e.jsonl").write_text("")
        code, _, err = run(capsys, "train", "--corpus", tmp_path / "e.jsonl", "--embeddings", workspace / "e.txt",
                           "--model-dir", tmp_path / "m")
        assert code == 1 and "empty" in err

    def test_config_file_flags_win(self, capsys, workspace, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"epochs": 3, "target": "singleton", "features": "words,mention",
                                   "corpus": str(workspace / "c.jsonl")}))
        code, out, _ = run(capsys, "train", "--config", cfg, "--embeddings", workspace / "e.txt",
                           "--model-dir", tmp_path / "m", "--epochs", "2")
        assert code == 0 and "epoch 2/2" in out and "epoch 3/3" not in out
        meta = json.loads((tmp_path / "m" / "singleton.knn.json").read_text())
        assert meta["selection"] == {"use_context": False, "use_mention_feats": True, "use_mention_words": True}

    def test_bad_config_key(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text('{"colour": "blue"}')
        with pytest.raises(SystemExit) as exc:
            main(["validate", "--config", str(cfg), "x"])
        assert exc.value.code == 2


class TestResolve:
    def test_gold_mode(self, capsys, workspace, models, tmp_path):
        out = tmp_path / "p.jsonl"
        code, _, _ = run(capsys, "resolve", "--corpus", workspace / "c.jsonl", "--embeddings", workspace / "e.txt",
                         "--model-dir", models, "--singleton-mode", "gold", "--out", out)
        assert code == 0
        preds = parse_predictions(out.open("rb"))
        for doc in load_corpus(workspace / "c.jsonl"):
            for mid in gold_singletons(doc):
                assert frozenset({mid}) in preds[doc.doc_id]
            assert set().union(*preds[doc.doc_id]) == {m.id for m in doc.mentions}

    def test_trained_mode(self, capsys, workspace, models):
        code, out, _ = run(capsys, "resolve", "--corpus", workspace / "c.jsonl", "--embeddings", workspace / "e.txt",
                           "--model-dir", models, "--singleton-mode", "trained", "--link-threshold", "0.5")
        assert code == 0 and len(out.splitlines()) == 3

    def test_random_scorer_repeatable_and_job_invariant(self, capsys, workspace):
        base = ["resolve", "--corpus", workspace / "c.jsonl", "--scorer", "random", "--seed", "1"]
        _, a, _ = run(capsys, *base)
        _, b, _ = run(capsys, *base)
        _, c, _ = run(capsys, *base, "--jobs", "3")
        assert a == b == c
        assert all(json.loads(line)["seed"] == 1 for line in a.splitlines())

    def test_dimension_mismatch(self, capsys, workspace, models, tmp_path):
        (tmp_path / "e.txt").write_text("1 3\nx 1 2 3\n")
        code, _, err = run(capsys, "resolve", "--corpus", workspace / "c.jsonl", "--embeddings", tmp_path / "e.txt",
                           "--model-dir", models)
        assert code == 1 and "6-dimensional" in err

    def test_bad_threshold(self, capsys, workspace):
        with pytest.raises(SystemExit) as exc:
            main(["resolve", "--corpus", str(workspace / "c.jsonl"), "--link-threshold", "2"])
        assert exc.value.code == 2


class TestScore:
    def key_as_predictions(self, ws, path):
        with path.open("w") as fh:
            for doc in load_corpus(ws / "c.jsonl"):
                ents = [list(e) for e in doc.entities] + [[m] for m in sorted(gold_singletons(doc))]
                fh.write(json.dumps({"doc_id": doc.doc_id, "system_entities": ents}) + "\n")

    def test_perfect(self, capsys, workspace, tmp_path):
        self.key_as_predictions(workspace, tmp_path / "p.jsonl")
        code, out, _ = run(capsys, "score", workspace / "c.jsonl", tmp_path / "p.jsonl", "--json", tmp_path / "r.json")
        assert code == 0
        assert out.count("100.00") == 10
        record = json.loads(out.splitlines()[-1])
        assert record == json.loads((tmp_path / "r.json").read_text())
        assert record["conll_avg_f1"] == 100.0

    def test_mismatched_documents(self, capsys, workspace, tmp_path):
        docs = load_corpus(workspace / "c.jsonl")
        with (tmp_path / "k.jsonl").open("w") as fh:
            dump_corpus(docs[:2], fh)
        self.key_as_predictions(workspace, tmp_path / "p.jsonl")
        code, _, err = run(capsys, "score", tmp_path / "k.jsonl", tmp_path / "p.jsonl")
        assert code == 1 and docs[2].doc_id in err

    def test_table_ii_fixture(self):
        stored = json.loads((FIXTURES / "table2_random_baseline.json").read_text())
        f1s = [stored[k]["f1"] for k in ("muc", "b_cubed", "ceaf_e")]
        assert f"{conll_avg(*f1s):.2f}" == f"{stored['conll_avg_f1']:.2f}" == "7.00"


class TestBaseline:
    def test_runs(self, capsys, workspace, tmp_path):
        code, out, _ = run(capsys, "baseline", "--corpus", workspace / "c.jsonl", "--seed", "3",
                           "--out", tmp_path / "b.jsonl")
        assert code == 0 and "CoNLL Average F1" in out
        assert len((tmp_path / "b.jsonl").read_text().splitlines()) == 3


class TestEntryPoints:
    def test_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_module_invocation(self, workspace):
        proc = subprocess.run([sys.executable, "-m", "corefid", "validate", str(workspace / "c.jsonl")],
                              capture_output=True, text=True)
        assert proc.returncode == 0 and "0 errors" in proc.stdout
