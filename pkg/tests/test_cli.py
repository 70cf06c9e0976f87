import csv
import json

import pytest

from crossgp.cli import MANIFEST_NAME, SUMMARY_COLUMNS, derive_seed, dispatch

SMALL_SYNTH = ["--subjects", "3", "--days", "20", "--seed", "5"]
FAST = {
    "lr": ["--lr-epochs", "50"],
    "rf": ["--n-trees", "5"],
    "gbt": ["--rounds", "5"],
    "crossgp": ["--epochs", "3", "--hidden", "8"],
}


def run(*argv):
    return dispatch([str(a) for a in argv])


def pipeline(root, kinds=("lr", "rf", "gbt", "crossgp")):
    raw, bundles, work, reports = root / "raw", root / "bundles", root / "work", root / "reports"
    assert run("synth", *SMALL_SYNTH, "--out", raw) == 0
    assert run("ingest", "--cgm", raw / "cgm.csv", "--bolus", raw / "bolus.csv", "--meal", raw / "meal.csv",
               "--out", bundles, "--strict") == 0
    assert run("featurize", "--raw", bundles, "--out", work / "features.csv") == 0
    assert run("pair", "--features", work / "features.csv", "--out", work / "examples.csv") == 0
    for kind in kinds:
        model = root / "models" / f"{kind}.json"
        assert run("train", "--model", kind, "--examples", work / "examples.csv", "--out", model,
                   "--seed", 3, *FAST[kind]) == 0
        assert run("evaluate", "--model", model, "--examples", work / "examples.csv",
                   "--report", reports / f"{kind}.json") == 0
        assert run("importance", "--model", model, "--examples", work / "examples.csv", "--repeats", 2,
                   "--out", reports / f"{kind}_importance.json") == 0
    assert run("report", "--reports", reports, "--out", root / "summary" / "summary.csv") == 0
    return root


@pytest.fixture(scope="module")
def piped(tmp_path_factory):
    return pipeline(tmp_path_factory.mktemp("pipe"))


class TestSeeds:
    def test_known_values(self):
        # first four bytes of sha256("42:synth") = 05 6e e4 15, read little-endian
        assert derive_seed(42, "synth") == 0x15E46E05 == 367291909
        assert derive_seed(0, "crossgp") == 0xBE14571B

    def test_modules_differ(self):
        assert len({derive_seed(1, m) for m in ("synth", "augment", "rf", "gbt", "crossgp")}) == 5


class TestDispatch:
    def test_help(self, capsys):
        assert run("--help") == 0
        out = capsys.readouterr().out
        for sub in ("synth", "ingest", "featurize", "pair", "train", "evaluate", "importance", "report"):
            assert sub in out

    def test_no_subcommand(self):
        assert dispatch([]) == 1

    def test_unknown_subcommand(self):
        assert run("frobnicate") == 1

    def test_missing_flag(self):
        assert run("synth") == 1

    def test_bogus_model(self, piped, capsys):
        code = run("train", "--model", "bogus", "--examples", piped / "work" / "examples.csv",
                   "--out", piped / "x" / "m.json")
        assert code == 1
        err = capsys.readouterr().err
        for kind in ("lr", "rf", "gbt", "crossgp"):
            assert kind in err
        assert not (piped / "x").exists()

    def test_missing_input_is_io_error(self, tmp_path):
        assert run("pair", "--features", tmp_path / "nope.csv", "--out", tmp_path / "e.csv") == 2

    def test_strict_ingest_rejects_bad_row(self, tmp_path):
        raw = tmp_path / "raw"
        assert run("synth", "--subjects", 1, "--days", 2, "--out", raw) == 0
        with open(raw / "cgm.csv", "a") as fh:
            fh.write("S01,2013-99-01T00:00,100\n")
        args = ["ingest", "--cgm", raw / "cgm.csv", "--bolus", raw / "bolus.csv", "--meal", raw / "meal.csv"]
        assert run(*args, "--out", tmp_path / "b1", "--strict") == 1
        assert run(*args, "--out", tmp_path / "b2") == 0

    def test_bad_mix(self, tmp_path):
        assert run("synth", "--mix", "0.5,0.5", "--out", tmp_path) == 1
        assert run("synth", "--mix", "0.5,0.4,0.4", "--out", tmp_path) == 1


class TestPipeline:
    def test_report_structure(self, piped):
        rep = json.loads((piped / "reports" / "crossgp.json").read_text())
        assert set(rep["classes"]) == {"Good", "Moderate", "Poor"}
        for block in rep["classes"].values():
            assert set(block) == {"precision", "f1", "recall", "support"}
        assert set(rep["overall"]) == {"accuracy", "macro_precision"}
        assert sum(map(sum, rep["confusion"])) == rep["n_examples"]

    def test_model_json(self, piped):
        d = json.loads((piped / "models" / "crossgp.json").read_text())
        assert d["kind"] == "crossgp" and d["schema_version"] == 1
        assert len(d["normalization"]["mean"]) == 7
        assert d["hyperparameters"]["seed"] == derive_seed(3, "crossgp")

    def test_importance_json(self, piped):
        d = json.loads((piped / "reports" / "gbt_importance.json").read_text())
        assert d["method"] == "permutation"
        assert sum(d["scores"]) == pytest.approx(1.0, abs=1e-9)
        assert len(d["top3"]) == 3

    def test_native_importance(self, piped, tmp_path):
        out = tmp_path / "imp.json"
        assert run("importance", "--model", piped / "models" / "lr.json", "--examples",
                   piped / "work" / "examples.csv", "--method", "native", "--out", out) == 0
        assert json.loads(out.read_text())["method"] == "native"
        assert run("importance", "--model", piped / "models" / "crossgp.json", "--examples",
                   piped / "work" / "examples.csv", "--method", "native", "--out", tmp_path / "n.json") == 1

    def test_summary_csv(self, piped):
        with open(piped / "summary" / "summary.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert tuple(rows[0]) == SUMMARY_COLUMNS
        kinds = {r["run"]: r["model_kind"] for r in rows}
        assert kinds["crossgp"] == "crossgp" and kinds["lr_importance"] == "lr"

    def test_one_manifest_per_directory(self, piped):
        for sub in ("raw", "bundles", "work", "models", "reports", "summary"):
            manifests = list((piped / sub).glob("manifest*.json"))
            assert [m.name for m in manifests] == [MANIFEST_NAME]
        runs = json.loads((piped / "models" / MANIFEST_NAME).read_text())["runs"]
        assert set(runs) == {"lr.json", "rf.json", "gbt.json", "crossgp.json"}
        entry = runs["crossgp.json"]
        assert entry["command"] == "train" and entry["seed"] == 3
        assert all(len(digest) == 64 for digest in entry["inputs"].values())

    def test_featurize_from_raw_matches_bundles(self, piped, tmp_path):
        assert run("featurize", "--raw", piped / "raw", "--out", tmp_path / "f.csv") == 0
        assert (tmp_path / "f.csv").read_bytes() == (piped / "work" / "features.csv").read_bytes()

    def test_rerun_is_byte_identical(self, piped, tmp_path):
        again = pipeline(tmp_path, kinds=("gbt", "crossgp"))
        for rel in ("models/gbt.json", "models/crossgp.json", "reports/crossgp.json", "reports/gbt_importance.json"):
            assert (again / rel).read_bytes() == (piped / rel).read_bytes(), rel
