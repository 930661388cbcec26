import json

import numpy as np
import pytest

from flipdetect.cli import main
from flipdetect.data import Difficulty, categorize_difficulty, load_csv, save_csv
from flipdetect.detector import EXIT_CLEAN, EXIT_ERROR, EXIT_POISONED

from conftest import blobs


def run(*argv):
    return main([str(a) for a in argv])


def test_count_zero_is_usage_error(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        run("synth", "--count", 0, "--out", tmp_path)
    assert exc.value.code == 2
    assert "--count" in capsys.readouterr().err


def test_synth_easy_regrades(tmp_path):
    assert run("synth", "--count", 50, "--difficulty", "easy", "--seed", 3, "--out", tmp_path) == 0
    files = sorted(tmp_path.glob("*.csv"))
    assert len(files) == 50
    for f in files:
        ds = load_csv(f)
        assert categorize_difficulty(ds, ds.meta["seed"]) is Difficulty.EASY
    run_json = json.loads((tmp_path / "run.json").read_text())
    assert run_json["seed"] == 3 and run_json["count"] == 50


def test_synth_noise_grid(tmp_path):
    assert run("synth", "--noise-grid", "0:0.40:0.05", "--count", 50, "--out", tmp_path) == 0
    assert len(list(tmp_path.glob("*.csv"))) == 450
    assert len(list(tmp_path.glob("*.meta.json"))) == 450


def test_attack_rate_zero_is_identity(tmp_path):
    src = tmp_path / "in.csv"
    save_csv(blobs(n=40), src)
    out = tmp_path / "out"
    assert run("attack", "--attack", "falfa", "--rate", 0, "--in", src, "--out", out) == 0
    (target,) = out.glob("*.csv")
    assert target.read_bytes() == src.read_bytes()


def test_attack_sln_lists_flips(tmp_path):
    src = tmp_path / "in.csv"
    save_csv(blobs(n=100), src)
    assert run("attack", "--attack", "sln", "--rate", 0.2, "--in", src, "--out", tmp_path / "o") == 0
    (meta,) = (tmp_path / "o").glob("*.meta.json")
    side = json.loads(meta.read_text())
    assert len(side["flipped_indices"]) == 20 and side["attack"] == "sln"


def test_unknown_attack(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        run("attack", "--attack", "nope", "--rate", 0.1, "--in", "x.csv", "--out", tmp_path)
    assert exc.value.code == 2
    err = capsys.readouterr().err
    assert all(name in err for name in ("sln", "falfa", "alfa"))


def test_detect_without_model(tmp_path, capsys):
    save_csv(blobs(n=40), tmp_path / "d.csv")
    assert run("detect", "--in", tmp_path / "d.csv", "--out", tmp_path) == EXIT_ERROR
    assert "--model" in capsys.readouterr().err


def test_missing_db_hint(tmp_path, capsys):
    assert run("train-meta", "--db", tmp_path / "none.csv", "--out", tmp_path) == EXIT_ERROR
    assert "build-metadb" in capsys.readouterr().err


def test_cmeasures_dump(tmp_path, capsys):
    save_csv(blobs(n=40), tmp_path / "d.csv")
    assert run("cmeasures", "--in", tmp_path / "d.csv", "--out", tmp_path) == 0
    values = json.loads(capsys.readouterr().out)
    assert len(values) == 27 and list(values)[0] == "F1"


@pytest.fixture(scope="module")
def smoke(tmp_path_factory):
    root = tmp_path_factory.mktemp("smoke")
    data, out = root / "data", root / "out"
    assert run("synth", "--count", 10, "--difficulty", "easy", "--seed", 5, "--out", data) == 0
    held = sorted(data.glob("*.csv"))[-1]
    held.rename(root / held.name)
    held.with_name(held.stem + ".meta.json").rename(root / (held.stem + ".meta.json"))
    (data / "run.json").unlink()
    assert run("build-metadb", "--data", data, "--out", out) == 0
    assert run("train-meta", "--db", out / "metadb.csv", "--out", out) == 0
    return root, root / held.name, out / "meta_learner.json"


def test_end_to_end_clean_dataset(smoke, tmp_path):
    root, held, model = smoke
    code = run("detect", "--in", held, "--model", model, "--out", tmp_path)
    verdict = json.loads((tmp_path / "verdict.json").read_text())
    assert code == EXIT_CLEAN, verdict
    assert not verdict["poisoned"]


def test_end_to_end_poisoned_dataset(smoke, tmp_path):
    root, held, model = smoke
    assert run("attack", "--attack", "falfa", "--rate", 0.3, "--in", held, "--out", tmp_path) == 0
    (poisoned,) = tmp_path.glob("*-falfa-*.csv")
    code = run("detect", "--in", poisoned, "--model", model, "--out", tmp_path / "v")
    verdict = json.loads((tmp_path / "v" / "verdict.json").read_text())
    assert code == EXIT_POISONED, verdict
