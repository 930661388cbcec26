import numpy as np
import pytest

from conftest import blobs
from flipdetect import metadb
from flipdetect.classifiers import TrainConfig
from flipdetect.data import SchemaError

RATES = (0.05, 0.10, 0.15, 0.20, 0.25, 0.30)


@pytest.fixture(scope="module")
def easy_db():
    return metadb.build([blobs(n=250, sep=6.0, d=4, seed=1)], RATES, attacks=("sln", "falfa"))


def test_row_count(easy_db):
    assert len(easy_db) == 13 == metadb.expected_row_count(1, 6)
    assert easy_db.rows[0].variant == "clean"


def test_attack_effect_in_rows(easy_db):
    clean = easy_db.rows[0]
    falfa30 = next(r for r in easy_db.rows if r.variant == "falfa" and r.rate == 0.30)
    assert clean.acc_clean >= 0.9
    assert clean.acc_clean - falfa30.acc_clean >= 0.10


def test_rows_share_one_split(easy_db):
    idx = {(r.train_idx, r.test_idx) for r in easy_db.rows}
    assert len(idx) == 1
    tr, te = idx.pop()
    assert not set(tr) & set(te)


def test_columns():
    cols = metadb.columns()
    assert len(cols) == 33
    assert cols[:4] == ["dataset_id", "variant", "rate", "seed"]
    assert cols[-2:] == ["acc_clean", "acc_train_poisoned"]


def test_save_load_identity(easy_db, tmp_path):
    metadb.save(easy_db, tmp_path / "db.csv")
    back = metadb.load(tmp_path / "db.csv")
    assert back.rows == easy_db.rows
    np.testing.assert_array_equal(back.features(), easy_db.features())
    assert back.build_config["rates"] == list(RATES)


def test_missing_column_is_schema_error(easy_db, tmp_path):
    metadb.save(easy_db, tmp_path / "db.csv")
    lines = (tmp_path / "db.csv").read_text().splitlines()
    cols = lines[1].split(",")
    k = cols.index("acc_clean")
    cut = [",".join(v for j, v in enumerate(line.split(",")) if j != k) for line in lines[1:]]
    (tmp_path / "bad.csv").write_text("\n".join([lines[0]] + cut) + "\n")
    with pytest.raises(SchemaError, match="acc_clean"):
        metadb.load(tmp_path / "bad.csv")


def test_version_mismatch(tmp_path):
    (tmp_path / "v.csv").write_text("# schema_version=99\n")
    with pytest.raises(SchemaError):
        metadb.load(tmp_path / "v.csv")


def test_thread_count_does_not_change_output(tmp_path):
    sets = [blobs(n=60, sep=3.0, seed=s) for s in range(3)]
    cfg = TrainConfig(epochs=15)
    for threads in (1, 3):
        db = metadb.build(sets, (0.1, 0.2), cfg=cfg, threads=threads)
        metadb.save(db, tmp_path / f"t{threads}.csv")
    assert (tmp_path / "t1.csv").read_bytes() == (tmp_path / "t3.csv").read_bytes()
    assert (tmp_path / "t1.config.json").read_bytes() == (tmp_path / "t3.config.json").read_bytes()


def test_duplicate_names_rejected():
    ds = blobs(n=40)
    with pytest.raises(ValueError):
        metadb.build([ds, ds], (0.1,))


def test_failures_tolerated_then_fatal(monkeypatch):
    real = metadb.run_attack

    def flaky(name, train, rate, *a, **k):
        if name == "falfa" and (rate == 0.2 or fail_all):
            raise RuntimeError("boom")
        return real(name, train, rate, *a, **k)

    monkeypatch.setattr(metadb, "run_attack", flaky)
    cfg = TrainConfig(epochs=5)
    fail_all = False
    db = metadb.build([blobs(n=40)], (0.1, 0.2), cfg=cfg)
    assert len(db) == 4
    assert [f[1:3] for f in db.build_config["failures"]] == [("falfa", 0.2)]
    fail_all = True
    with pytest.raises(metadb.BuildError):
        metadb.build([blobs(n=40)], (0.1, 0.2), cfg=cfg)
