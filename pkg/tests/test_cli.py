import json

import numpy as np
import pytest

from rlskit import bigarray
from rlskit.cli import main

from conftest import two_blobs


@pytest.fixture
def workdir(tmp_path):
    rng = np.random.default_rng(0)
    for name, n_per in (("train", 40), ("test", 15)):
        x, y = two_blobs(rng, n_per=n_per, sep=10.0)
        rows = [f"{a!r},{b!r},{lab}" for (a, b), lab in zip(x.tolist(), y)]
        (tmp_path / f"{name}.csv").write_text("\n".join(rows) + "\n")
    return tmp_path


def write_config(workdir, **overrides):
    doc = {
        "name": "blobs",
        "dataset": {"path": "train.csv", "test_path": "test.csv"},
        "pipeline": ["split:holdout", "kernel:gaussian", "paramsel:hodual",
                     "rls:dual", "pred:dual", "perf:accuracy"],
        "options": {"split": {"fraction": 0.2, "seed": 0},
                    "paramsel": {"n_lambdas": 40}},
        "output": "report.json",
    }
    doc.update(overrides)
    path = workdir / "cfg.json"
    path.write_text(json.dumps(doc))
    return path


def test_run_writes_report(workdir, capsys):
    assert main(["run", str(write_config(workdir))]) == 0
    report = json.loads((workdir / "report.json").read_text())
    assert report["performance"]["accuracy"] == 1.0
    assert report["dataset"]["n"] == 80 and report["dataset"]["T"] == 2
    assert set(report["timing"]["stages"]) >= {"load", "split", "kernel", "perf"}
    assert json.loads(capsys.readouterr().out)["accuracy"] == 1.0


def test_run_is_deterministic(workdir):
    cfg = write_config(workdir)
    out = []
    for name in ("a.json", "b.json"):
        assert main(["run", str(cfg), "--seed", "3", "--output", str(workdir / name)]) == 0
        d = json.loads((workdir / name).read_text())
        d.pop("timing")
        out.append(d)
    assert out[0] == out[1]


def test_threads_option(workdir):
    assert main(["run", str(write_config(workdir)), "--threads", "1"]) == 0


def test_bad_pipeline_is_config_error(workdir, capsys):
    cfg = write_config(workdir, pipeline=["split:holdout", "rls:dual"])
    assert main(["run", str(cfg)]) == 2
    assert not (workdir / "report.json").exists()
    assert "error" in capsys.readouterr().err


def test_unknown_task_is_config_error(workdir):
    assert main(["run", str(write_config(workdir, pipeline=["kernel:poly"]))]) == 2


def test_missing_config(tmp_path):
    assert main(["run", str(tmp_path / "nope.json")]) == 2


def test_bad_data_is_data_error(workdir):
    (workdir / "train.csv").write_text("1,2,0\n1,x,1\n")
    assert main(["run", str(write_config(workdir))]) == 3
    assert not (workdir / "report.json").exists()
    assert not (workdir / "report.json.partial").exists()


def test_singular_system_is_numeric_error(workdir):
    cfg = write_config(workdir, pipeline=["paramsel:fixed", "rls:primal"],
                       options={"paramsel": {"lambda": 0.0}},
                       preprocess={"standardize": False, "bias": True})
    (workdir / "train.csv").write_text("1,1,0\n1,1,1\n2,2,0\n")
    assert main(["run", str(cfg)]) == 4


def test_convert_and_info(workdir, capsys):
    out = workdir / "train.gba"
    assert main(["convert", str(workdir / "train.csv"), str(out), "--chunk-rows", "7"]) == 0
    capsys.readouterr()
    ba = bigarray.ba_open(out)
    assert (ba.rows, ba.cols, ba.chunk_rows) == (80, 2, 7)
    assert main(["info", str(out)]) == 0
    assert json.loads(capsys.readouterr().out)["n_chunks"] == 12
    assert main(["info", str(workdir / "test.csv")]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["n"] == 30 and info["T"] == 2


def test_convert_missing_input(workdir):
    assert main(["convert", str(workdir / "none.csv"), str(workdir / "o.gba")]) == 3


def test_info_corrupt_file(workdir):
    (workdir / "bad.gba").write_bytes(b"GBA1" + bytes(20))
    assert main(["info", str(workdir / "bad.gba")]) == 3


def test_bench(workdir, capsys):
    assert main(["bench", str(write_config(workdir)), "--repeat", "2",
                 "--output", str(workdir / "bench.json")]) == 0
    summary = json.loads((workdir / "bench.json").read_text())
    assert summary["repeat"] == 2 and summary["accuracy"] == 1.0
    assert summary["total_seconds"]["min"] <= summary["total_seconds"]["mean"]
    assert "kernel" in summary["stage_seconds"]
