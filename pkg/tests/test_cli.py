import json
import os

import pytest

from metric_knn_lab import cli
from metric_knn_lab.cli import EXPERIMENTS, Outcome, list_experiments, main, resolve_config
from metric_knn_lab.config import ConfigError

FAST = {
    "weak-consistency": ["--model", "uniform1", "--eta", "coordinate", "--n-grid", "[20,40]", "--test-size", "50", "--trials", "2"],
    "strong-path": ["--model", "uniform1", "--eta", "coordinate", "--n-max", "60", "--points", "3", "--test-size", "50"],
    "prop12": ["--horizon", "4", "--trials", "50"],
    "lb-check": ["--model", "uniform1", "--eta", "coordinate", "--r-grid", "[0.2,0.1]", "--M", "100"],
    "dgkl-sweep": ["--model", "nested", "--alphas", "[0.1,0.01]", "--points", "2", "--M", "500"],
    "concentration": ["--model", "uniform1", "--eta", "coordinate", "--n", "100", "--k", "5", "--trials", "5", "--M-eval", "50"],
    "koranyi": ["--N", "5"],
}


def _run(tmp_path, name, *extra):
    return main(["run", name, "--seed", "7", "--outdir", str(tmp_path), *FAST[name], *extra])


def test_list_order_and_output(capsys):
    names = [n for n, _ in list_experiments()]
    assert names == ["weak-consistency", "strong-path", "prop12", "lb-check", "dgkl-sweep", "concentration", "koranyi"]
    assert main(["list"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == len(names) and out[0].startswith("weak-consistency")


def test_fast_table_covers_every_experiment():
    assert set(FAST) == {e.name for e in EXPERIMENTS}


@pytest.mark.parametrize("name", list(FAST))
def test_every_experiment_runs(tmp_path, name):
    assert _run(tmp_path, name) == 0
    csv_path = tmp_path / f"{name}-7.csv"
    man = json.loads((tmp_path / f"{name}-7.manifest.json").read_text())
    assert csv_path.read_text().count("\n") == man["rows"] + 1
    assert man["experiment"] == name and man["seed"] == 7 and man["violations"] == []
    assert man["kernel_backend"] in ("cython", "python")
    assert len(man["config_sha256"]) == 64


@pytest.mark.parametrize("name", ["prop12", "dgkl-sweep", "concentration"])
def test_rerun_is_byte_identical(tmp_path, name):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _run(a, name) == 0 and _run(b, name) == 0
    for suffix in (".csv", ".manifest.json"):
        assert (a / f"{name}-7{suffix}").read_bytes() == (b / f"{name}-7{suffix}").read_bytes()


def test_thread_count_does_not_change_output(tmp_path):
    assert _run(tmp_path / "a", "weak-consistency", "--threads", "1") == 0
    assert _run(tmp_path / "b", "weak-consistency", "--threads", "3") == 0
    name = "weak-consistency-7.csv"
    assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_dgkl_columns(tmp_path):
    assert _run(tmp_path, "dgkl-sweep") == 0
    header = (tmp_path / "dgkl-sweep-7.csv").read_text().splitlines()[0].split(",")
    assert header == ["alpha", "d_measure", "stderr", "d_mean", "bound_4a", "violations", "ratio", "exact_lower", "exact_d_limit", "exact_ratio"]


def test_koranyi_rows(tmp_path):
    assert _run(tmp_path, "koranyi") == 0
    lines = (tmp_path / "koranyi-7.csv").read_text().splitlines()
    assert len(lines) == 6 and "p_x" in lines[0]


def test_missing_seed(tmp_path, capsys):
    assert main(["run", "koranyi", "--outdir", str(tmp_path)]) == 1
    assert "seed is required" in capsys.readouterr().err


@pytest.mark.parametrize("seed", ["-1", str(2**64), "abc"])
def test_bad_seed(tmp_path, seed):
    assert main(["run", "koranyi", "--seed", seed, "--outdir", str(tmp_path)]) == 1


def test_unknown_experiment(tmp_path):
    assert main(["run", "nope", "--seed", "1", "--outdir", str(tmp_path)]) == 1


def test_flag_for_other_experiment(tmp_path):
    assert main(["run", "koranyi", "--seed", "1", "--alphas", "[0.1]", "--outdir", str(tmp_path)]) == 1


def test_unknown_cli_flag():
    with pytest.raises(SystemExit) as exc:
        main(["run", "koranyi", "--seed", "1", "--bogus", "3"])
    assert exc.value.code == 1


def test_malformed_config(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2]")
    assert main(["run", "koranyi", "--config", str(bad), "--seed", "1", "--outdir", str(tmp_path)]) == 1
    bad.write_text('{"N": 3, "colour": "red"}')
    assert main(["run", "koranyi", "--config", str(bad), "--seed", "1", "--outdir", str(tmp_path)]) == 1


@pytest.mark.skipif(hasattr(os, "geteuid") and os.geteuid() == 0, reason="root can write anywhere")
def test_unwritable_outdir(tmp_path):
    ro = tmp_path / "ro"
    ro.mkdir()
    ro.chmod(0o500)
    assert main(["run", "koranyi", "--seed", "1", "--outdir", str(ro)]) == 1


def test_outdir_that_is_a_file(tmp_path):
    f = tmp_path / "file"
    f.write_text("")
    assert main(["run", "koranyi", "--seed", "1", "--outdir", str(f)]) == 1


def test_config_file_supplies_seed_and_flags_override(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"seed": 11, "N": 3, "outdir": str(tmp_path / "out")}))
    assert main(["run", "koranyi", "--config", str(cfg), "--N", "4"]) == 0
    man = json.loads((tmp_path / "out" / "koranyi-11.manifest.json").read_text())
    assert man["config"]["N"] == 4 and man["rows"] == 4


def test_resolve_config():
    cfg = resolve_config("koranyi", {"N": 6}, {"N": None})
    assert cfg["N"] == 6
    with pytest.raises(ConfigError):
        resolve_config("koranyi", {}, {"alphas": [0.1]})


def test_violation_exits_two(tmp_path, monkeypatch):
    fake = cli.Experiment("koranyi", "stub", {"N": 20, "shrink": 0.5}, lambda cfg, seed, threads: Outcome([{"a": 1}], ["bound exceeded"], {}))
    monkeypatch.setitem(cli.BY_NAME, "koranyi", fake)
    assert main(["run", "koranyi", "--seed", "1", "--outdir", str(tmp_path)]) == 2
    man = json.loads((tmp_path / "koranyi-1.manifest.json").read_text())
    assert man["violations"] == ["bound exceeded"]


def test_module_entry_point(tmp_path):
    import subprocess
    import sys

    res = subprocess.run([sys.executable, "-m", "metric_knn_lab", "list"], capture_output=True, text=True)
    assert res.returncode == 0 and "koranyi" in res.stdout
