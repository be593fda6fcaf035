import hashlib
import json
import subprocess
import sys

import pytest

from dirichlet_lab import cli, experiments
from dirichlet_lab.config import coerce, resolve
from dirichlet_lab.parabolic_solver import ConfigurationError, NumericalAbort


def run(argv, capsys):
    code = cli.main(argv)
    return code, capsys.readouterr()


def test_lp_interval_body(tmp_path, capsys):
    code, out = run(["run", "lp-interval", "--eps0", "1.0", "--out", str(tmp_path)], capsys)
    assert code == 0
    assert out.out.strip() == '{"p_lo":1.5,"p_hi":"inf"}'
    assert (tmp_path / "lp-interval" / "result.json").read_text().strip() == '{"p_lo":1.5,"p_hi":"inf"}'


def test_covariance_body_and_manifest(tmp_path, capsys):
    code, out = run(["run", "covariance", "--K", "8", "--samples", "100000", "--seed", "7", "--out", str(tmp_path)],
                    capsys)
    assert code == 0
    body = json.loads(out.out)
    assert len(body["per_mode"]) == 8
    assert all(r["within"] for r in body["per_mode"])
    man = json.loads((tmp_path / "covariance" / "manifest.json").read_text())
    text = (tmp_path / "covariance" / "result.json").read_text().rstrip("\n")
    assert man["body_sha256"] == hashlib.sha256(text.encode()).hexdigest()
    assert man["seed"] == 7 and man["config"]["K"] == 8 and man["config"]["samples"] == 100000
    assert set(experiments.DEFAULTS["covariance"]) <= set(man["config"])
    assert (tmp_path / "covariance" / "covariance.csv").exists()


@pytest.mark.parametrize("exp,args", [("covariance", ["--K", "8", "--samples", "20000"]),
                                      ("wick-moments", ["--samples", "20000"]),
                                      ("duhamel-l2", ["--set", "ladder=exact"])])
def test_rerun_is_byte_identical(tmp_path, capsys, exp, args):
    outs = []
    for sub in ("a", "b"):
        assert run(["run", exp, "--seed", "3", "--out", str(tmp_path / sub), *args], capsys)[0] == 0
        outs.append((tmp_path / sub / exp / "result.json").read_bytes())
    assert outs[0] == outs[1]


def test_seed_changes_body(tmp_path, capsys):
    a = run(["run", "covariance", "--K", "4", "--samples", "5000", "--seed", "1", "--out", str(tmp_path)], capsys)[1]
    b = run(["run", "covariance", "--K", "4", "--samples", "5000", "--seed", "2", "--out", str(tmp_path)], capsys)[1]
    assert a.out != b.out


def test_config_precedence(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[run]\nseed = 11\nsamples = 500\n\n[covariance]\nK = 4\nsamples = 900\n")
    p = resolve("covariance", ini)
    assert (p["seed"], p["K"], p["samples"]) == (11, 4, 900)
    p = resolve("covariance", ini, {"K": 6}, ["samples=1200"])
    assert (p["K"], p["samples"]) == (6, 1200)


def test_config_errors_name_the_key(tmp_path, capsys):
    ini = tmp_path / "bad.ini"
    ini.write_text("[covariance]\nKK = 4\n")
    code, out = run(["run", "covariance", "--config", str(ini), "--out", str(tmp_path)], capsys)
    assert code == 3 and "'KK'" in out.err
    ini.write_text("[nonsense]\na = 1\n")
    code, out = run(["run", "covariance", "--config", str(ini), "--out", str(tmp_path)], capsys)
    assert code == 3 and "nonsense" in out.err
    code, out = run(["run", "gradient-bound", "--set", "drift=warp", "--out", str(tmp_path)], capsys)
    assert code == 3 and "warp" in out.err
    code, out = run(["run", "covariance", "--set", "K=four", "--out", str(tmp_path)], capsys)
    assert code == 3 and "K" in out.err
    code, out = run(["run", "lp-interval", "--K", "4", "--out", str(tmp_path)], capsys)
    assert code == 3


def test_unknown_experiment_rejected_at_parse(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["run", "no-such-thing"])
    assert exc.value.code == 3


def test_fail_exit_code(tmp_path, capsys):
    code, out = run(["run", "gradient-bound", "--set", "points=61", "--set", "mehler_tol=1e-9",
                     "--out", str(tmp_path)], capsys)
    assert code == 1


def test_inconclusive_exit_code(tmp_path, capsys):
    code, out = run(["run", "ibp", "--K", "8", "--samples", "5000", "--set", "coefficients=0,0,0,0,-0.1",
                     "--set", "strict=false", "--set", "functions=bump1", "--set", "directions=1",
                     "--out", str(tmp_path)], capsys)
    assert code == 2
    assert json.loads(out.out)["checks"][0]["status"] == "inconclusive"


def test_numerical_abort_exit_code(tmp_path, capsys, monkeypatch):
    def boom(p):
        raise NumericalAbort("blew up")

    monkeypatch.setitem(experiments.RUNNERS, "markov-suite", boom)
    monkeypatch.setitem(cli.RUNNERS, "markov-suite", boom)
    code, out = run(["run", "markov-suite", "--out", str(tmp_path)], capsys)
    assert code == 4 and "blew up" in out.err


def test_non_finite_values_serialised():
    assert cli.dumps({"a": float("inf"), "b": [float("nan"), -float("inf")]}) == '{"a":"inf","b":["nan","-inf"]}'


def test_coerce():
    assert coerce("x", "true", False) is True
    assert coerce("x", "3", 1) == 3
    assert coerce("x", "0.5", 1.0) == 0.5
    with pytest.raises(ConfigurationError):
        coerce("x", "maybe", True)


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "dirichlet_lab.cli", "list"], capture_output=True, text=True)
    assert out.returncode == 0
    assert len(out.stdout.splitlines()) == len(experiments.EXPERIMENTS) == 13


def test_shipped_config_runs_every_experiment(tmp_path, capsys):
    from pathlib import Path

    ini = Path(__file__).resolve().parents[1] / "configs" / "quick.ini"
    for exp in experiments.EXPERIMENTS:
        code = cli.main(["run", exp, "--config", str(ini), "--out", str(tmp_path), "--quiet"])
        assert code == 0, exp
    capsys.readouterr()
