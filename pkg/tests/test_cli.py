import json
import math
import subprocess
import sys

import pytest
from hypothesis import given, settings, strategies as st

from modelman.cli import run_command
from modelman.io import emit_series, read_series


def run(capsys, *argv):
    code = run_command(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_model_verdict_json(capsys):
    code, out, _ = run(capsys, "criteria", "run", "--profile", "power_exp", "--n", "3",
                       "--alpha", "2", "--which", "model")
    assert code == 0 and json.loads(out)["verdict"] == "Diverges"


def test_heat_rejects_nonpositive_horizon(capsys):
    for T in ("0", "-1"):
        code, _, err = run(capsys, "heat", "run", "--profile", "euclidean", "--n", "2",
                           "--R", "40", "--T", T)
        assert code == 2 and "--T" in err


def test_unknown_subcommand(capsys):
    code, _, err = run(capsys, "frobnicate")
    assert code == 2 and "usage" in err


def test_profile_show(capsys):
    code, out, _ = run(capsys, "profile", "show", "--profile", "euclidean", "--n", "3", "--r", "2")
    doc = json.loads(out)
    assert code == 0 and doc["samples"][0]["log_S"] == pytest.approx(math.log(16 * math.pi))


def test_heat_run_writes_series(capsys, tmp_path):
    path = tmp_path / "mass.csv"
    code, out, _ = run(capsys, "heat", "run", "--profile", "euclidean", "--n", "2", "--R", "10",
                       "--T", "0.05", "--center", "1", "--out", str(path))
    assert code == 0
    pts = read_series(path)
    assert pts[0][0] == 0.0 and pts[-1][1] == json.loads(out)["final_mass"]


def test_construct_verify_exit_codes(capsys):
    code, out, _ = run(capsys, "construct", "verify", "--kmax", "6")
    assert code == 0 and out.splitlines()[0] == "k,A_k,B_k,pass"
    code, _, _ = run(capsys, "construct", "verify", "--kmax", "6", "--control")
    assert code == 1


def test_reproduce_main_bundle(capsys, tmp_path):
    code, out, err = run(capsys, "reproduce", "theorem-main", "--alpha", "3", "--n", "2",
                         "--kmax", "30", "--outdir", str(tmp_path))
    rows = out.splitlines()
    assert code == 0 and len(rows) == 31 and all(r.endswith(",1") for r in rows[1:])
    assert (tmp_path / "A_k.csv").exists() and "Diverges" in err


@pytest.mark.parametrize("bundle", ["alpha-dichotomy", "remark2", "woymp"])
def test_reproduce_bundles(capsys, bundle):
    code, _, _ = run(capsys, "reproduce", bundle)
    assert code == 0


def test_config_file_and_override(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"alpha": 2.5, "n": 3, "which": "grigoryan"}))
    code, out, _ = run(capsys, "criteria", "run", "--config", str(cfg), "--dump-config")
    doc = json.loads(out)
    assert code == 0 and doc["alpha"] == 2.5 and doc["which"] == "grigoryan"
    code, out, _ = run(capsys, "criteria", "run", "--config", str(cfg), "--alpha", "1.5")
    assert json.loads(out)["verdict"] == "Diverges"
    cfg.write_text(json.dumps({"bogus": 1}))
    assert run(capsys, "criteria", "run", "--config", str(cfg))[0] == 2


def test_sde_run_deterministic_across_workers(capsys):
    outs = []
    for w in ("1", "3"):
        code, out, _ = run(capsys, "sde", "run", "--paths", "300", "--seed", "4", "--workers", w, "--T", "0.3")
        assert code == 0
        outs.append(out)
    assert outs[0] == outs[1]


def test_console_script_installed():
    res = subprocess.run([sys.executable, "-m", "modelman.cli", "criteria", "run", "--profile",
                          "euclidean", "--n", "3", "--which", "recurrence"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["verdict"] == "Converges"


def test_empty_series_header_only(tmp_path):
    p = emit_series("empty", [], tmp_path / "e.csv")
    assert open(p).read() == "x,y\n"


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(allow_nan=False, allow_infinity=False),
                          st.floats(allow_nan=False, allow_infinity=False)), max_size=20))
def test_series_round_trip(tmp_path_factory, pts):
    p = tmp_path_factory.mktemp("s") / "s.csv"
    emit_series("s", pts, p)
    assert read_series(p) == [(float(x), float(y)) for x, y in pts]
