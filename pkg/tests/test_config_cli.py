import json

import pytest

from fockspec import config
from fockspec.cli import main
from fockspec.config import ConfigError


def test_defaults_and_file(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# Gaussian\nm = 4\nsymbol = 0, 1\nN = 64  # small\np_grid = 3, 5\n")
    cfg = config.load(p, environ={})
    assert cfg.weight.m == 4 and cfg.N == 64 and cfg.p_grid == (3.0, 5.0)
    assert cfg.symbol.degree == 1


def test_per_coefficient_symbol():
    values, lines = config.parse_text("symbol.0 = 1\nsymbol.2 = 0.5j\n")
    cfg = config.build(values, lines)
    assert cfg.symbol.coeffs == (1, 0, 0.5j)


@pytest.mark.parametrize("text,line,key", [
    ("m = 2\nm = 3\n", 2, "m"),
    ("m = 2\nbogus = 1\n", 2, "bogus"),
    ("N = 8\n", 1, "N"),
    ("p_grid = 5, 3\n", 1, "p_grid"),
    ("rho_tol = -1\n", 1, "rho_tol"),
    ("a.b.c = 1\n", 1, "a.b.c"),
    ("m = two\n", 1, "m"),
])
def test_config_errors_carry_line_and_key(text, line, key):
    with pytest.raises(ConfigError) as err:
        values, lines = config.parse_text(text)
        config.build(values, lines)
    assert err.value.line == line and err.value.key == key


def test_missing_equals_reports_line():
    with pytest.raises(ConfigError) as err:
        config.parse_text("m = 2\njunk\n")
    assert err.value.line == 2


def test_env_override_and_hash():
    a = config.load(environ={})
    b = config.load(environ={"FOCKSPEC_M": "4"})
    c = config.load(environ={"FOCKSPEC_M": "4", "FOCKSPEC_OUT": "elsewhere"})
    assert b.weight.m == 4
    assert a.sha256 != b.sha256
    assert b.sha256 == c.sha256


def run(args, env, capsys):
    rc = main(args, environ=env)
    return rc, capsys.readouterr()


def test_cli_spectrum_deterministic(tmp_path, capsys):
    env = {"FOCKSPEC_M": "4", "FOCKSPEC_N": "64"}
    outs = []
    for name in ("a", "b"):
        rc, _ = run(["spectrum", "--out", str(tmp_path / name)], env, capsys)
        assert rc == 0
        outs.append([(tmp_path / name / f).read_bytes() for f in ("spectrum.csv", "spectrum.json")])
    assert outs[0] == outs[1]
    text = outs[0][0].decode()
    assert text.startswith("# command=spectrum config_sha256=") and "\r" not in text
    assert text.splitlines()[1] == "n,s_n" and len(text.splitlines()) == 66
    doc = json.loads(outs[0][1])
    assert doc["meta"]["config_sha256"] == config.load(environ=env).sha256
    assert doc["result"]["method"] == "closed_form"


def test_cli_config_error_exit_2(tmp_path, capsys):
    p = tmp_path / "bad.cfg"
    p.write_text("m = 2\nfoo = 1\n")
    rc, cap = run(["rho", "--config", str(p), "--out", str(tmp_path)], {}, capsys)
    rec = json.loads(cap.err)
    assert rc == 2 and rec["error"] == "ConfigError" and rec["line"] == 2 and rec["key"] == "foo"


def test_cli_module_error_exit_1(tmp_path, capsys):
    env = {"FOCKSPEC_SOURCE": "50"}
    rc, cap = run(["distance", "--out", str(tmp_path)], env, capsys)
    assert rc == 1
    rec = json.loads(cap.err)
    assert rec["command"] == "distance" and rec["message"]
    assert json.loads((tmp_path / "error.json").read_text())["result"]["error"] == rec["error"]


def test_cli_rho_distance_kernel(tmp_path, capsys):
    env = {"FOCKSPEC_BOX": "-1, 1, -1, 1", "FOCKSPEC_RHO_GRID": "5", "FOCKSPEC_NODES_PER_RHO": "3",
           "FOCKSPEC_KERNEL_N_MAX": "120"}
    for cmd in ("rho", "distance", "kernel-check"):
        rc, _ = run([cmd, "--out", str(tmp_path)], env, capsys)
        assert rc == 0, cmd
    rho_rows = (tmp_path / "rho.csv").read_text().splitlines()
    assert rho_rows[1] == "x,y,rho" and len(rho_rows) == 27
    assert (tmp_path / "distance.csv").read_text().splitlines()[1] == "x,y,dist"
    assert (tmp_path / "kernel.csv").read_text().splitlines()[1] == "x,y,re_K,im_K,trunc_err"
    checks = json.loads((tmp_path / "kernel_checks.json").read_text())["result"]
    assert {c["check"] for c in checks} == {"diagonal_estimate", "near_diagonal", "offdiagonal_decay"}
    assert all(c["pass"] for c in checks)


def test_cli_schatten_report(tmp_path, capsys):
    env = {"FOCKSPEC_M": "4", "FOCKSPEC_N": "2000"}
    rc, _ = run(["schatten", "--out", str(tmp_path)], env, capsys)
    assert rc == 0
    rep = json.loads((tmp_path / "schatten.json").read_text())["result"]
    assert rep["p_star"] == 4 and rep["hs_verdict"] == "DIVERGES"
    assert (tmp_path / "partial_p5.csv").read_text().splitlines()[1] == "R_or_N,partial"


@pytest.mark.slow
def test_cli_envelope_independent_of_threads(tmp_path, capsys):
    env = {"FOCKSPEC_M": "4", "FOCKSPEC_P_GRID": "3, 5", "FOCKSPEC_EPS": "1", "FOCKSPEC_ENVELOPE_OCTAVES": "8"}
    for k in ("1", "2"):
        rc, _ = run(["envelope", "--out", str(tmp_path / k), "--threads", k], env, capsys)
        assert rc == 0
    recs = json.loads((tmp_path / "1" / "envelope.json").read_text())["result"]
    assert [r["verdict_B"] for r in recs] == ["DIVERGES", "CONVERGES"]
    for name in ("envelope.json", "envelope_p3.csv", "envelope_p5.csv"):
        assert (tmp_path / "1" / name).read_bytes() == (tmp_path / "2" / name).read_bytes()


@pytest.mark.slow
def test_cli_verify_exit_zero(tmp_path, capsys):
    rc, cap = run(["verify", "--out", str(tmp_path)], {}, capsys)
    assert rc == 0, cap.out
    assert all(r["pass"] for r in json.loads((tmp_path / "verify.json").read_text())["result"])
