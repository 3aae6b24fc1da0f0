import json
import subprocess
import sys

import numpy as np
import pytest

from entorder import cli, linalg, states as S


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def phi_file(tmp_path):
    path = tmp_path / "bell_phi_plus.json"
    S.save_state(S.DensityMatrix((2, 2), np.outer(S.PHI_PLUS, S.PHI_PLUS.conj())), path)
    return path


@pytest.fixture
def pure_file(tmp_path):
    path = tmp_path / "pure.json"
    S.save_state(S.pure_with_schmidt(0.3), path)
    return path


# -- measure -------------------------------------------------------------------------


def test_measure_werner(capsys):
    code, out, _ = run(["measure", "--state", "werner:0.75", "--measures", "eof,rel_ent"], capsys)
    assert code == 0
    vals = json.loads(out)
    assert [v["measure"] for v in vals] == ["eof", "rel_ent"]
    assert vals[0]["value"] == pytest.approx(0.3546, abs=1e-4)
    assert vals[1]["value"] == pytest.approx(0.1887, abs=2e-3)
    assert vals[0]["status"] == "exact" and vals[1]["status"] == "upper_bound"


def test_measure_state_file(capsys, phi_file):
    code, out, _ = run(["measure", "--state-file", str(phi_file), "--measures", "eof"], capsys)
    assert code == 0
    assert json.loads(out)[0]["value"] == pytest.approx(1.0, abs=1e-12)


def test_measure_csv(capsys):
    code, out, _ = run(["measure", "--state", "schmidt:0.25", "--measures", "entropy,eof", "--format", "csv"], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "measure,value,status,converged,iterations,restarts"
    assert lines[1].startswith("entropy,0.811278")


def test_measure_domain_error(capsys):
    code, out, err = run(["measure", "--state", "werner:1.5", "--measures", "eof"], capsys)
    assert code == 2 and out == ""
    assert "DomainError" in err


def test_measure_invalid_matrix_names_invariant(capsys, tmp_path):
    path = tmp_path / "trace2.json"
    path.write_text(json.dumps({"dims": [2, 2], "matrix": linalg.matrix_to_json(np.eye(4) / 2)}))
    code, _, err = run(["measure", "--state-file", str(path)], capsys)
    assert code == 2 and "NotUnitTrace" in err and "trace" in err


def test_measure_corrupted_file(capsys, tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"dims": [2, 2], "matrix": {"rows": 4,')
    code, _, err = run(["measure", "--state-file", str(path)], capsys)
    assert code == 3
    assert "line 1 column" in err


def test_measure_missing_file(capsys, tmp_path):
    code, _, _ = run(["measure", "--state-file", str(tmp_path / "absent.json")], capsys)
    assert code == 3


def test_measure_needs_input(capsys):
    assert run(["measure"], capsys)[0] == 2


def test_measure_incompatible(capsys):
    code, _, err = run(["measure", "--state", "werner:0.75", "--measures", "entropy"], capsys)
    assert code == 2 and "pure" in err


def test_unknown_measure(capsys):
    assert run(["measure", "--state", "werner:0.75", "--measures", "negativity"], capsys)[0] == 2


def test_argparse_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == 2


def test_out_file(capsys, tmp_path):
    path = tmp_path / "o.json"
    code, out, _ = run(["measure", "--state", "werner:0.75", "--measures", "eof", "--out", str(path)], capsys)
    assert code == 0 and out == ""
    assert json.loads(path.read_text())[0]["measure"] == "eof"


def test_out_unwritable(capsys, tmp_path):
    code, _, _ = run(["measure", "--state", "werner:0.75", "--measures", "eof", "--out", str(tmp_path / "no" / "such" / "o.json")], capsys)
    assert code == 3


# -- scan ----------------------------------------------------------------------------


def test_scan_csv(capsys):
    code, out, _ = run(["scan", "--family", "werner", "--grid", "0.5:1.0:0.25", "--measures", "eof,rel_ent", "--format", "csv", "--restarts", "3"], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("F,eof,eof_status,rel_ent,rel_ent_status")
    last = lines[-1].split(",")
    assert float(last[0]) == 1.0
    assert float(last[1]) == pytest.approx(1.0, abs=5e-3) and float(last[3]) == pytest.approx(1.0, abs=5e-3)


@pytest.mark.parametrize("grid", ["1.0:0.5:0.1", "0.5:1.0:-0.1", "x"])
def test_scan_bad_grid(capsys, grid):
    assert run(["scan", "--family", "werner", "--grid", grid], capsys)[0] == 2


def test_scan_unknown_family(capsys):
    assert run(["scan", "--family", "isotropic", "--grid", "0.5"], capsys)[0] == 2


# -- search --------------------------------------------------------------------------

SEARCH = ["search", "--samples", "8", "--sampler", "ginibre:k=3", "--measures", "eof,rel_ent", "--restarts", "2", "--threads", "1"]


def test_search_report(capsys):
    code, out, err = run(SEARCH + ["--seed", "7"], capsys)
    assert code == 0
    rep = json.loads(out)
    assert {"measures", "n", "delta", "agreements", "ties", "violations", "gap_witnesses", "states"} <= set(rep)
    assert rep["agreements"] + rep["ties"] + len(rep["violations"]) == 28
    assert err.startswith("search: n=8 compared=28")


def test_search_byte_identical(capsys):
    first = run(SEARCH + ["--seed", "11"], capsys)[1]
    second = run(SEARCH + ["--seed", "11"], capsys)[1]
    assert first == second
    assert first != run(SEARCH + ["--seed", "12"], capsys)[1]


def test_search_seed_from_environment(capsys, monkeypatch):
    explicit = run(SEARCH + ["--seed", "5"], capsys)[1]
    monkeypatch.setenv("ENTORDER_SEED", "5")
    assert run(SEARCH, capsys)[1] == explicit


def test_bad_environment_seed(capsys, monkeypatch):
    monkeypatch.setenv("ENTORDER_SEED", "seven")
    assert run(SEARCH, capsys)[0] == 2


def test_search_csv(capsys):
    code, out, _ = run(SEARCH + ["--format", "csv"], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "i,j,e1_i,e1_j,e2_i,e2_j,outcome"
    assert len(lines) == 29


@pytest.mark.parametrize("extra", [["--samples", "1"], ["--measures", "eof"], ["--delta", "-1"], ["--sampler", "gauss"], ["--restarts", "0"]])
def test_search_config_errors(capsys, extra):
    assert run(SEARCH + extra, capsys)[0] == 2


# -- witness -------------------------------------------------------------------------


def test_witness_werner(capsys):
    code, out, _ = run(["witness", "--state", "werner:0.75", "--measures", "eof,rel_ent"], capsys)
    assert code == 0
    obj = json.loads(out)
    assert obj["witness"]["chi_schmidt_p"] == pytest.approx(0.047, abs=2e-3)
    assert min(obj["witness"]["margins"]) > 0.07
    assert obj["sandwich"]["chain_holds"]["eof(phi) >= eof(rho)"]


def test_witness_separable(capsys):
    code, out, _ = run(["witness", "--state", "werner:0.25", "--measures", "eof,rel_ent"], capsys)
    obj = json.loads(out)
    assert code == 0 and obj["witness"] == "none"
    assert "error" in obj["sandwich"]


def test_witness_pure_file(capsys, pure_file):
    code, out, _ = run(["witness", "--state-file", str(pure_file), "--measures", "eof,rel_ent"], capsys)
    assert code == 0 and json.loads(out)["witness"] == "none"


# -- config files --------------------------------------------------------------------


def test_config_file(capsys, tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"command": "measure", "input": "werner:0.75", "measures": ["eof"], "optimizer": {"restarts": 2}}))
    code, out, _ = run(["measure", "--config", str(path)], capsys)
    assert code == 0 and json.loads(out)[0]["value"] == pytest.approx(0.35458, abs=1e-4)


@pytest.mark.parametrize(
    "obj",
    [
        {"command": "measure", "input": "werner:0.75", "colour": "red"},
        {"command": "measure", "input": "werner:0.75", "optimizer": {"restarts": 2, "bogus": 1}},
        {"command": "scan", "family": "werner", "grid": "0.5"},
        {"command": "measure", "input": "werner:0.75", "samples": "many"},
        ["measure"],
    ],
)
def test_config_rejected(capsys, tmp_path, obj):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(obj))
    assert run(["measure", "--config", str(path)], capsys)[0] == 2


def test_config_unparseable(capsys, tmp_path):
    path = tmp_path / "run.json"
    path.write_text("{")
    assert run(["measure", "--config", str(path)], capsys)[0] == 3


# -- selftest and entry points -------------------------------------------------------------


def test_selftest_default(capsys):
    code, out, _ = run(["selftest"], capsys)
    assert code == 0
    assert "22/22 checks passed" in out


def test_selftest_reports_failures(capsys, monkeypatch):
    from entorder import selftest

    def broken(strict):
        assert False

    monkeypatch.setattr(selftest, "CHECKS", [selftest.Check("always_fails", "this invariant is violated", broken)])
    code, out, _ = run(["selftest"], capsys)
    assert code == 1
    assert "FAIL always_fails: this invariant is violated" in out


def test_help_mentions_werner_convention():
    out = subprocess.run([sys.executable, "-m", "entorder", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    assert "entangled iff F > 1/2" in " ".join(out.stdout.split())


def test_console_script():
    out = subprocess.run(["entorder", "measure", "--state", "phi_plus", "--measures", "eof"], capture_output=True, text=True)
    assert out.returncode == 0
    assert json.loads(out.stdout)[0]["value"] == pytest.approx(1.0)
