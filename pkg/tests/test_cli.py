import csv
import io
import json

import pytest

from spiked_limits import cli
from spiked_limits.wigner import Observation


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def summary(out):
    # the JSON summary comes first; a CSV may follow when --out is absent
    dec = json.JSONDecoder()
    obj, _ = dec.raw_decode(out)
    return obj


class TestThreshold:
    def test_rademacher(self, capsys, tmp_path):
        path = tmp_path / "rs.csv"
        code, out, _ = run(capsys, "threshold", "--prior", "rademacher", "--grid", "0.5,2.0", "--out", str(path))
        assert code == 0
        s = summary(out)
        assert s["lambda_c"] == pytest.approx(1.0, abs=1e-4)
        assert path.read_text().startswith("lambda,q_star,phi_rs\n")

    def test_sparse_below_spectral(self, capsys):
        code, out, _ = run(capsys, "threshold", "--prior", "sparse:0.05", "--grid", "0.5")
        s = summary(out)
        assert code == 0 and s["lambda_c"] < s["spectral_threshold"]

    def test_degenerate_prior(self, capsys):
        code, _, err = run(capsys, "threshold", "--prior", '{"atoms": [0], "weights": [1]}')
        assert code == 2 and "zero-variance" in err

    def test_solver_failure_exit_code(self, capsys, monkeypatch):
        from spiked_limits.rs_threshold import SolverError

        def boom(*a, **k):
            raise SolverError("no bracket")

        monkeypatch.setattr(cli, "rs_report", boom)
        code, _, _ = run(capsys, "threshold")
        assert code == 3


class TestCurves:
    def test_columns(self, capsys, tmp_path):
        path = tmp_path / "c.csv"
        code, _, _ = run(capsys, "curves", "--grid-max", "0.99", "--grid-points", "12", "--out", str(path))
        assert code == 0
        rows = list(csv.DictReader(io.StringIO(path.read_text())))
        assert len(rows) == 12
        assert all(r["kl"] == r["mu"] for r in rows)
        assert float(rows[-1]["tv"]) < 1.0

    def test_out_of_range(self, capsys):
        code, _, _ = run(capsys, "curves", "--grid", "0.5,1.5")
        assert code == 2


class TestExperiments:
    def test_clt_reproducible(self, capsys, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ["clt", "--lambda", "0.5", "--n", "6", "--replicates", "64", "--seed", "9"]
        code, out, _ = run(capsys, *args, "--out", str(a))
        assert code == 0
        s = summary(out)
        assert len(s["input_hash"]) == 40 and s["config"]["seed"] == 9
        run(capsys, *args, "--out", str(b), "--workers", "2")
        assert a.read_bytes() == b.read_bytes()

    def test_config_file_with_override(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"prior": "rademacher", "lambda": 0.3, "n_list": [5], "replicates": 10, "seed": 1}))
        code, out, _ = run(capsys, "test-error", "--config", str(cfg), "--seed", "2")
        s = summary(out)
        assert code == 0 and s["config"]["seed"] == 2 and s["config"]["lam"] == 0.3

    def test_lambda_above_threshold(self, capsys):
        code, _, err = run(capsys, "clt", "--lambda", "1.5", "--n", "5", "--replicates", "5")
        assert code == 2 and "lambda" in err

    def test_missing_lambda(self, capsys):
        code, _, _ = run(capsys, "clt", "--n", "5")
        assert code == 2

    def test_strong_detection_and_overlap(self, capsys):
        code, out, _ = run(capsys, "strong-detection", "--lambda", "3", "--n", "6", "--replicates", "20")
        assert code == 0 and "correct_null" in out
        code, out, _ = run(capsys, "overlap", "--lambda", "0.5", "--n", "5", "6", "--replicates", "10")
        assert code == 0 and "nishimori_gap" in out

    def test_help_documents_tolerances(self, capsys):
        with pytest.raises(SystemExit):
            cli.main(["clt", "--help"])
        assert "25%" in capsys.readouterr().out


def test_simulate(capsys, tmp_path):
    path = tmp_path / "y.bin"
    code, out, _ = run(capsys, "simulate", "--n", "20", "--lambda", "2", "--sigma", "1", "--seed", "3", "--out", str(path))
    assert code == 0
    obs = Observation.load(path)
    assert obs.n == 20 and obs.sigma == 1.0 and obs.seed == 3
    assert json.loads(out)["n"] == 20
