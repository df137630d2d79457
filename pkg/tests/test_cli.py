import json
import os

import numpy as np
import pytest

from stmoe.cli import run_cli


def run(*argv):
    return run_cli(list(argv))


@pytest.fixture()
def sim_csv(tmp_path):
    out = tmp_path / "sim.csv"
    code = run(
        "simulate", "--family", "nmoe", "--n", "120", "--seed", "3", "--out", str(out)
    )
    assert code == 0
    return out


class TestSimulate:
    def test_deterministic_bytes(self, tmp_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        for out in (a, b):
            assert run(
                "simulate", "--family", "stmoe", "--n", "500", "--seed", "7", "--out", str(out)
            ) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_labels_output(self, tmp_path):
        out = tmp_path / "d.csv"
        labels = tmp_path / "l.csv"
        assert run(
            "simulate", "--family", "stmoe", "--n", "50", "--seed", "1",
            "--out", str(out), "--out-labels", str(labels),
        ) == 0
        lines = labels.read_text().strip().split("\n")
        assert lines[0] == "label"
        assert len(lines) == 51
        assert set(lines[1:]) <= {"1", "2"}

    def test_outlier_injection(self, tmp_path):
        out = tmp_path / "noisy.csv"
        assert run(
            "simulate", "--family", "nmoe", "--n", "400", "--seed", "2",
            "--outliers", "0.5", "--out", str(out),
        ) == 0
        ys = [float(r.split(",")[0]) for r in out.read_text().strip().split("\n")[1:]]
        assert sum(y == -2.0 for y in ys) > 100
        # default labels file marks replaced rows with 0
        labels = (tmp_path / "noisy.labels.csv").read_text().strip().split("\n")[1:]
        replaced = [i for i, y in enumerate(ys) if y == -2.0]
        assert all(labels[i] == "0" for i in replaced)
        assert any(l != "0" for l in labels)

    def test_custom_truth_file(self, tmp_path, sim_csv):
        model = tmp_path / "truth.json"
        fit_code = run(
            "fit", "--data", str(sim_csv), "--family", "nmoe", "--k", "1",
            "--starts", "1", "--seed", "0", "--out-model", str(model),
        )
        assert fit_code == 0
        out = tmp_path / "fromtruth.csv"
        assert run(
            "simulate", "--truth", str(model), "--n", "30", "--seed", "5", "--out", str(out)
        ) == 0
        assert len(out.read_text().strip().split("\n")) == 31


class TestFitPredictCluster:
    def test_k1_fit_predict_equals_ols(self, tmp_path, sim_csv):
        model = tmp_path / "m.json"
        assert run(
            "fit", "--data", str(sim_csv), "--family", "nmoe", "--k", "1",
            "--starts", "1", "--seed", "0", "--out-model", str(model),
        ) == 0

        pred = tmp_path / "pred.csv"
        assert run(
            "predict", "--model", str(model), "--grid", str(sim_csv), "--out", str(pred)
        ) == 0

        rows = [r.split(",") for r in sim_csv.read_text().strip().split("\n")[1:]]
        y = np.array([float(r[0]) for r in rows])
        x = np.array([float(r[1]) for r in rows])
        X = np.column_stack([np.ones_like(x), x])
        beta, *_ = np.linalg.lstsq(X, y, rcond=None)
        fitted = X @ beta

        got = [r.split(",") for r in pred.read_text().strip().split("\n")[1:]]
        means = np.array([float(r[0]) for r in got])
        np.testing.assert_allclose(means, fitted, atol=1e-8)

    def test_fit_writes_default_tau_and_trace(self, tmp_path, sim_csv):
        model = tmp_path / "m.json"
        assert run(
            "fit", "--data", str(sim_csv), "--family", "nmoe", "--k", "1",
            "--starts", "1", "--seed", "0", "--out-model", str(model),
        ) == 0
        assert (tmp_path / "m.tau.csv").exists()
        assert (tmp_path / "m.trace.csv").exists()

    def test_fit_writes_tau_and_trace(self, tmp_path, sim_csv):
        model = tmp_path / "m.json"
        tau = tmp_path / "tau.csv"
        trace = tmp_path / "trace.csv"
        assert run(
            "fit", "--data", str(sim_csv), "--family", "nmoe", "--k", "2",
            "--starts", "2", "--seed", "1", "--out-model", str(model),
            "--out-tau", str(tau), "--out-trace", str(trace),
        ) == 0
        doc = json.loads(model.read_text())
        assert doc["family"] == "nmoe" and doc["k"] == 2
        assert "loglik" in doc["fit"]
        tau_lines = tau.read_text().strip().split("\n")
        assert tau_lines[0] == "tau1,tau2"
        assert len(tau_lines) == 121
        trace_lines = trace.read_text().strip().split("\n")
        assert trace_lines[0] == "iteration,loglik"
        lls = [float(r.split(",")[1]) for r in trace_lines[1:]]
        assert all(b >= a - 1e-8 * abs(a) for a, b in zip(lls, lls[1:]))

    def test_fit_determinism(self, tmp_path, sim_csv):
        models = []
        for name in ("m1.json", "m2.json"):
            path = tmp_path / name
            assert run(
                "fit", "--data", str(sim_csv), "--family", "stmoe", "--k", "2",
                "--starts", "2", "--seed", "9", "--max-iter", "200",
                "--out-model", str(path),
            ) == 0
            models.append(path.read_bytes())
        assert models[0] == models[1]

    def test_cluster_labels(self, tmp_path, sim_csv):
        model = tmp_path / "m.json"
        assert run(
            "fit", "--data", str(sim_csv), "--family", "nmoe", "--k", "2",
            "--starts", "2", "--seed", "1", "--out-model", str(model),
        ) == 0
        labels = tmp_path / "labels.csv"
        assert run(
            "cluster", "--model", str(model), "--data", str(sim_csv), "--out", str(labels)
        ) == 0
        lines = labels.read_text().strip().split("\n")
        assert lines[0] == "label"
        assert len(lines) == 121
        assert set(lines[1:]) <= {"1", "2"}

    def test_fixed_dof_constraint_flag(self, tmp_path, sim_csv):
        model = tmp_path / "m.json"
        assert run(
            "fit", "--data", str(sim_csv), "--family", "stmoe", "--k", "1",
            "--starts", "1", "--seed", "0", "--fix-skew-zero", "--fix-dof", "25.0",
            "--out-model", str(model),
        ) == 0
        doc = json.loads(model.read_text())
        assert doc["experts"][0]["skew"] == 0.0
        assert doc["experts"][0]["dof"] == 25.0


class TestSelect:
    def test_select_writes_table(self, tmp_path, sim_csv):
        out = tmp_path / "criteria.csv"
        assert run(
            "select", "--data", str(sim_csv), "--family", "nmoe",
            "--kmin", "1", "--kmax", "2", "--starts", "2", "--seed", "4",
            "--max-iter", "300", "--out", str(out),
        ) == 0
        lines = out.read_text().strip().split("\n")
        assert lines[0].startswith("K,loglik,complete_loglik,eta,aic,bic,icl,chosen")
        assert len(lines) == 3
        chosen_bic = [r.split(",")[8] for r in lines[1:]]
        assert chosen_bic.count("true") == 1


class TestBenchmark:
    def test_wiring_with_stubbed_experiments(self, tmp_path, monkeypatch):
        import stmoe.cli as cli_mod

        def fake_consistency(**kwargs):
            assert kwargs["family"] == "stmoe"
            return [{"n": 50, "trials": 2, "beta11": 0.5}]

        monkeypatch.setattr(cli_mod, "consistency_experiment", fake_consistency)
        out = tmp_path / "mse.csv"
        assert run(
            "benchmark", "--experiment", "consistency", "--trials", "2",
            "--seed", "1", "--out", str(out),
        ) == 0
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "n,trials,beta11"
        assert lines[1] == "50,2,0.5"

    def test_robustness_stub(self, tmp_path, monkeypatch):
        import stmoe.cli as cli_mod

        def fake_robustness(**kwargs):
            assert kwargs["gen_family"] == "nmoe"
            return [
                {"c": 0.0, "fit_family": "nmoe", "median_mse": 1.0, "mean_mse": 1.1,
                 "replications": 2, "dropped": 0},
            ]

        monkeypatch.setattr(cli_mod, "robustness_experiment", fake_robustness)
        out = tmp_path / "rob.csv"
        assert run(
            "benchmark", "--experiment", "robustness", "--replications", "2",
            "--seed", "1", "--out", str(out),
        ) == 0
        assert out.read_text().startswith("c,fit_family,median_mse")


class TestSeedsAndErrors:
    def test_env_seed_fallback(self, tmp_path, monkeypatch, sim_csv):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        monkeypatch.setenv("STMOE_SEED", "11")
        assert run("simulate", "--family", "nmoe", "--n", "40", "--out", str(a)) == 0
        monkeypatch.delenv("STMOE_SEED")
        assert run("simulate", "--family", "nmoe", "--n", "40", "--seed", "11", "--out", str(b)) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_flag_beats_env(self, tmp_path, monkeypatch):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        monkeypatch.setenv("STMOE_SEED", "99")
        assert run("simulate", "--family", "nmoe", "--n", "40", "--seed", "5", "--out", str(a)) == 0
        monkeypatch.delenv("STMOE_SEED")
        assert run("simulate", "--family", "nmoe", "--n", "40", "--seed", "5", "--out", str(b)) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_unknown_flag_exits_nonzero(self, capsys):
        assert run("simulate", "--granularity", "fine") != 0
        capsys.readouterr()

    def test_unknown_command_exits_nonzero(self, capsys):
        assert run("transmogrify") != 0
        capsys.readouterr()

    def test_unreadable_data_file(self, tmp_path, capsys):
        model = tmp_path / "m.json"
        code = run(
            "fit", "--data", str(tmp_path / "missing.csv"), "--family", "nmoe",
            "--k", "1", "--out-model", str(model),
        )
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_non_numeric_cell_reported(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("y,x\n1.0,oops\n")
        code = run(
            "fit", "--data", str(bad), "--family", "nmoe", "--k", "1",
            "--out-model", str(tmp_path / "m.json"),
        )
        assert code == 1
        err = capsys.readouterr().err
        assert "row 1" in err and "'x'" in err

    def test_bad_k_range(self, tmp_path, sim_csv, capsys):
        code = run(
            "select", "--data", str(sim_csv), "--kmin", "3", "--kmax", "1",
            "--out", str(tmp_path / "t.csv"),
        )
        assert code == 1
        assert "invalid K range" in capsys.readouterr().err

    def test_predict_undefined_variance(self, tmp_path, sim_csv, capsys):
        model = tmp_path / "m.json"
        doc = {
            "format_version": 1, "family": "stmoe", "k": 1, "p": 2, "q": 2,
            "gating_alpha": [],
            "experts": [{"beta": [0.0, 1.0], "sigma2": 1.0, "skew": 0.5, "dof": 1.5}],
            "constraints": {"fix_skew_zero": False, "fix_dof": None},
        }
        model.write_text(json.dumps(doc))
        code = run(
            "predict", "--model", str(model), "--grid", str(sim_csv),
            "--out", str(tmp_path / "p.csv"),
        )
        assert code == 1
        assert "dof <= 2" in capsys.readouterr().err
