"""End-to-end command-line workflows on temporary files."""

from __future__ import annotations

import json
import math

import numpy as np
import pytest

from direns.cli import main
from direns.dirichlet import log_likelihood
from direns.fileio import read_alphas, read_predictions
from direns.selective import ScoredSample, risk_coverage_curve


def run(*args: str) -> int:
    return main([str(a) for a in args])


def simulate(tmp_path, name="", **kw) -> dict:
    paths = {
        "preds": str(tmp_path / f"preds{name}.csv"),
        "labels": str(tmp_path / f"labels{name}.csv"),
        "alphas": str(tmp_path / f"truth{name}.csv"),
    }
    args = [
        "simulate",
        "--preds-out", paths["preds"],
        "--labels-out", paths["labels"],
        "--alphas-out", paths["alphas"],
    ]
    defaults = {"n": 50, "m": 20, "k": 3, "seed": 7, "scheme": "two-population"}
    defaults.update(kw)
    for key, value in defaults.items():
        args += [f"--{key.replace('_', '-')}", str(value)]
    assert run(*args) == 0
    return paths


class TestSimulateCommand:
    def test_rerun_is_byte_identical(self, tmp_path):
        first = simulate(tmp_path, "1")
        second = simulate(tmp_path, "2")
        for key in first:
            a = open(first[key], "rb").read()
            b = open(second[key], "rb").read()
            assert a == b

    def test_seed_changes_output(self, tmp_path):
        first = simulate(tmp_path, "1", seed=1)
        second = simulate(tmp_path, "2", seed=2)
        assert open(first["preds"]).read() != open(second["preds"]).read()

    def test_fixed_scheme_alpha_flag(self, tmp_path):
        paths = simulate(tmp_path, scheme="fixed", alpha="3,1,0.5")
        rows = read_alphas(paths["alphas"])
        for row in rows:
            np.testing.assert_array_equal(row.alpha, [3.0, 1.0, 0.5])

    def test_rejects_bad_alpha_string(self, tmp_path):
        code = run(
            "simulate",
            "--preds-out", tmp_path / "p.csv",
            "--labels-out", tmp_path / "l.csv",
            "--alphas-out", tmp_path / "a.csv",
            "--n", "5", "--m", "4", "--k", "2",
            "--scheme", "fixed", "--alpha", "3,oops",
        )
        assert code == 1


class TestFitCommand:
    def test_mom_roughly_recovers_truth(self, tmp_path):
        paths = simulate(tmp_path, scheme="fixed", alpha="3,1,0.5", n=40, m=400)
        out = tmp_path / "fits.csv"
        assert run("fit", "--preds", paths["preds"], "--out", out) == 0
        rows = read_alphas(str(out))
        assert len(rows) == 40
        med = np.median([r.alpha.sum() for r in rows])
        assert med == pytest.approx(4.5, rel=0.3)

    def test_refinement_never_lowers_likelihood(self, tmp_path):
        paths = simulate(tmp_path, n=30, m=25, seed=3)
        mom_out = tmp_path / "mom.csv"
        mle_out = tmp_path / "mle.csv"
        assert run("fit", "--preds", paths["preds"], "--out", mom_out, "--mode", "mom") == 0
        assert run("fit", "--preds", paths["preds"], "--out", mle_out, "--mode", "mom-mle") == 0
        data = read_predictions(paths["preds"])
        mom_rows = {r.sample_id: r for r in read_alphas(str(mom_out))}
        mle_rows = {r.sample_id: r for r in read_alphas(str(mle_out))}
        for sid in data.sample_ids:
            probs = data.ensembles[sid]
            ll_mom = log_likelihood(mom_rows[sid].alpha, probs)
            ll_mle = log_likelihood(mle_rows[sid].alpha, probs)
            assert ll_mle >= ll_mom - 1e-9

    def test_degenerate_rows_are_flagged(self, tmp_path):
        lines = ["sample_id,model_id,p_0,p_1"]
        for m in range(3):
            lines.append(f"s0,m{m},0.9,0.1")
        for m in range(3):
            lines.append(f"s1,m{m},{0.5 + 0.01 * m},{0.5 - 0.01 * m}")
        preds = tmp_path / "p.csv"
        preds.write_text("\n".join(lines) + "\n")
        out = tmp_path / "f.csv"
        assert run("fit", "--preds", preds, "--out", out, "--mode", "mom-mle") == 0
        rows = {r.sample_id: r for r in read_alphas(str(out))}
        assert rows["s0"].degenerate
        assert rows["s0"].alpha.sum() == pytest.approx(1e6, rel=1e-9)
        assert not rows["s1"].degenerate

    def test_models_limit_uses_leading_subset(self, tmp_path):
        paths = simulate(tmp_path, n=10, m=8)
        full = tmp_path / "full.csv"
        limited = tmp_path / "lim.csv"
        assert run("fit", "--preds", paths["preds"], "--out", full) == 0
        assert run("fit", "--preds", paths["preds"], "--out", limited, "--models-limit", "4") == 0
        data = read_predictions(paths["preds"])
        lim_rows = {r.sample_id: r for r in read_alphas(str(limited))}
        from direns.estimators import EnsembleSample, fit_mom

        for sid in data.sample_ids[:3]:
            expected = fit_mom(EnsembleSample(data.ensembles[sid][:4]))
            np.testing.assert_array_equal(lim_rows[sid].alpha, expected.params.alpha)

    def test_models_limit_validation(self, tmp_path):
        paths = simulate(tmp_path, n=5, m=6)
        out = tmp_path / "f.csv"
        assert run("fit", "--preds", paths["preds"], "--out", out, "--models-limit", "1") == 1
        assert run("fit", "--preds", paths["preds"], "--out", out, "--models-limit", "7") == 1

    def test_thread_count_is_invisible_in_output(self, tmp_path, monkeypatch):
        paths = simulate(tmp_path, n=25, m=15)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        monkeypatch.setenv("DIRENS_THREADS", "4")
        assert run("fit", "--preds", paths["preds"], "--out", a, "--mode", "mom-mle") == 0
        monkeypatch.setenv("DIRENS_THREADS", "1")
        assert run("fit", "--preds", paths["preds"], "--out", b, "--mode", "mom-mle") == 0
        assert open(a, "rb").read() == open(b, "rb").read()


class TestEvaluateCommand:
    def test_report_structure_and_determinism(self, tmp_path):
        paths = simulate(tmp_path)
        fits = tmp_path / "fits.csv"
        assert run("fit", "--preds", paths["preds"], "--out", fits) == 0
        r1, r2 = tmp_path / "r1.json", tmp_path / "r2.json"
        for out in (r1, r2):
            code = run(
                "evaluate", "--alphas", fits, "--labels", paths["labels"], "--out", out
            )
            assert code == 0
        assert r1.read_bytes() == r2.read_bytes()
        doc = json.loads(r1.read_text())
        assert set(doc) == {"metrics", "bins", "histograms", "selective", "provenance"}
        assert doc["selective"] is None
        assert 0.0 <= doc["metrics"]["accuracy"] <= 1.0
        assert len(doc["bins"]) == 10
        assert sum(b["count"] for b in doc["bins"]) == 50
        prov = doc["provenance"]
        assert prov["version"]
        assert set(prov["inputs"]) == {"alphas", "labels"}
        for entry in prov["inputs"].values():
            assert len(entry["sha256"]) == 64

    def test_single_model_predictions_path(self, tmp_path):
        lines = ["sample_id,model_id,p_0,p_1", "s0,m0,0.9,0.1", "s1,m0,0.2,0.8"]
        preds = tmp_path / "p.csv"
        preds.write_text("\n".join(lines) + "\n")
        labels = tmp_path / "l.csv"
        labels.write_text("sample_id,label\ns0,0\ns1,1\n")
        out = tmp_path / "r.json"
        assert run("evaluate", "--preds", preds, "--labels", labels, "--out", out) == 0
        doc = json.loads(out.read_text())
        assert doc["metrics"]["accuracy"] == 1.0

    def test_rejects_multi_model_predictions(self, tmp_path):
        paths = simulate(tmp_path)
        out = tmp_path / "r.json"
        code = run("evaluate", "--preds", paths["preds"], "--labels", paths["labels"], "--out", out)
        assert code == 1

    def test_collapse_masks_error_rate(self, tmp_path):
        paths = simulate(tmp_path, scheme="collapse", n=400, m=5, k=20, seed=2)
        out = tmp_path / "r.json"
        assert run("evaluate", "--alphas", paths["alphas"], "--labels", paths["labels"], "--out", out) == 0
        doc = json.loads(out.read_text())
        assert doc["metrics"]["accuracy"] == pytest.approx(1.0 / 20.0, abs=0.05)
        assert doc["metrics"]["ece"] < 0.05


class TestThresholdAndSelect:
    def test_calibrate_threshold_report(self, tmp_path):
        paths = simulate(tmp_path, n=200, m=15)
        out = tmp_path / "t.json"
        code = run(
            "calibrate-threshold",
            "--alphas", paths["alphas"],
            "--labels", paths["labels"],
            "--risk", "0.2",
            "--out", out,
        )
        assert code == 0
        doc = json.loads(out.read_text())
        block = doc["threshold"]
        assert block["target_risk"] == 0.2
        assert block["cal_n"] + block["test_n"] == 200
        assert abs(block["cal_n"] - 100) <= 3
        if block["cal_coverage"] > 0:
            assert block["achieved_cal_risk"] <= 0.2

    def test_select_with_explicit_tau_keeps_everything(self, tmp_path):
        paths = simulate(tmp_path, n=60, m=15)
        out = tmp_path / "s.json"
        curve = tmp_path / "c.csv"
        code = run(
            "select",
            "--alphas", paths["alphas"],
            "--labels", paths["labels"],
            "--tau", "inf",
            "--out", out,
            "--curve-out", curve,
        )
        assert code == 0
        doc = json.loads(out.read_text())
        sel = doc["selective"]
        assert sel["tau"] == "inf"
        assert sel["coverage"] == 1.0
        assert sel["retained"]["n"] == 60
        assert sel["target_risk"] is None
        assert curve.read_text().startswith("coverage,risk,tau\n")

    def test_select_controls_risk_statistically(self, tmp_path):
        paths = simulate(tmp_path, n=800, m=10, seed=21)
        out = tmp_path / "s.json"
        code = run(
            "select",
            "--alphas", paths["alphas"],
            "--labels", paths["labels"],
            "--risk", "0.1",
            "--out", out,
        )
        assert code == 0
        sel = json.loads(out.read_text())["selective"]
        assert sel["cal_n"] + sel["test_n"] == 800
        if sel["retained"]["n"] > 0:
            test_risk = 1.0 - sel["retained"]["accuracy"]
            assert test_risk <= 0.15

    def test_split_seed_changes_partition(self, tmp_path):
        paths = simulate(tmp_path, n=100, m=10)
        a, b, c = tmp_path / "a.json", tmp_path / "b.json", tmp_path / "c.json"
        for out, seed in ((a, "1"), (b, "1"), (c, "2")):
            code = run(
                "select",
                "--alphas", paths["alphas"],
                "--labels", paths["labels"],
                "--seed", seed,
                "--out", out,
            )
            assert code == 0
        assert a.read_bytes() == b.read_bytes()
        assert a.read_bytes() != c.read_bytes()

    def test_tiny_input_fails_split(self, tmp_path):
        alphas = tmp_path / "a.csv"
        alphas.write_text("sample_id,degenerate,a_0,a_1\ns0,0,2.0,1.0\n")
        labels = tmp_path / "l.csv"
        labels.write_text("sample_id,label\ns0,0\n")
        out = tmp_path / "s.json"
        assert run("select", "--alphas", alphas, "--labels", labels, "--out", out) == 1


class TestRiskCoverageCommand:
    def test_matches_library_curve(self, tmp_path):
        paths = simulate(tmp_path, n=80, m=12)
        out = tmp_path / "rc.csv"
        assert run("risk-coverage", "--alphas", paths["alphas"], "--labels", paths["labels"], "--out", out) == 0
        from direns.cli import _scored_samples

        points = risk_coverage_curve(_scored_samples(paths["alphas"], paths["labels"]))
        lines = out.read_text().splitlines()
        assert lines[0] == "coverage,risk,tau"
        assert len(lines) == len(points) + 1
        for line, p in zip(lines[1:], points):
            cov, risk, tau = (float(x) for x in line.split(","))
            assert cov == p.coverage
            assert risk == p.risk
            assert tau == p.tau_at_point


class TestLossesCommand:
    def setup_files(self, tmp_path):
        alphas = tmp_path / "a.csv"
        alphas.write_text("sample_id,degenerate,a_0,a_1\ns0,0,2,2\n")
        labels = tmp_path / "l.csv"
        labels.write_text("sample_id,label\ns0,0\n")
        return alphas, labels

    def read_loss(self, path) -> dict:
        lines = path.read_text().splitlines()
        assert lines[0] == "sample_id,loss"
        assert lines[-1].startswith("__dataset_mean__,")
        return {line.split(",")[0]: float(line.split(",")[1]) for line in lines[1:]}

    def test_mse_hand_value(self, tmp_path):
        alphas, labels = self.setup_files(tmp_path)
        out = tmp_path / "loss.csv"
        assert run("losses", "--alphas", alphas, "--labels", labels, "--loss", "mse", "--out", out) == 0
        values = self.read_loss(out)
        assert values["s0"] == pytest.approx(0.6, abs=1e-12)
        assert values["__dataset_mean__"] == pytest.approx(0.6, abs=1e-12)

    def test_digamma_hand_value(self, tmp_path):
        alphas, labels = self.setup_files(tmp_path)
        out = tmp_path / "loss.csv"
        assert run("losses", "--alphas", alphas, "--labels", labels, "--loss", "digamma", "--out", out) == 0
        assert self.read_loss(out)["s0"] == pytest.approx(5.0 / 6.0, abs=1e-10)

    def test_mse_kl_with_schedule(self, tmp_path):
        alphas, labels = self.setup_files(tmp_path)
        out = tmp_path / "loss.csv"
        code = run(
            "losses", "--alphas", alphas, "--labels", labels,
            "--loss", "mse-kl", "--lambda0", "0.5", "--epoch", "5", "--epochs", "10",
            "--out", out,
        )
        assert code == 0
        lam = 0.5 / 2.0 * 0.5
        expected = 0.6 + lam * (math.log(6.0) - 5.0 / 3.0)
        assert self.read_loss(out)["s0"] == pytest.approx(expected, rel=1e-10)

    def test_log_evidence_value(self, tmp_path):
        alphas, labels = self.setup_files(tmp_path)
        out = tmp_path / "loss.csv"
        assert run(
            "losses", "--alphas", alphas, "--labels", labels,
            "--loss", "log-ev", "--lambda0", "2.0", "--out", out,
        ) == 0
        assert self.read_loss(out)["s0"] == pytest.approx(2.0 * math.log1p(4.0), rel=1e-12)

    def test_schedule_flag_misuse(self, tmp_path):
        alphas, labels = self.setup_files(tmp_path)
        out = tmp_path / "loss.csv"
        assert run("losses", "--alphas", alphas, "--labels", labels, "--loss", "mse", "--epoch", "3", "--out", out) == 1
        assert run(
            "losses", "--alphas", alphas, "--labels", labels,
            "--loss", "mse-kl", "--epoch", "3", "--out", out,
        ) == 1
        assert run(
            "losses", "--alphas", alphas, "--labels", labels,
            "--loss", "mse-kl", "--epoch", "11", "--epochs", "10", "--out", out,
        ) == 1

    def test_mean_row_averages_samples(self, tmp_path):
        alphas = tmp_path / "a.csv"
        alphas.write_text(
            "sample_id,degenerate,a_0,a_1\ns0,0,2,2\ns1,0,4,1\n"
        )
        labels = tmp_path / "l.csv"
        labels.write_text("sample_id,label\ns0,0\ns1,1\n")
        out = tmp_path / "loss.csv"
        assert run("losses", "--alphas", alphas, "--labels", labels, "--loss", "mse", "--out", out) == 0
        values = self.read_loss(out)
        assert values["__dataset_mean__"] == pytest.approx(
            (values["s0"] + values["s1"]) / 2.0, rel=1e-15
        )


class TestExitCodes:
    def test_missing_file_is_io_error(self, tmp_path):
        assert run("fit", "--preds", tmp_path / "nope.csv", "--out", tmp_path / "o.csv") == 2

    def test_malformed_csv_is_validation_error(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("sample_id,model_id,p_0,p_1\ns0,m0,2.0,-1.0\n")
        assert run("fit", "--preds", bad, "--out", tmp_path / "o.csv") == 1

    def test_unknown_flag_is_validation_error(self, tmp_path):
        assert run("fit", "--nonsense") == 1

    def test_help_and_version_succeed(self, capsys):
        assert run("--help") == 0
        assert run("--version") == 0
        out = capsys.readouterr().out
        assert "direns" in out
