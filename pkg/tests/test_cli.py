"""Command-line surface tests: all subcommands, exit codes, determinism."""

import json
import os

import numpy as np
import pytest

from elicit.cli import main
from elicit.persist import load_bundle


@pytest.fixture()
def tiny_config(tmp_path):
    with open("configs/case_study_1.json", encoding="utf-8") as fh:
        doc = json.load(fh)
    doc["model"]["context"]["n_gr"] = 3
    doc["trainer"].update({"epochs": 3, "B": 6, "num_samples": 20, "progress": 0})
    doc["initializer"]["iterations"] = 4
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(doc))
    return str(path)


def read_csv(path):
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n").split(",") for line in fh]


class TestTemplate:
    def test_prints_four_key_skeleton(self, tiny_config, capsys):
        assert main(["template", tiny_config]) == 0
        skeleton = json.loads(capsys.readouterr().out)
        assert skeleton == {
            "quantiles_y_gr0": [0.0, 0.0, 0.0],
            "quantiles_y_gr1": [0.0, 0.0, 0.0],
            "quantiles_y_gr2": [0.0, 0.0, 0.0],
            "quantiles_r2": [0.0, 0.0, 0.0],
        }


class TestFit:
    def test_writes_bundle_and_tables(self, tiny_config, tmp_path):
        out = str(tmp_path / "out")
        assert main(["fit", tiny_config, "--runs", "2", "--out", out]) == 0
        for name in ("bundle.json", "history.csv", "elicits.csv", "priors.csv"):
            assert os.path.exists(os.path.join(out, name)), name
        saved = load_bundle(os.path.join(out, "bundle.json"))
        assert len(saved.records) == 2
        assert [r.seed for r in saved.records] == [1234, 1235]

    def test_history_csv_layout(self, tiny_config, tmp_path):
        out = str(tmp_path / "out")
        main(["fit", tiny_config, "--out", out])
        rows = read_csv(os.path.join(out, "history.csv"))
        header = rows[0]
        assert header[:3] == ["run", "epoch", "total_loss"]
        assert header[-2:] == ["grad_norm", "time_s"]
        assert "quantiles_r2" in header and "mu0" in header and "sigma3" in header
        assert len(rows) == 1 + 3  # header + epochs

    def test_deterministic_output_excluding_time(self, tiny_config, tmp_path):
        out_a = str(tmp_path / "a")
        out_b = str(tmp_path / "b")
        main(["fit", tiny_config, "--out", out_a])
        main(["fit", tiny_config, "--out", out_b])
        rows_a = read_csv(os.path.join(out_a, "history.csv"))
        rows_b = read_csv(os.path.join(out_b, "history.csv"))
        drop_time = lambda rows: [r[:-1] for r in rows]
        assert drop_time(rows_a) == drop_time(rows_b)

    def test_svg_siblings(self, tiny_config, tmp_path):
        out = str(tmp_path / "out")
        main(["fit", tiny_config, "--out", out, "--svg"])
        assert os.path.exists(os.path.join(out, "fit_loss.svg"))
        assert os.path.exists(os.path.join(out, "fit_hyperparameters.svg"))
        content = open(os.path.join(out, "fit_loss.svg")).read()
        assert content.startswith("<svg") and "polyline" in content

    def test_validation_error_exit_code(self, tiny_config, tmp_path, capsys):
        doc = json.load(open(tiny_config))
        del doc["expert"]["data"]["quantiles_r2"]
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(doc))
        assert main(["fit", str(bad), "--out", str(tmp_path / "o")]) == 1
        err = capsys.readouterr().err
        assert err.startswith("elicit: error: validation:")


class TestDiagnose:
    def test_writes_stem_named_tables(self, tiny_config, tmp_path):
        out = str(tmp_path / "out")
        main(["fit", tiny_config, "--runs", "2", "--out", out])
        diag = str(tmp_path / "diag")
        assert main(["diagnose", os.path.join(out, "bundle.json"), "--out", diag]) == 0
        for export in ("loss", "hyperparameters", "elicits", "priors"):
            assert os.path.exists(os.path.join(diag, f"bundle_{export}.csv"))
        rows = read_csv(os.path.join(diag, "bundle_loss.csv"))
        # 2 runs x 3 epochs x (total + 4 components) + header
        assert len(rows) == 1 + 2 * 3 * 5

    def test_empty_bundle_is_validation_error(self, tiny_config, tmp_path, capsys):
        from elicit.config import parse_config
        from elicit.persist import save_bundle

        path = str(tmp_path / "empty.json")
        save_bundle(path, parse_config(tiny_config), [])
        assert main(["diagnose", path, "--out", str(tmp_path / "d")]) == 1


class TestAverage:
    def test_weights_and_pool(self, tiny_config, tmp_path):
        out = str(tmp_path / "out")
        main(["fit", tiny_config, "--runs", "2", "--out", out])
        avg = str(tmp_path / "avg")
        assert main(
            ["average", os.path.join(out, "bundle.json"), "--out", avg, "--pool-size", "64"]
        ) == 0
        rows = read_csv(os.path.join(avg, "weights.csv"))
        assert rows[0] == ["run", "final_loss", "weight"]
        weights = [float(r[2]) for r in rows[1:]]
        assert sum(weights) == pytest.approx(1.0, abs=1e-12)
        pool = read_csv(os.path.join(avg, "pooled_priors.csv"))
        assert pool[0] == ["beta0", "beta1", "beta2", "sigma"]
        assert len(pool) == 1 + 64


class TestSimulateExpert:
    def test_oracle_file_feeds_fit(self, tiny_config, tmp_path):
        expert_path = str(tmp_path / "expert.json")
        code = main(
            [
                "simulate-expert",
                tiny_config,
                "--truth",
                "mu0=1.4,sigma0=0.2,mu1=0.1,sigma1=0.1,mu2=0.2,sigma2=0.1,sigma3=0.3",
                "--samples",
                "2000",
                "--out",
                expert_path,
            ]
        )
        assert code == 0
        data = json.load(open(expert_path))
        assert set(data) == {
            "quantiles_y_gr0", "quantiles_y_gr1", "quantiles_y_gr2", "quantiles_r2"
        }
        assert all(len(v) == 3 for v in data.values())
        # splice the oracle data into the config and fit on it
        doc = json.load(open(tiny_config))
        doc["expert"] = {"path": os.path.basename(expert_path)}
        cfg = tmp_path / "round.json"
        cfg.write_text(json.dumps(doc))
        assert main(["fit", str(cfg), "--out", str(tmp_path / "rt")]) == 0

    def test_bad_truth_syntax(self, tiny_config, capsys):
        assert main(["simulate-expert", tiny_config, "--truth", "mu0"]) == 1
        assert "validation" in capsys.readouterr().err
