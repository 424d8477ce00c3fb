import json
import os

import numpy as np
import pytest

from censlasso.cli import main
from censlasso.data import GenerationSpec, generate_dataset, write_csv

CONFIG_TEXT = """\
[generation]
n = 200
p = 4
beta0 = 1,-2
intercept = 0
design_mean = 1
target_censoring_rate = 0.25
seed = 0

[simulation]
replications = 2
methods = expectile
lambda_rule = fixed:1
master_seed = 77
compare_full_data = false

[aggregation]
K = 1,2
w = sqrt
km_scope = per_group

[tuning]
penalty_mode = log_n_over_n

[solvers]
gamma = 1
tol = 1e-8
max_iter = 10000
"""


@pytest.fixture()
def dataset_csv(tmp_path):
    spec = GenerationSpec(n=150, p=3, beta0=(1.0, -2.0, 0.0), seed=5)
    ds = generate_dataset(spec, bound=8.0)
    path = tmp_path / "data.csv"
    write_csv(ds, path)
    return str(path)


def test_fit_happy_path(dataset_csv, tmp_path, capsys):
    out = tmp_path / "fit.json"
    code = main([
        "fit", "--data", dataset_csv, "--method", "quantile:0.37",
        "--lambda", "5.0", "--output", str(out),
    ])
    assert code == 0
    payload = json.loads(out.read_text())
    assert len(payload["beta"]) == 3
    assert payload["lambda"] == 5.0
    assert "support" in payload
    assert "fit:" in capsys.readouterr().out


def test_fit_missing_file_names_path(tmp_path, capsys):
    out = tmp_path / "fit.json"
    code = main([
        "fit", "--data", str(tmp_path / "absent.csv"), "--method", "median",
        "--lambda", "1.0", "--output", str(out),
    ])
    assert code == 2
    assert "absent.csv" in capsys.readouterr().err


def test_fit_lambda_and_bic_conflict(dataset_csv, tmp_path):
    code = main([
        "fit", "--data", dataset_csv, "--method", "median",
        "--lambda", "1.0", "--bic", "--output", str(tmp_path / "x.json"),
    ])
    assert code == 4


def test_fit_requires_lambda_choice(dataset_csv, tmp_path):
    code = main([
        "fit", "--data", dataset_csv, "--method", "median",
        "--output", str(tmp_path / "x.json"),
    ])
    assert code == 4


def test_fit_auto_index_method_rejected(dataset_csv, tmp_path):
    code = main([
        "fit", "--data", dataset_csv, "--method", "quantile",
        "--lambda", "1.0", "--output", str(tmp_path / "x.json"),
    ])
    assert code == 4


def test_km_hand_example(tmp_path):
    data = tmp_path / "km.csv"
    data.write_text("y,delta,x1\n1,1,0.0\n2,0,0.0\n3,1,0.0\n")
    out = tmp_path / "curve.csv"
    assert main(["km", "--data", str(data), "--output", str(out)]) == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "time,survival"
    assert lines[1] == "0,1"
    assert lines[2] == "2,0.5"


def test_tune_emits_twenty_row_path(dataset_csv, tmp_path):
    out = tmp_path / "path.csv"
    code = main([
        "tune", "--data", dataset_csv, "--method", "expectile:0.3",
        "--output", str(out),
    ])
    assert code == 0
    lines = out.read_text().strip().splitlines()
    assert len(lines) == 21
    assert lines[0] == "lambda,score,support_size"


def test_aggregate_k1_matches_fit(dataset_csv, tmp_path):
    fit_out = tmp_path / "fit.json"
    agg_out = tmp_path / "agg.json"
    assert main([
        "fit", "--data", dataset_csv, "--method", "expectile:0.3",
        "--lambda", "6.0", "--output", str(fit_out),
    ]) == 0
    assert main([
        "aggregate", "--data", dataset_csv, "--method", "expectile:0.3",
        "--lambda", "6.0", "--K", "1", "--w", "1", "--output", str(agg_out),
    ]) == 0
    fit_beta = json.loads(fit_out.read_text())["beta"]
    agg_beta = json.loads(agg_out.read_text())["beta_check"]
    assert np.allclose(fit_beta, agg_beta, atol=0)


def test_simulate_from_config(tmp_path, capsys):
    cfg = tmp_path / "study.ini"
    cfg.write_text(CONFIG_TEXT)
    outdir = tmp_path / "out"
    code = main(["simulate", "--config", str(cfg), "--output-dir", str(outdir)])
    assert code == 0
    assert (outdir / "report.json").exists()
    metrics = (outdir / "selection_metrics.csv").read_text().splitlines()
    assert metrics[0].startswith("method,plan,")
    assert len(metrics) == 3  # header + expectile x {K=1, K=2}
    out = capsys.readouterr().out
    assert out.count("simulate:") >= 2


def test_simulate_rerun_identical_outputs(tmp_path):
    cfg = tmp_path / "study.ini"
    cfg.write_text(CONFIG_TEXT)
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    assert main(["simulate", "--config", str(cfg), "--output-dir", str(out1)]) == 0
    assert main(["simulate", "--config", str(cfg), "--output-dir", str(out2)]) == 0
    for name in ("report.json", "selection_metrics.csv", "deviations.csv",
                 "normality.csv", "bic_minimizers.csv"):
        assert (out1 / name).read_text() == (out2 / name).read_text()


def test_simulate_invalid_replications_exits_4(tmp_path):
    cfg = tmp_path / "study.ini"
    cfg.write_text(CONFIG_TEXT)
    code = main([
        "simulate", "--config", str(cfg), "--output-dir", str(tmp_path / "o"),
        "--set", "simulation.replications=0",
    ])
    assert code == 4


def test_simulate_missing_config_exits_2(tmp_path):
    code = main([
        "simulate", "--config", str(tmp_path / "no.ini"),
        "--output-dir", str(tmp_path / "o"),
    ])
    assert code == 2


def test_simulate_env_seed_override(tmp_path, monkeypatch):
    cfg = tmp_path / "study.ini"
    cfg.write_text(CONFIG_TEXT)
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    assert main(["simulate", "--config", str(cfg), "--output-dir", str(out1)]) == 0
    monkeypatch.setenv("CENSLASSO_SEED", "31337")
    assert main(["simulate", "--config", str(cfg), "--output-dir", str(out2)]) == 0
    assert (out1 / "report.json").read_text() != (out2 / "report.json").read_text()


def test_bench_writes_csv(tmp_path, capsys):
    cfg = tmp_path / "study.ini"
    cfg.write_text(CONFIG_TEXT)
    out = tmp_path / "timings.csv"
    code = main(["bench", "--config", str(cfg), "--output", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "K,phase,seconds"
    assert "bench: K=1" in capsys.readouterr().out


@pytest.mark.parametrize("command", [
    ["fit", "--help"],
    ["km", "--help"],
    ["tune", "--help"],
    ["aggregate", "--help"],
    ["simulate", "--help"],
    ["bench", "--help"],
    ["--help"],
])
def test_help_exits_zero(command, capsys):
    with pytest.raises(SystemExit) as exc:
        main(command)
    assert exc.value.code == 0
    assert "usage" in capsys.readouterr().out


def test_set_override_wins_over_config(tmp_path):
    cfg = tmp_path / "study.ini"
    cfg.write_text(CONFIG_TEXT)
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    assert main(["simulate", "--config", str(cfg), "--output-dir", str(out1)]) == 0
    assert main([
        "simulate", "--config", str(cfg), "--output-dir", str(out2),
        "--set", "simulation.master_seed=12345",
    ]) == 0
    assert (out1 / "report.json").read_text() != (out2 / "report.json").read_text()
