import json
import math
import os

import pytest

vflsim = pytest.importorskip("vflsim")

BASE_CONFIG = """
method = vimadmm
dataset.kind = synthetic
dataset.synthetic.n = 60
dataset.synthetic.classes = 3
dataset.synthetic.informative_dims = 3,3
model.hidden = 0
model.d_f = 4
train.batch = 20
train.max_rounds = 6
stop.drop_tol = 100
seeds = 5
"""


def test_effective_config_round_trips():
    echo = vflsim.effective_config(BASE_CONFIG)
    assert "method = vimadmm" in echo
    assert vflsim.effective_config(echo) == echo


def test_effective_config_rejects_unknown_key():
    with pytest.raises(ValueError, match="bogus.key"):
        vflsim.effective_config("method = split\nbogus.key = 1\n")


def test_run_training_returns_metrics_heads_and_ledger():
    result = vflsim.run_training(BASE_CONFIG)
    assert result["error"] == ""
    assert result["rounds_run"] == 6
    rows = result["metrics"]
    assert rows and rows[-1]["round"] == 6
    assert 0.0 <= rows[-1]["test_acc"] <= 1.0
    assert rows[-1]["bytes_up"] > 0

    heads = result["heads"]
    assert len(heads) == 2  # one head per client
    assert len(heads[0]) == 4 and len(heads[0][0]) == 3  # d_f x classes

    ranking = result["importance"]
    assert sorted(client for client, _ in ranking) == [0, 1]
    assert ranking[0][1] >= ranking[1][1]

    ledger = json.loads(result["ledger_json"])
    assert ledger  # per-client message-class records

    header = result["metrics_csv"].splitlines()[0]
    assert header == (
        "round,train_loss,val_acc,test_acc,admm_loss,"
        "constraint_residual,bytes_up,bytes_down,epsilon"
    )


def test_run_training_is_deterministic():
    a = vflsim.run_training(BASE_CONFIG, seed=7)
    b = vflsim.run_training(BASE_CONFIG, seed=7)
    assert a["metrics_csv"] == b["metrics_csv"]
    assert a["ledger_json"] == b["ledger_json"]


def test_run_training_rejects_grids():
    with pytest.raises(ValueError, match="grid"):
        vflsim.run_training(BASE_CONFIG + "train.rho = 0.5,1\n")


def test_run_experiment_writes_artifact_tree(tmp_path):
    out = tmp_path / "run"
    vflsim.run_experiment(BASE_CONFIG, str(out))
    for name in ("effective.conf", "summary.json"):
        assert (out / name).is_file()
    seed_dir = out / "seed_5"
    for name in ("effective.conf", "metrics.csv", "ledger.json", "checkpoint.bin"):
        assert (seed_dir / name).is_file()
    summary = json.loads((out / "summary.json").read_text())
    assert summary


def test_accountant_inverts():
    spend = vflsim.rdp_epsilon(530, 10.0, delta=1e-5)
    assert spend["epsilon"] > 0 and spend["alpha"] > 1
    sigma = vflsim.calibrate_sigma(530, spend["epsilon"], delta=1e-5)
    assert sigma == pytest.approx(10.0, rel=1e-2)
    assert vflsim.label_dp_epsilon(1.0) == pytest.approx(2 * math.sqrt(2))


def test_update_z_solves_stationarity():
    labels = [1]
    lam = [[0.05, -0.02, 0.01]]
    pred = [[0.3, -0.4, 0.2]]
    z0 = [[0.0, 0.0, 0.0]]
    rho = 1.0
    (z,) = vflsim.update_z(labels, lam, pred, z0, rho)
    exps = [math.exp(v - max(z)) for v in z]
    total = sum(exps)
    for c in range(3):
        grad = exps[c] / total - (1.0 if c == labels[0] else 0.0)
        residual = grad - lam[0][c] - rho * (pred[0][c] - z[c])
        assert abs(residual) <= 1e-7


def test_dp_run_reports_spend():
    result = vflsim.run_training(
        BASE_CONFIG + "dp.enabled = true\ndp.clip = 0.5\ndp.sigma = 2.0\n"
    )
    assert result["error"] == ""
    assert result["sigma"] == 2.0
    assert result["epsilon"] > 0
    assert result["metrics"][-1]["epsilon"] > 0
