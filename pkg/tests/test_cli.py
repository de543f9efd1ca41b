import json

import numpy as np
import pytest

from noisyncg.cli import config_from_dict, main
from noisyncg.problems import load_dataset_binary, load_dataset_text


CONFIG = {
    "problem": {"kind": "quadratic", "dim": 8,
                "spectrum": {"min": 1.0, "max": 4.0}, "seed": 3},
    "variant": "dynamic",
    "epsilon": 1e-8,
    "max_iters": 200,
    "replications": 4,
    "base_seed": 11,
    "x0": [4.0] * 8,
    "ls": {"c": 0.1, "tau": 0.5, "t_max": 1.0, "t0": 1.0,
           "eta_bar": 0.5, "theta": 0.02},
    "grad": {"delta_g": 0.1, "failure_mode": "scaled_opposite"},
    "hess": {"delta_h": 0.1, "C": 1.0},
}


@pytest.fixture()
def config_path(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(CONFIG))
    return p


def test_config_from_dict_builds_everything():
    config = config_from_dict(CONFIG)
    assert config.variant == "dynamic"
    assert config.ls.theta == 0.02
    assert config.grad_params.delta_g == 0.1
    assert config.hess_params.accuracy_constant == 1.0
    assert config.noise is None and config.sub is None


def test_run_subcommand(tmp_path, config_path, capsys):
    out = tmp_path / "out"
    rc = main(["run", "--config", str(config_path), "--out-dir", str(out),
               "--seed", "5"])
    assert rc == 0
    assert (out / "trace_5.json").exists()
    assert (out / "trace_5.csv").exists()
    assert "stop=hit_epsilon" in capsys.readouterr().out


def test_batch_and_report_subcommands(tmp_path, config_path, capsys):
    out = tmp_path / "batch"
    rc = main(["batch", "--config", str(config_path), "--out-dir", str(out)])
    assert rc == 0
    stats = json.loads((out / "stats.json").read_text())
    assert stats["audit_violation_count"] == 0
    assert stats["stats"]["censored_count"] == 0
    assert len(list(out.glob("trace_*.json"))) == CONFIG["replications"]

    rc = main(["report", "--out-dir", str(out)])
    assert rc == 0
    assert (out / "summary.csv").exists()
    assert (out / "gap_vs_iteration.svg").exists()
    assert (out / "steplength_vs_iteration.svg").exists()


def test_theory_subcommand(config_path, capsys):
    rc = main(["theory", "--config", str(config_path)])
    assert rc == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["kappa1"] == pytest.approx(0.125)
    assert doc["gap0"] > 0


def test_epsilon_override(tmp_path, config_path, capsys):
    out = tmp_path / "out2"
    rc = main(["run", "--config", str(config_path), "--out-dir", str(out),
               "--epsilon", "1e-2"])
    assert rc == 0
    doc = json.loads((out / f"trace_{CONFIG['base_seed']}.json").read_text())
    assert doc["params"]["epsilon"] == 1e-2


def test_dataset_subcommand(tmp_path, capsys):
    base = tmp_path / "data" / "toy"
    rc = main(["dataset", "--samples", "30", "--dim", "4", "--seed", "2",
               "--out", str(base)])
    assert rc == 0
    at, yt = load_dataset_text(base.with_suffix(".txt"))
    ab, yb = load_dataset_binary(base.with_suffix(".bin"))
    assert at.shape == (30, 4) and ab.shape == (30, 4)
    assert np.array_equal(yt, yb)
    assert set(np.unique(yt)) <= {-1.0, 1.0}


def test_finite_sum_config(tmp_path, capsys):
    doc = {
        "problem": {"kind": "logistic_synthetic", "n_samples": 60, "dim": 5,
                    "ridge": 0.01, "data_seed": 1},
        "variant": "finite_sum",
        "epsilon": 1e-5,
        "max_iters": 200,
        "replications": 2,
        "ls": {"c": 0.1},
        "sub": {"kappa_gamma": 0.5, "gamma_0": 1.0, "delta_g": 0.1,
                "delta_h": 0.1, "C": 1.0},
    }
    cfg = tmp_path / "fs.json"
    cfg.write_text(json.dumps(doc))
    out = tmp_path / "fs_out"
    rc = main(["batch", "--config", str(cfg), "--out-dir", str(out)])
    assert rc == 0
    stats = json.loads((out / "stats.json").read_text())
    assert stats["stats"]["censored_count"] == 0


def test_report_without_traces_fails(tmp_path):
    assert main(["report", "--out-dir", str(tmp_path)]) == 2
