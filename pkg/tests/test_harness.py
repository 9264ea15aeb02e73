import json
import math

import numpy as np
import pytest

from cocomem.cli import main as cli_main
from cocomem.harness import (
    CSV_HEADER,
    ConfigError,
    ExperimentConfig,
    checkpoints,
    emit_csv,
    run_experiment,
    run_single,
    verify_experiment,
)
from cocomem.metrics import regret_and_ccv


BASE = {
    "algorithm": "penalty_ogd",
    "variant": "coco_m2",
    "environment": {"kind": "appendix_a", "m": 2, "horizon": 120},
    "penalty": "quadratic",
    "lambda_mode": "sqrt_t_schedule",
    "seeds": [0, 1, 2],
    "name": "t",
}


def _cfg(**over):
    obj = dict(BASE)
    obj.update(over)
    return ExperimentConfig.from_dict(obj)


def test_csv_header_is_exact():
    assert CSV_HEADER == (
        "t,x,f_mem,g_mem,g_plus_recorded,V_t,eta_or_mu,"
        "eps_f,eps_g,eps_Z,regret_static_cum,regret_perround_cum,ccv_cum"
    )


def test_csv_schema_and_replay(tmp_path):
    cfg = _cfg(seeds=[0])
    trace = run_single(cfg, 0)
    series = regret_and_ccv(trace)
    path = tmp_path / "run.csv"
    emit_csv(trace, series, path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == CSV_HEADER
    assert len(lines) == 1 + len(trace.records)
    rows = [line.split(",") for line in lines[1:]]
    # V_t column replays as the cumulative sum of g_plus_recorded
    v = 0.0
    for row in rows:
        v += float(row[4])
        assert float(row[5]) == pytest.approx(v, rel=1e-12, abs=1e-12)
        assert float(row[12]) == pytest.approx(v, rel=1e-12, abs=1e-12)
    # eps columns are zero markers for the no-prediction learner
    assert all(float(r[7]) == float(r[8]) == float(r[9]) == 0.0 for r in rows)
    # monotone bookkeeping
    ccv = [float(r[12]) for r in rows]
    assert all(b >= a - 1e-12 for a, b in zip(ccv, ccv[1:]))


def test_run_experiment_is_deterministic(tmp_path):
    cfg = _cfg(seeds=[0, 1])
    run_experiment(cfg, tmp_path / "a")
    run_experiment(cfg, tmp_path / "b")
    for name in ("t_seed0.csv", "t_seed1.csv", "t_summary.json", "t_seed0_instance.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_parallel_matches_serial(tmp_path):
    cfg = _cfg(seeds=[0, 1])
    run_experiment(cfg, tmp_path / "ser", parallel=1)
    run_experiment(cfg, tmp_path / "par", parallel=2)
    for name in ("t_seed0.csv", "t_seed1.csv", "t_summary.json"):
        assert (tmp_path / "ser" / name).read_bytes() == (tmp_path / "par" / name).read_bytes()


def test_summary_matches_external_average(tmp_path):
    cfg = _cfg()
    summary = run_experiment(cfg, tmp_path)
    marks = checkpoints(2, 120)
    per_seed = {t: [] for t in marks}
    for seed in cfg.seeds:
        rows = (tmp_path / f"t_seed{seed}.csv").read_text().strip().split("\n")[1:]
        by_t = {int(r.split(",")[0]): r.split(",") for r in rows}
        for t in marks:
            per_seed[t].append(float(by_t[t][10]) / t)
    for t in marks:
        got = summary["checkpoints"][str(t)]["regret_static_per_round"]["mean"]
        assert got == pytest.approx(float(np.mean(per_seed[t])), rel=1e-12)
    assert summary["seeds_failed"] == []
    assert summary["rng"] == "pcg64"


def test_failed_seed_does_not_poison_aggregate(tmp_path, monkeypatch):
    import cocomem.harness as hz

    real = hz.run_single

    def flaky(cfg, seed):
        if seed == 1:
            raise RuntimeError("boom")
        return real(cfg, seed)

    monkeypatch.setattr(hz, "run_single", flaky)
    summary = run_experiment(_cfg(), tmp_path)
    assert summary["seeds_completed"] == [0, 2]
    assert summary["seeds_failed"][0]["seed"] == 1


def test_invalid_combinations_rejected():
    with pytest.raises(ConfigError):
        _cfg(algorithm="odaf")  # optimistic needs separable slices
    with pytest.raises(ConfigError):
        _cfg(penalty="exponential")  # exponential descent needs coco_m
    with pytest.raises(ConfigError):
        _cfg(penalty="exponential", variant="coco_m",
             lambda_mode="sqrt_t_schedule")  # schedule is quadratic-only
    with pytest.raises(ConfigError):
        _cfg(algorithm="odaf",
             environment={"kind": "separable_linear", "m": 1, "horizon": 50},
             penalty="quadratic")
    with pytest.raises(ConfigError):
        _cfg(algorithm="odaf", variant="coco_m",
             environment={"kind": "separable_linear", "m": 1, "horizon": 50},
             penalty="exponential")  # memory-less variant needs delay-0 slices
    with pytest.raises(ConfigError):
        _cfg(lambda_mode="explicit")  # needs a positive value
    with pytest.raises(ConfigError):
        _cfg(environment={"kind": "nowhere"})
    with pytest.raises(ConfigError):
        _cfg(seeds=[])
    # the five supported problem rows all validate
    _cfg(variant="coco_m")
    _cfg()
    _cfg(algorithm="odaf", variant="coco_m2", penalty="exponential",
         lambda_mode="fixed_theorem",
         environment={"kind": "separable_linear", "m": 1, "horizon": 50})
    _cfg(algorithm="odaf", variant="coco_m", penalty="exponential",
         lambda_mode="fixed_theorem",
         environment={"kind": "separable_linear", "m": 1, "horizon": 50,
                      "constraint_memory": False})
    _cfg(algorithm="odaf_doubling", variant="coco_m2", penalty="exponential",
         lambda_mode="fixed_theorem",
         environment={"kind": "separable_linear", "m": 1, "horizon": 50})


def test_verify_experiment_passes(tmp_path):
    ok, lines = verify_experiment(_cfg(seeds=[0]), resolution=5e-3)
    assert ok
    assert any("ogd_surrogate_regret" in line for line in lines)


def test_cli_exit_codes(tmp_path, monkeypatch):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({**BASE, "seeds": [0]}))
    out = tmp_path / "out"
    assert cli_main(["run", "--config", str(cfg_path), "--out", str(out)]) == 0
    assert (out / "t_seed0.csv").exists()
    # env var override of the output directory
    env_out = tmp_path / "envout"
    monkeypatch.setenv("COCO_MEM_OUT", str(env_out))
    assert cli_main(["run", "--config", str(cfg_path)]) == 0
    assert (env_out / "t_seed0.csv").exists()
    monkeypatch.delenv("COCO_MEM_OUT")
    # config errors
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({**BASE, "algorithm": "sorcery"}))
    assert cli_main(["run", "--config", str(bad)]) == 1
    assert cli_main(["run", "--config", str(tmp_path / "missing.json")]) == 1
    # bounds subcommand
    assert cli_main(["bounds", "--config", str(cfg_path)]) == 0


def test_cli_verify_exit_code(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({**BASE, "seeds": [0],
                                    "environment": {"kind": "appendix_a", "m": 1,
                                                    "horizon": 60}}))
    assert cli_main(["verify", "--config", str(cfg_path), "--resolution", "0.005"]) == 0


def test_checkpoint_marks():
    assert checkpoints(3, 4000) == [400, 1000, 2000, 3000, 4000]
    assert checkpoints(3, 20) == [3, 5, 10, 15, 20]
