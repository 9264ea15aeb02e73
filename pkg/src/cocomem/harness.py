"""Experiment orchestration: JSON configs, per-seed runs, CSV traces,
aggregate summaries, and the verification entry points.

One config drives many seeds; every seed's pipeline (instance, learner,
metrics, files) is fully isolated, so seeds can run in parallel processes
and results are byte-identical across reruns of the same config.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import Variant
from .environments import (
    RNG_NAME,
    AppendixAInstance,
    SeparableLinearInstance,
    make_predictor,
)
from .metrics import (
    BoundReport,
    MetricSeries,
    RunTrace,
    invariant_suite,
    regret_and_ccv,
    theorem_bound_report,
)
from .penalty import (
    LambdaSchedule,
    PenaltyKind,
    lambda_exponential_short_memory,
    lambda_quadratic,
)
from .penalty_ogd import run_penalty_ogd

CSV_HEADER = (
    "t,x,f_mem,g_mem,g_plus_recorded,V_t,eta_or_mu,"
    "eps_f,eps_g,eps_Z,regret_static_cum,regret_perround_cum,ccv_cum"
)

ALGORITHMS = ("penalty_ogd", "odaf", "odaf_doubling")
ENV_KINDS = ("appendix_a", "separable_linear")
LAMBDA_MODES = ("fixed_theorem", "sqrt_t_schedule", "explicit")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    algorithm: str
    variant: Variant
    environment: dict
    penalty: PenaltyKind = PenaltyKind.QUADRATIC
    lambda_mode: str = "fixed_theorem"
    lambda_value: float | None = None
    predictor: dict = field(default_factory=lambda: {"kind": "perfect"})
    error_estimate: float = 0.0
    alpha: float | None = None
    seeds: list[int] = field(default_factory=lambda: [0])
    out_dir: str = "runs"
    name: str = "experiment"

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        try:
            cfg = cls(
                algorithm=obj["algorithm"],
                variant=Variant(obj["variant"]),
                environment=dict(obj["environment"]),
                penalty=PenaltyKind(obj.get("penalty", "quadratic")),
                lambda_mode=obj.get("lambda_mode", "fixed_theorem"),
                lambda_value=obj.get("lambda_value"),
                predictor=dict(obj.get("predictor", {"kind": "perfect"})),
                error_estimate=float(obj.get("error_estimate", 0.0)),
                alpha=obj.get("alpha"),
                seeds=[int(s) for s in obj.get("seeds", [0])],
                out_dir=obj.get("out_dir", "runs"),
                name=obj.get("name", "experiment"),
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"bad config: {exc}") from exc
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        kind = self.environment.get("kind")
        if kind not in ENV_KINDS:
            raise ConfigError(f"unknown environment kind {kind!r}")
        if self.lambda_mode not in LAMBDA_MODES:
            raise ConfigError(f"unknown lambda mode {self.lambda_mode!r}")
        if self.lambda_mode == "explicit" and not (
            self.lambda_value is not None and self.lambda_value > 0
        ):
            raise ConfigError("explicit lambda mode needs a positive lambda_value")
        if not self.seeds:
            raise ConfigError("need at least one seed")
        if self.algorithm == "penalty_ogd":
            if self.lambda_mode == "sqrt_t_schedule" and self.penalty is not PenaltyKind.QUADRATIC:
                raise ConfigError("the 1/sqrt(t) schedule is tied to the quadratic penalty")
            if self.penalty is PenaltyKind.EXPONENTIAL and self.variant is not Variant.COCO_M:
                raise ConfigError(
                    "the exponential-penalty descent covers memory-less constraints only"
                )
        else:
            if kind != "separable_linear":
                raise ConfigError("the optimistic learners need separable linear slices")
            if self.penalty is not PenaltyKind.EXPONENTIAL:
                raise ConfigError("the optimistic learners use the exponential penalty")
            if self.lambda_mode == "sqrt_t_schedule":
                raise ConfigError("the optimistic learners use a fixed lambda per epoch")
            cmem = self.environment.get("constraint_memory", True)
            if self.variant is Variant.COCO_M and cmem:
                raise ConfigError(
                    "memory-less-constraint runs need constraint_memory=false slices"
                )
        if self.predictor.get("kind", "perfect") not in ("perfect", "zero", "noisy"):
            raise ConfigError(f"unknown predictor {self.predictor!r}")


def load_config(path: str | Path) -> ExperimentConfig:
    with open(path) as fh:
        return ExperimentConfig.from_dict(json.load(fh))


def build_instance(cfg: ExperimentConfig, seed: int):
    env = dict(cfg.environment)
    kind = env.pop("kind")
    env["seed"] = seed
    try:
        if kind == "appendix_a":
            return AppendixAInstance(**env)
        return SeparableLinearInstance(**env)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad environment parameters: {exc}") from exc


def _ogd_schedule(cfg: ExperimentConfig, instance) -> LambdaSchedule:
    if cfg.lambda_mode == "sqrt_t_schedule":
        return LambdaSchedule("sqrt_t")
    if cfg.lambda_mode == "explicit":
        return LambdaSchedule("fixed", float(cfg.lambda_value))
    if cfg.penalty is PenaltyKind.QUADRATIC:
        return LambdaSchedule("fixed", lambda_quadratic(instance.horizon))
    k = instance.constants()
    return LambdaSchedule(
        "fixed",
        lambda_exponential_short_memory(
            instance.horizon, instance.m, k.diameter, k.l_f, k.l_g
        ),
    )


def run_single(cfg: ExperimentConfig, seed: int) -> RunTrace:
    """One (config, seed) pipeline: instance generation plus the full run."""
    instance = build_instance(cfg, seed)
    if cfg.algorithm == "penalty_ogd":
        return run_penalty_ogd(instance, cfg.variant, cfg.penalty, _ogd_schedule(cfg, instance))

    from .optimistic import run_doubling, run_optimistic

    predictor = make_predictor(
        cfg.predictor.get("kind", "perfect"),
        scale=float(cfg.predictor.get("scale", 0.0)),
        seed=seed,
    )
    if cfg.algorithm == "odaf":
        lam = float(cfg.lambda_value) if cfg.lambda_mode == "explicit" else None
        return run_optimistic(
            instance, cfg.variant, predictor,
            lam=lam, error_estimate=cfg.error_estimate, alpha=cfg.alpha,
        )
    return run_doubling(instance, cfg.variant, predictor, alpha=cfg.alpha,
                        initial_error=cfg.error_estimate)


# ---------------------------------------------------------------------------
# CSV / summary emission


def _fmt(x: float) -> str:
    return repr(float(x))


def emit_csv(trace: RunTrace, series: MetricSeries, path: str | Path) -> None:
    """One row per round under the fixed header; floats in shortest
    round-trip decimal, coordinates semicolon-joined."""
    v_replay = np.cumsum(trace.col("g_plus_recorded"))
    lines = [CSV_HEADER]
    for idx, rec in enumerate(trace.records):
        x_txt = ";".join(_fmt(c) for c in rec.x)
        lines.append(
            ",".join(
                [
                    str(rec.t),
                    x_txt,
                    _fmt(rec.f_mem),
                    _fmt(rec.g_mem),
                    _fmt(rec.g_plus_recorded),
                    _fmt(v_replay[idx]),
                    _fmt(rec.eta_or_mu),
                    _fmt(rec.eps_f),
                    _fmt(rec.eps_g),
                    _fmt(rec.eps_z),
                    _fmt(series.regret_static_cum[idx]),
                    _fmt(series.regret_perround_cum[idx]),
                    _fmt(series.ccv_cum[idx]),
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def checkpoints(first_round: int, horizon: int) -> list[int]:
    marks = {max(first_round, horizon // 10), horizon // 4, horizon // 2,
             (3 * horizon) // 4, horizon}
    return sorted(t for t in marks if first_round <= t <= horizon)


def _seed_metrics(trace: RunTrace, series: MetricSeries, marks: list[int]) -> dict:
    out = {}
    for t in marks:
        idx = t - trace.first_round
        out[str(t)] = {
            "regret_static_per_round": float(series.regret_static_cum[idx]) / t,
            "regret_perround_per_round": float(series.regret_perround_cum[idx]) / t,
            "ccv_per_round": float(series.ccv_cum[idx]) / t,
        }
    return out


def _run_one_seed(cfg_dict: dict, seed: int, out_dir: str) -> dict:
    """Worker for one seed; returns checkpoint metrics (runs in a separate
    process under --parallel)."""
    cfg = ExperimentConfig.from_dict(cfg_dict)
    trace = run_single(cfg, seed)
    trace.validate()
    series = regret_and_ccv(trace)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    emit_csv(trace, series, out / f"{cfg.name}_seed{seed}.csv")
    if hasattr(trace.instance, "to_json"):
        (out / f"{cfg.name}_seed{seed}_instance.json").write_text(trace.instance.to_json())
    marks = checkpoints(trace.first_round, trace.horizon)
    return {
        "seed": seed,
        "checkpoints": _seed_metrics(trace, series, marks),
        "benchmark_feasible": series.benchmark.feasible,
    }


def _config_as_dict(cfg: ExperimentConfig) -> dict:
    return {
        "algorithm": cfg.algorithm,
        "variant": cfg.variant.value,
        "environment": cfg.environment,
        "penalty": cfg.penalty.value,
        "lambda_mode": cfg.lambda_mode,
        "lambda_value": cfg.lambda_value,
        "predictor": cfg.predictor,
        "error_estimate": cfg.error_estimate,
        "alpha": cfg.alpha,
        "seeds": cfg.seeds,
        "out_dir": cfg.out_dir,
        "name": cfg.name,
    }


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None,
                   parallel: int = 1) -> dict:
    """Run every seed, write one CSV (plus instance JSON) per seed, and an
    aggregate summary with per-checkpoint means and standard deviations.
    Failed seeds are recorded and excluded from aggregates."""
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg_dict = _config_as_dict(cfg)
    results, failed = [], []
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            futs = {seed: pool.submit(_run_one_seed, cfg_dict, seed, str(out))
                    for seed in cfg.seeds}
            for seed, fut in futs.items():
                try:
                    results.append(fut.result())
                except Exception as exc:  # noqa: BLE001 - seed isolation
                    failed.append({"seed": seed, "error": str(exc)})
    else:
        for seed in cfg.seeds:
            try:
                results.append(_run_one_seed(cfg_dict, seed, str(out)))
            except Exception as exc:  # noqa: BLE001 - seed isolation
                failed.append({"seed": seed, "error": str(exc)})

    summary: dict = {
        "config": cfg_dict,
        "rng": RNG_NAME,
        "seeds_completed": [r["seed"] for r in results],
        "seeds_failed": failed,
        "checkpoints": {},
    }
    if results:
        marks = sorted(results[0]["checkpoints"], key=int)
        for t in marks:
            block = {}
            for key in ("regret_static_per_round", "regret_perround_per_round",
                        "ccv_per_round"):
                vals = np.array([r["checkpoints"][t][key] for r in results])
                block[key] = {"mean": float(np.mean(vals)), "std": float(np.std(vals))}
            summary["checkpoints"][t] = block
    (out / f"{cfg.name}_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    return summary


def verify_experiment(cfg: ExperimentConfig, resolution: float = 1e-3) -> tuple[bool, list[str]]:
    """Run the invariant suite on every seed; returns (all passed, lines)."""
    lines, ok = [], True
    for seed in cfg.seeds:
        trace = run_single(cfg, seed)
        for res in invariant_suite(trace, resolution):
            lines.append(f"seed {seed}: {res}")
            ok = ok and res.passed
    return ok, lines


def bounds_reports(cfg: ExperimentConfig) -> list[tuple[int, BoundReport]]:
    out = []
    for seed in cfg.seeds:
        trace = run_single(cfg, seed)
        out.append((seed, theorem_bound_report(trace)))
    return out


def resolve_out_dir(cli_value: str | None, cfg: ExperimentConfig) -> str:
    env = os.environ.get("COCO_MEM_OUT")
    return cli_value or env or cfg.out_dir
