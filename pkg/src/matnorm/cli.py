"""Command-line driver: ``matnorm <command> [--config FILE] [flags]``.

Commands
--------
simulate            draw a dataset from a ground-truth model and write it
                    (plus a ``<out>.meta.json`` sidecar with the resolved
                    config and model summary)
fit                 fit the penalized and/or closed-form estimators to a
                    dataset file and write a JSON report
rate-sweep          run a Monte-Carlo grid of cells, write a JSON summary
                    and a per-replicate long-format CSV
check-assumptions   evaluate the regularity-condition expressions over a
                    grid and write values plus monotonicity verdicts
diagnose            oracle-matrix deviations and the seven-term objective
                    decomposition for a dataset with known ground truth

Configuration comes from an optional JSON file (``--config``) merged over
built-in defaults; command-line flags override file values.  Every output
document echoes the fully resolved configuration (defaults filled in,
seeds explicit), so a report is a complete recipe for its own rerun.

Output discipline: floats are serialized with 17 significant digits and
object keys are emitted in sorted order, so identical configurations
produce byte-identical files.  Wall-clock timings are therefore *not*
written into reports unless ``--timings`` is passed (they go to stderr).

Exit codes: 0 success, 1 numerical failure surfaced (singular estimate,
non-convergence, size cap), 2 configuration/IO error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time

import numpy as np

from .errors import (
    ConfigError,
    DegenerateData,
    DimensionCap,
    DomainError,
    IllPosed,
    InfeasibleDesign,
    InsufficientData,
    NoConvergence,
    NotPositiveDefinite,
)
from .heuristic import S_ENTRY_CAP, heuristic_inverses, heuristic_psi, oracle_diagnostics
from .rates import (
    ModelSpec,
    RateCell,
    fit_rate_slope,
    check_assumptions,
    run_cell,
)
from .rng import standard_normal_stream
from .sampling import (
    Banded,
    RandomSupport,
    make_true_model,
    read_dataset,
    sample_matrix_normal,
    write_dataset,
)
from .smgm import (
    PenaltyConfig,
    decompose_objective_difference,
    lambda_schedule,
    smgm_fit,
)

SCHEMA_VERSION = "1.0"

CSV_HEADER = [
    "cell_id", "n", "p", "q", "s1", "s2", "lambda1", "lambda2",
    "replicate", "estimator", "error_metric", "error_value",
    "predictor_value", "seed",
]

#: (internal metric key, estimator column, metric column)
CSV_METRICS = [
    ("smgm_omega", "smgm", "omega"),
    ("smgm_gamma", "smgm", "gamma"),
    ("smgm_omega_aligned", "smgm", "omega_aligned"),
    ("smgm_gamma_aligned", "smgm", "gamma_aligned"),
    ("heur_sigma", "heuristic", "sigma"),
    ("heur_psi", "heuristic", "psi"),
    ("heur_omega", "heuristic", "omega"),
    ("heur_gamma", "heuristic", "gamma"),
]

MEASURED_OBJECT_NOTE = (
    "penalized estimates are the alternating-minimization iterate reached "
    "from the configured initialization; they are stationary points of the "
    "objective, not certified global or specific local minimizers"
)


# ---------------------------------------------------------------------------
# canonical serialization


def format_float(value: float) -> str:
    """17-significant-digit decimal form; round-trips exactly."""
    if not math.isfinite(value):
        raise ConfigError(f"cannot serialize non-finite float {value!r}")
    return f"{value:.17g}"


def to_canonical_json(obj, indent: int = 0) -> str:
    """Deterministic JSON: sorted keys, 17-digit floats, 2-space indent."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)) and not isinstance(obj, bool):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(float(obj))
    if isinstance(obj, np.ndarray):
        return to_canonical_json(obj.tolist(), indent)
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        parts = [to_canonical_json(v, indent + 1) for v in obj]
        return "[\n" + ",\n".join(inner + p for p in parts) + "\n" + pad + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        parts = [
            f"{json.dumps(str(k))}: {to_canonical_json(obj[k], indent + 1)}"
            for k in sorted(obj)
        ]
        return "{\n" + ",\n".join(inner + p for p in parts) + "\n" + pad + "}"
    raise ConfigError(f"cannot serialize object of type {type(obj).__name__}")


def write_json(path: str, document: dict) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(to_canonical_json(document))
        fh.write("\n")


# ---------------------------------------------------------------------------
# config plumbing


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            loaded = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(loaded, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return loaded


def _resolve(defaults: dict, file_config: dict, overrides: dict) -> dict:
    """defaults <- file <- flags; unknown file keys are rejected."""
    unknown = set(file_config) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    resolved = dict(defaults)
    resolved.update(file_config)
    for key, value in overrides.items():
        if value is not None:
            resolved[key] = value
    return resolved


def _require(config: dict, key: str):
    if config.get(key) is None:
        raise ConfigError(f"missing required config value '{key}'")
    return config[key]


def _design_from_config(design: dict):
    if not isinstance(design, dict) or "kind" not in design:
        raise ConfigError("design must be an object with a 'kind' field")
    kind = design["kind"]
    if kind == "banded":
        return Banded(bandwidth=int(design.get("bandwidth", 1)),
                      strength=float(design.get("strength", 0.3)))
    if kind == "random_support":
        return RandomSupport(s1=int(design.get("s1", 0)),
                             s2=int(design.get("s2", 0)),
                             strength=float(design.get("strength", 0.3)))
    raise ConfigError(f"unknown design kind {kind!r}")


def _design_to_config(design) -> dict:
    if isinstance(design, Banded):
        return {"kind": "banded", "bandwidth": design.bandwidth,
                "strength": design.strength}
    return {"kind": "random_support", "s1": design.s1, "s2": design.s2,
            "strength": design.strength}


def _default_workers() -> int:
    raw = os.environ.get("MATNORM_WORKERS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"MATNORM_WORKERS={raw!r} is not an integer") from None


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    defaults = {
        "p": None, "q": None, "n": None,
        "design": {"kind": "banded", "bandwidth": 1, "strength": 0.3},
        "tau1": 0.25, "model_seed": 0, "seed": 0, "out": None,
    }
    overrides = {
        "p": args.p, "q": args.q, "n": args.n, "tau1": args.tau1,
        "model_seed": args.model_seed, "seed": args.seed, "out": args.out,
    }
    config = _resolve(defaults, _load_config_file(args.config), overrides)
    if args.design is not None:
        config["design"] = {"kind": args.design.replace("-", "_")}
    design_cfg = dict(config["design"])
    for key, flag in (("bandwidth", args.bandwidth), ("strength", args.strength),
                      ("s1", args.s1), ("s2", args.s2)):
        if flag is not None:
            design_cfg[key] = flag
    config["design"] = design_cfg

    p = int(_require(config, "p"))
    q = int(_require(config, "q"))
    n = int(_require(config, "n"))
    out = str(_require(config, "out"))
    design = _design_from_config(config["design"])
    config["design"] = _design_to_config(design)

    model = make_true_model(p, q, design, float(config["tau1"]),
                            int(config["model_seed"]))
    dataset = sample_matrix_normal(model, n, int(config["seed"]))
    write_dataset(dataset, out)
    meta = {
        "schema_version": SCHEMA_VERSION,
        "command": "simulate",
        "config": config,
        "model": {
            "p": model.p, "q": model.q, "tau1": model.tau1,
            "s1": model.s1, "s2": model.s2,
            "model_id": model.digest(),
            "trace_psi0": float(np.trace(model.psi0.values)),
        },
        "dataset": {"n": n, "seed": int(config["seed"]),
                    "model_id": dataset.model_id},
    }
    write_json(out + ".meta.json", meta)
    print(f"wrote {out} ({n} samples of {p}x{q}) and {out}.meta.json",
          file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# fit


def _resolve_penalty(config: dict, p: int, q: int) -> PenaltyConfig:
    if config.get("lambda1") is not None or config.get("lambda2") is not None:
        return PenaltyConfig(lambda1=float(config.get("lambda1") or 0.0),
                             lambda2=float(config.get("lambda2") or 0.0))
    schedule = config.get("schedule")
    if schedule:
        n = config["_n"]
        return lambda_schedule(n, p, q,
                               int(schedule.get("s1_guess", 0)),
                               int(schedule.get("s2_guess", 0)),
                               float(schedule.get("c0", 1.0)))
    return PenaltyConfig(0.0, 0.0)


def cmd_fit(args) -> int:
    defaults = {
        "data": None, "estimator": "both",
        "lambda1": None, "lambda2": None, "schedule": None,
        "init": "identity", "outer_tol": 1e-8, "max_outer": 100,
        "solver_tol": 1e-7, "out": None, "timings": False,
    }
    overrides = {
        "data": args.data, "estimator": args.estimator,
        "lambda1": args.lambda1, "lambda2": args.lambda2,
        "init": args.init, "outer_tol": args.outer_tol,
        "max_outer": args.max_outer, "solver_tol": args.solver_tol,
        "out": args.out, "timings": True if args.timings else None,
    }
    config = _resolve(defaults, _load_config_file(args.config), overrides)
    if config["estimator"] not in ("smgm", "heuristic", "both"):
        raise ConfigError(f"unknown estimator {config['estimator']!r}")
    data_path = str(_require(config, "data"))
    out = str(_require(config, "out"))

    dataset = read_dataset(data_path)
    config["_n"] = dataset.n
    report: dict = {
        "schema_version": SCHEMA_VERSION,
        "command": "fit",
        "config": {k: v for k, v in config.items() if not k.startswith("_")},
        "dataset": {"n": dataset.n, "p": dataset.p, "q": dataset.q,
                    "seed": dataset.seed, "model_id": dataset.model_id},
    }
    exit_code = 0
    timings: dict = {}

    if config["estimator"] in ("heuristic", "both"):
        start = time.perf_counter()
        est = heuristic_psi(dataset)
        block = {
            "sigma_hat": est.sigma_hat,
            "psi_hat": est.psi_hat,
            "t_h": est.t_h,
            "psi_tilde": est.psi_tilde,
        }
        try:
            heuristic_inverses(est)
            block["omega_hat"] = est.omega_hat
            block["gamma_hat"] = est.gamma_hat
        except NotPositiveDefinite as exc:
            block["omega_hat"] = None
            block["gamma_hat"] = None
            block["inverse_error"] = str(exc)
        timings["heuristic_s"] = time.perf_counter() - start
        report["heuristic"] = block

    if config["estimator"] in ("smgm", "both"):
        penalty = _resolve_penalty(config, dataset.p, dataset.q)
        start = time.perf_counter()
        fit = smgm_fit(
            dataset, penalty, init=str(config["init"]),
            outer_tol=float(config["outer_tol"]),
            max_outer=int(config["max_outer"]),
            solver_tol=float(config["solver_tol"]),
        )
        timings["smgm_s"] = time.perf_counter() - start
        report["smgm"] = {
            "lambda1": penalty.lambda1,
            "lambda2": penalty.lambda2,
            "omega_hat": fit.omega_hat.values,
            "gamma_hat": fit.gamma_hat.values,
            "objective_trace": fit.objective_trace,
            "outer_iterations": fit.outer_iterations,
            "converged": fit.converged,
            "half_step_kkt": list(fit.half_step_kkt),
            "note": MEASURED_OBJECT_NOTE,
        }
        if not fit.converged:
            print("fit: alternating minimization did not converge "
                  f"in {fit.outer_iterations} outer iterations", file=sys.stderr)
            exit_code = 1

    if config["timings"]:
        report["timings"] = timings
    write_json(out, report)
    for name, seconds in timings.items():
        print(f"fit: {name.rstrip('_s')} took {seconds:.3f}s", file=sys.stderr)
    print(f"wrote {out}", file=sys.stderr)
    return exit_code


# ---------------------------------------------------------------------------
# rate-sweep


def _cell_summary(cell: RateCell) -> dict:
    summary: dict = {
        "cell_id": cell.cell_id,
        "n": cell.n, "p": cell.p, "q": cell.q,
        "s1": cell.s1, "s2": cell.s2,
        "lambda1": cell.lambda1, "lambda2": cell.lambda2,
        "replicates": cell.replicates,
        "failed_replicates": cell.failed_replicates,
        "predictors": {
            "smgm_omega": cell.predictor_smgm_omega,
            "smgm_gamma": cell.predictor_smgm_gamma,
            "heur_sigma": cell.predictor_heur_sigma,
            "heur_psi": cell.predictor_heur_psi,
        },
        "metrics": {},
    }
    for key, _, _ in CSV_METRICS:
        values = cell.errors(key)
        if values:
            summary["metrics"][key] = {
                "count": len(values),
                "mean": float(np.mean(values)),
                "median": float(np.median(values)),
            }
    return summary


def _write_replicate_csv(path: str, cells: list) -> None:
    with open(path, "w", encoding="ascii", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for cell in cells:
            for key, estimator, metric in CSV_METRICS:
                values = cell.errors(key)
                if not values:
                    continue
                predictor = cell.predictor(key)
                for pos, value in enumerate(values):
                    writer.writerow([
                        cell.cell_id, cell.n, cell.p, cell.q,
                        cell.s1, cell.s2,
                        format_float(cell.lambda1), format_float(cell.lambda2),
                        cell.replicate_ids[pos], estimator, metric,
                        format_float(value), format_float(predictor),
                        cell.replicate_seeds[pos],
                    ])


def _self_test_cells(config: dict, cell_configs: list) -> list:
    spec_cfg = config["self_test_slope"]
    coeff = float(spec_cfg.get("coeff", 1.0))
    power = float(spec_cfg.get("power", -1.0))
    replicates = int(config["replicates"])
    cells = []
    for index, cc in enumerate(cell_configs):
        n, p, q = int(cc["n"]), int(cc["p"]), int(cc["q"])
        cell = RateCell(
            n=n, p=p, q=q, replicates=replicates,
            base_seed=int(config["base_seed"]),
            cell_id=f"cell{index:03d}",
        )
        value = coeff * float(n) ** power
        for key, _, _ in CSV_METRICS:
            cell.errors(key).extend([value] * replicates)
        cell.replicate_ids.extend(range(replicates))
        cell.replicate_seeds.extend([0] * replicates)
        cells.append(cell)
    return cells


def cmd_rate_sweep(args) -> int:
    defaults = {
        "base_seed": 0, "replicates": None,
        "estimators": ["smgm", "heuristic"],
        "workers": None,
        "model": None, "cells": None, "penalty": None, "fit": None,
        "slopes": [], "out_json": None, "out_csv": None,
        "self_test_slope": None,
    }
    overrides = {
        "base_seed": args.base_seed, "replicates": args.replicates,
        "workers": args.workers, "out_json": args.out_json,
        "out_csv": args.out_csv,
        "self_test_slope": {"coeff": 1.0, "power": -1.0}
        if args.self_test_slope else None,
    }
    config = _resolve(defaults, _load_config_file(args.config), overrides)
    out_json = str(_require(config, "out_json"))
    out_csv = str(_require(config, "out_csv"))
    cell_configs = _require(config, "cells")
    _require(config, "replicates")
    if config["workers"] is None:
        config["workers"] = _default_workers()

    if config["self_test_slope"]:
        cells = _self_test_cells(config, cell_configs)
    else:
        model_cfg = _require(config, "model")
        design = _design_from_config(model_cfg.get("design", {}))
        tau1 = float(model_cfg.get("tau1", 0.25))
        model_seed = int(model_cfg.get("model_seed", 0))
        estimators = frozenset(config["estimators"])
        fit_kwargs = dict(config["fit"] or {})
        cells = []
        for index, cc in enumerate(cell_configs):
            n, p, q = int(cc["n"]), int(cc["p"]), int(cc["q"])
            spec = ModelSpec(p=p, q=q, design=design, tau1=tau1, seed=model_seed)
            penalty = _cell_penalty(config.get("penalty"), spec, n)
            cells.append(run_cell(
                spec, n, penalty, int(config["replicates"]), estimators,
                int(config["base_seed"]), workers=int(config["workers"]),
                fit_kwargs=fit_kwargs, cell_id=f"cell{index:03d}",
            ))

    slope_fits = []
    verdicts: dict = {}
    for slope_cfg in config["slopes"] or []:
        axis = slope_cfg.get("axis", "n")
        metric = slope_cfg["metric"]
        statistic = slope_cfg.get("statistic", "mean")
        fit = fit_rate_slope(cells, axis=axis, metric=metric, statistic=statistic)
        entry = {
            "axis": axis, "metric": metric, "statistic": statistic,
            "slope": fit.slope, "intercept": fit.intercept,
            "r_squared": fit.r_squared, "n_cells": fit.n_cells,
        }
        expected = slope_cfg.get("expected")
        if expected is not None:
            ok = expected[0] <= fit.slope <= expected[1]
            min_r2 = slope_cfg.get("min_r_squared")
            if min_r2 is not None:
                ok = ok and fit.r_squared >= float(min_r2)
            entry["expected"] = list(expected)
            verdicts[f"{metric}~{axis}"] = bool(ok)
        slope_fits.append(entry)

    document = {
        "schema_version": SCHEMA_VERSION,
        "command": "rate-sweep",
        "config": config,
        "cells": [_cell_summary(cell) for cell in cells],
        "slope_fits": slope_fits,
        "verdicts": verdicts,
        "note": MEASURED_OBJECT_NOTE,
    }
    write_json(out_json, document)
    _write_replicate_csv(out_csv, cells)
    print(f"wrote {out_json} and {out_csv}", file=sys.stderr)
    return 0


def _cell_penalty(penalty_cfg, spec: ModelSpec, n: int) -> PenaltyConfig:
    if not penalty_cfg:
        return PenaltyConfig(0.0, 0.0)
    if "lambda1" in penalty_cfg or "lambda2" in penalty_cfg:
        return PenaltyConfig(lambda1=float(penalty_cfg.get("lambda1", 0.0)),
                             lambda2=float(penalty_cfg.get("lambda2", 0.0)))
    if "c0" in penalty_cfg:
        model = spec.build()
        return lambda_schedule(n, spec.p, spec.q, model.s1, model.s2,
                               float(penalty_cfg["c0"]))
    raise ConfigError("penalty must give lambda1/lambda2 or c0")


# ---------------------------------------------------------------------------
# check-assumptions


def _expand_schedule_grid(schedule: dict) -> list:
    c0 = float(schedule.get("c0", 1.0))
    n_values = schedule.get("n_values")
    if not n_values:
        raise ConfigError("sufficient_schedule needs n_values")
    p_rule = schedule.get("p", {"rule": "sqrt"})
    s1 = int(schedule.get("s1", 0))
    s2 = int(schedule.get("s2", 0))
    grid = []
    for n in n_values:
        n = int(n)
        if p_rule.get("rule") == "sqrt":
            p = q = max(2, round(math.sqrt(n)))
        elif p_rule.get("rule") == "fixed":
            p = q = int(p_rule["value"])
        else:
            raise ConfigError(f"unknown p rule {p_rule!r}")
        penalty = lambda_schedule(n, p, q, s1, s2, c0)
        grid.append({
            "n": n, "p": p, "q": q, "s1": s1, "s2": s2,
            "lambda1": penalty.lambda1, "lambda2": penalty.lambda2,
        })
    return grid


def cmd_check_assumptions(args) -> int:
    defaults = {"grid": None, "sufficient_schedule": None, "out": None}
    overrides = {"out": args.out}
    config = _resolve(defaults, _load_config_file(args.config), overrides)
    out = str(_require(config, "out"))
    if config["grid"] is None and config["sufficient_schedule"] is None:
        raise ConfigError("provide 'grid' or 'sufficient_schedule'")
    grid = config["grid"] or _expand_schedule_grid(config["sufficient_schedule"])
    config["grid"] = grid

    report = check_assumptions(grid)
    document = {
        "schema_version": SCHEMA_VERSION,
        "command": "check-assumptions",
        "config": config,
        "verdicts": report.verdicts,
    }
    document["points"] = [
        {f: getattr(pt, f) for f in ("n", "p", "q", "s1", "s2", "lambda1", "lambda2")}
        for pt in report.points
    ]
    document["values"] = [
        {f: getattr(v, f) for f in (
            "a1_row", "a1_col", "a3_bound1", "a3_bound2", "a3_ratio1",
            "a3_ratio2", "a4_val1", "a4_val2", "r_n", "r_n_prime",
            "a5_row", "a5_col", "a5", "h2_row", "h2_col")}
        for v in report.values
    ]
    write_json(out, document)
    print(f"wrote {out}", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# diagnose


def _symmetric_perturbation(dim: int, scale: float, seed: int) -> np.ndarray:
    if scale == 0.0:
        return np.zeros((dim, dim))
    draw = standard_normal_stream(seed).draw(dim * dim).reshape(dim, dim)
    return scale * 0.5 * (draw + draw.T)


def cmd_diagnose(args) -> int:
    defaults = {
        "data": None, "meta": None,
        "delta_scale": 0.0, "delta_seed": 0,
        "include_s": False, "s_cap": S_ENTRY_CAP,
        "lambda1": 0.0, "lambda2": 0.0, "out": None,
    }
    overrides = {
        "data": args.data, "meta": args.meta,
        "delta_scale": args.delta_scale, "delta_seed": args.delta_seed,
        "include_s": True if args.include_s else None,
        "s_cap": args.s_cap,
        "lambda1": args.lambda1, "lambda2": args.lambda2, "out": args.out,
    }
    config = _resolve(defaults, _load_config_file(args.config), overrides)
    data_path = str(_require(config, "data"))
    out = str(_require(config, "out"))
    meta_path = config["meta"] or data_path + ".meta.json"
    config["meta"] = meta_path

    dataset = read_dataset(data_path)
    try:
        with open(meta_path, "r", encoding="utf-8") as fh:
            meta = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read metadata {meta_path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"metadata {meta_path} is not valid JSON: {exc}") from None
    major = str(meta.get("schema_version", "")).split(".")[0]
    if major != SCHEMA_VERSION.split(".")[0]:
        raise ConfigError(
            f"metadata schema version {meta.get('schema_version')!r} unsupported"
        )
    sim_config = meta.get("config", {})
    model = make_true_model(
        int(sim_config["p"]), int(sim_config["q"]),
        _design_from_config(sim_config["design"]),
        float(sim_config["tau1"]), int(sim_config["model_seed"]),
    )
    if dataset.model_id and dataset.model_id != model.digest():
        raise ConfigError(
            "dataset model_id does not match the model rebuilt from metadata"
        )

    exit_code = 0
    include_s = bool(config["include_s"])
    s_cap = int(config["s_cap"])
    oracle_block: dict = {}
    try:
        diag = oracle_diagnostics(dataset, model, include_s=include_s, s_cap=s_cap)
    except DimensionCap as exc:
        diag = oracle_diagnostics(dataset, model, include_s=False, s_cap=s_cap)
        oracle_block["s_error"] = str(exc)
        exit_code = 1
    oracle_block.update({
        "dev_q1": diag.dev_q1,
        "dev_q2": diag.dev_q2,
        "dev_s": diag.dev_s,
        "scaled_dev_q1": diag.scaled_dev_q1,
        "scaled_dev_q2": diag.scaled_dev_q2,
        "scaled_dev_s": diag.scaled_dev_s,
    })

    penalty = PenaltyConfig(lambda1=float(config["lambda1"]),
                            lambda2=float(config["lambda2"]))
    delta1 = _symmetric_perturbation(model.p, float(config["delta_scale"]),
                                     int(config["delta_seed"]))
    delta2 = _symmetric_perturbation(model.q, float(config["delta_scale"]),
                                     int(config["delta_seed"]) + 1)
    terms = decompose_objective_difference(dataset, model, delta1, delta2, penalty)
    total = terms.total()
    decomposition = {
        "t1": terms.t1, "t2": terms.t2, "t3": terms.t3, "t4": terms.t4,
        "t5": terms.t5, "t6": terms.t6, "t7": terms.t7,
        "sum": total,
        "direct_difference": terms.direct_difference,
        "residual": abs(total - terms.direct_difference),
    }
    document = {
        "schema_version": SCHEMA_VERSION,
        "command": "diagnose",
        "config": config,
        "model_id": model.digest(),
        "oracle": oracle_block,
        "decomposition": decomposition,
    }
    write_json(out, document)
    print(f"wrote {out}", file=sys.stderr)
    return exit_code


# ---------------------------------------------------------------------------
# argument parsing


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="matnorm",
        description="Matrix-variate normal covariance/precision estimation "
                    "and rate experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="sample a dataset from a ground-truth model")
    sim.add_argument("--config")
    sim.add_argument("--p", type=int)
    sim.add_argument("--q", type=int)
    sim.add_argument("--n", type=int)
    sim.add_argument("--design", choices=["banded", "random-support"])
    sim.add_argument("--bandwidth", type=int)
    sim.add_argument("--strength", type=float)
    sim.add_argument("--s1", type=int)
    sim.add_argument("--s2", type=int)
    sim.add_argument("--tau1", type=float)
    sim.add_argument("--model-seed", type=int, dest="model_seed")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--out")
    sim.set_defaults(func=cmd_simulate)

    fit = sub.add_parser("fit", help="fit estimators to a dataset file")
    fit.add_argument("--config")
    fit.add_argument("--data")
    fit.add_argument("--estimator", choices=["smgm", "heuristic", "both"])
    fit.add_argument("--lambda1", type=float)
    fit.add_argument("--lambda2", type=float)
    fit.add_argument("--init", choices=["identity", "heuristic"])
    fit.add_argument("--outer-tol", type=float, dest="outer_tol")
    fit.add_argument("--max-outer", type=int, dest="max_outer")
    fit.add_argument("--solver-tol", type=float, dest="solver_tol")
    fit.add_argument("--timings", action="store_true")
    fit.add_argument("--out")
    fit.set_defaults(func=cmd_fit)

    sweep = sub.add_parser("rate-sweep", help="Monte-Carlo error sweep over a grid")
    sweep.add_argument("--config")
    sweep.add_argument("--base-seed", type=int, dest="base_seed")
    sweep.add_argument("--replicates", type=int)
    sweep.add_argument("--workers", type=int)
    sweep.add_argument("--self-test-slope", action="store_true",
                       dest="self_test_slope",
                       help="inject exact c/n errors instead of estimating")
    sweep.add_argument("--out-json", dest="out_json")
    sweep.add_argument("--out-csv", dest="out_csv")
    sweep.set_defaults(func=cmd_rate_sweep)

    chk = sub.add_parser("check-assumptions",
                         help="evaluate regularity expressions over a grid")
    chk.add_argument("--config")
    chk.add_argument("--out")
    chk.set_defaults(func=cmd_check_assumptions)

    diag = sub.add_parser("diagnose",
                          help="oracle deviations and objective decomposition")
    diag.add_argument("--config")
    diag.add_argument("--data")
    diag.add_argument("--meta")
    diag.add_argument("--delta-scale", type=float, dest="delta_scale")
    diag.add_argument("--delta-seed", type=int, dest="delta_seed")
    diag.add_argument("--include-s", action="store_true", dest="include_s")
    diag.add_argument("--s-cap", type=int, dest="s_cap")
    diag.add_argument("--lambda1", type=float)
    diag.add_argument("--lambda2", type=float)
    diag.add_argument("--out")
    diag.set_defaults(func=cmd_diagnose)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DomainError, InfeasibleDesign) as exc:
        print(f"matnorm {args.command}: {exc}", file=sys.stderr)
        return 2
    except (NotPositiveDefinite, IllPosed, NoConvergence, DegenerateData,
            DimensionCap, InsufficientData) as exc:
        print(f"matnorm {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
