"""Command-line interface.

Eight subcommands cover the pipeline end to end: fabricate a dataset,
fit the baseline regression, run the simulation, fit its parameters,
and run the evaluation experiments. Every command reads one optional
INI config plus ``--seed``/``--out`` overrides, writes its outputs
under the configured directory, and emits a JSON report stamped with
the config hash, the master seed, and the package version, so a
report alone identifies the run that produced it.

Exit codes: 0 success, 2 missing input file, 3 malformed data or
configuration, 64 command-line usage error, 70 internal failure.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .difficulty import (
    FEATURE_NAMES,
    build_feature_matrix,
    clamp_unit,
    fit_regression,
    normalize_difficulty,
    predict_level_pass_rates,
)
from .evaluation import (
    EvalConfig,
    ablation_suite,
    compute_metrics,
    cross_validate,
    oracle_difficulty_experiment,
)
from .fitting import SimulationSettings, compute_w_churn, fit_sim_params, predict_rates
from .io import (
    ConfigError,
    SchemaError,
    load_config,
    read_difficulties_csv,
    read_levels_csv,
    load_datasets,
    write_difficulties_csv,
    write_episodes_csv,
    write_json_report,
    write_levels_csv,
    write_scatter_csv,
)
from .synthetic import EPISODE_GENERATOR_VERSION, make_dataset


class _Parser(argparse.ArgumentParser):
    # usage problems exit 64, not argparse's default 2
    def error(self, message):
        self.exit(64, f"{self.prog}: error: {message}\n")


_COMMAND_HELP = (
    ("synth", "fabricate a synthetic dataset and write its CSV files"),
    ("fit-baseline", "fit the episode-feature regression and emit difficulties"),
    ("simulate", "run one progression with the configured parameters"),
    ("fit", "fit simulation parameters to the observed rates"),
    ("crossval", "k-fold cross-validated fit and held-out scores"),
    ("ablate", "cross-validate with each mechanism disabled in turn"),
    ("oracle-diff", "compare fits under oracle vs estimated difficulty"),
    ("report", "summarize observed rates and emit scatter plot data"),
)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="churnsim",
                     description="simulate, fit, and evaluate per-level "
                                 "pass and churn rate predictions")
    parser.add_argument("--version", action="version", version=__version__)
    subparsers = parser.add_subparsers(dest="command", required=True,
                                       parser_class=_Parser)
    for name, help_text in _COMMAND_HELP:
        sub = subparsers.add_parser(name, help=help_text)
        sub.add_argument("--config", default=None,
                         help="INI configuration file (defaults apply without one)")
        sub.add_argument("--seed", type=int, default=None,
                         help="override run.seed")
        sub.add_argument("--out", default=None,
                         help="override run.out_dir")
    return parser


def _envelope(command, config, result) -> dict:
    return {
        "artifact_version": __version__,
        "command": command,
        "config_sha256": config.config_sha256,
        "seed": config.seed,
        "result": result,
    }


def _metrics_dict(metrics) -> dict:
    return {"mse": metrics.mse, "mae": metrics.mae}


def _params_dict(params):
    if params is None:
        return None
    population = params.population
    return {
        "mean_skill": population.mean_skill,
        "std_skill": population.std_skill,
        "mean_persistence": population.mean_persistence,
        "std_persistence": population.std_persistence,
        "mean_boredom": population.mean_boredom,
        "std_boredom": population.std_boredom,
        "alpha": params.alpha,
        "beta": params.beta,
        "theta": params.theta,
        "gamma": params.gamma,
    }


def _baseline_dict(baseline):
    if baseline is None:
        return None
    out = {"per_fold": [
        {"pass": _metrics_dict(fold["pass"]), "churn": _metrics_dict(fold["churn"])}
        for fold in baseline["per_fold"]]}
    for key in ("pass_mse", "pass_mae", "churn_mse", "churn_mae"):
        out[key] = baseline[key]
    return out


def _cv_report_dict(report) -> dict:
    return {
        "k": report.plan.k,
        "scheme": report.plan.scheme,
        "fold_sizes": report.plan.fold_sizes(),
        "aggregate": report.aggregate,
        "pooled": [
            {"pass": _metrics_dict(p["pass"]), "churn": _metrics_dict(p["churn"])}
            for p in report.pooled],
        "baseline": _baseline_dict(report.baseline),
        "w_churn_per_fold": list(report.w_churn_per_fold),
        "runs": [
            {
                "fold": run.fold,
                "repeat": run.repeat,
                "optimizer_seed": run.optimizer_seed,
                "pass": _metrics_dict(run.pass_metrics),
                "churn": _metrics_dict(run.churn_metrics),
                "params": _params_dict(run.params),
                "best_value": run.best_value,
                "evaluations_used": run.evaluations_used,
                "termination_reason": run.termination_reason,
                "depleted_at": run.depleted_at,
            }
            for run in report.runs],
    }


def _eval_config(config) -> EvalConfig:
    return EvalConfig(n_players=config.n_players, flags=config.flags,
                      optimizer=config.optimizer, repeats=config.repeats,
                      seed=config.seed, scheme=config.scheme, ridge=config.ridge)


def _settings(config) -> SimulationSettings:
    return SimulationSettings(n_players=config.n_players, flags=config.flags,
                              seed=config.seed)


def _load_truth_and_source(config):
    """Truth series plus exactly one difficulty source.

    Returns (truth, features, difficulties); one of the last two is
    None. A configured difficulties file takes priority over episode
    features.
    """
    truth = read_levels_csv(config.levels_path)
    if config.difficulties_path:
        ids, difficulties = read_difficulties_csv(config.difficulties_path)
        if ids.tolist() != truth.level_ids.tolist():
            raise SchemaError(config.difficulties_path, None,
                              f"level sets differ from {config.levels_path}")
        return truth, None, difficulties
    episodes, truth = load_datasets(config.episodes_path, config.levels_path)
    _, features = build_feature_matrix(episodes)
    return truth, features, None


def _resolve_simulation_difficulties(config):
    if config.difficulties_path:
        ids, difficulties = read_difficulties_csv(config.difficulties_path)
        return ids, difficulties
    if config.constant_difficulty is not None:
        if config.n_levels is None:
            raise ConfigError("simulation.constant_difficulty needs "
                              "simulation.n_levels")
        difficulties = np.full(config.n_levels, config.constant_difficulty)
        return np.arange(1, config.n_levels + 1), difficulties
    raise ConfigError("simulate needs data.difficulties, or "
                      "simulation.constant_difficulty with simulation.n_levels")


def cmd_synth(config) -> int:
    out = Path(config.out_dir)
    dataset = make_dataset(n_levels=config.synth_levels,
                           episodes_per_level=config.synth_episodes_per_level,
                           n_players=config.n_players, seed=config.seed)
    write_episodes_csv(out / "episodes.csv", dataset.episodes)
    write_levels_csv(out / "levels.csv", dataset.truth)
    write_difficulties_csv(out / "difficulties.csv",
                           np.arange(1, config.synth_levels + 1),
                           dataset.spec.level_difficulties)
    report_path = out / "synth.json"
    write_json_report(report_path, _envelope("synth", config, {
        "generator_version": EPISODE_GENERATOR_VERSION,
        "n_levels": config.synth_levels,
        "episodes_per_level": config.synth_episodes_per_level,
        "players": config.n_players,
        "files": {"episodes": "episodes.csv", "levels": "levels.csv",
                  "difficulties": "difficulties.csv"},
    }))
    print(f"wrote {report_path}")
    return 0


def cmd_fit_baseline(config) -> int:
    out = Path(config.out_dir)
    episodes, truth = load_datasets(config.episodes_path, config.levels_path)
    level_ids, features = build_feature_matrix(episodes)
    model = fit_regression(features, truth.pass_rates, config.ridge)
    raw = predict_level_pass_rates(model, features)
    difficulties = normalize_difficulty(raw)
    in_sample = compute_metrics(clamp_unit(raw), truth.pass_rates)
    write_difficulties_csv(out / "difficulties.csv", level_ids, difficulties)
    report_path = out / "fit_baseline.json"
    write_json_report(report_path, _envelope("fit-baseline", config, {
        "weights": dict(zip(FEATURE_NAMES, model.weights)),
        "bias": model.bias,
        "ridge": config.ridge,
        "in_sample_pass": _metrics_dict(in_sample),
        "files": {"difficulties": "difficulties.csv"},
    }))
    print(f"wrote {report_path}")
    return 0


def cmd_simulate(config) -> int:
    out = Path(config.out_dir)
    level_ids, difficulties = _resolve_simulation_difficulties(config)
    rates, depleted_at = predict_rates(config.params, difficulties,
                                       _settings(config))
    levels = [
        {"level_id": int(level_id), "difficulty": difficulty,
         "pass_rate": rates[i, 0], "churn_rate": rates[i, 1]}
        for i, (level_id, difficulty) in enumerate(zip(level_ids, difficulties))]
    report_path = out / "simulate.json"
    write_json_report(report_path, _envelope("simulate", config, {
        "players": config.n_players,
        "params": _params_dict(config.params),
        "depleted_at": depleted_at,
        "levels": levels,
    }))
    print(f"wrote {report_path}")
    return 0


def cmd_fit(config) -> int:
    out = Path(config.out_dir)
    truth, features, provided = _load_truth_and_source(config)
    if features is not None:
        model = fit_regression(features, truth.pass_rates, config.ridge)
        difficulties = normalize_difficulty(
            predict_level_pass_rates(model, features))
    else:
        difficulties = provided
    w_churn = compute_w_churn(truth.pass_rates, truth.churn_rates)
    settings = _settings(config)
    params, opt = fit_sim_params(truth, difficulties, w_churn=w_churn,
                                 settings=settings, optimizer=config.optimizer)
    predictions, depleted_at = predict_rates(params, difficulties, settings)
    report_path = out / "fit.json"
    write_json_report(report_path, _envelope("fit", config, {
        "params": _params_dict(params),
        "w_churn": w_churn,
        "optimizer": {
            "best_value": opt.best_value,
            "evaluations_used": opt.evaluations_used,
            "generations": opt.generations,
            "termination_reason": opt.termination_reason,
        },
        "in_sample_pass": _metrics_dict(
            compute_metrics(predictions[:, 0], truth.pass_rates)),
        "in_sample_churn": _metrics_dict(
            compute_metrics(predictions[:, 1], truth.churn_rates)),
        "depleted_at": depleted_at,
        "levels": [
            {"level_id": int(level_id), "difficulty": difficulties[i],
             "pass_rate": predictions[i, 0], "churn_rate": predictions[i, 1]}
            for i, level_id in enumerate(truth.level_ids)],
    }))
    print(f"wrote {report_path}")
    return 0


def cmd_crossval(config) -> int:
    out = Path(config.out_dir)
    truth, features, provided = _load_truth_and_source(config)
    report = cross_validate(truth, features=features, difficulties=provided,
                            k=config.k, config=_eval_config(config))
    report_path = out / "crossval.json"
    write_json_report(report_path,
                      _envelope("crossval", config, _cv_report_dict(report)))
    print(f"wrote {report_path}")
    return 0


def cmd_ablate(config) -> int:
    out = Path(config.out_dir)
    truth, features, provided = _load_truth_and_source(config)
    table, reports = ablation_suite(truth, features=features,
                                    difficulties=provided, k=config.k,
                                    config=_eval_config(config))
    report_path = out / "ablate.json"
    write_json_report(report_path, _envelope("ablate", config, {
        "table": table,
        "aggregates": {name: reports[name].aggregate for name in table},
        "baseline": _baseline_dict(reports["All features"].baseline),
    }))
    print(f"wrote {report_path}")
    return 0


def cmd_oracle_diff(config) -> int:
    out = Path(config.out_dir)
    truth, features, provided = _load_truth_and_source(config)
    if features is None:
        raise ConfigError("oracle-diff compares against episode features; "
                          "unset data.difficulties")
    result = oracle_difficulty_experiment(truth, features, k=config.k,
                                          config=_eval_config(config))
    report_path = out / "oracle_diff.json"
    write_json_report(report_path, _envelope("oracle-diff", config, {
        "churn_mse_ratio": result.churn_mse_ratio,
        "oracle_aggregate": result.oracle.aggregate,
        "model_aggregate": result.model.aggregate,
        "baseline": _baseline_dict(result.model.baseline),
    }))
    print(f"wrote {report_path}")
    return 0


def cmd_report(config) -> int:
    out = Path(config.out_dir)
    truth = read_levels_csv(config.levels_path)
    write_scatter_csv(out / "scatter.csv", truth)
    report_path = out / "report.json"
    write_json_report(report_path, _envelope("report", config, {
        "n_levels": len(truth),
        "pass_rate": {"mean": float(truth.pass_rates.mean()),
                      "min": float(truth.pass_rates.min()),
                      "max": float(truth.pass_rates.max())},
        "churn_rate": {"mean": float(truth.churn_rates.mean()),
                       "min": float(truth.churn_rates.min()),
                       "max": float(truth.churn_rates.max())},
        "files": {"scatter": "scatter.csv"},
    }))
    print(f"wrote {report_path}")
    return 0


_COMMANDS = {
    "synth": cmd_synth,
    "fit-baseline": cmd_fit_baseline,
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "crossval": cmd_crossval,
    "ablate": cmd_ablate,
    "oracle-diff": cmd_oracle_diff,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 64
    try:
        config = load_config(args.config, seed=args.seed, out_dir=args.out)
        return _COMMANDS[args.command](config)
    except FileNotFoundError as exc:
        print(f"churnsim: missing file: {exc.filename or exc}", file=sys.stderr)
        return 2
    except (SchemaError, ConfigError) as exc:
        print(f"churnsim: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # anything unexpected is an internal failure
        print(f"churnsim: internal error: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 70


if __name__ == "__main__":
    sys.exit(main())
