"""Experiment runner and command line interface.

    gamecontrol run CONFIG [--out DIR] [--seed S] [--realizations R]
                           [--horizon T] [--mode MODE] [--threads W]

Writes scenario.json, metrics.csv, diagnostics.json and manifest.json into
the output directory. Exit codes: 0 ok, 2 config error, 3 divergence,
4 failed diagnostic check.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import (
    aggregate_realizations,
    check_cocoercivity,
    check_g_nonexpansive,
    check_ne_lipschitz,
    estimate_lipschitz,
    estimate_monotonicity,
    fit_rate,
    ne_gap_series,
)
from .dynamics import MODES, NoiseModel, RecordOptions, StepSchedule, realization_rng, run_trajectory
from .errors import DivergedRunError, GameControlError, InvalidInputError
from .ne_oracle import GMapParams
from .scenarios import Scenario, global_cost, make_scenario, sum_rewards

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_DIAGNOSTICS = 0, 2, 3, 4


class ConfigError(InvalidInputError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    kind: str
    params: dict = field(default_factory=dict)
    seed: int | None = None


@dataclass(frozen=True)
class DiagnosticsConfig:
    constants: bool = True
    constant_samples: int = 200
    lemma_checks: bool = False
    num_pairs: int = 200
    alpha_range: float = 5.0
    rate_fit: bool = True
    rate_window: tuple = (1e3, 1e5)
    ne_gap_points: int = 0
    ne_gap_window: tuple = (1e3, 1e4)


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioConfig
    schedule: StepSchedule = StepSchedule()
    noise_sigma: float = 0.5
    horizon: int = 100_000
    realizations: int = 100
    record_stride: int | None = None
    modes: tuple = ("controlled",)
    init_alpha_range: tuple = (0.0, 2.0)
    init_x_range: tuple = (0.0, 0.1)
    diagnostics: DiagnosticsConfig = DiagnosticsConfig()
    seed: int = 0
    output_dir: str = "runs/out"

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if self.realizations < 1:
            raise ConfigError("realizations must be >= 1")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")
        if self.record_stride is not None and self.record_stride < 1:
            raise ConfigError("record_stride must be >= 1")
        for m in self.modes:
            if m not in MODES:
                raise ConfigError(f"unknown mode {m!r}; expected one of {MODES}")
        if "direct-global" in self.modes and self.scenario.kind != "quadratic":
            raise ConfigError("direct-global mode needs a quadratic scenario")

    @property
    def stride(self) -> int:
        if self.record_stride is not None:
            return self.record_stride
        return max(1, self.horizon // 1000)

    @property
    def scenario_seed(self) -> int:
        return self.seed if self.scenario.seed is None else self.scenario.seed

    def to_dict(self) -> dict:
        return asdict(self)


def _strict(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    known = {f.name for f in fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigError(f"{where}: unknown key {key!r}")
    return dict(data)


def config_from_dict(data: dict) -> ExperimentConfig:
    """Build a validated config; unknown keys anywhere are rejected."""
    data = _strict(ExperimentConfig, data, "config")
    if "scenario" not in data:
        raise ConfigError("config: missing required key 'scenario'")
    try:
        scen = _strict(ScenarioConfig, data.pop("scenario"), "scenario")
        if "kind" not in scen:
            raise ConfigError("scenario: missing required key 'kind'")
        kw = {"scenario": ScenarioConfig(**scen)}
        if "schedule" in data:
            kw["schedule"] = StepSchedule(**_strict(StepSchedule, data.pop("schedule"), "schedule"))
        if "diagnostics" in data:
            diag = _strict(DiagnosticsConfig, data.pop("diagnostics"), "diagnostics")
            for key in ("rate_window", "ne_gap_window"):
                if key in diag:
                    diag[key] = tuple(diag[key])
            kw["diagnostics"] = DiagnosticsConfig(**diag)
        for key in ("modes", "init_alpha_range", "init_x_range"):
            if key in data:
                data[key] = tuple(data[key])
        kw.update(data)
        return ExperimentConfig(**kw)
    except ConfigError:
        raise
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from exc
    except TypeError as exc:
        raise ConfigError(f"config: {exc}") from exc


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(data)


def _observers(scenario: Scenario) -> dict:
    if scenario.kind != "quadratic":
        return {}
    return {
        "cost": lambda x: global_cost(scenario, x),
        "sum_rewards": lambda x: sum_rewards(scenario, x),
    }


def _snapshot_times(config: ExperimentConfig) -> list:
    n = config.diagnostics.ne_gap_points
    if n <= 0:
        return []
    lo, hi = config.diagnostics.ne_gap_window
    hi = min(hi, config.horizon)
    lo = min(lo, hi)
    return sorted({int(round(t)) for t in np.geomspace(max(lo, 1), hi, n)})


def _run_one(scenario, config, mode, index):
    record = RecordOptions(
        stride=config.stride,
        observers=_observers(scenario),
        snapshot_times=_snapshot_times(config) if mode == "controlled" else (),
    )
    try:
        traj = run_trajectory(
            scenario.game,
            scenario.constraint,
            config.schedule,
            NoiseModel(config.noise_sigma),
            config.horizon,
            realization_rng(config.seed, index),
            record=record,
            mode=mode,
            objective_grad=scenario.objective_grad if mode == "direct-global" else None,
            init_alpha_range=config.init_alpha_range,
            init_x_range=config.init_x_range,
        )
        return traj, {"realization": index, "mode": mode, "status": "ok"}
    except DivergedRunError as exc:
        return None, {
            "realization": index, "mode": mode, "status": "diverged",
            "last_finite_t": exc.last_finite_t,
        }


def run_realizations(scenario, config: ExperimentConfig, mode: str, threads: int = 1):
    """All realizations of one mode, returned in realization-index order."""
    jobs = range(config.realizations)
    if threads <= 1:
        results = [_run_one(scenario, config, mode, k) for k in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda k: _run_one(scenario, config, mode, k), jobs))
    return [r[0] for r in results], [r[1] for r in results]


def _diagnostics_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(1, 0))))


def _write_metrics(path, per_mode: dict, quadratic: bool) -> None:
    header = ["mode", "t", "mean_violation_sq", "std_violation_sq"]
    if quadratic:
        header += ["mean_cost", "std_cost", "mean_sum_rewards", "std_sum_rewards"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for mode, agg in per_mode.items():
            for i, t in enumerate(agg.t):
                row = [mode, int(t), repr(float(agg.mean[i])), repr(float(agg.std[i]))]
                if quadratic:
                    for name in ("cost", "sum_rewards"):
                        m, s = agg.observed[name]
                        row += [repr(float(m[i])), repr(float(s[i]))]
                if not all(np.isfinite(float(v)) for v in row[2:]):
                    raise GameControlError(f"non-finite metric at mode={mode}, t={t}")
                writer.writerow(row)


def _resolve_constants(scenario, config, rng, report):
    game = scenario.game
    diag = config.diagnostics
    mu, lip = game.monotonicity_mu, game.lipschitz_L
    if "mu_exact" in scenario.info:
        mu, lip = scenario.info["mu_exact"], scenario.info["lipschitz_exact"]
        report["constants"] = {"mu": mu, "L": lip, "source": "exact (linear gradient)"}
    elif diag.constants or diag.lemma_checks or diag.ne_gap_points:
        if mu is None:
            mu = estimate_monotonicity(game, diag.constant_samples, rng)
        if lip is None:
            lip = estimate_lipschitz(game, diag.constant_samples, rng)
        report["constants"] = {"mu": mu, "L": lip, "source": "sampled", "samples": diag.constant_samples}
    if mu is not None and mu <= 0:
        log.warning("game does not look strongly monotone: mu_hat = %.4g", mu)
        report.setdefault("warnings", []).append(f"mu_hat = {mu!r} <= 0: not strongly monotone on the sample")
    return mu, lip


def _ne_solver_kwargs(mu, lip):
    if mu is not None and mu > 0:
        return {"mu": mu, "lipschitz": lip}
    # no certified contraction step; fall back to 1/L with the solver's blow-up guard
    return {"step": 1.0 / lip}


def run_experiment(config: ExperimentConfig, threads: int = 1) -> int:
    """Run every mode, write the output files and return the exit status."""
    started = time.time()
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    scenario = make_scenario(config.scenario.kind, config.scenario.params, config.scenario_seed)
    scenario.dump(out / "scenario.json")

    per_mode, statuses, trajectories = {}, [], {}
    for mode in config.modes:
        trajs, stats = run_realizations(scenario, config, mode, threads)
        statuses += stats
        ok = [t for t in trajs if t is not None]
        trajectories[mode] = ok
        if ok:
            per_mode[mode] = aggregate_realizations(ok)
    _write_metrics(out / "metrics.csv", per_mode, scenario.kind == "quadratic")
    diverged = any(s["status"] != "ok" for s in statuses)

    report = {"scenario": {"kind": scenario.kind, "seed": scenario.seed}}
    rng = _diagnostics_rng(config.seed)
    mu, lip = _resolve_constants(scenario, config, rng, report)
    checks = []
    diag = config.diagnostics
    if diag.lemma_checks:
        if mu is not None and mu > 0:
            params = GMapParams.from_constants(mu, scenario.constraint.a_norm)
            kw = {"num_pairs": diag.num_pairs, "alpha_range": diag.alpha_range, "lipschitz": lip}
            checks.append(check_g_nonexpansive(scenario.game, scenario.constraint, params, rng=rng, **kw))
            checks.append(check_cocoercivity(scenario.game, scenario.constraint, mu_hat=mu, rng=rng, **kw))
            checks.append(check_ne_lipschitz(scenario.game, scenario.constraint, rng=rng, mu=mu, **kw))
        else:
            report.setdefault("warnings", []).append("lemma checks skipped: no positive mu_hat")
    report["checks"] = [c.to_dict() for c in checks]

    if diag.rate_fit and "controlled" in per_mode:
        agg = per_mode["controlled"]
        try:
            report["rate_fit"] = fit_rate(agg.t, agg.mean, diag.rate_window).to_dict()
        except InvalidInputError as exc:
            report["rate_fit"] = {"error": str(exc)}

    if diag.ne_gap_points and trajectories.get("controlled"):
        kw = _ne_solver_kwargs(mu, lip)
        series = [ne_gap_series(scenario.game, scenario.constraint, tr, **kw)
                  for tr in trajectories["controlled"]]
        gap_sq = np.mean([s.gap**2 for s in series], axis=0)
        ne_viol = np.mean([s.ne_violation_sq for s in series], axis=0)
        report["ne_gap"] = {
            "t": series[0].t.tolist(),
            "mean_gap_sq": gap_sq.tolist(),
            "mean_ne_violation_sq": ne_viol.tolist(),
        }

    (out / "diagnostics.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    manifest = {
        "config": config.to_dict(),
        "master_seed": config.seed,
        "scenario_seed": config.scenario_seed,
        "threads": threads,
        "versions": {
            "gamecontrol": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
        "std_convention": "sample (n - 1)",
        "realizations": statuses,
        "wall_time_s": time.time() - started,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str))

    if diverged:
        return EXIT_DIVERGED
    if any(not c.passed for c in checks):
        return EXIT_DIAGNOSTICS
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gamecontrol", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment from a JSON config")
    run.add_argument("config")
    run.add_argument("--out", help="output directory")
    run.add_argument("--seed", type=int, help="master seed")
    run.add_argument("--realizations", type=int)
    run.add_argument("--horizon", type=int)
    run.add_argument("--mode", choices=MODES, help="run a single mode")
    run.add_argument("--threads", type=int, default=1)
    run.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = parse_config(args.config)
        overrides = {}
        if args.out is not None:
            overrides["output_dir"] = args.out
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.realizations is not None:
            overrides["realizations"] = args.realizations
        if args.horizon is not None:
            overrides["horizon"] = args.horizon
        if args.mode is not None:
            overrides["modes"] = (args.mode,)
        config = replace(config, **overrides)
    except InvalidInputError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    status = run_experiment(config, threads=args.threads)
    if status == EXIT_DIVERGED:
        print("at least one realization diverged; see manifest.json", file=sys.stderr)
    elif status == EXIT_DIAGNOSTICS:
        print("a diagnostic check failed; see diagnostics.json", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
