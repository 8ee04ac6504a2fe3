"""``gatefid`` command-line interface.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 inconclusive residual-scaling check.
"""

from __future__ import annotations

import os
import platform
import sys
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from pathlib import Path

import click
import numpy as np
import scipy

from . import __version__
from .analytic import FirstOrderValidityWarning, assemble_budget
from .config import AnalysisConfig, ConfigError, load_config
from .gatelib import oracle_tomogram
from .liouville import RNG_ALGORITHM, haar_average_fidelity, haar_mc_fidelity, residual_scaling_check
from .report import FORMATS, Report, rational_hint

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_INCONCLUSIVE = 4
THREADS_ENV = "GATEFID_THREADS"
BOUND_FACTOR = 5.0


class InconclusiveScaling(RuntimeError):
    def __init__(self, report: Report):
        self.report = report
        super().__init__("residual scaling check inconclusive")


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(THREADS_ENV, f"expected a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(THREADS_ENV, f"expected a positive integer, got {raw!r}")
    return n


@contextmanager
def _executor():
    n = thread_count()
    if n == 1:
        yield None
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            yield pool


def _provenance(cfg: AnalysisConfig, started: float, **extra) -> dict:
    prov = {
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "threads": thread_count(),
        "quad_tol": cfg.quad_tol,
        "solver_tol": cfg.solver_tol,
        "seed": cfg.seed,
        "rng": RNG_ALGORITHM,
    }
    prov.update(extra)
    prov["wall_time_s"] = round(time.perf_counter() - started, 6)
    return prov


def _budget(cfg: AnalysisConfig, model, channels, warn: list[str]):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", FirstOrderValidityWarning)
        with _executor() as pool:
            budget = assemble_budget(model.schedule, channels, cfg.quad, executor=pool, formula=cfg.formula)
    warn.extend(str(w.message) for w in caught if issubclass(w.category, FirstOrderValidityWarning))
    return budget


def _hint(value: float) -> str | None:
    h = rational_hint(value)
    return None if h is None else f"≈ {h}"


def _channel_rows(model, channels, budget=None) -> list[dict]:
    rows = []
    for ch in channels:
        row = {
            "label": ch.label,
            "kind": ch.kind,
            "rate_per_s": ch.rate,
            "gamma_tau": ch.rate * model.tau,
            "convention": ch.convention,
        }
        if budget is not None:
            e = budget[ch.label]
            row.update({
                "coefficient": e.coefficient,
                "hint": _hint(e.coefficient),
                "contribution": e.contribution,
                "error_estimate": e.error_estimate,
            })
        rows.append(row)
    return rows


def _config_echo(cfg: AnalysisConfig, model) -> dict:
    echo = cfg.to_dict()
    echo["channels"] = cfg.resolved_channels(model)
    echo["tau_s"] = model.tau
    echo["model_params"] = dict(model.params)
    return echo


def run_budget(cfg: AnalysisConfig) -> Report:
    started = time.perf_counter()
    model = cfg.model()
    channels = cfg.channels(model)
    warn: list[str] = []
    budget = _budget(cfg, model, channels, warn)
    totals = {
        "tau_s": model.tau,
        "infidelity": budget.infidelity,
        "fidelity": budget.fidelity,
        "quadrature_error": budget.quadrature_error_estimate,
        "formula": cfg.formula,
        "gate_check": model.gate_check(),
    }
    columns = ["label", "kind", "rate_per_s", "gamma_tau", "convention", "coefficient", "hint",
               "contribution", "error_estimate"]
    return Report("budget", _config_echo(cfg, model), columns, _channel_rows(model, channels, budget),
                  totals, _provenance(cfg, started), warn)


def _oracle(cfg: AnalysisConfig, model, channels) -> tuple[float, dict]:
    tomo = oracle_tomogram(model, channels, cfg.solver_tol)
    fid = haar_average_fidelity(tomo, model.ideal_gate)
    info = {"oracle_self_error": tomo.self_error}
    if cfg.mc_samples:
        mean, err = haar_mc_fidelity(model.schedule, channels, model.ideal_gate, cfg.mc_samples, cfg.seed,
                                     tomogram=tomo)
        info.update({"mc_fidelity": mean, "mc_std_error": err, "mc_samples": cfg.mc_samples,
                     "mc_within_3_sigma": bool(abs(mean - fid) <= 3 * err + 1e-12)})
    return fid, info


def run_oracle(cfg: AnalysisConfig) -> Report:
    started = time.perf_counter()
    model = cfg.model()
    channels = cfg.channels(model)
    fid, info = _oracle(cfg, model, channels)
    totals = {"tau_s": model.tau, "fidelity": fid, "infidelity": 1.0 - fid, **info,
              "gate_check": model.gate_check()}
    columns = ["label", "kind", "rate_per_s", "gamma_tau", "convention"]
    return Report("oracle", _config_echo(cfg, model), columns, _channel_rows(model, channels),
                  totals, _provenance(cfg, started), [])


def run_compare(cfg: AnalysisConfig) -> Report:
    """Analytic versus oracle fidelity, plus the residual-scaling slope when scales are given.

    Raises
    ------
    InconclusiveScaling
        Carrying the finished report, when the scaling check cannot fit a slope.
    """
    started = time.perf_counter()
    model = cfg.model()
    channels = cfg.channels(model)
    warn: list[str] = []
    budget = _budget(cfg, model, channels, warn)
    fid, info = _oracle(cfg, model, channels)
    load = sum(ch.rate * model.tau * ch.convention for ch in channels)
    residual = fid - budget.fidelity
    bound = BOUND_FACTOR * load**2
    totals = {
        "tau_s": model.tau,
        "fidelity_analytic": budget.fidelity,
        "fidelity_oracle": fid,
        "residual": residual,
        "residual_bound": bound,
        "within_bound": bool(abs(residual) <= bound),
        "formula": cfg.formula,
        **info,
    }
    rows = []
    columns = ["scale", "residual"]
    inconclusive = False
    if cfg.scales:
        res = residual_scaling_check(
            model.schedule, channels, model.ideal_gate, cfg.scales, budget.infidelity,
            solver_tol=cfg.solver_tol, tomography=lambda chs: oracle_tomogram(model, chs, cfg.solver_tol),
        )
        rows = [{"scale": s, "residual": r} for s, r in zip(res.scales, res.residuals)]
        totals.update({"slope": res.slope, "inconclusive": res.inconclusive, "noise_floor": res.noise_floor})
        inconclusive = res.inconclusive
    report = Report("compare", _config_echo(cfg, model), columns, rows, totals, _provenance(cfg, started), warn)
    if inconclusive:
        raise InconclusiveScaling(report)
    return report


def run_sweep(cfg: AnalysisConfig) -> Report:
    started = time.perf_counter()
    if cfg.sweep is None:
        raise ConfigError("sweep", "the sweep command needs a [sweep] table")
    sweep = cfg.sweep
    warn: list[str] = []
    rows = []
    labels: list[str] = []
    for grid_value, value in zip(sweep["grid"], sweep["values"]):
        model = cfg.model({sweep["parameter"]: value})
        channels = cfg.channels(model)
        budget = _budget(cfg, model, channels, warn)
        labels = [ch.label for ch in channels]
        row = {sweep["parameter"]: grid_value, f"{sweep['parameter']}_si": value, "tau_s": model.tau}
        row.update({f"c_{e.label}": e.coefficient for e in budget.entries})
        row["fidelity_analytic"] = budget.fidelity
        if sweep["oracle"]:
            row["fidelity_oracle"] = _oracle(cfg, model, channels)[0]
        rows.append(row)
    columns = [sweep["parameter"], f"{sweep['parameter']}_si", "tau_s", *(f"c_{lab}" for lab in labels),
               "fidelity_analytic"]
    if sweep["oracle"]:
        columns.append("fidelity_oracle")
    model = cfg.model()
    totals = {"points": len(rows), "formula": cfg.formula}
    return Report("sweep", _config_echo(cfg, model), columns, rows, totals, _provenance(cfg, started),
                  sorted(set(warn)))


RUNNERS = {"budget": run_budget, "oracle": run_oracle, "compare": run_compare, "sweep": run_sweep}


def _emit(report: Report, fmt: str, out: str | None) -> None:
    text = report.render(fmt)
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


def _run(command: str, config: str, out, fmt, seed, mc_samples, tol) -> None:
    try:
        cfg = load_config(config)
        if seed is not None:
            cfg.seed = seed
        if mc_samples is not None:
            if 0 < mc_samples < 100:
                raise ConfigError("--mc-samples", "need 0 (off) or at least 100 samples")
            cfg.mc_samples = mc_samples
        if tol is not None:
            if not tol > 0:
                raise ConfigError("--tol", "tolerance must be positive")
            cfg.quad_tol = cfg.solver_tol = tol
        report = RUNNERS[command](cfg)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except KeyError as exc:
        click.echo(f"config error: {exc.args[0]}", err=True)
        sys.exit(EXIT_CONFIG)
    except InconclusiveScaling as exc:
        _emit(exc.report, fmt, out)
        click.echo("residual scaling check inconclusive: residuals at or below the solver noise floor", err=True)
        sys.exit(EXIT_INCONCLUSIVE)
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(EXIT_NUMERICAL)
    for w in report.warnings:
        click.echo(f"warning: {w}", err=True)
    _emit(report, fmt, out)


def _common(fn):
    fn = click.option("--tol", type=float, default=None,
                      help="Override both the quadrature and the solver tolerance.")(fn)
    fn = click.option("--mc-samples", type=int, default=None,
                      help="Monte Carlo cross-check sample count (0 disables).")(fn)
    fn = click.option("--seed", type=int, default=None, help="Seed for the Monte Carlo sampler.")(fn)
    fn = click.option("--format", "fmt", type=click.Choice(FORMATS), default="text", show_default=True)(fn)
    fn = click.option("--out", type=click.Path(dir_okay=False), default=None,
                      help="Write the report here instead of stdout.")(fn)
    fn = click.argument("config", type=click.Path(exists=True, dir_okay=False))(fn)
    return fn


@click.group()
@click.version_option(__version__, prog_name="gatefid")
def main():
    """First-order gate-fidelity budgets and their master-equation check.

    The worker thread count is read from the GATEFID_THREADS environment
    variable (default 1).
    """


@main.command()
@_common
def budget(config, out, fmt, seed, mc_samples, tol):
    """Analytic first-order fidelity budget."""
    _run("budget", config, out, fmt, seed, mc_samples, tol)


@main.command()
@_common
def oracle(config, out, fmt, seed, mc_samples, tol):
    """Average gate fidelity from the Lindblad master equation."""
    _run("oracle", config, out, fmt, seed, mc_samples, tol)


@main.command()
@_common
def compare(config, out, fmt, seed, mc_samples, tol):
    """Analytic budget against the oracle, with optional residual scaling."""
    _run("compare", config, out, fmt, seed, mc_samples, tol)


@main.command()
@_common
def sweep(config, out, fmt, seed, mc_samples, tol):
    """Coefficient table over a grid of one gate parameter."""
    _run("sweep", config, out, fmt, seed, mc_samples, tol)


if __name__ == "__main__":  # pragma: no cover
    main()
