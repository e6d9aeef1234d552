"""Sweep a scenario over its grid and collect analytic and simulated curves."""
from __future__ import annotations

import csv
import dataclasses
import io
import time
from dataclasses import dataclass

import numpy as np

from . import analysis
from . import montecarlo as mc
from .config import (
    ConfigError,
    RawConfig,
    RunSettings,
    build_patterns,
    build_receiver,
    build_run,
    build_system,
    check_conflicts,
    key_kind,
    parse_grid,
)
from .model import AntennaPattern, GainDistribution, SystemParams, UhfParams, gain_distribution, harvested_energy

# curves each mode can produce; the first tuple is the default selection
MODE_CURVES = {
    "energy-connected": (("exact",), ("exact", "ball")),
    "energy-nonconnected": (("exact",), ("exact",)),
    "overall": (("mixture",), ("mixture",)),
    "avg-power": (("useful", "limit"), ("useful", "limit", "ball", "uhf")),
    "swipt": (("success",), ("success", "sinr")),
    "combiner-study": (("switch-greedy", "mrc"), ("switch-greedy", "switch-exhaustive", "mrc", "single")),
    "uhf-compare": (("mmwave", "uhf"), ("mmwave", "uhf")),
}
# curves with no closed form, and curves with no simulator
SIM_ONLY = {"uhf"}
ANALYTIC_ONLY = {"ball"}


@dataclass(frozen=True)
class Context:
    system: SystemParams
    tx: AntennaPattern
    rx: AntennaPattern
    gains: GainDistribution
    receiver: mc.ReceiverSpec
    run: RunSettings


@dataclass(frozen=True)
class Row:
    curve: str
    x: float
    analytic: float | None
    simulated: mc.CoverageEstimate | None
    wall_time: float


@dataclass
class ExperimentResult:
    name: str
    sweep_label: str
    engine: str
    rows: list[Row]

    @property
    def has_analytic(self) -> bool:
        return self.engine in ("analytic", "both")

    @property
    def has_sim(self) -> bool:
        return self.engine in ("sim", "both")

    def curve(self, label: str) -> list[Row]:
        return [r for r in self.rows if r.curve == label]

    @property
    def curve_labels(self) -> list[str]:
        return list(dict.fromkeys(r.curve for r in self.rows))


def _context(raw: RawConfig) -> Context:
    try:
        system = build_system(raw)
        run = build_run(raw)
        check_conflicts(raw, system, run)
        tx, rx = build_patterns(raw)
        receiver = build_receiver(raw)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{raw.source}: {exc}") from exc
    return Context(system, tx, rx, gain_distribution(tx, rx), receiver, run)


class _SampleCache:
    """Simulated deployments shared by every threshold of one configuration."""

    def __init__(self, workers: int | None):
        self.workers = workers
        self._store: dict = {}

    def power(self, mode: str, ctx: Context) -> mc.PowerSamples:
        # the user mix only weights results; deployments do not depend on it
        system = dataclasses.replace(ctx.system, connected_fraction=1.0)
        key = ("power", mode, system, ctx.gains, ctx.run.trials, ctx.run.seed)
        if key not in self._store:
            self._store[key] = mc.received_power_samples(
                mode, ctx.run.trials, ctx.run.seed, ctx.system, ctx.gains, self.workers
            )
        return self._store[key]

    def uhf(self, ctx: Context):
        uhf = _uhf_params(ctx.system)
        key = ("uhf", uhf, ctx.run.trials, ctx.run.seed)
        if key not in self._store:
            self._store[key] = mc.uhf_power_samples(ctx.run.trials, ctx.run.seed, uhf)
        return self._store[key]


def _uhf_params(system: SystemParams) -> UhfParams:
    return UhfParams(
        tx_power=system.tx_power,
        rectifier_eff=system.rectifier_eff,
        activation_threshold=system.activation_threshold,
        noise_figure_db=system.noise_figure_db,
    )


def _mean_of(values, seed: int) -> mc.CoverageEstimate:
    return mc.CoverageEstimate.from_samples(np.asarray(values, dtype=float), seed)


def _evaluate(curve: str, ctx: Context, want_analytic: bool, want_sim: bool, cache: _SampleCache):
    run, p, g = ctx.run, ctx.system, ctx.gains
    mode = run.mode
    analytic = estimate = None

    if mode in ("energy-connected", "energy-nonconnected") or (mode == "uhf-compare" and curve == "mmwave"):
        user = "nonconnected" if mode == "energy-nonconnected" else "connected"
        q = analysis.EnergyCoverageQuery(run.threshold, run.approx_terms, user)
        if want_analytic:
            fn = analysis.energy_coverage_connected_fast if curve == "ball" else analysis.energy_coverage
            analytic = fn(q, p, g)
        if want_sim:
            estimate = mc.coverage_from_samples(cache.power(user, ctx), run.threshold, p)

    elif mode == "overall":
        eps = p.connected_fraction
        if want_analytic:
            analytic = analysis.overall_energy_coverage(eps, run.threshold, run.threshold_ncon, p, g, run.approx_terms)
        if want_sim:
            con = mc.coverage_from_samples(cache.power("connected", ctx), run.threshold, p)
            ncon = mc.coverage_from_samples(cache.power("nonconnected", ctx), run.threshold_ncon, p)
            half = ((eps * con.ci_halfwidth) ** 2 + ((1 - eps) * ncon.ci_halfwidth) ** 2) ** 0.5
            estimate = mc.CoverageEstimate(eps * con.estimate + (1 - eps) * ncon.estimate, con.trials, half, run.seed)

    elif mode == "avg-power":
        con = run.user == "connected"
        if want_analytic and curve == "useful":
            fn = analysis.avg_power_connected if con else analysis.avg_power_nonconnected
            analytic = fn(run.threshold, p, g, run.approx_terms)
        elif want_analytic and curve == "limit":
            analytic = (analysis.avg_power_connected_limit if con else analysis.avg_power_nonconnected_limit)(p, g)
        elif want_analytic and curve == "ball":
            if not con:
                raise ConfigError("the LOS-ball mean-power curve applies to connected users only")
            analytic = analysis.avg_power_connected_approx(p, g)
        if want_sim and curve in ("useful", "limit"):
            psi = run.threshold if curve == "useful" else 0.0
            estimate = mc.avg_power_from_samples(cache.power(run.user, ctx), psi, p)
        elif want_sim and curve == "uhf":
            uhf = _uhf_params(p)
            gamma = harvested_energy(cache.uhf(ctx), uhf.rectifier_eff, uhf.activation_threshold)
            estimate = _mean_of(np.where(gamma > run.threshold, gamma, 0.0), run.seed)

    elif mode in ("swipt", "combiner-study"):
        q = analysis.SwiptQuery(run.sinr_threshold, run.threshold, run.split_ratio)
        receiver = ctx.receiver
        if mode == "combiner-study":
            receiver = dataclasses.replace(receiver, combiner=curve)
        single = receiver.num_antennas == 1 or receiver.combiner == "single"
        if want_analytic and single:
            if curve == "sinr":
                analytic = analysis.sinr_coverage(q, p, g)
            else:
                analytic = analysis.swipt_success(q, p, g, run.approx_terms)
        if want_sim:
            energy = curve != "sinr"
            estimate = mc.swipt_from_samples(cache.power("connected", ctx), q, receiver, p, energy)

    elif mode == "uhf-compare" and curve == "uhf":
        if want_sim:
            uhf = _uhf_params(p)
            gamma = harvested_energy(cache.uhf(ctx), uhf.rectifier_eff, uhf.activation_threshold)
            hits = int((gamma > run.threshold).sum())
            estimate = mc.CoverageEstimate.from_count(hits, run.trials, run.seed)

    return analytic, estimate


def _split(text: str | None) -> list[str]:
    return [s.strip() for s in text.split("|")] if text else []


def run_experiment(
    raw: RawConfig,
    *,
    seed: int | None = None,
    trials: int | None = None,
    engine: str | None = None,
    workers: int | None = None,
    name: str = "scenario",
) -> ExperimentResult:
    """Evaluate every (series, curve, sweep point) of a scenario."""
    if seed is not None:
        raw = raw.with_setting("run.seed", str(seed))
    if trials is not None:
        raw = raw.with_setting("run.trials", str(trials))
    if engine is not None:
        raw = raw.with_setting("run.engine", engine)

    base = _context(raw)
    run = base.run
    defaults, allowed = MODE_CURVES[run.mode]
    curves = run.curves or defaults
    for c in curves:
        if c not in allowed:
            raise ConfigError(f"{raw.source}: curve {c!r} not available in {run.mode} mode; choose from {allowed}")

    variable = raw.get("sweep.variable")
    values = raw.get("sweep.values")
    if not variable or not values:
        raise ConfigError(f"{raw.source}: [sweep] needs variable and values")
    key_kind(variable)
    settings, numbers, unit = parse_grid(values)

    series = raw.get("sweep.series")
    series_values = _split(raw.get("sweep.series_values"))
    series_labels = _split(raw.get("sweep.series_labels")) or series_values
    if series:
        key_kind(series)
        if not series_values:
            raise ConfigError(f"{raw.source}: sweep.series given without series_values")
        if len(series_labels) != len(series_values):
            raise ConfigError(f"{raw.source}: series_labels and series_values differ in length")
    else:
        series_values, series_labels = [None], [None]

    want_analytic = run.engine in ("analytic", "both")
    want_sim = run.engine in ("sim", "both")
    cache = _SampleCache(workers)
    rows: list[Row] = []
    for s_value, s_label in zip(series_values, series_labels):
        raw_s = raw.with_setting(series, s_value) if series else raw
        for curve in curves:
            label = "/".join(x for x in (s_label, curve if len(curves) > 1 else None) if x) or curve
            for setting, number in zip(settings, numbers):
                ctx = _context(raw_s.with_setting(variable, setting))
                start = time.perf_counter()
                a, e = _evaluate(
                    curve, ctx, want_analytic and curve not in SIM_ONLY, want_sim and curve not in ANALYTIC_ONLY, cache
                )
                rows.append(Row(label, number, a, e, time.perf_counter() - start))
    sweep_label = f"{variable} [{unit}]" if unit else variable
    return ExperimentResult(name, sweep_label, run.engine, rows)


def _fmt(v) -> str:
    return "" if v is None else f"{v:.9g}"


def to_csv(result: ExperimentResult, timing: bool = True) -> str:
    """CSV text: one row per curve point, numbers to 9 significant digits."""
    header = ["curve", result.sweep_label]
    if result.has_analytic:
        header.append("analytic")
    if result.has_sim:
        header += ["simulated", "ci_halfwidth", "trials"]
    if timing:
        header.append("wall_time_s")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in result.rows:
        line = [r.curve, _fmt(r.x)]
        if result.has_analytic:
            line.append(_fmt(r.analytic))
        if result.has_sim:
            e = r.simulated
            line += [_fmt(e and e.estimate), _fmt(e and e.ci_halfwidth), "" if e is None else str(e.trials)]
        if timing:
            line.append(f"{r.wall_time:.3g}")
        w.writerow(line)
    return buf.getvalue()
