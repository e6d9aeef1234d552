"""Monte Carlo simulator for the PPP network, the harvester and the SWIPT receivers.

Trials are grouped into fixed blocks of :data:`BLOCK_SIZE`; block ``b`` draws
from its own stream ``SeedSequence(seed, spawn_key=(b,))``.  Blocks are
independent units of work, so results do not depend on how many threads run
them: event counts are integers and means are exactly rounded sums.
"""
from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .analysis import SwiptQuery
from .model import GainDistribution, LinkState, SystemParams, UhfParams, harvested_energy

BLOCK_SIZE = 256
MAX_RADIUS = 20_000.0
Z95 = 1.959963984540054

Mode = Literal["connected", "nonconnected"]


@dataclass(frozen=True)
class CoverageEstimate:
    estimate: float
    trials: int
    ci_halfwidth: float
    seed: int

    @classmethod
    def from_count(cls, hits: int, trials: int, seed: int) -> "CoverageEstimate":
        p = hits / trials
        return cls(p, trials, Z95 * math.sqrt(p * (1 - p) / trials), seed)

    @classmethod
    def from_samples(cls, values: np.ndarray, seed: int) -> "CoverageEstimate":
        n = len(values)
        mean = math.fsum(values) / n
        var = max(math.fsum((values - mean) ** 2) / max(n - 1, 1), 0.0)
        return cls(mean, n, Z95 * math.sqrt(var / n), seed)


@dataclass(frozen=True)
class ReceiverSpec:
    num_antennas: int = 1
    element_spacing: float = 0.5
    combiner: Literal["switch-greedy", "switch-exhaustive", "mrc", "single"] = "switch-greedy"

    def __post_init__(self):
        if self.num_antennas < 1 or int(self.num_antennas) != self.num_antennas:
            raise ValueError("num_antennas must be a positive integer")
        if not self.element_spacing > 0:
            raise ValueError("element_spacing must be positive")
        if self.combiner not in ("switch-greedy", "switch-exhaustive", "mrc", "single"):
            raise ValueError(f"unknown combiner {self.combiner!r}")

    @property
    def phase_step(self) -> float:
        """``k d`` in radians: wavenumber times element spacing."""
        return 2 * math.pi * self.element_spacing


@dataclass(frozen=True)
class NetworkRealization:
    """One deployment; per-BS arrays share the same index."""

    distance: np.ndarray
    azimuth: np.ndarray
    los: np.ndarray
    fading: np.ndarray
    gain: np.ndarray
    serving: int | None

    def link_state(self, i: int) -> LinkState:
        return LinkState.LOS if self.los[i] else LinkState.NLOS

    def received_power(self, params: SystemParams) -> np.ndarray:
        """Per-BS received power ``P_t * gain * fading * C r^-alpha``."""
        pl = np.where(
            self.los,
            params.intercept_los * self.distance ** -params.alpha_los,
            params.intercept_nlos * self.distance ** -params.alpha_nlos,
        )
        return params.tx_power * self.gain * self.fading * pl


# ---------------------------------------------------------------------------
# simulation radius


def _campbell_tail(radius: float, params: SystemParams, gains: GainDistribution) -> float:
    """Mean received power from BSs beyond ``radius`` (all links random gain)."""
    from .analysis import _psi_los, _psi_nlos

    x = np.array([radius])
    return float(_psi_los(x, params, gains)[0] + _psi_nlos(x, params, gains)[0])


def simulation_radius(params: SystemParams, gains: GainDistribution) -> float:
    """Smallest disc whose outside contributes negligibly to the mean power.

    The tail must stay below ``1e-6`` of the total mean and, when an
    activation threshold is set, below ``1e-3`` of it.
    """
    if params.bs_density == 0:
        return params.min_distance * 2
    total = _campbell_tail(params.min_distance, params, gains)
    tol = 1e-6 * total
    if params.activation_threshold > 0:
        tol = min(tol, 1e-3 * params.activation_threshold)
    lo, hi = params.min_distance, max(100.0, 2 * params.min_distance)
    while _campbell_tail(hi, params, gains) > tol:
        lo, hi = hi, hi * 2
        if hi >= MAX_RADIUS:
            return MAX_RADIUS
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if _campbell_tail(mid, params, gains) > tol:
            lo = mid
        else:
            hi = mid
    return hi


# ---------------------------------------------------------------------------
# block sampler


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))


@dataclass
class _Block:
    """Per-trial outputs of one block of trials."""

    signal: np.ndarray  # serving-link power S (0 in nonconnected mode or empty trials)
    interference: np.ndarray  # everything else
    nonempty: np.ndarray
    serving_los: np.ndarray
    serving_distance: np.ndarray
    aoa: np.ndarray


def _sample_block(n: int, rng: np.random.Generator, mode: Mode, params: SystemParams,
                  gains: GainDistribution, radius: float, keep: list | None = None) -> _Block:
    rg = params.min_distance
    area = math.pi * (radius**2 - rg**2)
    counts = rng.poisson(params.bs_density * area, size=n)
    total = int(counts.sum())
    trial = np.repeat(np.arange(n), counts)
    r = np.sqrt(rg**2 + rng.random(total) * (radius**2 - rg**2))
    azimuth = 2 * math.pi * rng.random(total)
    los = rng.random(total) < np.exp(-params.blockage_beta * r)
    shape = np.where(los, params.nakagami_los, params.nakagami_nlos)
    fading = rng.standard_gamma(shape) / shape
    cum = np.cumsum(gains.probs)
    gain_idx = np.minimum(np.searchsorted(cum, rng.random(total), side="right"), 4)
    gain = np.asarray(gains.gains)[gain_idx]
    aoa = 2 * math.pi * rng.random(n)

    pathgain = np.where(los, params.intercept_los * r ** -params.alpha_los,
                        params.intercept_nlos * r ** -params.alpha_nlos)
    nonempty = counts > 0
    serving_los = np.zeros(n, dtype=bool)
    serving_distance = np.full(n, np.nan)
    signal = np.zeros(n)
    serving = np.full(n, -1)
    if mode == "connected" and total:
        starts = np.cumsum(counts) - counts
        best = np.maximum.reduceat(pathgain, starts[nonempty])
        seg_best = np.zeros(n)
        seg_best[nonempty] = best
        hits = np.nonzero(pathgain == seg_best[trial])[0]
        first_trial, first_pos = np.unique(trial[hits], return_index=True)
        serving[first_trial] = hits[first_pos]
        idx = serving[nonempty]
        gain[idx] = gains.aligned_gain
        serving_los[nonempty] = los[idx]
        serving_distance[nonempty] = r[idx]
    power = params.tx_power * gain * fading * pathgain
    y = np.bincount(trial, weights=power, minlength=n)
    if mode == "connected" and total:
        signal[nonempty] = power[serving[nonempty]]
    if keep is not None:
        starts = np.cumsum(counts) - counts
        for j in range(n):
            sl = slice(starts[j], starts[j] + counts[j])
            keep.append(NetworkRealization(r[sl], azimuth[sl], los[sl], fading[sl], gain[sl],
                                           int(serving[j] - starts[j]) if serving[j] >= 0 else None))
    return _Block(signal, y - signal, nonempty, serving_los, serving_distance, aoa)


def _workers(workers: int | None) -> int:
    if workers is None:
        env = os.environ.get("HARVEST_THREADS")
        workers = int(env) if env else (os.cpu_count() or 1)
    return max(1, workers)


def _run_blocks(trials: int, seed: int, mode: Mode, params: SystemParams, gains: GainDistribution,
                workers: int | None = None, radius: float | None = None) -> _Block:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if radius is None:
        radius = simulation_radius(params, gains)
    sizes = [min(BLOCK_SIZE, trials - b * BLOCK_SIZE) for b in range(math.ceil(trials / BLOCK_SIZE))]

    def job(b):
        return _sample_block(sizes[b], _block_rng(seed, b), mode, params, gains, radius)

    n_workers = min(_workers(workers), len(sizes))
    if n_workers == 1:
        blocks = [job(b) for b in range(len(sizes))]
    else:
        with ThreadPoolExecutor(n_workers) as pool:
            blocks = list(pool.map(job, range(len(sizes))))
    return _Block(*(np.concatenate([getattr(b, f) for b in blocks]) for f in _Block.__dataclass_fields__))


def sample_network(params: SystemParams, mode: Mode, rng: np.random.Generator, gains: GainDistribution,
                   radius: float | None = None) -> NetworkRealization:
    """Draw one deployment (one trial) from ``rng``."""
    keep: list[NetworkRealization] = []
    if radius is None:
        radius = simulation_radius(params, gains)
    _sample_block(1, rng, mode, params, gains, radius, keep)
    return keep[0]


# ---------------------------------------------------------------------------
# energy harvesting


@dataclass(frozen=True)
class PowerSamples:
    """Per-trial received power, split into serving link and the rest."""

    signal: np.ndarray
    interference: np.ndarray
    nonempty: np.ndarray
    serving_los: np.ndarray
    serving_distance: np.ndarray
    aoa: np.ndarray
    seed: int

    @property
    def total(self) -> np.ndarray:
        return self.signal + self.interference

    @property
    def trials(self) -> int:
        return len(self.signal)


def received_power_samples(mode: Mode, trials: int, seed: int, params: SystemParams, gains: GainDistribution,
                           workers: int | None = None, radius: float | None = None) -> PowerSamples:
    """Simulate once; evaluate any number of thresholds on the result."""
    b = _run_blocks(trials, seed, mode, params, gains, workers, radius)
    return PowerSamples(b.signal, b.interference, b.nonempty, b.serving_los, b.serving_distance, b.aoa, seed)


def _harvested(samples: PowerSamples, params: SystemParams) -> np.ndarray:
    return harvested_energy(samples.total, params.rectifier_eff, params.activation_threshold)


def coverage_from_samples(samples: PowerSamples, threshold: float, params: SystemParams) -> CoverageEstimate:
    # empty deployments harvest nothing and count as outage
    hits = int(np.count_nonzero((_harvested(samples, params) > threshold) & samples.nonempty))
    return CoverageEstimate.from_count(hits, samples.trials, samples.seed)


def simulate_energy_coverage(mode: Mode, threshold, trials: int, seed: int, params: SystemParams,
                             gains: GainDistribution, workers: int | None = None):
    """Fraction of trials whose harvested power exceeds ``threshold``.

    ``threshold`` may be a scalar (returns one estimate) or a sequence
    (returns a list, all from the same simulated deployments).
    """
    samples = received_power_samples(mode, trials, seed, params, gains, workers)
    if np.ndim(threshold) == 0:
        return coverage_from_samples(samples, float(threshold), params)
    return [coverage_from_samples(samples, float(t), params) for t in threshold]


def avg_power_from_samples(samples: PowerSamples, threshold: float, params: SystemParams) -> CoverageEstimate:
    gamma = _harvested(samples, params)
    return CoverageEstimate.from_samples(np.where(gamma > threshold, gamma, 0.0), samples.seed)


def simulate_avg_power(mode: Mode, threshold: float, trials: int, seed: int, params: SystemParams,
                       gains: GainDistribution, workers: int | None = None) -> CoverageEstimate:
    """Mean of ``gamma * 1{gamma > threshold}``; with zero threshold, ``xi * E[Y]``."""
    samples = received_power_samples(mode, trials, seed, params, gains, workers)
    return avg_power_from_samples(samples, threshold, params)


# ---------------------------------------------------------------------------
# switch combining


def array_response(num_antennas: int, phase_step: float, aoa: float) -> np.ndarray:
    return np.exp(1j * phase_step * np.arange(num_antennas) * math.cos(aoa))


def combining_gain(weights, spec: ReceiverSpec, aoa: float) -> float:
    """``|w . a|^2 / |w|^2`` for binary (or real) weights."""
    w = np.asarray(weights, dtype=float)
    if w.shape != (spec.num_antennas,):
        raise ValueError("weights length must equal num_antennas")
    norm = float(w @ w)
    if norm == 0:
        raise ValueError("at least one antenna must be active")
    a = array_response(spec.num_antennas, spec.phase_step, aoa)
    return float(abs(w @ a) ** 2 / norm)


def greedy_switch_combiner(spec: ReceiverSpec, aoa: float, normalization: str = "active") -> np.ndarray:
    """Activate antennas one by one while the normalized partial sum grows.

    ``"active"`` compares gains normalized by the number of active antennas,
    so every accepted step raises the combining gain and the result is never
    below the single-antenna gain.  ``"index"`` divides by the loop index
    instead, which can accept a step that lowers the gain.
    """
    if normalization not in ("active", "index"):
        raise ValueError(f"unknown normalization {normalization!r}")
    n = spec.num_antennas
    a = array_response(n, spec.phase_step, aoa)
    w = np.zeros(n, dtype=int)
    w[0] = 1
    partial = a[0]
    active = 1
    for i in range(2, n + 1):
        cand = partial + a[i - 1]
        if normalization == "index":
            accept = abs(cand) ** 2 / i > abs(partial) ** 2 / (i - 1)
        else:
            accept = abs(cand) ** 2 / (active + 1) > abs(partial) ** 2 / active
        if accept:
            w[i - 1] = 1
            partial = cand
            active += 1
    return w


MAX_EXHAUSTIVE = 20


def exhaustive_switch_combiner(spec: ReceiverSpec, aoa: float) -> np.ndarray:
    """Best binary combiner by enumeration; ties go to fewer active antennas,
    then to the lexicographically smallest weight vector."""
    n = spec.num_antennas
    if n > MAX_EXHAUSTIVE:
        raise ValueError(f"exhaustive search limited to {MAX_EXHAUSTIVE} antennas")
    patterns = np.array(list(itertools.product((0, 1), repeat=n))[1:], dtype=float)
    a = array_response(n, spec.phase_step, aoa)
    active = patterns.sum(axis=1)
    gain = np.abs(patterns @ a) ** 2 / active
    best = gain.max()
    # relative slack absorbs rounding in otherwise equal gains
    tied = np.nonzero(gain >= best * (1 - 1e-12))[0]
    order = sorted(tied, key=lambda j: (active[j], tuple(patterns[j])))
    return patterns[order[0]].astype(int)


def receive_gain(spec: ReceiverSpec, aoa: float) -> float:
    """Serving-link combining gain for the receiver architecture."""
    if spec.combiner == "mrc":
        return float(spec.num_antennas)
    if spec.combiner == "single" or spec.num_antennas == 1:
        return 1.0
    if spec.combiner == "switch-greedy":
        w = greedy_switch_combiner(spec, aoa)
    else:
        w = exhaustive_switch_combiner(spec, aoa)
    return combining_gain(w, spec, aoa)


# ---------------------------------------------------------------------------
# SWIPT


def swipt_from_samples(samples: PowerSamples, q: SwiptQuery, spec: ReceiverSpec,
                       params: SystemParams, energy: bool = True) -> CoverageEstimate:
    nu = q.split_ratio
    if spec.combiner in ("mrc", "single") or spec.num_antennas == 1:
        mc = np.full(samples.trials, receive_gain(spec, 0.0))
    else:
        mc = np.array([receive_gain(spec, float(phi)) for phi in samples.aoa])
    s, i = samples.signal, samples.interference
    sinr = nu * s * mc / (nu * (i + params.noise_power) + params.conversion_noise)
    ok = (sinr > q.sinr_threshold) & samples.nonempty
    if energy:
        incident = s + i + params.noise_power
        gamma = np.where(incident > params.activation_threshold, (1 - nu) * params.rectifier_eff * incident, 0.0)
        ok &= gamma > q.energy_threshold
    return CoverageEstimate.from_count(int(np.count_nonzero(ok)), samples.trials, samples.seed)


def simulate_swipt(q: SwiptQuery, spec: ReceiverSpec, trials: int, seed: int, params: SystemParams,
                   gains: GainDistribution, workers: int | None = None, energy: bool = True) -> CoverageEstimate:
    """Joint SINR and energy success; ``energy=False`` gives SINR coverage alone."""
    samples = received_power_samples("connected", trials, seed, params, gains, workers)
    return swipt_from_samples(samples, q, spec, params, energy)


def interference_ccdf_from_samples(samples: PowerSamples, mu: float) -> CoverageEstimate:
    hits = int(np.count_nonzero(samples.interference > mu))
    return CoverageEstimate.from_count(hits, samples.trials, samples.seed)


# ---------------------------------------------------------------------------
# lower-frequency comparison network


def uhf_power_samples(trials: int, seed: int, uhf: UhfParams, radius: float = 5_000.0,
                      with_serving: bool = False):
    """Received power at a user served by its nearest BS with MRT; Rayleigh
    interferers, single path-loss law, no blockage.

    With ``with_serving`` also returns the serving-link fading power per trial
    (NaN for empty trials).
    """
    rg = uhf.min_distance
    sizes = [min(BLOCK_SIZE, trials - b * BLOCK_SIZE) for b in range(math.ceil(trials / BLOCK_SIZE))]
    out, serving_out = [], []
    for b, n in enumerate(sizes):
        rng = _block_rng(seed, b)
        counts = rng.poisson(uhf.bs_density * math.pi * (radius**2 - rg**2), size=n)
        total = int(counts.sum())
        trial = np.repeat(np.arange(n), counts)
        r = np.sqrt(rg**2 + rng.random(total) * (radius**2 - rg**2))
        fading = rng.standard_exponential(total)
        mrt = rng.standard_gamma(uhf.num_antennas, size=total)
        nonempty = counts > 0
        serving_fading = np.full(n, np.nan)
        if total:
            starts = np.cumsum(counts) - counts
            nearest_r = np.minimum.reduceat(r, starts[nonempty])
            seg = np.full(n, np.nan)
            seg[nonempty] = nearest_r
            is_serving = r == seg[trial]
            fading = np.where(is_serving, mrt, fading)
            serving_fading[trial[is_serving]] = fading[is_serving]
        power = uhf.tx_power * fading * uhf.intercept * r ** -uhf.path_loss_exp
        out.append(np.bincount(trial, weights=power, minlength=n))
        serving_out.append(serving_fading)
    power = np.concatenate(out)
    return (power, np.concatenate(serving_out)) if with_serving else power


def simulate_uhf_baseline(threshold, trials: int, seed: int, uhf: UhfParams | None = None):
    """Energy coverage of the comparison network; scalar or sequence threshold."""
    uhf = uhf or UhfParams()
    y = uhf_power_samples(trials, seed, uhf)
    gamma = harvested_energy(y, uhf.rectifier_eff, uhf.activation_threshold)

    def one(t):
        return CoverageEstimate.from_count(int(np.count_nonzero(gamma > t)), trials, seed)

    if np.ndim(threshold) == 0:
        return one(float(threshold))
    return [one(float(t)) for t in threshold]

