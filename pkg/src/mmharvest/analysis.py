"""Closed-form coverage probabilities and mean harvested power.

The distance integrals over the serving link run on a fixed composite
Gauss-Legendre grid in ``log r``; the interference exponents (integrals from
a lower limit to infinity) are accumulated from the right with
:func:`numerics.upper_tail_integrals`, so one threshold costs a handful of
vectorized passes rather than nested adaptive quadrature.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from . import geometry
from .geometry import ExponentialBlockage
from .model import GainDistribution, LinkState, SystemParams
from .numerics import (
    alternating_binomial_sum,
    alzer_constant,
    gen_inc_gamma,
    log_gauss_legendre,
    upper_tail_integrals,
)

# residual quadrature noise tolerated (and clipped) on a probability
_CLAMP_SLACK = 1e-6


class CoverageRangeError(ArithmeticError):
    """A computed probability left [0, 1] by more than the tolerated slack."""


@dataclass(frozen=True)
class EnergyCoverageQuery:
    threshold: float
    approx_terms: int = 5
    mode: Literal["connected", "nonconnected"] = "connected"

    def __post_init__(self):
        if self.threshold < 0:
            raise ValueError("threshold must be nonnegative")
        if self.approx_terms < 1 or int(self.approx_terms) != self.approx_terms:
            raise ValueError("approx_terms must be a positive integer")
        if self.mode not in ("connected", "nonconnected"):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass(frozen=True)
class SwiptQuery:
    sinr_threshold: float
    energy_threshold: float
    split_ratio: float

    def __post_init__(self):
        if not self.sinr_threshold > 0:
            raise ValueError("sinr_threshold must be positive")
        if self.energy_threshold < 0:
            raise ValueError("energy_threshold must be nonnegative")
        if not 0 < self.split_ratio < 1:
            raise ValueError("split_ratio must lie strictly inside (0, 1)")


def effective_threshold(psi: float, params: SystemParams) -> float:
    """Received-power level the harvester must exceed to deliver ``psi``."""
    return max(psi / params.rectifier_eff, params.activation_threshold)


def _clamp(p: float) -> float:
    if p < -_CLAMP_SLACK or p > 1 + _CLAMP_SLACK:
        raise CoverageRangeError(f"probability {p!r} outside [0, 1] beyond quadrature slack")
    return min(max(p, 0.0), 1.0)


def _bracket(z, n):
    """``1 - (1 + z)^-n`` without cancellation for small ``z``."""
    return -np.expm1(-n * np.log1p(z))


# ---------------------------------------------------------------------------
# serving-link grids


def _serving_kernel(state: LinkState, r, params: SystemParams):
    """``rho * serving_distance_pdf``: the joint density of (state, distance)."""
    bl = ExponentialBlockage(params.blockage_beta)
    if state is LinkState.LOS:
        return geometry._los_serving_kernel(r, params, bl)
    return geometry._nlos_serving_kernel(r, params, bl)


def _support_end(state: LinkState, params: SystemParams) -> float | None:
    """Distance past which the serving kernel carries negligible mass."""
    x = params.min_distance * np.power(10.0, np.arange(0, 400) / 50.0)
    x = x[x <= 1e7]
    mass = _serving_kernel(state, x, params) * x
    peak = mass.max()
    if not peak > 0:
        return None
    last = np.nonzero(mass > 1e-16 * peak)[0][-1]
    return float(x[min(last + 1, len(x) - 1)])


@functools.lru_cache(maxsize=64)
def _serving_grid(state: LinkState, params: SystemParams):
    """Nodes ``r`` and weights ``w`` with ``sum(w*f(r)) ~ rho * int_{r_g} f tau~ dr``."""
    end = _support_end(state, params)
    if end is None or end <= params.min_distance:
        empty = np.zeros(0)
        return empty, empty
    r, w = log_gauss_legendre(params.min_distance, end, panel_width=0.2, order=8)
    return r, w * _serving_kernel(state, r, params)


def _interferer_limits(state: LinkState, r, params: SystemParams):
    """Lower limits of the LOS and NLOS interferer fields for a serving link at ``r``."""
    rg = params.min_distance
    if state is LinkState.LOS:
        return np.maximum(r, rg), np.maximum(geometry.los_radius_equivalent(r, params), rg)
    return np.maximum(geometry.nlos_radius_equivalent(r, params), rg), np.maximum(r, rg)


# ---------------------------------------------------------------------------
# interference exponents


def _upsilon(lower, threshold: float, params: SystemParams, gains: GainDistribution, n_terms: int):
    """LOS and NLOS interference exponents for ``k = 0..n_terms`` at every lower limit.

    Returns two arrays of shape ``lower.shape + (n_terms + 1,)``.
    """
    lower = np.asarray(lower, dtype=float)
    a = alzer_constant(n_terms)
    k = np.arange(n_terms + 1)
    d, p = gains.nonzero_gains, gains.nonzero_probs
    # coefficient of t^-alpha inside the bracket, shape (K, 4)
    base = a * params.tx_power * k[:, None] * d[None, :] / threshold
    beta = params.blockage_beta
    pref = 2 * math.pi * params.bs_density

    def los_field(t):
        z = base[None] * params.intercept_los / (params.nakagami_los * t[:, None, None] ** params.alpha_los)
        inner = _bracket(z, params.nakagami_los) @ p
        return inner * (np.exp(-beta * t) * t)[:, None]

    def nlos_field(t):
        z = base[None] * params.intercept_nlos / (params.nakagami_nlos * t[:, None, None] ** params.alpha_nlos)
        inner = _bracket(z, params.nakagami_nlos) @ p
        return inner * (-np.expm1(-beta * t) * t)[:, None]

    return pref * upper_tail_integrals(los_field, lower), pref * upper_tail_integrals(nlos_field, lower)


def interference_exponent_los(k: int, threshold: float, x: float, params: SystemParams, gains: GainDistribution,
                              approx_terms: int = 5) -> float:
    """Exponent of the LOS interferers beyond ``x`` in the Laplace-transform step.

    ``threshold`` is the effective (already rectifier-scaled) level.
    """
    if k < 0 or k > approx_terms:
        raise ValueError("k must lie in 0..approx_terms")
    if x < params.min_distance:
        raise ValueError("x must be at least min_distance")
    if k == 0 or params.bs_density == 0:
        return 0.0
    los, _ = _upsilon(np.array([x]), threshold, params, gains, approx_terms)
    return float(los[0, k])


def interference_exponent_nlos(k: int, threshold: float, x: float, params: SystemParams, gains: GainDistribution,
                               approx_terms: int = 5) -> float:
    if k < 0 or k > approx_terms:
        raise ValueError("k must lie in 0..approx_terms")
    if x < params.min_distance:
        raise ValueError("x must be at least min_distance")
    if k == 0 or params.bs_density == 0:
        return 0.0
    _, nlos = _upsilon(np.array([x]), threshold, params, gains, approx_terms)
    return float(nlos[0, k])


# ---------------------------------------------------------------------------
# energy coverage


def _connected_raw(threshold: float, params: SystemParams, gains: GainDistribution, n_terms: int,
                   with_serving: bool = True) -> float:
    """Alternating-sum coverage ``Pr[S + I > threshold]`` (or ``Pr[I > threshold]``)."""
    if threshold <= 0:
        return 1.0
    a = alzer_constant(n_terms)
    k = np.arange(n_terms + 1)
    serving_gain = gains.aligned_gain
    grids = {s: _serving_grid(s, params) for s in LinkState}
    limits = {s: _interferer_limits(s, grids[s][0], params) for s in LinkState}
    everything = np.concatenate([np.concatenate(limits[s]) for s in LinkState])
    if everything.size == 0:
        return 0.0
    uniq, inverse = np.unique(everything, return_inverse=True)
    los_tab, nlos_tab = _upsilon(uniq, threshold, params, gains, n_terms)

    per_k = np.zeros(n_terms + 1)
    offset = 0
    for state in LinkState:
        r, w = grids[state]
        n = len(r)
        idx_los = inverse[offset:offset + n]
        idx_nlos = inverse[offset + n:offset + 2 * n]
        offset += 2 * n
        if n == 0:
            continue
        exponent = los_tab[idx_los] + nlos_tab[idx_nlos]
        if with_serving:
            if state is LinkState.LOS:
                c, alpha, nak = params.intercept_los, params.alpha_los, params.nakagami_los
            else:
                c, alpha, nak = params.intercept_nlos, params.alpha_nlos, params.nakagami_nlos
            z = a * k[None, :] * params.tx_power * serving_gain * c / (threshold * nak * r[:, None] ** alpha)
            log_zeta = -nak * np.log1p(z)
        else:
            log_zeta = 0.0
        per_k += w @ np.exp(log_zeta - exponent)
    return alternating_binomial_sum(per_k)


def _nonconnected_raw(threshold: float, params: SystemParams, gains: GainDistribution, n_terms: int) -> float:
    if threshold <= 0:
        return 1.0
    los, nlos = _upsilon(np.array([params.min_distance]), threshold, params, gains, n_terms)
    return alternating_binomial_sum(np.exp(-(los[0] + nlos[0])))


def energy_coverage_connected(q: EnergyCoverageQuery, params: SystemParams, gains: GainDistribution) -> float:
    """Probability that a beam-aligned user harvests more than ``q.threshold``."""
    thr = effective_threshold(q.threshold, params)
    return _clamp(_connected_raw(thr, params, gains, q.approx_terms))


def energy_coverage_nonconnected(q: EnergyCoverageQuery, params: SystemParams, gains: GainDistribution) -> float:
    """Coverage for a user with no serving link; every BS gain is random."""
    thr = effective_threshold(q.threshold, params)
    return _clamp(_nonconnected_raw(thr, params, gains, q.approx_terms))


def energy_coverage(q: EnergyCoverageQuery, params: SystemParams, gains: GainDistribution) -> float:
    if q.mode == "connected":
        return energy_coverage_connected(q, params, gains)
    return energy_coverage_nonconnected(q, params, gains)


def energy_coverage_curve(thresholds, params: SystemParams, gains: GainDistribution,
                          mode: str = "connected", approx_terms: int = 5) -> np.ndarray:
    return np.array([
        energy_coverage(EnergyCoverageQuery(float(t), approx_terms, mode), params, gains) for t in thresholds
    ])


def overall_energy_coverage(connected_fraction: float, threshold_con: float, threshold_ncon: float,
                            params: SystemParams, gains: GainDistribution, approx_terms: int = 5,
                            gains_ncon: GainDistribution | None = None) -> float:
    """Mixture over connected and nonconnected users."""
    eps = connected_fraction
    if not 0 <= eps <= 1:
        raise ValueError("connected_fraction must lie in [0, 1]")
    p_con = energy_coverage_connected(EnergyCoverageQuery(threshold_con, approx_terms), params, gains)
    p_ncon = energy_coverage_nonconnected(
        EnergyCoverageQuery(threshold_ncon, approx_terms, "nonconnected"), params, gains_ncon or gains
    )
    return eps * p_con + (1 - eps) * p_ncon


def energy_coverage_connected_fast(q: EnergyCoverageQuery, params: SystemParams, gains: GainDistribution) -> float:
    """LOS-ball approximation: only LOS BSs inside ``R_B`` count, and only the
    serving link fades.  A single finite integral per binomial term."""
    thr = effective_threshold(q.threshold, params)
    if thr <= 0:
        return 1.0
    lam, alpha, rg = params.bs_density, params.alpha_los, params.min_distance
    rho_l = geometry.association_probability(params).rho_los
    rb = geometry.los_ball_radius(rho_l, lam)
    if rb <= rg:
        return 0.0
    n = q.approx_terms
    a = alzer_constant(n)
    mass = lam * math.pi * rb**2
    a_tilde = mass * math.exp(-mass)
    d, p = gains.nonzero_gains, gains.nonzero_probs
    # with a zero-gain atom the BSs carrying it drop out of the ball's exponent
    missing = 1.0 - math.fsum(p)

    t, w = log_gauss_legendre((rg / rb) ** 2, 1.0, panel_width=0.02, order=8)
    r = np.sqrt(t) * rb
    h = -2.0 / alpha
    terms = [math.exp(-lam * math.pi * rg**2) - math.exp(-mass)]
    for k in range(1, n + 1):
        zeta = (1 + a * k * params.tx_power * gains.aligned_gain * params.intercept_los
                / (thr * params.nakagami_los * r**alpha)) ** (-params.nakagami_los)
        log_prod = -missing * lam * math.pi * (rb**2 - r**2)
        for di, pi in zip(d, p):
            if pi == 0 or di == 0:
                continue
            wik = a * k * di * params.tx_power * params.intercept_los / thr
            v = wik * rb ** (-alpha)
            gam = np.array([gen_inc_gamma(h, v, u) for u in wik * r ** (-alpha)])
            log_prod = log_prod + (2 * math.pi * lam / alpha) * pi * wik ** (2 / alpha) * gam
        terms.append(a_tilde * float(w @ (zeta * np.exp(log_prod))))
    return _clamp(alternating_binomial_sum(terms))


# ---------------------------------------------------------------------------
# mean harvested power


def _power_tail(lower, alpha: float, weight: str, params: SystemParams):
    """``int_x^inf t^(1-alpha) w(t) dt`` with ``w = p`` (LOS) or ``1 - p`` (NLOS)."""
    beta = params.blockage_beta
    lower = np.asarray(lower, dtype=float)
    if weight == "los":
        if alpha == 2:
            return _scipy_exp1(beta * lower)
        return beta ** (alpha - 2) * np.vectorize(lambda u: gen_inc_gamma(2 - alpha, u))(beta * lower)
    return upper_tail_integrals(lambda t: t ** (1 - alpha) * -np.expm1(-beta * t), lower)


def _scipy_exp1(x):
    from scipy.special import exp1
    return exp1(x)


def _psi_los(x, params: SystemParams, gains: GainDistribution):
    """Campbell mean of the LOS interferers beyond ``x``."""
    kappa = 2 * math.pi * params.bs_density * params.tx_power
    return kappa * params.intercept_los * gains.mean * _power_tail(x, params.alpha_los, "los", params)


def _psi_nlos(x, params: SystemParams, gains: GainDistribution):
    kappa = 2 * math.pi * params.bs_density * params.tx_power
    return kappa * params.intercept_nlos * gains.mean * _power_tail(x, params.alpha_nlos, "nlos", params)


def _check_mean_converges(params: SystemParams):
    if not params.alpha_nlos > 2:
        raise ValueError("mean power diverges unless alpha_nlos > 2")


def avg_power_connected_limit(params: SystemParams, gains: GainDistribution) -> float:
    """Mean harvested power of a connected user with no activation threshold."""
    _check_mean_converges(params)
    total = 0.0
    for state in LinkState:
        r, w = _serving_grid(state, params)
        if len(r) == 0:
            continue
        lo_los, lo_nlos = _interferer_limits(state, r, params)
        if state is LinkState.LOS:
            serving = params.intercept_los * r ** (-params.alpha_los)
        else:
            serving = params.intercept_nlos * r ** (-params.alpha_nlos)
        mean = (params.tx_power * gains.aligned_gain * serving
                + _psi_los(lo_los, params, gains) + _psi_nlos(lo_nlos, params, gains))
        total += float(w @ mean)
    return params.rectifier_eff * total


def avg_power_nonconnected_limit(params: SystemParams, gains: GainDistribution) -> float:
    """Mean harvested power of a nonconnected user; linear in density and power."""
    _check_mean_converges(params)
    rg = np.array([params.min_distance])
    return params.rectifier_eff * float(_psi_los(rg, params, gains)[0] + _psi_nlos(rg, params, gains)[0])


def avg_power_connected_approx(params: SystemParams, gains: GainDistribution) -> float:
    """Serving-LOS-only mean power under the LOS-ball reduction."""
    _check_mean_converges(params)
    lam, alpha = params.bs_density, params.alpha_los
    rb = geometry.los_ball_radius(geometry.association_probability(params).rho_los, lam)
    if rb <= params.min_distance:
        return 0.0
    kappa = 2 * math.pi * lam * params.tx_power
    scale = kappa * gains.aligned_gain * params.intercept_los / 2 * (lam * math.pi) ** (alpha / 2 - 1)
    h = 1 - alpha / 2
    return params.rectifier_eff * scale * gen_inc_gamma(h, lam * math.pi * params.min_distance**2, lam * math.pi * rb**2)


def _avg_power(ccdf, psi: float, scale: float) -> float:
    """``int_psi^inf P(x) dx + psi P(psi)`` for a CCDF ``P`` whose bulk sits near ``scale``."""
    if psi < 0:
        raise ValueError("threshold must be nonnegative")
    top = max(scale, psi) * 4
    while ccdf(top) * top > 1e-9 * scale:
        top *= 4
    floor = max(psi, 1e-7 * scale)
    p_psi = ccdf(psi) if psi > 0 else 1.0
    head = (floor - psi) * 0.5 * (p_psi + ccdf(floor)) if floor > psi else 0.0
    body = 0.0
    if top > floor:
        x, w = log_gauss_legendre(floor, top, panel_width=0.25, order=8)
        body = math.fsum(wi * ccdf(xi) for xi, wi in zip(x, w))
    return head + body + psi * p_psi


def avg_power_connected(psi: float, params: SystemParams, gains: GainDistribution, approx_terms: int = 5) -> float:
    """Useful mean harvested power ``E[gamma 1{gamma > psi}]`` from the coverage curve."""

    def ccdf(x):
        return energy_coverage_connected(EnergyCoverageQuery(x, approx_terms), params, gains)

    return _avg_power(ccdf, psi, max(avg_power_connected_limit(params, gains), 1e-300))


def avg_power_nonconnected(psi: float, params: SystemParams, gains: GainDistribution, approx_terms: int = 5) -> float:
    def ccdf(x):
        return energy_coverage_nonconnected(EnergyCoverageQuery(x, approx_terms, "nonconnected"), params, gains)

    return _avg_power(ccdf, psi, max(avg_power_nonconnected_limit(params, gains), 1e-300))


# ---------------------------------------------------------------------------
# SINR coverage and SWIPT


def _relative_tails(lower, coef, alpha: float, nak: int, weight: str, params: SystemParams, chunk: int = 64):
    """``2 pi lam sum_i p_i int_lower^inf bracket(coef_i / t^alpha) w(t) t dt`` with a
    coefficient that varies with the lower limit.

    ``lower`` has shape (n,), ``coef`` (n, K, 4) already weighted so that the
    result sums over the last axis with the caller's probabilities folded in
    separately; returns (n, K, 4).
    """
    beta = params.blockage_beta
    u_max = math.log(1e8)
    u, wu = log_gauss_legendre(1.0, math.exp(u_max), panel_width=0.25, order=12)
    # integrate over s = t / lower in [1, 1e8]
    out = np.empty(coef.shape)
    for start in range(0, len(lower), chunk):
        lo = lower[start:start + chunk]
        t = lo[:, None] * u[None, :]
        if weight == "los":
            wt = np.exp(-beta * t)
        else:
            wt = -np.expm1(-beta * t)
        z = coef[start:start + chunk, None] / t[:, :, None, None] ** alpha
        vals = _bracket(z, nak) * (wt * t * lo[:, None])[:, :, None, None]
        out[start:start + chunk] = np.einsum("nsKi,s->nKi", vals, wu)
    return 2 * math.pi * params.bs_density * out


@functools.lru_cache(maxsize=128)
def _sinr_tables(sinr_threshold: float, params: SystemParams, gains: GainDistribution):
    """Per-state serving grids with ``exp(-Delta)`` for each binomial term."""
    out = {}
    d_tilde = gains.nonzero_gains / gains.aligned_gain
    p = gains.nonzero_probs
    cl = alzer_constant(params.nakagami_los)
    cn = alzer_constant(params.nakagami_nlos)
    for state in LinkState:
        r, w = _serving_grid(state, params)
        if len(r) == 0:
            out[state] = (r, w, None)
            continue
        lo_los, lo_nlos = _interferer_limits(state, r, params)
        if state is LinkState.LOS:
            nk, c, alpha_s = params.nakagami_los, cl, params.alpha_los
            ratio_los, ratio_nlos = 1.0, params.intercept_nlos / params.intercept_los
        else:
            nk, c, alpha_s = params.nakagami_nlos, cn, params.alpha_nlos
            ratio_los, ratio_nlos = params.intercept_los / params.intercept_nlos, 1.0
        k = np.arange(1, nk + 1)
        base = c * k[None, :, None] * d_tilde[None, None, :] * sinr_threshold * (r ** alpha_s)[:, None, None]
        coef_los = base * ratio_los / params.nakagami_los
        coef_nlos = base * ratio_nlos / params.nakagami_nlos
        delta = (_relative_tails(lo_los, coef_los, params.alpha_los, params.nakagami_los, "los", params) @ p
                 + _relative_tails(lo_nlos, coef_nlos, params.alpha_nlos, params.nakagami_nlos, "nlos", params) @ p)
        out[state] = (r, w, delta)
    return out


def sinr_coverage(q: SwiptQuery, params: SystemParams, gains: GainDistribution) -> float:
    """Probability that the post-split SINR exceeds ``q.sinr_threshold``."""
    T, nu = q.sinr_threshold, q.split_ratio
    noise = params.noise_power + params.conversion_noise / nu
    tables = _sinr_tables(float(T), params, gains)
    total = 0.0
    for state in LinkState:
        r, w, delta = tables[state]
        if delta is None:
            continue
        if state is LinkState.LOS:
            nk, c, alpha_s = params.nakagami_los, alzer_constant(params.nakagami_los), params.alpha_los
            cint = params.intercept_los
        else:
            nk, c, alpha_s = params.nakagami_nlos, alzer_constant(params.nakagami_nlos), params.alpha_nlos
            cint = params.intercept_nlos
        k = np.arange(1, nk + 1)
        noise_term = (k[None, :] * c * (r ** alpha_s)[:, None] * T * noise
                      / (params.tx_power * cint * gains.aligned_gain))
        per_k = w @ np.exp(-noise_term - delta)
        signs = np.array([(-1) ** (j + 1) * math.comb(nk, j) for j in k], dtype=float)
        total += math.fsum(signs * per_k)
    return _clamp(total)


def interference_ccdf(mu: float, params: SystemParams, gains: GainDistribution, approx_terms: int = 5) -> float:
    """``Pr[I > mu]`` for the interference seen by a connected user."""
    if mu <= 0:
        return 1.0
    return _clamp(_connected_raw(mu, params, gains, approx_terms, with_serving=False))


@dataclass(frozen=True)
class SwiptTerms:
    success: float
    sinr_coverage: float
    interference_ccdf: float
    energy_coverage: float
    mu: float
    phi: float


def swipt_terms(q: SwiptQuery, params: SystemParams, gains: GainDistribution, approx_terms: int = 5) -> SwiptTerms:
    """All pieces of the success-probability approximation."""
    T, nu = q.sinr_threshold, q.split_ratio
    psi_hat = effective_threshold(q.energy_threshold, params)
    mu = psi_hat / ((1 - nu) * (1 + T)) - params.noise_power - params.conversion_noise / (nu * (1 + 1 / T))
    phi = psi_hat / (1 - nu)
    p_cov = sinr_coverage(q, params, gains)
    p_int = interference_ccdf(mu, params, gains, approx_terms)
    # the harvester sees S + I + sigma^2, so the energy event is S + I > phi - sigma^2
    p_con = _clamp(_connected_raw(phi - params.noise_power, params, gains, approx_terms))
    success = _clamp(p_cov * p_int + p_con * (1 - p_int))
    return SwiptTerms(success, p_cov, p_int, p_con, mu, phi)


def swipt_success(q: SwiptQuery, params: SystemParams, gains: GainDistribution, approx_terms: int = 5) -> float:
    """Probability that both the SINR and the harvested energy clear their thresholds."""
    return swipt_terms(q, params, gains, approx_terms).success
