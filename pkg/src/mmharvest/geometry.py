"""Blockage, nearest-BS distance laws and LOS/NLOS association."""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .model import LinkState, SystemParams
from .numerics import integrate


@dataclass(frozen=True)
class ExponentialBlockage:
    """Link of length r is LOS with probability ``exp(-beta r)``."""

    beta: float

    def prob(self, r):
        return np.exp(-self.beta * np.asarray(r, dtype=float))

    def los_moment(self, x):
        """``int_0^x v p(v) dv``."""
        y = self.beta * np.asarray(x, dtype=float)
        small = y < 1e-3
        ys = np.where(small, y, 0.0)
        series = ys**2 / 2 - ys**3 / 3 + ys**4 / 8
        closed = -np.expm1(-y) - y * np.exp(-y)
        return np.where(small, series, closed) / self.beta**2

    def nlos_moment(self, x):
        """``int_0^x v (1 - p(v)) dv``."""
        x = np.asarray(x, dtype=float)
        y = self.beta * x
        small = y < 1e-2
        ys = np.where(small, y, 0.0)
        series = (ys**3 / 3 - ys**4 / 8 + ys**5 / 30 - ys**6 / 144) / self.beta**2
        return np.where(small, series, x**2 / 2 - self.los_moment(x))

    @property
    def los_moment_total(self) -> float:
        return 1.0 / self.beta**2

    @property
    def support(self) -> float:
        return math.inf


@dataclass(frozen=True)
class LosBallBlockage:
    """Every link shorter than ``radius`` is LOS, every longer one NLOS."""

    radius: float

    def prob(self, r):
        return (np.asarray(r, dtype=float) < self.radius).astype(float)

    def los_moment(self, x):
        return np.minimum(np.asarray(x, dtype=float), self.radius) ** 2 / 2

    def nlos_moment(self, x):
        x = np.asarray(x, dtype=float)
        return x**2 / 2 - self.los_moment(x)

    @property
    def los_moment_total(self) -> float:
        return self.radius**2 / 2

    @property
    def support(self) -> float:
        return self.radius


Blockage = ExponentialBlockage | LosBallBlockage


@dataclass(frozen=True)
class AssociationLaw:
    rho_los: float
    rho_nlos: float
    b_los: float
    b_nlos: float


def _blockage(params: SystemParams, blockage: Blockage | None) -> Blockage:
    return blockage if blockage is not None else ExponentialBlockage(params.blockage_beta)


def _scalar_or_array(out):
    out = np.asarray(out)
    return float(out) if out.ndim == 0 else out


def los_probability(r, beta: float):
    return _scalar_or_array(ExponentialBlockage(beta).prob(r))


def los_radius_equivalent(x, params: SystemParams):
    """Distance beyond which a LOS BS is weaker than a NLOS BS at distance ``x``."""
    ratio = params.intercept_nlos / params.intercept_los
    return ratio ** (1 / params.alpha_nlos) * np.asarray(x, dtype=float) ** (params.alpha_los / params.alpha_nlos)


def nlos_radius_equivalent(x, params: SystemParams):
    """Distance beyond which a NLOS BS is weaker than a LOS BS at distance ``x``."""
    ratio = params.intercept_los / params.intercept_nlos
    return ratio ** (1 / params.alpha_los) * np.asarray(x, dtype=float) ** (params.alpha_nlos / params.alpha_los)


def nearest_pdf(state: LinkState, x, params: SystemParams, blockage: Blockage | None = None):
    """Density of the distance to the nearest LOS (or NLOS) BS, and the
    probability ``B`` that at least one such BS exists.  Returns ``(density, B)``."""
    bl = _blockage(params, blockage)
    lam = params.bs_density
    x = np.asarray(x, dtype=float)
    if state is LinkState.LOS:
        b = -math.expm1(-2 * math.pi * lam * bl.los_moment_total)
        weight, moment = bl.prob(x), bl.los_moment(x)
    else:
        # NLOS moment is infinite, so a NLOS BS exists almost surely when lam > 0
        b = 1.0 if lam > 0 else 0.0
        weight, moment = 1.0 - bl.prob(x), bl.nlos_moment(x)
    if b == 0:
        return _scalar_or_array(np.zeros_like(x)), 0.0
    density = 2 * math.pi * lam / b * x * weight * np.exp(-2 * math.pi * lam * moment)
    return _scalar_or_array(density), b


def _los_serving_kernel(x, params: SystemParams, bl: Blockage):
    """Unnormalized density of a LOS serving link at distance ``x``."""
    lam = params.bs_density
    x = np.asarray(x, dtype=float)
    exponent = bl.los_moment(x) + bl.nlos_moment(los_radius_equivalent(x, params))
    return 2 * math.pi * lam * x * bl.prob(x) * np.exp(-2 * math.pi * lam * exponent)


def _nlos_serving_kernel(x, params: SystemParams, bl: Blockage):
    lam = params.bs_density
    x = np.asarray(x, dtype=float)
    exponent = bl.nlos_moment(x) + bl.los_moment(nlos_radius_equivalent(x, params))
    return 2 * math.pi * lam * x * (1.0 - bl.prob(x)) * np.exp(-2 * math.pi * lam * exponent)


@functools.lru_cache(maxsize=256)
def association_probability(params: SystemParams, blockage: Blockage | None = None) -> AssociationLaw:
    """Probability that the strongest-on-average BS is LOS (``rho_los``) or NLOS."""
    bl = _blockage(params, blockage)
    lam = params.bs_density
    if lam <= 0:
        raise ValueError("association is undefined for an empty network")
    _, b_los = nearest_pdf(LinkState.LOS, 1.0, params, bl)
    _, b_nlos = nearest_pdf(LinkState.NLOS, 1.0, params, bl)

    def kernel(x):
        return float(_los_serving_kernel(x, params, bl))

    scale = 1.0 / math.sqrt(math.pi * lam)
    if math.isinf(bl.support):
        rho = integrate(kernel, 0.0, scale) + integrate(kernel, scale, math.inf, scale=scale)
    else:
        rho = integrate(kernel, 0.0, min(scale, bl.support)) + integrate(kernel, min(scale, bl.support), bl.support)
    rho = min(max(rho, 0.0), 1.0)
    return AssociationLaw(rho, 1.0 - rho, b_los, b_nlos)


def serving_distance_pdf(state: LinkState, x, params: SystemParams, blockage: Blockage | None = None):
    """Density of the serving-link length given the serving BS is LOS / NLOS."""
    bl = _blockage(params, blockage)
    law = association_probability(params, blockage)
    if state is LinkState.LOS:
        rho, kern = law.rho_los, _los_serving_kernel(x, params, bl)
    else:
        rho, kern = law.rho_nlos, _nlos_serving_kernel(x, params, bl)
    if rho <= 0:
        return _scalar_or_array(np.zeros_like(np.asarray(x, dtype=float)))
    return _scalar_or_array(kern / rho)


def los_ball_radius(rho_los: float, density: float) -> float:
    """Radius of the LOS ball that preserves the LOS association probability."""
    if not 0 < rho_los < 1:
        raise ValueError("rho_los must lie strictly inside (0, 1)")
    if density <= 0:
        raise ValueError("density must be positive")
    return math.sqrt(-math.log1p(-rho_los) / (math.pi * density))
