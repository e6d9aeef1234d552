"""Physical parameters and antenna / gain / path-loss primitives.

Everything here works in linear units (watts, linear gains, metres,
radians).  The ``db``/``dbm`` helpers convert at the edges.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

SPEED_OF_LIGHT = 299_792_458.0
THERMAL_NOISE_DBM_PER_HZ = -174.0


def db_to_linear(value_db):
    return np.power(10.0, np.divide(value_db, 10.0))


def linear_to_db(value):
    return 10.0 * np.log10(value)


def dbm_to_watts(value_dbm):
    return db_to_linear(value_dbm) * 1e-3


def watts_to_dbm(value_w):
    return linear_to_db(value_w) + 30.0


def free_space_intercept(carrier_freq: float) -> float:
    """Friis free-space gain at a 1 m reference distance."""
    wavelength = SPEED_OF_LIGHT / carrier_freq
    return (wavelength / (4.0 * math.pi)) ** 2


def thermal_noise_power(bandwidth: float, noise_figure_db: float = 10.0) -> float:
    """kTB noise plus a receiver noise figure, in watts."""
    return dbm_to_watts(THERMAL_NOISE_DBM_PER_HZ + 10.0 * math.log10(bandwidth) + noise_figure_db)


class LinkState(enum.Enum):
    LOS = "los"
    NLOS = "nlos"


@dataclass(frozen=True)
class SystemParams:
    """Network, channel and harvester constants.

    ``intercept_los``/``intercept_nlos`` default to the free-space gain at
    1 m for ``carrier_freq``; ``noise_power`` defaults to thermal noise over
    ``bandwidth`` with ``noise_figure_db``.
    """

    bs_density: float = 100e-6
    tx_power: float = 0.02
    blockage_beta: float = 0.0071
    alpha_los: float = 2.0
    alpha_nlos: float = 4.0
    intercept_los: float | None = None
    intercept_nlos: float | None = None
    nakagami_los: int = 2
    nakagami_nlos: int = 3
    rectifier_eff: float = 1.0
    activation_threshold: float = 0.0
    min_distance: float = 1.0
    noise_power: float | None = None
    conversion_noise: float = 1e-11
    bandwidth: float = 100e6
    carrier_freq: float = 28e9
    noise_figure_db: float = 10.0
    user_density: float = 1e-3
    connected_fraction: float = 1.0

    def __post_init__(self):
        if self.intercept_los is None:
            object.__setattr__(self, "intercept_los", free_space_intercept(self.carrier_freq))
        if self.intercept_nlos is None:
            object.__setattr__(self, "intercept_nlos", free_space_intercept(self.carrier_freq))
        if self.noise_power is None:
            object.__setattr__(self, "noise_power", thermal_noise_power(self.bandwidth, self.noise_figure_db))
        for name in ("nakagami_los", "nakagami_nlos"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value}")
            object.__setattr__(self, name, int(value))
        if not self.bs_density >= 0:
            raise ValueError("bs_density must be nonnegative")
        if not self.blockage_beta > 0:
            raise ValueError("blockage_beta must be positive")
        if not self.min_distance > 0:
            raise ValueError("min_distance must be positive")
        if not self.alpha_los >= 2:
            raise ValueError("alpha_los must be >= 2")
        if not self.alpha_nlos > 2:
            raise ValueError("alpha_nlos must exceed 2 for the NLOS mean power to converge")
        if not 0 < self.rectifier_eff <= 1:
            raise ValueError("rectifier_eff must lie in (0, 1]")
        if self.tx_power < 0 or self.activation_threshold < 0:
            raise ValueError("tx_power and activation_threshold must be nonnegative")
        if self.noise_power < 0 or self.conversion_noise < 0:
            raise ValueError("noise powers must be nonnegative")
        if not 0 <= self.connected_fraction <= 1:
            raise ValueError("connected_fraction must lie in [0, 1]")


@dataclass(frozen=True)
class AntennaPattern:
    """Sectored pattern: gain ``main_gain`` over ``main_beamwidth`` radians and
    ``side_gain`` over ``side_beamwidth``; zero elsewhere."""

    main_gain: float
    side_gain: float
    main_beamwidth: float
    side_beamwidth: float

    def __post_init__(self):
        if not self.main_gain >= self.side_gain >= 0:
            raise ValueError(f"need main_gain >= side_gain >= 0, got {self.main_gain}, {self.side_gain}")
        if not self.main_beamwidth > 0 or self.side_beamwidth < 0:
            raise ValueError("beamwidths must be positive (main) and nonnegative (side)")
        if self.main_beamwidth + self.side_beamwidth > 2 * math.pi * (1 + 1e-12):
            raise ValueError("main_beamwidth + side_beamwidth exceeds the full circle")

    @classmethod
    def omni(cls) -> "AntennaPattern":
        return cls(1.0, 1.0, 2 * math.pi, 0.0)

    @classmethod
    def from_db(cls, main_db: float, side_db: float, main_deg: float, side_deg: float) -> "AntennaPattern":
        """Build from the ``[M dB, m dB, theta deg, theta_bar deg]`` notation."""
        return cls(
            float(db_to_linear(main_db)), float(db_to_linear(side_db)), math.radians(main_deg), math.radians(side_deg)
        )

    @property
    def main_fraction(self) -> float:
        return self.main_beamwidth / (2 * math.pi)

    @property
    def side_fraction(self) -> float:
        return self.side_beamwidth / (2 * math.pi)

    @property
    def radiated_power(self) -> float:
        """Angle-averaged gain; 1 for a power-normalized pattern."""
        return self.main_fraction * self.main_gain + self.side_fraction * self.side_gain


@dataclass(frozen=True)
class GainDistribution:
    """Five-point law of the link directivity gain; the last atom is 0."""

    gains: tuple[float, float, float, float, float]
    probs: tuple[float, float, float, float, float]

    def __post_init__(self):
        if len(self.gains) != 5 or len(self.probs) != 5:
            raise ValueError("GainDistribution needs exactly five atoms")
        if self.gains[4] != 0:
            raise ValueError("the fifth gain atom must be 0")
        if min(self.probs) < -1e-15 or abs(math.fsum(self.probs) - 1.0) > 1e-12:
            raise ValueError(f"probabilities must be nonnegative and sum to 1, got {self.probs}")

    @property
    def nonzero_gains(self) -> np.ndarray:
        return np.asarray(self.gains[:4])

    @property
    def nonzero_probs(self) -> np.ndarray:
        return np.asarray(self.probs[:4])

    @property
    def mean(self) -> float:
        return math.fsum(d * p for d, p in zip(self.gains, self.probs))

    @property
    def aligned_gain(self) -> float:
        """Gain of a perfectly aligned link (main lobe on both sides)."""
        return self.gains[0]


def harvested_energy(received_power, rectifier_eff: float, activation_threshold: float):
    """Harvested power ``xi * Y`` when ``Y`` strictly exceeds the activation threshold."""
    y = np.asarray(received_power, dtype=float)
    if np.any(y < 0) or activation_threshold < 0:
        raise ValueError("received power and activation threshold must be nonnegative")
    if not 0 < rectifier_eff <= 1:
        raise ValueError("rectifier_eff must lie in (0, 1]")
    out = np.where(y > activation_threshold, rectifier_eff * y, 0.0)
    return float(out) if out.ndim == 0 else out


def path_loss(r, state: LinkState, params: SystemParams):
    """Distance-dependent path gain ``C r^-alpha`` for the given link state."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < params.min_distance):
        raise ValueError(f"link distance below min_distance={params.min_distance} m")
    if state is LinkState.LOS:
        out = params.intercept_los * r_arr ** (-params.alpha_los)
    else:
        out = params.intercept_nlos * r_arr ** (-params.alpha_nlos)
    return float(out) if out.ndim == 0 else out


def gain_distribution(tx: AntennaPattern, rx: AntennaPattern) -> GainDistribution:
    """Directivity-gain law under independent uniform beam orientations.

    The zero-gain atom takes the leftover mass ``1 - sum(p_1..p_4)``, which
    equals ``2 - q_t - qbar_t - q_r - qbar_r`` whenever one side is omni.
    """
    qt, qbt = tx.main_fraction, tx.side_fraction
    qr, qbr = rx.main_fraction, rx.side_fraction
    probs = [qt * qr, qt * qbr, qbt * qr, qbt * qbr]
    p5 = 1.0 - math.fsum(probs)
    if p5 < 0:
        # only reachable through rounding when both patterns cover the circle
        p5 = 0.0
        probs = [p / math.fsum(probs) for p in probs]
    gains = (
        tx.main_gain * rx.main_gain,
        tx.main_gain * rx.side_gain,
        tx.side_gain * rx.main_gain,
        tx.side_gain * rx.side_gain,
        0.0,
    )
    return GainDistribution(gains, (*probs, p5))


def ula_beamwidths(num_antennas: int) -> tuple[float, float]:
    """Main and side lobe beamwidths (radians) of an ``N``-element ULA."""
    if num_antennas < 2:
        raise ValueError("a ULA needs at least 2 elements")
    main = math.radians((360.0 / math.pi) * math.asin(0.892 / num_antennas))
    side = math.radians((720.0 / math.pi) * abs(math.asin(2.0 / num_antennas)))
    return main, side


def _ula_gains(scale: float, num_antennas: int, convention: str) -> tuple[float, float]:
    if convention == "literal":
        main = 10.0 * scale * math.log10(num_antennas)
        return main, scale * (main - 12.0)
    # dB reading: main lobe 10*log10(V*N) dB, side lobe 12 dB below it
    main = scale * num_antennas
    return main, main * 10.0 ** (-1.2)


def ula_pattern(num_antennas: int, convention: str = "db") -> AntennaPattern:
    """Sectored approximation of an ``N``-element ULA, power normalized.

    ``convention="db"`` reads the lobe gains as ``M = V*N`` with the side lobe
    12 dB down; ``"literal"`` uses ``M = 10 V log10 N`` and ``m = V (M - 12)``.
    The scale ``V`` is solved so that the angle-averaged gain is 1.  The side
    beamwidth is clipped to ``2*pi - main`` where the formula overshoots (N=2).
    """
    if convention not in ("db", "literal"):
        raise ValueError(f"unknown ULA gain convention {convention!r}")
    main_bw, side_bw = ula_beamwidths(num_antennas)
    side_bw = min(side_bw, 2 * math.pi - main_bw)
    qm, qs = main_bw / (2 * math.pi), side_bw / (2 * math.pi)

    def residual(v):
        m_gain, s_gain = _ula_gains(v, num_antennas, convention)
        return qm * m_gain + qs * s_gain - 1.0

    lo = 1e-9
    if convention == "literal":
        # side gain must be nonnegative: M >= 12
        lo = 12.0 / (10.0 * math.log10(num_antennas))
        if residual(lo) > 0:
            raise ValueError(f"no nonnegative literal ULA pattern for N={num_antennas}")
    hi = 1.0
    while residual(hi) < 0:
        hi *= 2.0
    scale = brentq(residual, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    main_gain, side_gain = _ula_gains(scale, num_antennas, convention)
    return AntennaPattern(main_gain, side_gain, main_bw, side_bw)


@dataclass(frozen=True)
class UhfParams:
    """Lower-frequency comparison network (MRT, Rayleigh, single path-loss law)."""

    bs_density: float = 25e-6
    num_antennas: int = 8
    path_loss_exp: float = 3.6
    carrier_freq: float = 2.1e9
    bandwidth: float = 100e6
    tx_power: float = 0.02
    rectifier_eff: float = 1.0
    activation_threshold: float = 0.0
    min_distance: float = 1.0
    noise_figure_db: float = 10.0
    intercept: float = field(default=None)

    def __post_init__(self):
        if self.intercept is None:
            object.__setattr__(self, "intercept", free_space_intercept(self.carrier_freq))
