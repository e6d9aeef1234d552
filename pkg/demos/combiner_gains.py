"""Binary switch combining on a uniform linear array.

Compares the one-pass greedy switch rule with exhaustive search and with
maximal ratio combining, first per arrival angle and then as success
probability of a power-splitting receiver.

    python3 demos/combiner_gains.py
"""
from __future__ import annotations

import math

import numpy as np

from mmharvest import montecarlo as mc
from mmharvest.analysis import SwiptQuery
from mmharvest.model import AntennaPattern, SystemParams, dbm_to_watts, gain_distribution

rng = np.random.default_rng(3)
print("N_r   greedy mean   exhaustive mean   MRC")
for n in (2, 4, 8, 12):
    spec = mc.ReceiverSpec(n)
    angles = rng.uniform(0, 2 * math.pi, 400)
    greedy = [mc.combining_gain(mc.greedy_switch_combiner(spec, a), spec, a) for a in angles]
    best = [mc.combining_gain(mc.exhaustive_switch_combiner(spec, a), spec, a) for a in angles]
    print(f"{n:3d}   {np.mean(greedy):11.2f}   {np.mean(best):15.2f}   {n:3d}")

params = SystemParams(bs_density=200e-6, tx_power=dbm_to_watts(43), conversion_noise=dbm_to_watts(-80))
gains = gain_distribution(AntennaPattern.from_db(15, -15, 10, 350), AntennaPattern.omni())
samples = mc.received_power_samples("connected", 10_000, 1, params, gains)
q = SwiptQuery(10.0, dbm_to_watts(-70), 0.5)
print("\nsuccess probability at SINR 10 dB, split 0.5")
for n in (1, 2, 4, 8):
    cells = [mc.swipt_from_samples(samples, q, mc.ReceiverSpec(n, combiner=c), params).estimate
             for c in ("single", "switch-greedy", "mrc")]
    print(f"N_r={n}: single {cells[0]:.3f}  greedy {cells[1]:.3f}  MRC {cells[2]:.3f}")
