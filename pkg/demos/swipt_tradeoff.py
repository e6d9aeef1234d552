"""Power splitting: which share of the signal should go to the decoder?

For each SINR target, scans the split ratio and prints the ratio that
maximizes the joint success probability, with a simulated check at the
optimum.  Parameters follow the bundled ``fig8`` scenario.

    python3 demos/swipt_tradeoff.py
"""
from __future__ import annotations

import numpy as np

from mmharvest import analysis
from mmharvest import montecarlo as mc
from mmharvest.model import AntennaPattern, SystemParams, db_to_linear, dbm_to_watts, gain_distribution

params = SystemParams(bs_density=200e-6, tx_power=dbm_to_watts(43), conversion_noise=dbm_to_watts(-80))
gains = gain_distribution(AntennaPattern.from_db(15, -15, 10, 350), AntennaPattern.omni())
samples = mc.received_power_samples("connected", 10_000, 1, params, gains)
ratios = np.linspace(0.05, 0.95, 19)

for psi_dbm in (-70, -40):
    psi = dbm_to_watts(psi_dbm)
    print(f"\nenergy threshold {psi_dbm} dBm")
    print("  SINR target   best ratio   success   simulated")
    for t_db in (-10, 0, 10, 20, 30):
        queries = [analysis.SwiptQuery(float(db_to_linear(t_db)), psi, float(nu)) for nu in ratios]
        values = [analysis.swipt_success(q, params, gains) for q in queries]
        best = int(np.argmax(values))
        sim = mc.swipt_from_samples(samples, queries[best], mc.ReceiverSpec(1), params)
        print(f"  {t_db:6d} dB     {ratios[best]:8.2f}    {values[best]:7.3f}   {sim.estimate:7.3f}")
