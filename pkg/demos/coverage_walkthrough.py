"""Connected-user energy coverage: closed form against simulation.

Evaluates the three transmit patterns of the bundled ``fig2a`` scenario, then
shows where the closed form and the simulation part ways: the closed form is
the exact mean of a smoothed indicator, so its error peaks where the coverage
curve is steepest.

    python3 demos/coverage_walkthrough.py
"""
from __future__ import annotations

import numpy as np

from mmharvest import analysis
from mmharvest import montecarlo as mc
from mmharvest.model import AntennaPattern, SystemParams, dbm_to_watts, gain_distribution
from mmharvest.numerics import alzer_constant

params = SystemParams()
thresholds_dbm = np.linspace(-100, -30, 8)
thresholds = dbm_to_watts(thresholds_dbm)

print("threshold   " + "   ".join(f"{p:>22}" for p in ("10dB/30deg", "15dB/10deg", "20dB/3.6deg")))
curves = []
for main, side, width, rest in [(10, -10, 30, 330), (15, -15, 10, 350), (20, -20, 3.6, 356.4)]:
    gains = gain_distribution(AntennaPattern.from_db(main, side, width, rest), AntennaPattern.omni())
    analytic = analysis.energy_coverage_curve(thresholds, params, gains)
    sim = mc.simulate_energy_coverage("connected", list(thresholds), 10_000, 1, params, gains)
    curves.append((analytic, [e.estimate for e in sim]))
for i, t in enumerate(thresholds_dbm):
    cells = [f"{a[i]:.3f} (sim {s[i]:.3f})" for a, s in curves]
    print(f"{t:7.1f} dBm  " + "   ".join(f"{c:>22}" for c in cells))

# Same deployments, three estimators of coverage at each threshold.
gains = gain_distribution(AntennaPattern.from_db(10, -10, 30, 330), AntennaPattern.omni())
samples = mc.received_power_samples("connected", 10_000, 1, params, gains)
a = alzer_constant(5)
print("\nthreshold   indicator  smoothed  closed-form")
for t_dbm in (-85, -80, -75, -70):
    t = dbm_to_watts(t_dbm)
    y = samples.total[samples.nonempty]
    hits = np.count_nonzero(y > t) / samples.trials
    smooth = np.sum((-np.expm1(-a * y / t)) ** 5) / samples.trials
    closed = analysis.energy_coverage_connected(analysis.EnergyCoverageQuery(t), params, gains)
    print(f"{t_dbm:5d} dBm   {hits:9.4f}  {smooth:8.4f}  {closed:11.4f}")
