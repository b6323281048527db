"""
How much does the motion excite each landmark?
==============================================

Range becomes observable when the robot moves across the line of sight.
The windowed mean of (v^T S x_i)^2 measures that; a landmark straight
ahead of a robot moving straight ahead is never excited.
"""

import numpy as np

from eqfslam import sim, slam2d
from eqfslam.config import load_config, shipped_config

cfg = load_config(shipped_config())
rec = sim.run_experiment(cfg)
v = np.array([cfg.velocity(t) for t in rec.t])

report = slam2d.excitation_metric(v, rec.x, cfg.dt)
print("window:", report.window, "s")
print("smallest windowed mean per landmark:", report.min_average)
print("all above", report.threshold, ":", report.satisfied)

###############################################################################
# v = 2 cos 2t makes the integrand oscillate with period pi/2

print("integrand period:", [sim.dominant_period(rec.excitation[:, i], cfg.dt) for i in range(rec.n)])

###############################################################################
# Motion along the bearing gives nothing

x = np.zeros((rec.t.size, 1, 2)) + [2.0, 0.0]
print(slam2d.excitation_metric(v, x, cfg.dt).min_average)
