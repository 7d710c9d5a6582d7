"""Simulate a few hops on every surface preset and summarise what the IMU sees.

Run: python demos/hop_and_sense.py
"""
import numpy as np

from surfbench.calibration import detect_jump_events
from surfbench.dynamics import PRESETS
from surfbench.imu import NoiseSpec
from surfbench.kinematics import JumpCycle, LegModel
from surfbench.simulation import simulate

leg = LegModel()
cycle = JumpCycle(period=1.0)

print(f"{'surface':<12} {'apex mm':>8} {'peak |acc|':>11} {'peak |gyr|':>11} {'events':>7}")
for surface in PRESETS:
    log = simulate(leg, surface, cycle, 5.0, noise=NoiseSpec.off())
    events = detect_jump_events(log.trace)
    print(f"{surface.name:<12} {1e3 * log.foot_height.max():8.1f} "
          f"{log.trace.acc_norm().max():11.1f} {log.trace.gyr_norm().max():11.2f} "
          f"{len(events):7d}")

# the first two touchdowns on tile, from ground truth and from the IMU alone
log = simulate(leg, PRESETS[2], cycle, 5.0, seed=1)
print("tile touchdowns (truth):", np.round(log.touchdowns[:3], 3))
print("tile events (|gyr| peaks):", np.round(detect_jump_events(log.trace)[:3], 3))
