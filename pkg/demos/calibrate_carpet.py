"""Recover planted carpet parameters from a noisy reference trace.

The optimiser starts with every parameter three times too large.

Run: python demos/calibrate_carpet.py
"""
from surfbench.calibration import calibrate_surface
from surfbench.dynamics import PRESETS
from surfbench.kinematics import JumpCycle, LegModel
from surfbench.simulation import simulate_episode

leg = LegModel()
cycle = JumpCycle(period=1.0)
planted = PRESETS[0]
reference = simulate_episode(leg, planted, cycle, 5.0, seed=7)

start = planted.replace(mu=3 * planted.mu, k_n=3 * planted.k_n, c_n=3 * planted.c_n)
result = calibrate_surface(reference, leg, cycle, start, budget=300)

print(f"{'param':<6} {'planted':>10} {'start':>10} {'fitted':>10}")
for name in ("mu", "k_n", "c_n"):
    print(f"{name:<6} {getattr(planted, name):10.4g} {getattr(start, name):10.4g} "
          f"{getattr(result.params, name):10.4g}")
print(f"accuracy {result.accuracy:.4f} after {result.evaluations} simulations")
for i, loss in result.loss_history[::50]:
    print(f"  eval {i:3d}  best 1 - NRMSE = {1 - loss:.4f}")
