"""Hopping episodes: trajectory -> IK -> PD-controlled dynamics -> virtual IMU."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from . import dynamics as dyn
from .errors import NumericalBlowup
from .imu import ImuTrace, NoiseSpec, corrupt
from .kinematics import GRAVITY, joint_commands

SIM_DT = 2e-4
IMU_RATE = 200.0
SETTLE_TIME = 0.5


@dataclass
class EpisodeLog:
    """Noise-free ground truth recorded alongside the IMU trace."""

    trace: ImuTrace
    clean: ImuTrace
    z_base: np.ndarray        # per IMU sample
    foot_height: np.ndarray   # foot bottom above ground, per IMU sample
    force: np.ndarray         # (N, 3) contact force per IMU sample
    touchdowns: np.ndarray    # contact onset times, step resolution
    liftoffs: np.ndarray
    max_cone_excess: float    # max over steps of |f_t| - mu f_n
    min_normal: float         # min over steps of f_n


@numba.njit(cache=True)
def _run(x, v, q_table, dq_table, params, pts, dt, n_settle, n_steps, decim,
         out_acc, out_gyr, out_z, out_foot, out_force, events, stats):
    """Integrate an episode; returns -1 on success or the failing step index."""
    n_period = q_table.shape[0]
    acc = np.empty(4)
    force = np.empty(3)
    a_s = np.empty(3)
    g_s = np.empty(3)
    r = np.empty(3)
    J = np.empty((3, 3))
    bias = np.empty(3)
    g = params[10]
    mu = params[6]
    for i in range(n_settle):
        dyn._step(x, v, q_table[0], dq_table[0], params, pts, dt, acc, force)
    n_events = 0
    in_contact = force[2] > 0.0
    stats[0] = -np.inf
    stats[1] = np.inf
    for i in range(n_steps):
        k = i % n_period
        q = x[1:4]
        dq = v[1:4]
        dyn._accel(x[0], v[0], q, dq, q_table[k], dq_table[k], params, pts, dt, acc, force)
        excess = math.sqrt(force[0] ** 2 + force[1] ** 2) - mu * force[2]
        if excess > stats[0]:
            stats[0] = excess
        if force[2] < stats[1]:
            stats[1] = force[2]
        touching = force[2] > 0.0
        if touching != in_contact and n_events < events.shape[0]:
            events[n_events, 0] = i * dt
            events[n_events, 1] = 1.0 if touching else 0.0
            n_events += 1
        in_contact = touching
        if i % decim == 0:
            s = i // decim
            if s < out_acc.shape[0]:
                dyn._sensor(x, v, acc, pts, g, a_s, g_s)
                dyn._point_kin(q, dq, pts[dyn.FOOT, 1:4], pts[dyn.FOOT, 4:7], r, J, bias)
                for c in range(3):
                    out_acc[s, c] = a_s[c]
                    out_gyr[s, c] = g_s[c]
                    out_force[s, c] = force[c]
                out_z[s] = x[0]
                out_foot[s] = x[0] + r[2] - params[9]
        for a in range(4):
            v[a] += dt * acc[a]
        for a in range(4):
            x[a] += dt * v[a]
        finite = True
        for a in range(4):
            if not (np.isfinite(x[a]) and np.isfinite(v[a])):
                finite = False
        if not finite:
            return i, n_events
    return -1, n_events



def simulate(model, surface, cycle, duration, imu_rate=IMU_RATE, noise=NoiseSpec(),
             seed=0, dt=SIM_DT, settle=SETTLE_TIME, gravity=GRAVITY):
    """Run one hopping episode and return the full :class:`EpisodeLog`.

    The leg starts at rest in the stance pose, holds it for ``settle``
    seconds (not recorded), then repeats the jump cycle. Dynamics do not
    depend on ``seed``; only the sensor noise does.
    """
    if not duration > cycle.period:
        raise ValueError(f"duration {duration} s must exceed the period {cycle.period} s")
    decim = int(round(1.0 / (imu_rate * dt)))
    if decim < 1 or abs(decim * imu_rate * dt - 1.0) > 1e-9:
        raise ValueError(f"imu_rate {imu_rate} Hz is not a divisor of the sim rate {1 / dt} Hz")
    n_samples = int(np.floor(duration * imu_rate + 1e-9))
    n_steps = n_samples * decim
    q_table, dq_table = joint_commands(model, cycle, dt)
    state = dyn.standing_state(model, surface, q_table[0], gravity)
    x, v = state.coords, state.velocities
    params = dyn.pack_params(model, surface, gravity)
    pts = dyn.point_table(model)

    clean_acc = np.zeros((n_samples, 3))
    clean_gyr = np.zeros((n_samples, 3))
    z = np.zeros(n_samples)
    foot = np.zeros(n_samples)
    force = np.zeros((n_samples, 3))
    events = np.zeros((4 * int(duration / cycle.period + 2) + 16, 2))
    stats = np.zeros(2)
    failed, n_events = _run(x, v, q_table, dq_table, params, pts, dt,
                            int(round(settle / dt)), n_steps, decim,
                            clean_acc, clean_gyr, z, foot, force, events, stats)
    if failed >= 0:
        raise NumericalBlowup(
            f"simulation diverged at t={failed * dt:.4f} s on surface {surface.name!r}")
    t = np.arange(n_samples) / imu_rate
    rng = np.random.default_rng(seed)
    acc, gyr = corrupt(clean_acc, clean_gyr, noise, rng)
    events = events[:n_events]
    return EpisodeLog(
        trace=ImuTrace(t, acc, gyr),
        clean=ImuTrace(t, clean_acc, clean_gyr),
        z_base=z, foot_height=foot, force=force,
        touchdowns=events[events[:, 1] == 1.0, 0],
        liftoffs=events[events[:, 1] == 0.0, 0],
        max_cone_excess=float(stats[0]), min_normal=float(stats[1]),
    )


def simulate_episode(model, surface, cycle, duration, imu_rate=IMU_RATE, noise=NoiseSpec(),
                     seed=0, **kwargs):
    """IMU trace of one hopping episode (``floor(duration * imu_rate)`` samples)."""
    return simulate(model, surface, cycle, duration, imu_rate, noise, seed, **kwargs).trace
