import warnings

import numpy as np
import pytest

from surfbench.dynamics import PRESETS
from surfbench.imu import NoiseSpec
from surfbench.kinematics import JumpCycle
from surfbench.simulation import simulate, simulate_episode

from conftest import RIGID


def test_sample_count_and_timeline(tile_log):
    tr = tile_log.trace
    assert len(tr) == 2000
    np.testing.assert_allclose(np.diff(tr.t), 1 / 200, rtol=1e-9)
    assert tr.t[0] == 0.0


def test_deterministic_for_a_seed(leg):
    a = simulate_episode(leg, PRESETS[0], JumpCycle(period=1.0), 3.0, seed=5)
    b = simulate_episode(leg, PRESETS[0], JumpCycle(period=1.0), 3.0, seed=5)
    assert a.equals(b)


def test_seed_changes_only_the_noise(leg):
    a = simulate(leg, PRESETS[1], JumpCycle(period=1.0), 3.0, seed=1)
    b = simulate(leg, PRESETS[1], JumpCycle(period=1.0), 3.0, seed=2)
    assert a.clean.equals(b.clean)
    assert not a.trace.equals(b.trace)
    resid = a.trace.acc - a.clean.acc
    assert resid.std() == pytest.approx(NoiseSpec().sigma_acc, rel=0.1)


def test_noise_off_gives_the_clean_trace(leg):
    log = simulate(leg, PRESETS[1], JumpCycle(period=1.0), 2.0, noise=NoiseSpec.off())
    assert log.trace.equals(log.clean)


def test_one_touchdown_per_hop_on_tile(tile_log):
    # ten hops in ten seconds; the first contact is already closed at t=0
    assert len(tile_log.touchdowns) == 10
    assert len(tile_log.liftoffs) >= 10


def test_rigid_apex_within_band(leg):
    log = simulate(leg, RIGID, JumpCycle(period=1.0), 5.0, noise=NoiseSpec.off())
    assert 0.010 <= log.foot_height.max() <= 0.040


def test_stiffer_surface_gives_larger_impact(leg):
    peaks = []
    base = PRESETS[1]
    for surface in (base, base.replace(k_n=10 * base.k_n)):
        tr = simulate_episode(leg, surface, JumpCycle(period=1.0), 5.0, seed=4)
        peaks.append(tr.acc_norm().max())
    assert peaks[1] > peaks[0]


def test_friction_cone_over_a_ten_second_hop(leg):
    for surface in PRESETS + (RIGID,):
        log = simulate(leg, surface, JumpCycle(period=1.0), 10.0, noise=NoiseSpec.off())
        assert log.max_cone_excess <= 1e-9
        assert log.min_normal >= 0


def test_invalid_arguments(leg):
    with pytest.raises(ValueError):
        simulate(leg, PRESETS[0], JumpCycle(period=1.0), 0.5)
    with pytest.raises(ValueError):
        simulate(leg, PRESETS[0], JumpCycle(period=1.0), 2.0, imu_rate=300.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cycle = JumpCycle(period=2.5)
    assert len(simulate_episode(leg, PRESETS[2], cycle, 3.0)) == 600
