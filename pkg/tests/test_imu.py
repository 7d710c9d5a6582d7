import math

import numpy as np
import pytest

from surfbench.imu import ImuTrace, NoiseSpec, corrupt, synthesize_imu
from surfbench.kinematics import GRAVITY

QUIET = NoiseSpec.off()


def test_sensor_at_rest_reads_plus_g_up():
    s = synthesize_imu(0.0, np.eye(3), np.zeros(3), np.zeros(3), QUIET)
    np.testing.assert_allclose(s.acc, [0, 0, GRAVITY], atol=1e-15)
    np.testing.assert_allclose(s.gyr, 0, atol=0)


def test_free_fall_reads_zero():
    s = synthesize_imu(0.0, np.eye(3), np.zeros(3), [0, 0, -GRAVITY], QUIET)
    np.testing.assert_allclose(s.acc, 0, atol=1e-15)


def test_readings_are_in_the_sensor_frame():
    a = math.pi / 2
    R = np.array([[1, 0, 0], [0, math.cos(a), -math.sin(a)], [0, math.sin(a), math.cos(a)]])
    s = synthesize_imu(0.0, R, [1.0, 0, 0], np.zeros(3), QUIET)
    # world up is sensor -y after a quarter turn about x
    np.testing.assert_allclose(s.acc, [0, GRAVITY, 0], atol=1e-12)
    np.testing.assert_allclose(s.gyr, [1.0, 0, 0], atol=1e-15)


def test_zero_sigma_is_deterministic_without_seed():
    a = synthesize_imu(0.1, np.eye(3), [0.1, 0.2, 0.3], [1, 2, 3], QUIET)
    b = synthesize_imu(0.1, np.eye(3), [0.1, 0.2, 0.3], [1, 2, 3], QUIET)
    assert np.array_equal(a.acc, b.acc) and np.array_equal(a.gyr, b.gyr)


def test_noise_statistics():
    rng = np.random.default_rng(0)
    spec = NoiseSpec(sigma_acc=0.05, sigma_gyr=0.005)
    acc, gyr = corrupt(np.zeros((20000, 3)), np.zeros((20000, 3)), spec, rng)
    assert acc.std() == pytest.approx(0.05, rel=0.02)
    assert gyr.std() == pytest.approx(0.005, rel=0.02)


def test_clipping_is_per_axis():
    spec = NoiseSpec(sigma_acc=0, sigma_gyr=0, acc_range=10.0, gyr_range=2.0)
    acc, gyr = corrupt([[50.0, -50.0, 3.0]], [[-9.0, 1.0, 2.5]], spec, np.random.default_rng())
    np.testing.assert_array_equal(acc, [[10.0, -10.0, 3.0]])
    np.testing.assert_array_equal(gyr, [[-2.0, 1.0, 2.0]])


def test_noise_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec(sigma_acc=-1)
    with pytest.raises(ValueError):
        NoiseSpec(gyr_range=0)


def test_trace_container():
    t = np.arange(5) / 200
    data = np.arange(30, dtype=float).reshape(5, 6)
    tr = ImuTrace.from_array(t, data, label=2)
    assert len(tr) == 5 and tr.rate == pytest.approx(200)
    np.testing.assert_array_equal(tr.data, data)
    assert tr[1].t == t[1] and len(tr[1:3]) == 2
    assert tr.equals(ImuTrace(t, data[:, :3], data[:, 3:]))
    assert tr.shifted(1.0).t[0] == 1.0
    with pytest.raises(ValueError):
        ImuTrace(t, data[:4, :3], data[:, 3:])
