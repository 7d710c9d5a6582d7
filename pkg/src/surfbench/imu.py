"""IMU samples, traces and the virtual sensor model."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kinematics import GRAVITY

CHANNELS = ("ax", "ay", "az", "gx", "gy", "gz")


@dataclass(frozen=True)
class NoiseSpec:
    """White Gaussian sensor noise and per-axis saturation limits."""

    sigma_acc: float = 0.05
    sigma_gyr: float = 0.005
    acc_range: float = 160.0
    gyr_range: float = 35.0

    @classmethod
    def off(cls):
        return cls(sigma_acc=0.0, sigma_gyr=0.0)

    def __post_init__(self):
        if self.sigma_acc < 0 or self.sigma_gyr < 0:
            raise ValueError("noise sigmas must be >= 0")
        if not (self.acc_range > 0 and self.gyr_range > 0):
            raise ValueError("saturation ranges must be > 0")


@dataclass(frozen=True)
class ImuSample:
    t: float
    acc: np.ndarray
    gyr: np.ndarray


@dataclass
class ImuTrace:
    """A time-ordered run of IMU samples stored column-wise."""

    t: np.ndarray
    acc: np.ndarray
    gyr: np.ndarray
    label: int | None = None

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float).reshape(-1)
        self.acc = np.asarray(self.acc, dtype=float).reshape(-1, 3)
        self.gyr = np.asarray(self.gyr, dtype=float).reshape(-1, 3)
        if not len(self.t) == len(self.acc) == len(self.gyr):
            raise ValueError("t, acc and gyr must have the same length")

    @classmethod
    def from_array(cls, t, data, label=None):
        data = np.asarray(data, dtype=float)
        return cls(t, data[:, :3], data[:, 3:6], label)

    def __len__(self):
        return len(self.t)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return ImuTrace(self.t[i], self.acc[i], self.gyr[i], self.label)
        return ImuSample(float(self.t[i]), self.acc[i].copy(), self.gyr[i].copy())

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @property
    def data(self):
        """(N, 6) array ordered as :data:`CHANNELS`."""
        return np.hstack((self.acc, self.gyr))

    @property
    def rate(self):
        return float((len(self.t) - 1) / (self.t[-1] - self.t[0]))

    def gyr_norm(self):
        return np.linalg.norm(self.gyr, axis=1)

    def acc_norm(self):
        return np.linalg.norm(self.acc, axis=1)

    def shifted(self, dt):
        return ImuTrace(self.t + dt, self.acc, self.gyr, self.label)

    def equals(self, other):
        return (np.array_equal(self.t, other.t) and np.array_equal(self.acc, other.acc)
                and np.array_equal(self.gyr, other.gyr))


def corrupt(acc, gyr, noise, rng):
    """Add sensor noise and clip each axis to the sensor range."""
    acc = np.asarray(acc, dtype=float)
    gyr = np.asarray(gyr, dtype=float)
    n_acc = rng.standard_normal(acc.shape)
    n_gyr = rng.standard_normal(gyr.shape)
    acc = np.clip(acc + noise.sigma_acc * n_acc, -noise.acc_range, noise.acc_range)
    gyr = np.clip(gyr + noise.sigma_gyr * n_gyr, -noise.gyr_range, noise.gyr_range)
    return acc, gyr


def synthesize_imu(t, rotation, omega_world, accel_world, noise=NoiseSpec(), rng=None,
                   gravity=(0.0, 0.0, -GRAVITY)):
    """Turn world-frame sensor kinematics into one IMU reading.

    ``rotation`` maps sensor-frame vectors to the world frame. The
    accelerometer reports specific force ``R^T (a - g)``, so a sensor at
    rest reads ``+9.81`` along world up and one in free fall reads zero.
    """
    R = np.asarray(rotation, dtype=float)
    acc = R.T @ (np.asarray(accel_world, dtype=float) - np.asarray(gravity, dtype=float))
    gyr = R.T @ np.asarray(omega_world, dtype=float)
    rng = rng if rng is not None else np.random.default_rng()
    acc, gyr = corrupt(acc, gyr, noise, rng)
    return ImuSample(float(t), acc, gyr)
