"""Leg-on-guide dynamics with compliant ground contact and PD joint control.

Generalised coordinates are ``(z_base, q1, q2, q3)``: a frictionless vertical
prismatic guide carrying the hip, plus the three leg joints. Links are point
masses at their midpoints (base mass at the hip). The ground is the plane
``z = 0``; the foot is a sphere of ``foot_radius`` around the foot centre.

The numerical kernels are compiled with numba and shared by the single-step
API (:func:`step`) and the episode loop in :mod:`surfbench.simulation`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import NumericalBlowup
from .kinematics import GRAVITY

V_EPS = 1e-3
DT_MAX = 2e-3


@dataclass(frozen=True)
class SurfaceParams:
    """Compliant ground: Coulomb friction, normal spring and normal damper."""

    mu: float
    k_n: float
    c_n: float
    name: str = ""

    def __post_init__(self):
        for attr in ("mu", "k_n", "c_n"):
            object.__setattr__(self, attr, float(getattr(self, attr)))
        if not (self.mu >= 0 and math.isfinite(self.mu)):
            raise ValueError(f"surface {self.name!r}: mu must be >= 0, got {self.mu}")
        if not (self.k_n > 0 and math.isfinite(self.k_n)):
            raise ValueError(f"surface {self.name!r}: k_n must be > 0, got {self.k_n}")
        if not (self.c_n >= 0 and math.isfinite(self.c_n)):
            raise ValueError(f"surface {self.name!r}: c_n must be >= 0, got {self.c_n}")

    def replace(self, **changes):
        return type(self)(**{**self.__dict__, **changes})


# Workbench stand-ins for the four recorded classes (not measured values).
PRESETS = (
    SurfaceParams(mu=0.8, k_n=3.0e3, c_n=200.0, name="Carpet"),
    SurfaceParams(mu=1.1, k_n=1.5e4, c_n=30.0, name="Rubber"),
    SurfaceParams(mu=0.25, k_n=8.0e4, c_n=40.0, name="Tile"),
    SurfaceParams(mu=0.9, k_n=1.5e5, c_n=100.0, name="Rough tile"),
)


def preset(name):
    for surface in PRESETS:
        if surface.name.lower() == name.lower():
            return surface
    raise KeyError(f"no surface preset named {name!r}")


@dataclass
class LegState:
    z_base: float
    dz_base: float
    q: np.ndarray
    dq: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.z_base = float(self.z_base)
        self.dz_base = float(self.dz_base)
        self.q = np.asarray(self.q, dtype=float).reshape(3)
        self.dq = np.asarray(self.dq, dtype=float).reshape(3)
        self.t = float(self.t)

    @property
    def coords(self):
        return np.concatenate(([self.z_base], self.q))

    @property
    def velocities(self):
        return np.concatenate(([self.dz_base], self.dq))

    @classmethod
    def from_arrays(cls, coords, velocities, t=0.0):
        return cls(coords[0], velocities[0], coords[1:4], velocities[1:4], t)

    def is_finite(self):
        return bool(np.isfinite(self.coords).all() and np.isfinite(self.velocities).all()
                    and math.isfinite(self.t))


@dataclass
class JointCommand:
    q_des: np.ndarray
    dq_des: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.q_des = np.asarray(self.q_des, dtype=float).reshape(3)
        self.dq_des = np.asarray(self.dq_des, dtype=float).reshape(3)
        if not (np.isfinite(self.q_des).all() and np.isfinite(self.dq_des).all()):
            raise ValueError("joint command must be finite")


# --- parameter packing ---------------------------------------------------------
#
# Each point of interest is described by two sagittal-plane vectors u, v:
#     r(q) = Rx(q1) [P(q2) u + P(q2 + q3) v]
# where P is the pitch rotation (positive swings -z towards +x).

N_MASS = 4
FOOT = 4
IMU = 5


def point_table(model):
    """(6, 7) array of ``[mass, u(3), v(3)]`` rows: base, 3 links, foot, IMU."""
    l1, l2, l3 = model.l1, model.l2, model.l3
    ox, oy, oz = model.imu_offset
    return np.array([
        [model.m_base, 0, 0, 0, 0, 0, 0],
        [model.m1, 0, 0.5 * l1, 0, 0, 0, 0],
        [model.m2, 0, l1, -0.5 * l2, 0, 0, 0],
        [model.m3, 0, l1, -l2, 0, 0, -0.5 * l3],
        [0.0, 0, l1, -l2, 0, 0, -l3],
        [0.0, 0, l1, -l2, ox, oy, oz - l3],
    ], dtype=float)


def pack_params(model, surface, gravity=GRAVITY, v_eps=V_EPS):
    """Flat parameter vector consumed by the compiled kernels."""
    return np.concatenate((
        np.asarray(model.kp), np.asarray(model.kd),
        [surface.mu, surface.k_n, surface.c_n, model.foot_radius, gravity, v_eps],
    ))


# --- compiled kernels ------------------------------------------------------------

@numba.njit(cache=True)
def _point_kin(q, dq, u, v, r, J, bias):
    """Position, Jacobian w.r.t. (q1, q2, q3) and velocity-product acceleration."""
    c1, s1 = math.cos(q[0]), math.sin(q[0])
    c2, s2 = math.cos(q[1]), math.sin(q[1])
    phi = q[1] + q[2]
    cp, sp = math.cos(phi), math.sin(phi)
    # sagittal point and its derivatives
    sx = u[0] * c2 - u[2] * s2 + v[0] * cp - v[2] * sp
    sy = u[1] + v[1]
    sz = u[0] * s2 + u[2] * c2 + v[0] * sp + v[2] * cp
    d3x = -v[0] * sp - v[2] * cp
    d3z = v[0] * cp - v[2] * sp
    d2x = -u[0] * s2 - u[2] * c2 + d3x
    d2z = u[0] * c2 - u[2] * s2 + d3z
    # position
    r[0] = sx
    r[1] = c1 * sy - s1 * sz
    r[2] = s1 * sy + c1 * sz
    # Jacobian columns
    J[0, 0] = 0.0
    J[1, 0] = -s1 * sy - c1 * sz
    J[2, 0] = c1 * sy - s1 * sz
    J[0, 1] = d2x
    J[1, 1] = -s1 * d2z
    J[2, 1] = c1 * d2z
    J[0, 2] = d3x
    J[1, 2] = -s1 * d3z
    J[2, 2] = c1 * d3z
    # sagittal velocity and quadratic acceleration terms
    w2 = dq[1]
    wp = dq[1] + dq[2]
    vx = d2x * w2 + d3x * dq[2]
    vz = d2z * w2 + d3z * dq[2]
    ax = -(u[0] * c2 - u[2] * s2) * w2 * w2 - (v[0] * cp - v[2] * sp) * wp * wp
    az = -(u[0] * s2 + u[2] * c2) * w2 * w2 - (v[0] * sp + v[2] * cp) * wp * wp
    w1 = dq[0]
    # Rx'' s w1^2 + 2 Rx' sdot w1 + Rx sddot
    bias[0] = ax
    bias[1] = (-c1 * sy + s1 * sz) * w1 * w1 + 2.0 * (-c1 * vz) * w1 + (-s1 * az)
    bias[2] = (-s1 * sy - c1 * sz) * w1 * w1 + 2.0 * (-s1 * vz) * w1 + c1 * az


@numba.njit(cache=True)
def _contact(z_base, dz_base, q, dq, params, pts, force):
    """Normal ground reaction at the foot (world frame); returns penetration.

    Only ``force[2]`` is set here. Friction depends on the post-step slip
    velocity and is resolved in :func:`_accel`.
    """
    k_n = params[7]
    c_n = params[8]
    radius = params[9]
    r = np.empty(3)
    J = np.empty((3, 3))
    bias = np.empty(3)
    _point_kin(q, dq, pts[FOOT, 1:4], pts[FOOT, 4:7], r, J, bias)
    depth = radius - (z_base + r[2])
    force[0] = 0.0
    force[1] = 0.0
    force[2] = 0.0
    if depth <= 0.0:
        return depth
    vel_z = dz_base + J[2, 0] * dq[0] + J[2, 1] * dq[1] + J[2, 2] * dq[2]
    fn = k_n * depth - c_n * vel_z
    if fn > 0.0:
        force[2] = fn
    return depth


@numba.njit(cache=True)
def _friction_residual(vx, vy, sx, sy, W, dt, cap, v_eps, out):
    r = math.sqrt(vx * vx + vy * vy)
    if r > 1e-300:
        mag = cap * math.tanh(r / v_eps) / r
    else:
        mag = cap / v_eps
    px = mag * vx
    py = mag * vy
    out[0] = vx - sx + dt * (W[0, 0] * px + W[0, 1] * py)
    out[1] = vy - sy + dt * (W[1, 0] * px + W[1, 1] * py)
    return px, py


@numba.njit(cache=True)
def _friction(sx, sy, W, dt, cap, v_eps):
    """Regularised Coulomb force evaluated at the end-of-step slip velocity.

    Solves ``v = v* - dt W phi(v)`` for the tangential foot velocity ``v``
    (``v*`` is the frictionless prediction, ``W`` the inverse effective
    mass) with safeguarded Newton steps; returns ``-phi(v)``. Explicit
    evaluation would be unstable: ``cap / v_eps`` acts as a viscous
    coefficient far stiffer than the time step can resolve.
    """
    g = np.empty(2)
    trial = np.empty(2)
    vx, vy = sx, sy
    px, py = _friction_residual(vx, vy, sx, sy, W, dt, cap, v_eps, g)
    tol = 1e-14 * (1.0 + math.sqrt(sx * sx + sy * sy))
    for _ in range(60):
        res = math.sqrt(g[0] * g[0] + g[1] * g[1])
        if res <= tol:
            break
        r = math.sqrt(vx * vx + vy * vy)
        th = math.tanh(r / v_eps)
        if r > 1e-12:
            k1 = cap * th / r
            k2 = cap * (1.0 - th * th) / v_eps
            nx, ny = vx / r, vy / r
        else:
            k1 = cap / v_eps
            k2 = k1
            nx, ny = 1.0, 0.0
        d00 = k1 + (k2 - k1) * nx * nx
        d01 = (k2 - k1) * nx * ny
        d11 = k1 + (k2 - k1) * ny * ny
        a00 = 1.0 + dt * (W[0, 0] * d00 + W[0, 1] * d01)
        a01 = dt * (W[0, 0] * d01 + W[0, 1] * d11)
        a10 = dt * (W[1, 0] * d00 + W[1, 1] * d01)
        a11 = 1.0 + dt * (W[1, 0] * d01 + W[1, 1] * d11)
        det = a00 * a11 - a01 * a10
        dx = -(a11 * g[0] - a01 * g[1]) / det
        dy = -(-a10 * g[0] + a00 * g[1]) / det
        step = 1.0
        accepted = False
        while step > 1e-6:
            tx = vx + step * dx
            ty = vy + step * dy
            qx, qy = _friction_residual(tx, ty, sx, sy, W, dt, cap, v_eps, trial)
            if trial[0] * trial[0] + trial[1] * trial[1] < res * res:
                vx, vy, px, py = tx, ty, qx, qy
                g[0], g[1] = trial[0], trial[1]
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
    return -px, -py


@numba.njit(cache=True)
def _accel(z_base, dz_base, q, dq, q_des, dq_des, params, pts, dt, acc, force):
    """Generalised accelerations (4) and foot contact force for one state."""
    g = params[10]
    mu = params[6]
    M = np.zeros((4, 4))
    rhs = np.zeros(4)
    r = np.empty(3)
    J = np.empty((3, 3))
    bias = np.empty(3)
    Ja = np.zeros((3, 4))
    for i in range(N_MASS):
        m = pts[i, 0]
        _point_kin(q, dq, pts[i, 1:4], pts[i, 4:7], r, J, bias)
        # augmented Jacobian: column 0 is the guide (world z)
        Ja[:, :] = 0.0
        Ja[2, 0] = 1.0
        Ja[:, 1:4] = J
        for a in range(4):
            for b in range(4):
                M[a, b] += m * (Ja[0, a] * Ja[0, b] + Ja[1, a] * Ja[1, b] + Ja[2, a] * Ja[2, b])
            rhs[a] -= m * (Ja[0, a] * bias[0] + Ja[1, a] * bias[1] + Ja[2, a] * (bias[2] + g))
    for j in range(3):
        rhs[j + 1] += params[j] * (q_des[j] - q[j]) + params[3 + j] * (dq_des[j] - dq[j])
    _contact(z_base, dz_base, q, dq, params, pts, force)
    fn = force[2]
    if fn > 0.0:
        _point_kin(q, dq, pts[FOOT, 1:4], pts[FOOT, 4:7], r, J, bias)
        Ja[:, :] = 0.0
        Ja[2, 0] = 1.0
        Ja[:, 1:4] = J
        for a in range(4):
            rhs[a] += Ja[2, a] * fn
    Minv = np.linalg.inv(M)
    for a in range(4):
        s = 0.0
        for b in range(4):
            s += Minv[a, b] * rhs[b]
        acc[a] = s
    if fn > 0.0 and mu > 0.0:
        # tangential rows of the foot Jacobian, frictionless predicted slip
        sx = 0.0
        sy = 0.0
        for a in range(4):
            va = (dz_base if a == 0 else dq[a - 1]) + dt * acc[a]
            sx += Ja[0, a] * va
            sy += Ja[1, a] * va
        W = np.zeros((2, 2))
        for i in range(2):
            for k in range(2):
                s = 0.0
                for a in range(4):
                    for b in range(4):
                        s += Ja[i, a] * Minv[a, b] * Ja[k, b]
                W[i, k] = s
        fx, fy = _friction(sx, sy, W, dt, mu * fn, params[11])
        force[0] = fx
        force[1] = fy
        for a in range(4):
            s = 0.0
            for b in range(4):
                s += Minv[a, b] * (Ja[0, b] * fx + Ja[1, b] * fy)
            acc[a] += s


@numba.njit(cache=True)
def _step(x, v, q_des, dq_des, params, pts, dt, acc, force):
    """Semi-implicit Euler update of (x, v) in place."""
    q = x[1:4]
    dq = v[1:4]
    _accel(x[0], v[0], q, dq, q_des, dq_des, params, pts, dt, acc, force)
    for a in range(4):
        v[a] += dt * acc[a]
    for a in range(4):
        x[a] += dt * v[a]


@numba.njit(cache=True)
def _hold(x, v, q_des, dq_des, params, pts, dt, n_steps, force, stats):
    """Integrate ``n_steps`` under a constant command; stats = (max cone excess, min f_n)."""
    acc = np.empty(4)
    mu = params[6]
    for i in range(n_steps):
        _step(x, v, q_des, dq_des, params, pts, dt, acc, force)
        excess = math.sqrt(force[0] ** 2 + force[1] ** 2) - mu * force[2]
        if excess > stats[0]:
            stats[0] = excess
        if force[2] < stats[1]:
            stats[1] = force[2]
        for a in range(4):
            if not (np.isfinite(x[a]) and np.isfinite(v[a])):
                return i
    return -1


@numba.njit(cache=True)
def _sensor(x, v, acc_gen, pts, g, out_acc, out_gyr):
    """Specific force and angular rate in the IMU (shank) frame."""
    q = x[1:4]
    dq = v[1:4]
    r = np.empty(3)
    J = np.empty((3, 3))
    bias = np.empty(3)
    _point_kin(q, dq, pts[IMU, 1:4], pts[IMU, 4:7], r, J, bias)
    a_w = np.empty(3)
    for k in range(3):
        a_w[k] = bias[k] + J[k, 0] * acc_gen[1] + J[k, 1] * acc_gen[2] + J[k, 2] * acc_gen[3]
    a_w[2] += acc_gen[0] + g  # minus gravity (0, 0, -g)
    c1, s1 = math.cos(q[0]), math.sin(q[0])
    phi = q[1] + q[2]
    cp, sp = math.cos(phi), math.sin(phi)
    # R = Rx(q1) P(phi); out = R^T a_w
    bx = a_w[0]
    by = c1 * a_w[1] + s1 * a_w[2]
    bz = -s1 * a_w[1] + c1 * a_w[2]
    out_acc[0] = cp * bx + sp * bz
    out_acc[1] = by
    out_acc[2] = -sp * bx + cp * bz
    # omega_world = dq1 e_x + Rx (0, -dphi, 0); in sensor frame:
    # P^T (dq1, 0, 0) + (0, -dphi, 0)
    w1 = dq[0]
    out_gyr[0] = cp * w1
    out_gyr[1] = -(dq[1] + dq[2])
    out_gyr[2] = -sp * w1


# --- public API ------------------------------------------------------------------

def penetration(model, state):
    """Foot penetration depth into the ground (negative when airborne)."""
    pts = point_table(model)
    r = np.empty(3)
    J = np.empty((3, 3))
    bias = np.empty(3)
    _point_kin(state.q, state.dq, pts[FOOT, 1:4], pts[FOOT, 4:7], r, J, bias)
    return model.foot_radius - (state.z_base + r[2])


def accelerations(model, state, cmd, surface, dt=2e-4, gravity=GRAVITY):
    """Generalised accelerations and contact force without advancing time.

    ``dt`` matters only for the friction force, which is resolved at the
    end-of-step slip velocity.
    """
    acc = np.empty(4)
    force = np.empty(3)
    _accel(state.z_base, state.dz_base, state.q, state.dq, cmd.q_des, cmd.dq_des,
           pack_params(model, surface, gravity), point_table(model), dt, acc, force)
    return acc, force


def step(model, state, cmd, surface, dt, gravity=GRAVITY):
    """Advance ``state`` by ``dt``; returns ``(new_state, contact_force)``.

    Raises :class:`NumericalBlowup` if the new state is not finite.
    """
    if not 0 < dt <= DT_MAX:
        raise ValueError(f"dt must be in (0, {DT_MAX}], got {dt}")
    x = state.coords
    v = state.velocities
    acc = np.empty(4)
    force = np.empty(3)
    _step(x, v, cmd.q_des, cmd.dq_des, pack_params(model, surface, gravity),
          point_table(model), dt, acc, force)
    new = LegState.from_arrays(x, v, state.t + dt)
    if not new.is_finite():
        raise NumericalBlowup(f"non-finite state at t={new.t:.6f} s; reduce dt")
    return new, force


def integrate(model, state, cmd, surface, duration, dt=2e-4, gravity=GRAVITY):
    """Hold ``cmd`` for ``duration`` seconds in compiled code.

    Same update as repeated :func:`step` calls, but fast. Returns the final
    state, the last contact force and ``(max |f_t| - mu f_n, min f_n)`` over
    all steps.
    """
    if not 0 < dt <= DT_MAX:
        raise ValueError(f"dt must be in (0, {DT_MAX}], got {dt}")
    n = int(round(duration / dt))
    x = state.coords
    v = state.velocities
    force = np.zeros(3)
    stats = np.array([-np.inf, np.inf])
    failed = _hold(x, v, np.asarray(cmd.q_des, dtype=float), np.asarray(cmd.dq_des, dtype=float),
                   pack_params(model, surface, gravity), point_table(model), dt, n, force, stats)
    if failed >= 0:
        raise NumericalBlowup(f"non-finite state at t={state.t + (failed + 1) * dt:.6f} s")
    return LegState.from_arrays(x, v, state.t + n * dt), force, (float(stats[0]), float(stats[1]))


def mass_matrix(model, q):
    """4x4 generalised inertia matrix (guide + joints)."""
    pts = point_table(model)
    q = np.asarray(q, dtype=float)
    M = np.zeros((4, 4))
    r = np.empty(3)
    J = np.empty((3, 3))
    bias = np.empty(3)
    for i in range(N_MASS):
        _point_kin(q, np.zeros(3), pts[i, 1:4], pts[i, 4:7], r, J, bias)
        Ja = np.zeros((3, 4))
        Ja[2, 0] = 1.0
        Ja[:, 1:] = J
        M += pts[i, 0] * Ja.T @ Ja
    return M


def mechanical_energy(model, state, cmd, surface, gravity=GRAVITY):
    """Kinetic + gravitational + joint-spring + contact-spring energy.

    Gravitational energy is measured from the ground plane. The contact
    spring term is the stored ``k_n * depth**2 / 2``; damping and friction
    are dissipative and have no potential.
    """
    pts = point_table(model)
    v = state.velocities
    kinetic = 0.5 * v @ mass_matrix(model, state.q) @ v
    r = np.empty(3)
    J = np.empty((3, 3))
    bias = np.empty(3)
    potential = 0.0
    for i in range(N_MASS):
        _point_kin(state.q, state.dq, pts[i, 1:4], pts[i, 4:7], r, J, bias)
        potential += pts[i, 0] * gravity * (state.z_base + r[2])
    spring = 0.5 * np.dot(np.asarray(model.kp), (cmd.q_des - state.q) ** 2)
    depth = penetration(model, state)
    contact = 0.5 * surface.k_n * depth ** 2 if depth > 0 else 0.0
    return float(kinetic + potential + spring + contact)


def standing_state(model, surface, q, gravity=GRAVITY):
    """Leg at rest in pose ``q`` with the foot sunk by the static depth."""
    q = np.asarray(q, dtype=float)
    pts = point_table(model)
    r = np.empty(3)
    J = np.empty((3, 3))
    bias = np.empty(3)
    _point_kin(q, np.zeros(3), pts[FOOT, 1:4], pts[FOOT, 4:7], r, J, bias)
    depth = model.total_mass * gravity / surface.k_n
    return LegState(model.foot_radius - depth - r[2], 0.0, q, np.zeros(3))
