"""Real-to-sim surface calibration by matching foot angular-velocity traces.

The match score is ``accuracy = 1 - NRMSE``. NRMSE is the RMS difference
of gyroscope magnitude |gyr| inside +-0.3 s windows around the detected
touchdowns of either trace, divided by the reference's peak-to-peak |gyr|,
after shifting the simulated trace so the first pair of matched events
coincide.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.signal import find_peaks

from .dynamics import SurfaceParams
from .errors import AlignmentFailed, NoEventsFound
from .imu import NoiseSpec
from .simulation import simulate_episode

EVENT_MADS = 4.0
REFRACTORY = 0.4
MIN_PEAK = 0.2          # rad/s; keeps sensor noise on a still leg from counting as hops
EVENT_WINDOW = 0.3
MIN_LENGTH = 100
DEFAULT_BOUNDS = {"mu": (0.02, 3.0), "k_n": (1.0e3, 5.0e5), "c_n": (1.0, 400.0)}
PARAMS = ("mu", "k_n", "c_n")
# loss assigned when a candidate's trace cannot be aligned with the reference
MISMATCH_LOSS = 10.0


def _signal(trace, channels="gyr"):
    if channels == "gyr":
        return trace.gyr_norm()
    if channels == "acc":
        return trace.acc_norm()
    if channels == "both":
        return np.hypot(trace.gyr_norm(), trace.acc_norm())
    raise ValueError(f"channels must be 'gyr', 'acc' or 'both', got {channels!r}")


def detect_jump_events(trace, n_mads=EVENT_MADS, refractory=REFRACTORY, min_peak=MIN_PEAK,
                       channels="gyr"):
    """Touchdown times: peaks of |gyr| above ``median + n_mads * MAD``.

    Peaks closer than ``refractory`` seconds are thinned to the tallest. On
    soft surfaces the push-off spike can outgrow the landing spike, in
    which case the detected events sit at push-off instead.
    """
    if len(trace) < MIN_LENGTH:
        raise ValueError(f"trace has {len(trace)} samples; need at least {MIN_LENGTH}")
    g = _signal(trace, channels)
    med = np.median(g)
    mad = np.median(np.abs(g - med))
    threshold = max(med + n_mads * mad, min_peak)
    distance = max(1, int(math.ceil(refractory * trace.rate - 1e-9)))
    peaks, _ = find_peaks(g, height=threshold, distance=distance)
    if len(peaks) == 0:
        raise NoEventsFound(f"no |gyr| peak above {threshold:.4g} rad/s")
    return trace.t[peaks]


@dataclass
class TraceComparison:
    nrmse: float
    accuracy: float
    aligned_pairs: int
    lag: float
    t: np.ndarray = field(repr=False, default=None)        # reference timeline
    sim: np.ndarray = field(repr=False, default=None)      # aligned sim signal on t
    ref: np.ndarray = field(repr=False, default=None)
    mask: np.ndarray = field(repr=False, default=None)     # samples inside event windows

    def write_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["t", "sim_gyr_norm", "ref_gyr_norm", "in_window"])
            for row in zip(self.t.tolist(), self.sim.tolist(), self.ref.tolist(),
                           self.mask.astype(int).tolist()):
                w.writerow([repr(row[0]), repr(row[1]), repr(row[2]), row[3]])
        return path


def _period(events, fallback):
    return float(np.median(np.diff(events))) if len(events) >= 2 else fallback


def trace_discrepancy(sim, ref, window=EVENT_WINDOW, period=None, channels="gyr"):
    """Compare ``sim`` against ``ref`` (see module docstring for the metric)."""
    ev_ref = detect_jump_events(ref, channels=channels)
    ev_sim = detect_jump_events(sim, channels=channels)
    if period is None:
        span = float(ref.t[-1] - ref.t[0])
        period = _period(ev_ref, _period(ev_sim, span))
    tol = 0.5 * period
    lag = None
    for e in ev_ref:
        j = int(np.argmin(np.abs(ev_sim - e)))
        if abs(ev_sim[j] - e) <= tol:
            lag = float(e - ev_sim[j])
            break
    if lag is None:
        raise AlignmentFailed(f"no simulated event within +-{tol:.3f} s of a reference event")
    shifted = ev_sim + lag
    pairs = int(sum(np.min(np.abs(shifted - e)) <= window for e in ev_ref))

    t = ref.t
    r = _signal(ref, channels)
    s = np.interp(t - lag, sim.t, _signal(sim, channels))
    overlap = (t - lag >= sim.t[0]) & (t - lag <= sim.t[-1])
    near = np.zeros(len(t), dtype=bool)
    for e in np.concatenate((ev_ref, shifted)):
        near |= np.abs(t - e) <= window
    mask = near & overlap
    if not mask.any():
        raise AlignmentFailed("event windows do not overlap the shifted simulation")
    scale = float(np.ptp(r))
    if not scale > 0:
        raise AlignmentFailed("reference signal is constant")
    nrmse = float(np.sqrt(np.mean((s[mask] - r[mask]) ** 2)) / scale)
    return TraceComparison(nrmse, 1.0 - nrmse, pairs, lag, t, s, r, mask)


@dataclass
class CalibrationResult:
    params: SurfaceParams
    loss_history: list          # (evaluation index, best loss so far)
    evaluations: int
    converged: bool
    comparison: TraceComparison = field(repr=False, default=None)

    @property
    def loss(self):
        return self.loss_history[-1][1]

    @property
    def accuracy(self):
        return 1.0 - self.loss

    def to_dict(self):
        return {
            "params": asdict(self.params),
            "loss": self.loss,
            "accuracy": self.accuracy,
            "evaluations": self.evaluations,
            "converged": self.converged,
            "lag": self.comparison.lag if self.comparison else None,
            "aligned_pairs": self.comparison.aligned_pairs if self.comparison else None,
            "loss_history": [[i, v] for i, v in self.loss_history],
        }

    def write_json(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=1)
            f.write("\n")
        return path


class _BudgetSpent(Exception):
    pass


def _check_bounds(bounds):
    out = dict(DEFAULT_BOUNDS)
    out.update(bounds or {})
    for name in PARAMS:
        lo, hi = out[name]
        if not 0 < lo < hi:
            raise ValueError(f"bounds for {name} must satisfy 0 < lo < hi, got {(lo, hi)}")
    return out


def calibrate_surface(ref, model, cycle, init, bounds=None, budget=300, seed=0,
                      noise=None, channels="gyr", xtol=1e-3, initial_step=0.5, restart_gain=1e-4,
                      log=None):
    """Fit ``(mu, k_n, c_n)`` so simulated traces match ``ref``.

    Nelder-Mead runs on ``log(params)`` with candidates clipped into
    ``bounds``; at most ``budget`` simulations are run. ``converged`` is
    true when the simplex diameter (max-norm, log space) drops below
    ``xtol``. A collapsed simplex restarts from the best point for as long as
    a restart lowers the loss by at least ``restart_gain``. Simulations are
    noise-free unless ``noise`` says otherwise.
    """
    if budget < 20:
        raise ValueError("budget must be >= 20 evaluations")
    bounds = _check_bounds(bounds)
    noise = noise or NoiseSpec.off()
    rate = float(round(ref.rate))
    duration = len(ref) / rate
    lo = np.log([bounds[n][0] for n in PARAMS])
    hi = np.log([bounds[n][1] for n in PARAMS])
    x0 = np.clip(np.log([init.mu, init.k_n, init.c_n]), lo, hi)
    history, best = [], {"loss": math.inf, "x": x0, "cmp": None}

    def objective(x):
        if len(history) >= budget:
            raise _BudgetSpent
        x = np.clip(x, lo, hi)
        mu, k_n, c_n = np.exp(x)
        surface = SurfaceParams(mu=mu, k_n=k_n, c_n=c_n, name=init.name)
        sim = simulate_episode(model, surface, cycle, duration, rate, noise, seed)
        try:
            cmp = trace_discrepancy(sim, ref, channels=channels)
            loss = cmp.nrmse
        except (AlignmentFailed, NoEventsFound):
            cmp, loss = None, MISMATCH_LOSS
        if loss < best["loss"]:
            best.update(loss=loss, x=x.copy(), cmp=cmp)
        history.append((len(history) + 1, best["loss"]))
        if log:
            log(f"eval {len(history):4d}  mu={mu:.4g} k_n={k_n:.4g} c_n={c_n:.4g}  "
                f"loss={loss:.5f}  best={best['loss']:.5f}")
        return loss

    def start_simplex(x):
        simplex = np.vstack([x] + [x + initial_step * e for e in np.eye(3)])
        # step inward where the push would leave the box
        for i in range(3):
            if simplex[i + 1, i] > hi[i]:
                simplex[i + 1, i] = x[i] - initial_step
        return np.clip(simplex, lo, hi)

    # restart from the best point while budget remains, until a restart
    # stops improving; a collapsed simplex alone can sit on a local plateau
    converged = False
    try:
        while True:
            before = best["loss"]
            res = minimize(objective, best["x"], method="Nelder-Mead", bounds=list(zip(lo, hi)),
                           options={"initial_simplex": start_simplex(best["x"]),
                                    "xatol": xtol / 2, "fatol": math.inf,
                                    "maxfev": budget, "maxiter": 10 * budget})
            pts = res.final_simplex[0]
            diameter = max(np.max(np.abs(a - b)) for a in pts for b in pts)
            converged = bool(diameter < xtol)
            if not converged or before - best["loss"] < restart_gain:
                break
    except _BudgetSpent:
        converged = False
    mu, k_n, c_n = np.exp(best["x"])
    params = SurfaceParams(mu=float(mu), k_n=float(k_n), c_n=float(c_n), name=init.name)
    return CalibrationResult(params, history, len(history), converged, best["cmp"])
