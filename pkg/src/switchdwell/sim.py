"""Trajectories of switched systems and exponential decay envelopes.

The switching instants are known in advance, so both integrators split the
horizon at every breakpoint of the signal: linear systems are propagated
exactly with matrix exponentials, nonlinear ones with classic RK4 on a grid
snapped to the breakpoints.

The Euclidean norm is used throughout.
"""
import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from ._jit import kernel
from .signals import SwitchingSignal

__all__ = [
    "SwitchedSystem",
    "Trajectory",
    "DecayEnvelope",
    "EnvelopeCheck",
    "Infeasible",
    "BlowUpError",
    "flow_linear",
    "flow_nonlinear",
    "check_envelope",
    "fit_envelope",
    "switch_counts",
]

BLOWUP_NORM = 1e12
M_CAP = 1e6


class BlowUpError(RuntimeError):
    """Raised when a state leaves the finite range; carries the partial
    trajectory up to the last finite sample."""

    def __init__(self, t, partial):
        super().__init__(f"blow-up at t={t:.6g}")
        self.t = t
        self.partial = partial


@dataclass(frozen=True)
class SwitchedSystem:
    """A finite family of modes sharing the state dimension.

    Build with :meth:`linear` or :meth:`nonlinear`.
    """

    kind: str
    dimension: int
    mode_count: int
    matrices: tuple = None
    fields: tuple = None
    labels: tuple = None

    @classmethod
    def linear(cls, matrices):
        mats = [linalg.as_matrix(a) for a in matrices]
        if not mats:
            raise ValueError("need at least one mode")
        n = mats[0].shape[0]
        for a in mats:
            if a.shape != (n, n):
                raise ValueError("all modes must be square of the same dimension")
            a.setflags(write=False)
        return cls("linear", n, len(mats), matrices=tuple(mats))

    @classmethod
    def nonlinear(cls, fields, dimension, labels=None, probe=True):
        """Register vector fields ``f_i: R^n -> R^n``.

        Each field must vanish at the origin; this is checked unless
        ``probe`` is false.
        """
        fields = tuple(fields)
        if not fields:
            raise ValueError("need at least one mode")
        n = int(dimension)
        if probe:
            zero = np.zeros(n)
            for i, f in enumerate(fields, start=1):
                val = np.asarray(f(zero), dtype=np.float64)
                if val.shape != (n,):
                    raise ValueError(f"mode {i}: field returns shape {val.shape}, expected ({n},)")
                if np.any(val != 0.0):
                    raise ValueError(f"mode {i}: f(0) = {val.tolist()} but fields must vanish at 0")
        return cls("nonlinear", n, len(fields), fields=fields, labels=labels)

    @property
    def is_linear(self):
        return self.kind == "linear"

    def field(self, mode):
        """Vector field of a 1-based mode as a callable."""
        if self.is_linear:
            a = self.matrices[mode - 1]
            return lambda x: a @ x
        return self.fields[mode - 1]

    def as_nonlinear(self):
        """View a linear system through its vector fields."""
        if not self.is_linear:
            return self
        return SwitchedSystem(
            "nonlinear", self.dimension, self.mode_count, fields=tuple(self.field(i + 1) for i in range(self.mode_count))
        )

    def _check_signal(self, sig):
        if max(sig.modes) > self.mode_count:
            raise ValueError(f"signal uses mode {max(sig.modes)} but the system has {self.mode_count}")

    def _check_state(self, x0):
        x = np.asarray(x0, dtype=np.float64).reshape(-1)
        if x.shape != (self.dimension,):
            raise ValueError(f"initial state has dimension {x.size}, system has {self.dimension}")
        return x


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    modes: np.ndarray
    signal: SwitchingSignal

    def __post_init__(self):
        for arr in (self.times, self.states, self.modes):
            arr.setflags(write=False)

    def __len__(self):
        return self.times.shape[0]

    @property
    def norms(self):
        return np.linalg.norm(self.states, axis=1)

    @property
    def final_state(self):
        return self.states[-1]

    @property
    def horizon(self):
        return float(self.times[-1])

    def to_csv(self, dest=None):
        """Write ``t,mode,x1..xn`` rows; returns the text when ``dest`` is None."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        n = self.states.shape[1]
        writer.writerow(["t", "mode"] + [f"x{k + 1}" for k in range(n)])
        for t, md, x in zip(self.times, self.modes, self.states):
            writer.writerow([repr(float(t)), int(md)] + [repr(float(v)) for v in x])
        text = buf.getvalue()
        if dest is None:
            return text
        with open(dest, "w", newline="") as fh:
            fh.write(text)
        return None


def _interval_plan(sig, horizon):
    """Breakpoints cut to ``[0, horizon]`` as (start, end, mode) triples."""
    times, modes = sig.unroll(horizon)
    ends = times[1:] + [horizon]
    return [(a, b, md) for a, b, md in zip(times, ends, modes) if b > a]


@kernel
def _march(first, step, x, count):
    # states first @ x, step @ first @ x, ... (count rows)
    n = x.shape[0]
    out = np.empty((count, n))
    cur = first @ x
    for k in range(count):
        if k > 0:
            cur = step @ cur
        out[k] = cur
    return out


def _finalize(times, states, modes, sig):
    return Trajectory(
        np.asarray(times, dtype=np.float64),
        np.asarray(states, dtype=np.float64).reshape(len(times), -1),
        np.asarray(modes, dtype=np.int64),
        sig,
    )


def _first_bad(block):
    with np.errstate(over="ignore", invalid="ignore"):
        norms = np.sqrt(np.sum(block * block, axis=1))
    bad = np.nonzero(~np.isfinite(norms) | (norms > BLOWUP_NORM))[0]
    return int(bad[0]) if bad.size else -1


def flow_linear(sys, sig, x0, horizon, dt=None):
    """Exact piecewise propagation of ``x' = A_sigma x``.

    Samples are taken at every switching instant, at ``horizon`` and, if
    ``dt`` is given, at the multiples of ``dt``.
    """
    if not sys.is_linear:
        raise TypeError("flow_linear needs a linear system")
    horizon = float(horizon)
    if horizon < 0:
        raise ValueError("horizon must be non-negative")
    if dt is not None and not dt > 0:
        raise ValueError("dt must be positive")
    sys._check_signal(sig)
    x = sys._check_state(x0)
    times, states, modes = [0.0], [x.copy()], [sig.mode_at(0.0)]
    for a, b, md in _interval_plan(sig, horizon):
        mat = sys.matrices[md - 1]
        if dt is not None:
            k0 = int(math.floor(a / dt)) + 1
            k1 = int(math.ceil(b / dt)) - 1
            grid = [k * dt for k in range(k0, k1 + 1) if a < k * dt < b]
            if grid:
                block = _march(linalg.expm(mat, grid[0] - a), linalg.expm(mat, dt), x, len(grid))
                bad = _first_bad(block)
                if bad >= 0:
                    times += grid[:bad]
                    states += list(block[:bad])
                    modes += [md] * bad
                    raise BlowUpError(grid[bad], _finalize(times, states, modes, sig))
                times += grid
                states += list(block)
                modes += [md] * len(grid)
        x = linalg.expm(mat, b - a) @ x
        nx = float(np.linalg.norm(x))
        if not (math.isfinite(nx) and nx <= BLOWUP_NORM):
            raise BlowUpError(b, _finalize(times, states, modes, sig))
        times.append(b)
        states.append(x.copy())
        modes.append(sig.mode_at(b))
    return _finalize(times, states, modes, sig)


def flow_nonlinear(sys, sig, x0, horizon, step):
    """RK4 integration with every switching instant on the step grid."""
    horizon = float(horizon)
    if horizon < 0:
        raise ValueError("horizon must be non-negative")
    if not step > 0:
        raise ValueError("step must be positive")
    sys._check_signal(sig)
    x = sys._check_state(x0)
    times, states, modes = [0.0], [x.copy()], [sig.mode_at(0.0)]
    for a, b, md in _interval_plan(sig, horizon):
        f = sys.field(md)
        count = max(1, int(math.ceil((b - a) / step - 1e-9)))
        h = (b - a) / count
        for k in range(1, count + 1):
            k1 = np.asarray(f(x), dtype=np.float64)
            k2 = np.asarray(f(x + 0.5 * h * k1), dtype=np.float64)
            k3 = np.asarray(f(x + 0.5 * h * k2), dtype=np.float64)
            k4 = np.asarray(f(x + h * k3), dtype=np.float64)
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t = b if k == count else a + k * h
            nx = float(np.linalg.norm(x))
            if not (math.isfinite(nx) and nx <= BLOWUP_NORM):
                raise BlowUpError(t, _finalize(times, states, modes, sig))
            times.append(t)
            states.append(x)
            modes.append(md if k < count else sig.mode_at(b))
    return _finalize(times, states, modes, sig)


# ---------------------------------------------------------------------------
# envelopes


@dataclass(frozen=True)
class DecayEnvelope:
    """``|x(t)| <= M exp(alpha tau N(0,t)) exp(-(rho + alpha) t) |x(0)|``."""

    M: float
    rho: float
    alpha: float
    tau: float

    def __post_init__(self):
        if not self.M >= 1.0:
            raise ValueError("M must be >= 1")
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if not self.alpha >= 0:
            raise ValueError("alpha must be non-negative")
        if not self.tau > 0:
            raise ValueError("tau must be positive")


@dataclass(frozen=True)
class EnvelopeCheck:
    """Verdict of :func:`check_envelope`; falsy when violated."""

    holds: bool
    t: float = None
    lhs: float = None
    rhs: float = None

    def __bool__(self):
        return self.holds


class Infeasible:
    """Returned by :func:`fit_envelope` when no decay rate fits."""

    def __init__(self, reason):
        self.reason = reason

    def __bool__(self):
        return False

    def __repr__(self):
        return f"Infeasible({self.reason!r})"


def switch_counts(traj):
    """``N(0, t)`` at every sample time of ``traj``."""
    bps, _ = traj.signal.unroll(traj.horizon + 1.0)
    return np.searchsorted(np.asarray(bps), traj.times, side="left")


def _log_ratio(traj, rho, alpha, tau):
    # log of |x(t)| / (exp(alpha tau N - (rho + alpha) t) |x0|)
    n0 = float(np.linalg.norm(traj.states[0]))
    with np.errstate(divide="ignore"):
        return (
            np.log(traj.norms)
            - math.log(n0)
            - alpha * tau * switch_counts(traj)
            + (rho + alpha) * traj.times
        )


def check_envelope(traj, env, rtol=1e-9):
    """Verify the decay envelope at every sample; report the first violation."""
    n0 = float(np.linalg.norm(traj.states[0]))
    lhs = traj.norms
    expo = env.alpha * env.tau * switch_counts(traj) - (env.rho + env.alpha) * traj.times
    rhs = env.M * np.exp(expo) * n0
    bad = np.nonzero(lhs > rhs * (1.0 + rtol))[0]
    if bad.size == 0:
        return EnvelopeCheck(True)
    k = int(bad[0])
    return EnvelopeCheck(False, float(traj.times[k]), float(lhs[k]), float(rhs[k]))


def fit_envelope(trajs, tau, alpha, m_cap=M_CAP, grid_size=200, rho_range=(1e-6, 10.0)):
    """Largest decay rate (and the matching smallest overshoot) that bounds
    every trajectory.

    A rate is accepted when the overshoot stays below ``m_cap`` and the
    normalised trajectory is not larger on the second half of its horizon than
    on the first: a finite horizon cannot distinguish slow growth from a large
    overshoot, and this rejects rates that only fit by inflating ``M``.
    """
    trajs = [t for t in trajs]
    if not trajs:
        raise ValueError("no trajectories given")
    live = [t for t in trajs if float(np.linalg.norm(t.states[0])) > 0.0]
    if not live:
        return DecayEnvelope(1.0, rho_range[1], alpha, tau)

    def overshoot(rho):
        worst = 0.0
        for traj in live:
            lg = _log_ratio(traj, rho, alpha, tau)
            half = traj.horizon / 2.0
            early = lg[traj.times <= half]
            late = lg[traj.times > half]
            if late.size and late.max() > early.max() + 1e-9:
                return math.inf
            worst = max(worst, float(lg.max()))
        return math.exp(worst) if worst < 700 else math.inf

    grid = np.geomspace(rho_range[0], rho_range[1], grid_size)
    ok = [overshoot(r) <= m_cap for r in grid]
    feasible = [k for k, good in enumerate(ok) if good]
    if not feasible:
        return Infeasible(f"no rate in [{rho_range[0]:g}, {rho_range[1]:g}] with M <= {m_cap:g}")
    k = feasible[-1]
    lo = float(grid[k])
    if k + 1 < grid_size:
        hi = float(grid[k + 1])
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if overshoot(mid) <= m_cap:
                lo = mid
            else:
                hi = mid
    return DecayEnvelope(max(1.0, overshoot(lo)), lo, alpha, tau)
