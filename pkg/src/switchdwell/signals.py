"""Piecewise-constant switching signals and the dwell-time signal classes.

A :class:`SwitchingSignal` is right-continuous and piecewise constant on
``[0, inf)``. It is described by a finite list of breakpoints (``0`` is always
the first one) and the mode active from each breakpoint on. After the last
listed breakpoint the signal either holds its last mode forever, or it repeats
the window ``[period_start, period_start + period)`` periodically.

Modes are 1-based integers, as is customary for switched systems.

Counting convention: ``count_switches(sig, s, t)`` is the number of
discontinuity points in the half-open window ``[s, t)``, where the time origin
always counts as a discontinuity.
"""
import bisect
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ._jit import kernel

__all__ = [
    "SwitchingSignal",
    "SignalClass",
    "SignalClassSpec",
    "Membership",
    "count_switches",
    "classify",
    "concat",
    "shift",
    "sample_signal",
    "signal_to_json",
    "signal_from_json",
]


@dataclass(frozen=True)
class SwitchingSignal:
    """Finite description of a switching signal.

    Parameters
    ----------
    breakpoints : sequence of float
        Strictly increasing times starting at ``0``.
    modes : sequence of int
        ``modes[k]`` is active on ``[breakpoints[k], breakpoints[k+1])``.
        Adjacent equal modes are merged on construction.
    period : float, optional
        If given, the signal repeats ``[period_start, period_start + period)``
        forever. Otherwise the last mode holds forever.
    period_start : float
        Start of the repeated window (0 unless the signal was built by
        concatenation onto a periodic tail).
    mode_count : int, optional
        Number of modes ``m``; defaults to the largest mode used.
    """

    breakpoints: tuple
    modes: tuple
    period: float = None
    period_start: float = 0.0
    mode_count: int = None
    _cycle: tuple = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        times = [float(t) for t in self.breakpoints]
        modes = [int(m) for m in self.modes]
        if not times or len(times) != len(modes):
            raise ValueError("breakpoints and modes must be non-empty and of equal length")
        if times[0] != 0.0:
            raise ValueError("the first breakpoint must be 0")
        for a, b in zip(times, times[1:]):
            if not b > a:
                raise ValueError(f"breakpoints must be strictly increasing ({a} !< {b})")
        if not all(math.isfinite(t) for t in times):
            raise ValueError("breakpoints must be finite")
        if min(modes) < 1:
            raise ValueError("modes are 1-based")
        m = max(modes) if self.mode_count is None else int(self.mode_count)
        if max(modes) > m:
            raise ValueError(f"mode {max(modes)} exceeds mode_count {m}")
        # merge adjacent equal modes: only genuine discontinuities are kept
        merged_t, merged_m = [times[0]], [modes[0]]
        for t, md in zip(times[1:], modes[1:]):
            if md != merged_m[-1]:
                merged_t.append(t)
                merged_m.append(md)
        period = None if self.period is None else float(self.period)
        p0 = float(self.period_start)
        if period is not None:
            if not (period > 0.0 and math.isfinite(period)):
                raise ValueError("period must be positive and finite")
            if p0 < 0.0:
                raise ValueError("period_start must be non-negative")
            if not merged_t[-1] < p0 + period:
                raise ValueError("the last breakpoint must precede period_start + period")
        object.__setattr__(self, "breakpoints", tuple(merged_t))
        object.__setattr__(self, "modes", tuple(merged_m))
        object.__setattr__(self, "period", period)
        object.__setattr__(self, "period_start", p0)
        object.__setattr__(self, "mode_count", m)
        if period is not None:
            object.__setattr__(self, "_cycle", self._build_cycle())

    # -- construction helpers -------------------------------------------------

    @classmethod
    def constant(cls, mode, mode_count=None):
        return cls((0.0,), (mode,), mode_count=mode_count)

    @classmethod
    def periodic(cls, breakpoints, modes, period, mode_count=None):
        return cls(breakpoints, modes, period=period, mode_count=mode_count)

    def _build_cycle(self):
        p0 = self.period_start
        start_mode = self._listed_mode_at(p0)
        wrap = self.modes[-1] != start_mode
        offsets, cyc_modes = [], []
        if wrap:
            offsets.append(0.0)
            cyc_modes.append(start_mode)
        for t, md in zip(self.breakpoints, self.modes):
            if t > p0:
                offsets.append(t - p0)
                cyc_modes.append(md)
        return tuple(offsets), tuple(cyc_modes)

    # -- inspection -----------------------------------------------------------

    @property
    def is_periodic(self):
        return self.period is not None

    @property
    def cycle_switches(self):
        """Discontinuities per period in the periodic regime (0 if constant)."""
        return 0 if self.period is None else len(self._cycle[0])

    def _listed_mode_at(self, t):
        k = bisect.bisect_right(self.breakpoints, t) - 1
        return self.modes[max(k, 0)]

    def _cycle_time(self, n, offset):
        return self.period_start + n * self.period + offset

    def mode_at(self, t):
        """Active mode at time ``t`` (right-continuous)."""
        t = float(t)
        if t < 0:
            raise ValueError("signals are defined on t >= 0")
        if self.period is None or t < self.period_start + self.period:
            return self._listed_mode_at(t)
        offsets, cmodes = self._cycle
        n = int(math.floor((t - self.period_start) / self.period))
        # guard the floor against rounding so that the cycle time formula agrees
        while n > 1 and self._cycle_time(n, 0.0) > t:
            n -= 1
        while self._cycle_time(n + 1, 0.0) <= t:
            n += 1
        mode = self.modes[-1]
        for off, md in zip(offsets, cmodes):
            if self._cycle_time(n, off) <= t:
                mode = md
            else:
                break
        return mode

    __call__ = mode_at

    def left_limit(self, t):
        """Mode on a left neighbourhood of ``t > 0``."""
        if t <= 0:
            raise ValueError("left limit needs t > 0")
        times, modes = self.unroll(t)
        return modes[-1]

    def unroll(self, horizon):
        """Breakpoints in ``[0, horizon)`` with their modes (periodic tails
        expanded)."""
        horizon = float(horizon)
        k = bisect.bisect_left(self.breakpoints, horizon)
        times = list(self.breakpoints[: max(k, 1)])
        modes = list(self.modes[: max(k, 1)])
        if self.period is None or horizon <= self.period_start + self.period:
            return times, modes
        offsets, cmodes = self._cycle
        n = 1
        while self._cycle_time(n, 0.0) < horizon:
            for off, md in zip(offsets, cmodes):
                tt = self._cycle_time(n, off)
                if tt >= horizon:
                    break
                times.append(tt)
                modes.append(md)
            n += 1
        return times, modes

    def _count_before(self, t):
        """Number of breakpoints in ``[0, t)``."""
        if t <= 0.0:
            return 0
        listed = len(self.breakpoints)
        if self.period is None or t <= self.period_start + self.period:
            return bisect.bisect_left(self.breakpoints, t)
        offsets = self._cycle[0]
        c = len(offsets)
        if c == 0:
            return listed
        n = int(math.floor((t - self.period_start) / self.period)) - 1
        n = max(n, 1)
        count = listed + (n - 1) * c
        while True:
            for off in offsets:
                if self._cycle_time(n, off) < t:
                    count += 1
                else:
                    return count
            n += 1

    def count(self, s, t):
        return count_switches(self, s, t)

    def with_modes_swapped(self, a, b):
        """Relabel modes ``a`` and ``b``."""
        swap = {a: b, b: a}
        return SwitchingSignal(
            self.breakpoints,
            [swap.get(md, md) for md in self.modes],
            period=self.period,
            period_start=self.period_start,
            mode_count=self.mode_count,
        )


def count_switches(sig, s, t):
    """Number of discontinuities of ``sig`` in ``[s, t)``.

    The origin counts as a discontinuity, so ``count_switches(sig, 0, t) >= 1``
    for every ``t > 0``.
    """
    s, t = float(s), float(t)
    if s < 0 or t < 0:
        raise ValueError("times must be non-negative")
    if s > t:
        raise ValueError(f"empty window: s={s} > t={t}")
    if s == t:
        return 0
    return sig._count_before(t) - sig._count_before(s)


# ---------------------------------------------------------------------------
# signal classes


class SignalClass(str, Enum):
    DWELL = "dwell"
    AVERAGE_DWELL = "average_dwell"
    EVENTUALLY_AVERAGE = "eventually_average"


@dataclass(frozen=True)
class SignalClassSpec:
    kind: SignalClass
    tau: float
    chattering_bound: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", SignalClass(self.kind))
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.kind is SignalClass.AVERAGE_DWELL and int(self.chattering_bound) < 1:
            raise ValueError("chattering bound must be >= 1")
        object.__setattr__(self, "chattering_bound", int(self.chattering_bound))

    @classmethod
    def dwell(cls, tau):
        return cls(SignalClass.DWELL, tau)

    @classmethod
    def average_dwell(cls, tau, n0):
        return cls(SignalClass.AVERAGE_DWELL, tau, n0)

    @classmethod
    def eventually_average(cls, tau):
        return cls(SignalClass.EVENTUALLY_AVERAGE, tau)


@dataclass(frozen=True)
class Membership:
    """Outcome of :func:`classify`.

    ``witness`` is ``None`` for members. For non-members it is a window
    ``(s, t)`` on which the class inequality fails: the violating gap for the
    dwell class, a window with too many switches for the ADT class, and
    ``(period_start, period_start + period)`` for the eventual class.
    """

    member: bool
    witness: tuple = None
    detail: str = ""

    def __bool__(self):
        return self.member


@kernel
def _adt_violation(times, n0, tau, start_limit):
    # first (j, k) with k - j + 1 > n0 + (times[k] - times[j]) / tau and
    # times[j] < start_limit; (-1, -1) if none
    nb = times.shape[0]
    for h in range(n0, nb):
        for j in range(nb - h):
            if times[j] >= start_limit:
                break
            k = j + h
            if h + 1 > n0 + (times[k] - times[j]) / tau:
                return j, k
    return -1, -1


def _adt_witness(times, n0, tau, start_limit=np.inf):
    arr = np.asarray(times, dtype=np.float64)
    j, k = _adt_violation(arr, int(n0), float(tau), float(start_limit))
    if j < 0:
        return None
    return float(arr[j]), float(np.nextafter(arr[k], np.inf))


def _check_adt(sig, tau, n0):
    if not sig.is_periodic:
        w = _adt_witness(sig.breakpoints, n0, tau)
        if w is None:
            return Membership(True)
        return Membership(False, w, f"{count_switches(sig, *w)} switches in window of length {w[1] - w[0]:.6g}")
    p0, per = sig.period_start, sig.period
    c = sig.cycle_switches
    if c > per / tau:
        # per-cycle excess is positive: windows [0, p0 + n T) eventually violate
        listed = len(sig.breakpoints)
        excess = c - per / tau
        n = max(1, int(math.ceil((n0 - listed + c + p0 / tau) / excess)))
        while True:
            t = sig._cycle_time(n, 0.0)
            if count_switches(sig, 0.0, t) > n0 + t / tau:
                return Membership(False, (0.0, t), f"{count_switches(sig, 0.0, t)} switches in [0, {t:.6g})")
            n += 1
    # excess <= 0: windows longer than one cycle are dominated by shorter ones
    times, _ = sig.unroll(p0 + 3.0 * per)
    w = _adt_witness(times, n0, tau, start_limit=p0 + per)
    if w is None:
        return Membership(True)
    return Membership(False, w, f"{count_switches(sig, *w)} switches in window of length {w[1] - w[0]:.6g}")


def _check_dwell(sig, tau):
    horizon = sig.breakpoints[-1] + 1.0
    if sig.is_periodic:
        horizon = sig.period_start + 3.0 * sig.period
    times, _ = sig.unroll(horizon)
    times = np.asarray(times)
    gaps = np.diff(times)
    bad = gaps < tau
    if sig.is_periodic:
        # later cycles repeat the first one; their unrolled gaps only add rounding
        bad &= times[:-1] < sig.period_start + sig.period
    bad = np.nonzero(bad)[0]
    if bad.size == 0:
        return Membership(True)
    k = int(bad[0])
    return Membership(False, (times[k], times[k + 1]), f"gap {gaps[k]:.6g} < tau={tau:g}")


def classify(sig, spec):
    """Decide membership of ``sig`` in the class described by ``spec``.

    Raises
    ------
    ValueError
        For the eventual-average class on a non-periodic signal: the limsup
        criterion cannot be decided from a finite description.
    """
    tau = spec.tau
    if spec.kind is SignalClass.DWELL:
        return _check_dwell(sig, tau)
    if spec.kind is SignalClass.AVERAGE_DWELL:
        return _check_adt(sig, tau, spec.chattering_bound)
    if not sig.is_periodic:
        raise ValueError("eventual-average membership is undecidable for finite-horizon signals")
    c = sig.cycle_switches
    if c <= sig.period / tau:
        return Membership(True, detail=f"{c} switches per period <= T/tau = {sig.period / tau:.6g}")
    p0 = sig.period_start
    return Membership(
        False, (p0, p0 + sig.period), f"{c} switches per period > T/tau = {sig.period / tau:.6g}"
    )


# ---------------------------------------------------------------------------
# constructions


def concat(sig_a, sig_b, delta):
    """Follow ``sig_a`` on ``[0, delta)`` and ``sig_b(. - delta)`` afterwards.

    No breakpoint is created at ``delta`` when the left limit of ``sig_a``
    equals ``sig_b(0)``.
    """
    delta = float(delta)
    if not delta > 0:
        raise ValueError("delta must be positive")
    times, modes = sig_a.unroll(delta)
    b_times = [delta + t for t in sig_b.breakpoints]
    b_modes = list(sig_b.modes)
    period = sig_b.period
    p0 = delta + sig_b.period_start if period is not None else 0.0
    return SwitchingSignal(
        times + b_times,
        modes + b_modes,
        period=period,
        period_start=p0,
        mode_count=max(sig_a.mode_count, sig_b.mode_count),
    )


def shift(sig, t0):
    """The signal ``t -> sig(t + t0)``, re-anchored at 0."""
    t0 = float(t0)
    if t0 < 0:
        raise ValueError("shift must be non-negative")
    if t0 == 0.0:
        return sig
    first = sig.mode_at(t0)
    if sig.period is None or t0 < sig.period_start:
        times = [0.0] + [t - t0 for t in sig.breakpoints if t > t0]
        modes = [first] + [m for t, m in zip(sig.breakpoints, sig.modes) if t > t0]
        p0 = sig.period_start - t0 if sig.period is not None else 0.0
        if sig.period is not None and p0 <= 0.0:
            p0 = 0.0
        return SwitchingSignal(times, modes, period=sig.period, period_start=p0, mode_count=sig.mode_count)
    per = sig.period
    u_times, u_modes = sig.unroll(t0 + per)
    times, modes = [0.0], [first]
    for t, m in zip(u_times, u_modes):
        if t > t0:
            times.append(t - t0)
            modes.append(m)
    times = [t for t in times if t < per]
    modes = modes[: len(times)]
    return SwitchingSignal(times, modes, period=per, mode_count=sig.mode_count)


def _next_mode(rng, current, m):
    choice = int(rng.integers(1, m))
    return choice if choice < current else choice + 1


def sample_signal(spec, horizon, rng_seed, mode_count):
    """Draw a signal of the class ``spec`` deterministically from a seed.

    Dwell and ADT signals switch up to ``horizon`` and then hold their last
    mode. Eventual-average signals are periodic.
    """
    horizon = float(horizon)
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    m = int(mode_count)
    rng = np.random.default_rng(rng_seed)
    tau = spec.tau
    if m == 1:
        return SwitchingSignal.constant(1, mode_count=1)
    first = int(rng.integers(1, m + 1))
    if spec.kind is SignalClass.EVENTUALLY_AVERAGE:
        c = 2 * int(rng.integers(1, 3))
        per = c * tau * (1.0 + rng.uniform(0.0, 1.0))
        inner = np.sort(rng.uniform(0.0, per, size=c - 1))
        times = [0.0] + [float(t) for t in inner]
        modes = [first]
        for _ in range(c - 1):
            modes.append(_next_mode(rng, modes[-1], m))
        if modes[-1] == modes[0]:
            modes[-1] = _next_mode(rng, modes[-2], m) if m > 2 and modes[-2] != modes[0] else modes[-1]
            if modes[-1] == modes[0]:
                # m == 2 with even c always alternates; this is only reachable for m > 2
                modes[-1] = next(md for md in range(1, m + 1) if md not in (modes[0], modes[-2]))
        sig = SwitchingSignal(times, modes, period=per, mode_count=m)
    else:
        n0 = 1 if spec.kind is SignalClass.DWELL else spec.chattering_bound
        times, modes = [0.0], [first]
        safety = 1e-9 * tau
        while times[-1] < horizon:
            t = times[-1] + tau * float(rng.exponential(1.0 if n0 == 1 else 0.5))
            k = len(times)
            # earliest time keeping every window ending at the new switch admissible
            t_min = max(times[j] + tau * (k - j + 1 - n0) for j in range(k))
            t = max(t, t_min + safety, times[-1] + safety)
            times.append(t)
            modes.append(_next_mode(rng, modes[-1], m))
        sig = SwitchingSignal(times, modes, mode_count=m)
    if not classify(sig, spec).member:  # pragma: no cover - construction guarantees membership
        raise RuntimeError("sampled signal escaped its class")
    return sig


# ---------------------------------------------------------------------------
# JSON


def signal_to_json(sig):
    tail = {"kind": "constant"}
    if sig.is_periodic:
        tail = {"kind": "periodic", "period": sig.period}
        if sig.period_start:
            tail["start"] = sig.period_start
    return {
        "breakpoints": list(sig.breakpoints),
        "modes": list(sig.modes),
        "tail": tail,
        "mode_count": sig.mode_count,
    }


def signal_from_json(obj):
    try:
        tail = obj.get("tail", {"kind": "constant"})
        kind = tail.get("kind", "constant")
        if kind == "constant":
            period, start = None, 0.0
        elif kind == "periodic":
            period, start = float(tail["period"]), float(tail.get("start", 0.0))
        else:
            raise ValueError(f"unknown tail kind {kind!r}")
        return SwitchingSignal(
            obj["breakpoints"], obj["modes"], period=period, period_start=start, mode_count=obj.get("mode_count")
        )
    except (KeyError, TypeError, AttributeError) as exc:
        raise ValueError(f"malformed signal object: {exc}") from exc
