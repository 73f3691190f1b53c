"""Bundled fixtures and the destabilising-signal reproduction.

The two-mode system used throughout has flows
``A1 = [[-0.1, 1], [-2, -0.1]]`` and ``A2 = [[-0.03, 1], [-1, -0.03]]``.
Driven by the periodic signal that holds mode 1 for ``t1 = pi / (2 sqrt 2)``
and mode 2 for ``t2 = 3 pi / 2``, its period map is
``exp(-0.1 t1 - 0.03 t2) diag(sqrt 2, sqrt 2 / 2)``. The state therefore grows
by about 1.0987 per period, although every mode is Hurwitz and the signal has
only two switches per period.
"""
import json
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from . import linalg
from .sim import flow_linear
from .signals import SignalClassSpec, classify, count_switches, signal_from_json

__all__ = [
    "fixture_path",
    "load_fixture",
    "example1_times",
    "example1_system",
    "example1_signal",
    "example1_period_map_closed_form",
    "Check",
    "run_counterexample",
]

T1 = math.pi / (2.0 * math.sqrt(2.0))
T2 = 1.5 * math.pi


def fixture_path(name):
    return resources.files("switchdwell.fixtures").joinpath(name)


def load_fixture(name):
    return json.loads(fixture_path(name).read_text())


def example1_times():
    return T1, T2


def example1_system():
    from .serialization import system_from_json

    return system_from_json(load_fixture("example1_system.json"))


def example1_signal():
    return signal_from_json(load_fixture("example1_signal.json"))


def example1_period_map_closed_form():
    r2 = math.sqrt(2.0)
    return math.exp(-0.1 * T1 - 0.03 * T2) * np.diag([r2, r2 / 2.0])


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str

    def line(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def run_counterexample(tau=2.1, swap_modes=False, periods=20):
    """Re-derive every claim about the destabilising signal.

    Returns the list of :class:`Check` results; all pass for the defaults.
    """
    sys = example1_system()
    sig = example1_signal()
    if swap_modes:
        sig = sig.with_modes_swapped(1, 2)
    period = sig.period
    checks = []

    # period map: product of the per-interval propagators over one period
    pmap = np.eye(2)
    for a, b, md in zip(*_segments(sig, period)):
        pmap = linalg.expm(sys.matrices[md - 1], b - a) @ pmap
    target = example1_period_map_closed_form()
    err = float(np.max(np.abs(pmap - target)))
    checks.append(Check("period map", err <= 1e-9, f"max |Phi(T) - closed form| = {err:.3e}"))

    x0 = np.array([1.0, 0.0])
    traj = flow_linear(sys, sig, x0, periods * period)
    at_periods = [float(np.linalg.norm(x0))]
    for k in range(1, periods + 1):
        idx = int(np.argmin(np.abs(traj.times - k * period)))
        at_periods.append(float(np.linalg.norm(traj.states[idx])))
    growth = (at_periods[-1] / at_periods[0]) ** (1.0 / periods)
    checks.append(Check("growth per period", growth >= 1.09, f"{growth:.6f} (needs >= 1.09)"))
    checks.append(
        Check(
            "divergence",
            at_periods[-1] >= 1.09**periods,
            f"|x({periods}T)| = {at_periods[-1]:.4f} vs 1.09^{periods} = {1.09 ** periods:.4f}",
        )
    )

    n_period = count_switches(sig, 0.0, period)
    checks.append(Check("switches per period", n_period == 2, f"N(0,T) = {n_period}"))
    ratio = period / tau
    checks.append(Check("T/tau", 2.772 <= ratio <= 2.774, f"T/tau = {ratio:.6f} (expected about 2.773)"))
    dwell = classify(sig, SignalClassSpec.dwell(tau))
    checks.append(
        Check("not a dwell-time signal", not dwell.member, f"Dwell({tau:g}): {'member' if dwell.member else dwell.detail}")
    )
    adt = classify(sig, SignalClassSpec.average_dwell(tau, 2))
    checks.append(
        Check("ADT member", adt.member, f"AverageDwell({tau:g}, 2): {'member' if adt.member else adt.detail}")
    )
    return checks


def _segments(sig, horizon):
    times, modes = sig.unroll(horizon)
    ends = times[1:] + [horizon]
    return times, ends, modes
