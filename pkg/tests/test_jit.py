"""The compiled kernels and their pure-Python fallbacks must agree."""
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from switchdwell import _jit, bounds, linalg, signals, sim


def pure(fn):
    return getattr(fn, "py_func", fn)


@pytest.fixture
def mats():
    rng = np.random.default_rng(99)
    a = rng.standard_normal((5, 5))
    return a, a + a.T, a - (np.max(np.linalg.eigvals(a).real) + 1.0) * np.eye(5)


def test_expm(mats):
    a, _, _ = mats
    r1, ok1 = linalg._expm_kernel(a, linalg._PADE_13)
    r2, ok2 = pure(linalg._expm_kernel)(a, linalg._PADE_13)
    assert ok1 and ok2
    np.testing.assert_allclose(r1, r2, rtol=1e-13)


def test_jacobi(mats):
    _, s, _ = mats
    w1, _, _ = linalg._jacobi_kernel(s, 1e-14, 100)
    w2, _, _ = pure(linalg._jacobi_kernel)(s, 1e-14, 100)
    np.testing.assert_allclose(np.sort(w1), np.sort(w2), rtol=1e-13, atol=1e-14)


def test_hessenberg_and_qr(mats):
    a, _, _ = mats
    h1 = linalg._hessenberg_kernel(a)
    h2 = pure(linalg._hessenberg_kernel)(a)
    np.testing.assert_allclose(h1, h2, atol=1e-13)
    wr1, wi1, _ = linalg._hqr_kernel(h1, 60)
    wr2, wi2, _ = pure(linalg._hqr_kernel)(h1, 60)
    np.testing.assert_allclose(np.sort_complex(wr1 + 1j * wi1), np.sort_complex(wr2 + 1j * wi2), atol=1e-12)


def test_lyapunov(mats):
    _, _, h = mats
    p1, _ = linalg._lyap_kernel(h, np.eye(5))
    p2, _ = pure(linalg._lyap_kernel)(h, np.eye(5))
    np.testing.assert_allclose(p1, p2, rtol=1e-12)


def test_adt_scan():
    rng = np.random.default_rng(3)
    times = np.concatenate([[0.0], np.cumsum(rng.uniform(0.1, 1.5, 200))])
    for n0, tau in [(1, 0.5), (2, 0.7), (3, 1.2)]:
        assert signals._adt_violation(times, n0, tau, np.inf) == pure(signals._adt_violation)(times, n0, tau, np.inf)


def test_march():
    first = linalg.expm([[-0.1, 1.0], [-2.0, -0.1]], 0.3)
    step = linalg.expm([[-0.1, 1.0], [-2.0, -0.1]], 0.1)
    x = np.array([1.0, 0.5])
    np.testing.assert_allclose(sim._march(first, step, x, 50), pure(sim._march)(first, step, x, 50), rtol=1e-14)


def test_converse_enumeration():
    mats = [np.array([[-0.1, 1.0], [-2.0, -0.1]]), np.array([[-0.03, 1.0], [-1.0, -0.03]])]
    props = np.empty((2, 9, 2, 2))
    for j in range(2):
        for k in range(9):
            props[j, k] = linalg.expm(mats[j], 2.0 * k)
    args = (props, np.array([1.0, 0.5]), 0, 4, 0.04, 1.3, 10**6)
    b1, n1 = bounds._enumerate(*args)
    b2, n2 = pure(bounds._enumerate)(*args)
    assert n1 == n2
    assert b1 == pytest.approx(b2, rel=1e-13)


_SCRIPT = """
import json
from switchdwell import _jit
from switchdwell.bounds import estimate_min_adt
from switchdwell.scenarios import example1_system, run_counterexample
from switchdwell.signals import SignalClassSpec, classify
from switchdwell.scenarios import example1_signal
rep = estimate_min_adt(example1_system(), 1e-6, grid_size=16)
print(json.dumps({
    "jit": _jit.JIT_ENABLED,
    "tau": rep.tau_quad,
    "checks": [c.passed for c in run_counterexample()],
    "adt": classify(example1_signal(), SignalClassSpec.average_dwell(2.1, 2)).member,
}))
"""


@pytest.mark.parametrize("flag", ["1", "0"])
def test_env_flag_selects_backend(flag):
    env = dict(os.environ, SWITCHDWELL_DISABLE_JIT=flag)
    res = subprocess.run([sys.executable, "-c", _SCRIPT], capture_output=True, text=True, env=env, check=False)
    assert res.returncode == 0, res.stderr
    out = json.loads(res.stdout.strip().splitlines()[-1])
    assert out["jit"] is (flag == "0")
    assert all(out["checks"]) and out["adt"]
    ref = bounds.estimate_min_adt(sim.SwitchedSystem.linear(
        [[[-0.1, 1.0], [-2.0, -0.1]], [[-0.03, 1.0], [-1.0, -0.03]]]), 1e-6, grid_size=16).tau_quad
    assert out["tau"] == pytest.approx(ref, rel=1e-10)


def test_current_backend_matches_flag():
    expected = os.environ.get("SWITCHDWELL_DISABLE_JIT", "0").strip().lower() in ("", "0", "false", "no")
    assert _jit.JIT_ENABLED is expected
