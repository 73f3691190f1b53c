"""Average-dwell-time bounds.

* :func:`tau_star`: the small-gain quantity
  ``sup_s integral_s^chi(s) dr / Psi(r)`` for nonlinear comparison data.
* :func:`estimate_min_adt`: an upper bound on the minimal ADT of a linear
  switched system from quadratic norms, via a line search over the decay
  split ``alpha``.
* :func:`empirical_converse_norm`: a lower approximation of the converse
  Lyapunov norm obtained by enumerating switching signals.
"""
import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import linalg
from ._jit import kernel
from .certify import QuadraticCertificate, check_adt_quadratic, certificate_to_json, psi_eps
from .quadrature import integrate_log

__all__ = [
    "TauStarReport",
    "AdtBoundReport",
    "ConverseDivergenceError",
    "tau_star",
    "small_gain_integral",
    "estimate_min_adt",
    "empirical_converse_norm",
    "truncation_horizon",
]

_GOLD = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_max(f, lo, hi, iters=60):
    """Maximise a scalar function on ``[lo, hi]``; returns (x, f(x))."""
    x1, x2 = hi - _GOLD * (hi - lo), lo + _GOLD * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(iters):
        if f1 > f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _GOLD * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _GOLD * (hi - lo)
            f2 = f(x2)
    return (x1, f1) if f1 > f2 else (x2, f2)


# ---------------------------------------------------------------------------
# tau*


@dataclass(frozen=True)
class TauStarReport:
    epsilon: float
    grid: tuple
    tau_star: float
    attained_s: float
    unbounded: bool = False

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["s", "integral"])
        for s, val in self.grid:
            w.writerow([repr(float(s)), repr(float(val))])
        return buf.getvalue()

    def summary(self):
        return {
            "epsilon": self.epsilon,
            "tau_star": None if self.unbounded else self.tau_star,
            "attained_s": self.attained_s,
            "unbounded": self.unbounded,
        }


def small_gain_integral(rho_fn, chi, epsilon, s, tol=1e-12):
    """``integral_s^chi(s) dr / Psi(r)`` for each ``s`` (vectorised)."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    s = np.atleast_1d(np.asarray(s, dtype=np.float64))
    top = np.asarray(chi(s), dtype=np.float64)
    return integrate_log(lambda r: 1.0 / psi_eps(rho_fn, epsilon, r), s, top, tol=tol)


def tau_star(rho_fn, chi, epsilon, s_range=(1e-3, 1e3), grid_size=64, tol=1e-12, probes=4):
    """Supremum over ``s > 0`` of the small-gain integral.

    The integral is evaluated on a log grid over ``s_range`` and the best cell
    is refined by golden-section search in ``log s``. When the maximum sits at
    an end of the grid, the search probes further out (factors of 1e3). If the
    integral keeps growing there and either ends more than ten times above the
    interior maximum or shows no sign of levelling off (the last increment is
    at least half the first), the report is flagged ``unbounded``.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    s_min, s_max = float(s_range[0]), float(s_range[1])
    if not 0 < s_min < s_max:
        raise ValueError("need 0 < s_min < s_max")
    if grid_size < 3:
        raise ValueError("grid_size must be at least 3")
    ss = np.geomspace(s_min, s_max, grid_size)
    vals = small_gain_integral(rho_fn, chi, epsilon, ss, tol)
    grid = [(float(a), float(b)) for a, b in zip(ss, vals)]
    k = int(np.argmax(vals))
    if k in (0, grid_size - 1):
        inner = vals[1:-1].max() if grid_size > 2 else vals[k]
        direction = -1.0 if k == 0 else 1.0
        probe_s = ss[k] * 10.0 ** (3.0 * direction * np.arange(1, probes + 1))
        probe_v = small_gain_integral(rho_fn, chi, epsilon, probe_s, tol)
        chain = np.concatenate([[vals[k]], probe_v])
        steps = np.diff(chain)
        growing = np.all(steps > 0)
        # either far above the interior or still climbing at an undiminished pace
        runaway = (inner > 0 and chain[-1] > 10.0 * inner) or steps[-1] >= 0.5 * steps[0]
        if growing and runaway:
            grid += [(float(a), float(b)) for a, b in zip(probe_s, probe_v)]
            grid.sort()
            return TauStarReport(epsilon, tuple(grid), math.inf, float(probe_s[-1]), True)
        j = int(np.argmax(chain))
        best_s = float(ss[k] if j == 0 else probe_s[j - 1])
        grid += [(float(a), float(b)) for a, b in zip(probe_s, probe_v)]
        grid.sort()
        return TauStarReport(epsilon, tuple(grid), float(chain[j]), best_s, False)
    cell = vals[k - 1 : k + 2]
    if cell.max() - cell.min() <= 1e-14 * abs(vals[k]):
        # flat neighbourhood: refinement cannot improve the value
        return TauStarReport(epsilon, tuple(grid), float(vals[k]), float(ss[k]), False)
    lo, hi = math.log(ss[k - 1]), math.log(ss[k + 1])
    u, val = _golden_max(lambda uu: float(small_gain_integral(rho_fn, chi, epsilon, [math.exp(uu)], tol)[0]), lo, hi, iters=40)
    if val < vals[k]:
        u, val = math.log(ss[k]), float(vals[k])
    return TauStarReport(epsilon, tuple(grid), float(val), math.exp(u), False)


# ---------------------------------------------------------------------------
# quadratic ADT bound


@dataclass(frozen=True)
class AdtBoundReport:
    rho: float
    alpha_grid: tuple  # rows (alpha, nu, tau)
    best: tuple  # (alpha*, nu*, tau*)
    certificate: QuadraticCertificate
    note: str = "quadratic-relaxation upper bound"

    @property
    def tau_quad(self):
        return self.best[2]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["alpha", "nu", "tau"])
        for row in self.alpha_grid:
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    def summary(self):
        return {
            "rho": self.rho,
            "tau_quad": self.best[2],
            "alpha_star": self.best[0],
            "nu_star": self.best[1],
            "note": self.note,
            "certificate": certificate_to_json(self.certificate),
        }

    def to_json(self):
        return json.dumps(self.summary(), indent=2)


def _adt_point(mats, rho, alpha):
    n = mats[0].shape[0]
    shift = (alpha + rho) * np.eye(n)
    ps = [linalg.lyap_solve(a + shift, np.eye(n)) for a in mats]
    mu = 1.0
    for i, pi in enumerate(ps):
        for j, pj in enumerate(ps):
            if i != j:
                mu = max(mu, linalg.gen_eig_max(pi, pj))
    nu = math.sqrt(mu)
    return ps, nu, math.log(nu) / alpha


def estimate_min_adt(sys, rho, alpha_range=(1e-3, 1e2), grid_size=64, jobs=1, margin=linalg.DEFAULT_MARGIN):
    """Quadratic upper bound on the minimal average dwell time.

    For each ``alpha`` on a log grid, ``P_i`` solves
    ``(A_i + (alpha + rho) I)^T P_i + P_i (A_i + (alpha + rho) I) = -I``, the
    jump gain is ``nu^2 = max_{i != j} lambda_max(P_i, P_j)`` and the bound is
    ``ln(nu) / alpha``. The best grid cell is refined by golden-section search
    in ``log alpha``.

    ``alpha`` must keep every ``A_i + (alpha + rho) I`` Hurwitz, so the upper
    end of ``alpha_range`` is clipped just below ``|lambda(A)| - rho``.
    """
    if not sys.is_linear:
        raise TypeError("estimate_min_adt needs a linear system")
    if not rho > 0:
        raise ValueError("rho must be positive")
    mats = sys.matrices
    abscissa = max(linalg.spectral_abscissa(a) for a in mats)
    if abscissa >= -rho:
        raise ValueError(f"rho={rho:g} is infeasible: spectral abscissa {abscissa:.6g} needs rho < {-abscissa:.6g}")
    lo, hi = float(alpha_range[0]), float(alpha_range[1])
    if not 0 < lo < hi:
        raise ValueError("need 0 < alpha_lo < alpha_hi")
    cap = (-abscissa - rho) * (1.0 - 1e-6)
    hi = min(hi, cap)
    if lo >= hi:
        lo = hi * 1e-3
    alphas = np.geomspace(lo, hi, grid_size)

    def row(alpha):
        _, nu, tau = _adt_point(mats, rho, float(alpha))
        return float(alpha), nu, tau

    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(row, alphas))
    else:
        rows = [row(a) for a in alphas]
    taus = np.array([r[2] for r in rows])
    k = int(np.argmin(taus))
    best_alpha = rows[k][0]
    if 0 < k < grid_size - 1 and taus[k] > 0:
        u, neg = _golden_max(lambda uu: -_adt_point(mats, rho, math.exp(uu))[2], math.log(alphas[k - 1]), math.log(alphas[k + 1]))
        if -neg < taus[k]:
            best_alpha = math.exp(u)
    ps, nu, tau = _adt_point(mats, rho, best_alpha)
    if nu == 1.0:
        cert = QuadraticCertificate(ps, rho, best_alpha, 1.0, 0.0)
    else:
        cert = QuadraticCertificate(ps, rho, best_alpha, nu, tau)
    verdict = check_adt_quadratic(sys, cert, margin)
    if not verdict:
        raise RuntimeError(f"emitted certificate failed its own check: {verdict}")
    return AdtBoundReport(rho, tuple(rows), (best_alpha, nu, tau), cert)


# ---------------------------------------------------------------------------
# converse norm


class ConverseDivergenceError(RuntimeError):
    """The enumerated supremum exceeded the divergence threshold: the
    certificate premise does not hold for the supplied parameters."""


def truncation_horizon(alpha, tau, M, epsilon):
    """``(1 + alpha tau + ln M) / epsilon``: beyond this time the weighted
    norm cannot exceed its value at ``s = 0``."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    return (1.0 + alpha * tau + math.log(max(M, 1.0))) / epsilon


@kernel
def _enumerate(props, x, mode, depth, rate, jump_w, budget):
    # props[j, k] = expm(A_j, k h), k = 0..G. Signals start in `mode`, switch
    # only on grid points, at most `depth` times. Returns (best, nodes).
    m = props.shape[0]
    g = props.shape[1] - 1
    n = x.shape[0]
    h_rate = rate
    best = 0.0
    for i in range(n):
        best += x[i] * x[i]
    best = np.sqrt(best)
    cap = depth + 1
    st_x = np.empty((cap * m * (g + 1), n))
    st_g = np.empty(cap * m * (g + 1), dtype=np.int64)
    st_mode = np.empty(cap * m * (g + 1), dtype=np.int64)
    st_sw = np.empty(cap * m * (g + 1), dtype=np.int64)
    top = 0
    st_x[0] = x
    st_g[0] = 0
    st_mode[0] = mode
    st_sw[0] = 0
    top = 1
    nodes = 0
    y = np.empty(n)
    while top > 0 and nodes < budget:
        top -= 1
        x0 = st_x[top].copy()
        g0 = st_g[top]
        md = st_mode[top]
        sw = st_sw[top]
        nodes += 1
        # N(0, s) for s in the segment: the origin plus every switch so far
        weight_n = 1 + sw
        for k in range(1, g - g0 + 1):
            p = props[md, k]
            nrm = 0.0
            for r in range(n):
                acc = 0.0
                for c in range(n):
                    acc += p[r, c] * x0[c]
                y[r] = acc
                nrm += acc * acc
            nrm = np.sqrt(nrm)
            val = np.exp(h_rate * (g0 + k) - jump_w * weight_n) * nrm
            if val > best:
                best = val
            if sw < depth and g0 + k < g:
                for nm in range(m):
                    if nm != md:
                        st_x[top] = y
                        st_g[top] = g0 + k
                        st_mode[top] = nm
                        st_sw[top] = sw + 1
                        top += 1
    return best, nodes


def empirical_converse_norm(
    sys,
    mode,
    x,
    rho,
    alpha,
    tau,
    branch_depth=4,
    grid_points=8,
    M=1.0,
    epsilon=None,
    horizon=None,
    node_budget=1_000_000,
    divergence=1e6,
):
    """Lower approximation of the converse norm
    ``v_i(x) = sup_{sigma(0)=i} sup_s exp((rho+alpha) s - alpha tau N(0,s)) |x_sigma(s)|``.

    Signals start in ``mode`` (1-based) and switch at most ``branch_depth``
    times, at multiples of ``horizon / grid_points``; the horizon defaults to
    :func:`truncation_horizon` with ``epsilon = rho``. The value at ``s = 0``
    is ``|x|``.
    """
    if not sys.is_linear:
        raise TypeError("empirical_converse_norm needs a linear system")
    if not 1 <= mode <= sys.mode_count:
        raise ValueError(f"mode {mode} outside 1..{sys.mode_count}")
    if branch_depth > 8 or branch_depth < 0:
        raise ValueError("branch_depth must lie in 0..8")
    if grid_points < 1:
        raise ValueError("grid_points must be positive")
    xv = np.asarray(x, dtype=np.float64).reshape(-1)
    if xv.shape != (sys.dimension,):
        raise ValueError("state dimension mismatch")
    eps = rho if epsilon is None else epsilon
    t1 = truncation_horizon(alpha, tau, M, eps) if horizon is None else float(horizon)
    h = t1 / grid_points
    m, n = sys.mode_count, sys.dimension
    props = np.empty((m, grid_points + 1, n, n))
    for j, a in enumerate(sys.matrices):
        step = linalg.expm(a, h)
        props[j, 0] = np.eye(n)
        for k in range(1, grid_points + 1):
            props[j, k] = linalg.expm(a, k * h) if k % 8 == 0 else props[j, k - 1] @ step
    best, _ = _enumerate(
        props, xv, int(mode) - 1, int(branch_depth), (rho + alpha) * h, alpha * tau, int(node_budget)
    )
    if best > divergence * float(np.linalg.norm(xv)):
        raise ConverseDivergenceError(
            f"enumerated value {best:.3g} exceeds {divergence:g} |x|: the system is not certified for these parameters"
        )
    return float(best)
