"""Multiple-Lyapunov certificates for switched systems.

Two families of quadratic certificates are handled for linear systems:

* dwell-time certificates, which involve the flow of each mode over one dwell
  interval;
* flow-free average-dwell-time (ADT) certificates, with a per-mode decay
  ``P_i A_i + A_i^T P_i < -2 (alpha + rho) P_i`` and a jump gain
  ``P_i <= nu^2 P_j``.

Nonlinear certificates are only checked on finite sample sets.

Strict matrix inequalities are decided with an absolute eigenvalue margin.
"""
import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .linalg import DEFAULT_MARGIN, SpdMatrix
from .quadrature import integrate_log

__all__ = [
    "Verdict",
    "QuadraticCertificate",
    "NotFound",
    "check_dwell_quadratic",
    "search_dwell_quadratic",
    "check_adt_quadratic",
    "ComparisonFunction",
    "NonlinearCertificate",
    "SampleVerdict",
    "SampleEvaluationError",
    "check_nonlinear_sampled",
    "default_samples",
    "psi_eps",
    "gamma_transform",
    "certificate_to_json",
    "certificate_from_json",
]

# relative slack for the non-strict conditions (jump gain, tau bound)
LOOSE_RTOL = 1e-9


@dataclass(frozen=True)
class Verdict:
    """Outcome of a certificate check; falsy when a condition fails.

    ``condition`` names the first failing condition (``"flow"``, ``"jump"``,
    ``"gain"`` or ``"tau"``), ``pair`` its 1-based mode indices and ``margin``
    the amount by which it fails (positive). ``failures`` lists every failing
    condition.
    """

    certified: bool
    condition: str = None
    pair: tuple = None
    margin: float = None
    failures: tuple = ()

    def __bool__(self):
        return self.certified

    def to_json(self):
        out = {"verdict": "certified" if self.certified else "failed"}
        if not self.certified:
            out.update(condition=self.condition, pair=list(self.pair), margin=self.margin)
            out["failures"] = [{"condition": c, "pair": list(p), "margin": m} for c, p, m in self.failures]
        return out


def _verdict(failures):
    if not failures:
        return Verdict(True)
    cond, pair, margin = failures[0]
    return Verdict(False, cond, pair, margin, tuple(failures))


@dataclass(frozen=True)
class QuadraticCertificate:
    """Quadratic norms ``v_i(x) = sqrt(x^T P_i x)`` with their parameters.

    ``kind`` is ``"adt"`` for flow-free certificates and ``"dwell"`` for
    dwell-time ones (which carry ``alpha = 0`` and ``nu = 1``).
    """

    P: tuple
    rho: float
    alpha: float
    nu: float
    tau: float
    kind: str = "adt"

    def __post_init__(self):
        ps = tuple(p if isinstance(p, SpdMatrix) else SpdMatrix(p) for p in self.P)
        object.__setattr__(self, "P", ps)
        if not ps:
            raise ValueError("a certificate needs at least one matrix")
        if len({p.n for p in ps}) != 1:
            raise ValueError("all P_i must share a dimension")
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if not self.alpha >= 0:
            raise ValueError("alpha must be non-negative")
        if not self.nu >= 1:
            raise ValueError("nu must be >= 1")
        if self.alpha == 0 and self.nu != 1:
            raise ValueError("alpha = 0 requires nu = 1 (common Lyapunov function)")
        # tau = 0 only makes sense for a unit jump gain
        if not (self.tau > 0 or (self.tau == 0 and self.nu == 1)):
            raise ValueError("tau must be positive")
        if self.kind not in ("adt", "dwell"):
            raise ValueError(f"unknown certificate kind {self.kind!r}")

    @property
    def overshoot(self):
        """``M = sqrt(max lambda_max(P_i) / min lambda_min(P_i))``."""
        lo = min(p.eig_bounds()[0] for p in self.P)
        hi = max(p.eig_bounds()[1] for p in self.P)
        return math.sqrt(hi / lo)

    def envelope(self):
        from .sim import DecayEnvelope

        return DecayEnvelope(self.overshoot, self.rho, self.alpha, self.tau if self.tau > 0 else 1.0)


class NotFound:
    """Search exhausted without a certificate (not a proof of infeasibility
    unless ``lower_bound > 0``)."""

    def __init__(self, reason, iterations=0, lower_bound=None):
        self.reason = reason
        self.iterations = iterations
        self.lower_bound = lower_bound

    def __bool__(self):
        return False

    def __repr__(self):
        return f"NotFound({self.reason!r}, iterations={self.iterations})"


def _mats(sys):
    if not sys.is_linear:
        raise TypeError("quadratic certificates need a linear system")
    return sys.matrices


def _as_spd_list(P, n, m):
    ps = [p if isinstance(p, SpdMatrix) else SpdMatrix(p) for p in P]
    if len(ps) != m:
        raise ValueError(f"{len(ps)} matrices for {m} modes")
    for p in ps:
        if p.n != n:
            raise ValueError(f"P has dimension {p.n}, system has {n}")
    return ps


def _lmax(s):
    return float(linalg.symmetric_eigs(0.5 * (s + s.T))[-1])


def check_dwell_quadratic(sys, P, rho, tau, margin=DEFAULT_MARGIN):
    """Dwell-time conditions for quadratic norms.

    * flow: ``A_i^T P_i + P_i A_i + 2 rho P_i < 0`` for every mode;
    * jump: ``E_i^T P_j E_i - exp(-2 rho tau) P_i < 0`` for every pair, with
      ``E_i = expm(A_i tau)`` (flow in mode ``i``, then measure with ``v_j``).
    """
    if not rho > 0 or not tau > 0:
        raise ValueError("rho and tau must be positive")
    mats = _mats(sys)
    ps = _as_spd_list(P, sys.dimension, sys.mode_count)
    failures = []
    for i, (a, p) in enumerate(zip(mats, ps), start=1):
        pm = p.matrix
        lam = _lmax(a.T @ pm + pm @ a + 2.0 * rho * pm)
        if lam >= -margin:
            failures.append(("flow", (i, i), lam + margin))
    decay = math.exp(-2.0 * rho * tau)
    for i, a in enumerate(mats, start=1):
        e = linalg.expm(a, tau)
        for j, pj in enumerate(ps, start=1):
            lam = _lmax(e.T @ pj.matrix @ e - decay * ps[i - 1].matrix)
            if lam >= -margin:
                failures.append(("jump", (i, j), lam + margin))
    return _verdict(failures)


def check_adt_quadratic(sys, cert, margin=DEFAULT_MARGIN):
    """Flow-free ADT conditions.

    * flow: ``P_i A_i + A_i^T P_i + 2 (alpha + rho) P_i < 0``;
    * gain: ``P_i <= nu^2 P_j`` for ``i != j``;
    * tau: ``tau >= ln(nu) / alpha`` (vacuous when ``nu = 1``).
    """
    mats = _mats(sys)
    ps = _as_spd_list(cert.P, sys.dimension, sys.mode_count)
    failures = []
    rate = 2.0 * (cert.alpha + cert.rho)
    for i, (a, p) in enumerate(zip(mats, ps), start=1):
        pm = p.matrix
        lam = _lmax(a.T @ pm + pm @ a + rate * pm)
        if lam >= -margin:
            failures.append(("flow", (i, i), lam + margin))
    mu = cert.nu**2
    for i, pi in enumerate(ps, start=1):
        for j, pj in enumerate(ps, start=1):
            if i == j:
                continue
            g = linalg.gen_eig_max(pi, pj)
            if g > mu * (1.0 + LOOSE_RTOL):
                failures.append(("gain", (i, j), g - mu))
    if cert.nu > 1.0:
        need = math.log(cert.nu) / cert.alpha
        if cert.tau < need * (1.0 - LOOSE_RTOL):
            failures.append(("tau", (0, 0), need - cert.tau))
    return _verdict(failures)


# ---------------------------------------------------------------------------
# dwell-time certificate search


def _sym_basis(n):
    basis = []
    for r in range(n):
        for c in range(r, n):
            b = np.zeros((n, n))
            b[r, c] = b[c, r] = 1.0
            basis.append(b)
    return basis


def _dwell_conditions(mats, rho, tau, bound):
    """Affine matrix maps ``C(p) = sum_l p_l L_l + K`` whose negativity is the
    dwell-time LMI system with ``I <= P_i <= bound I``."""
    m, n = len(mats), mats[0].shape[0]
    basis = _sym_basis(n)
    d = len(basis)
    eye = np.eye(n)
    decay = math.exp(-2.0 * rho * tau)
    props = [linalg.expm(a, tau) for a in mats]
    conds = []  # (name, pair, strict, lin[nparams, n, n], const[n, n])

    def blank():
        return np.zeros((m * d, n, n))

    for i, a in enumerate(mats):
        lin = blank()
        for l, b in enumerate(basis):
            lin[i * d + l] = a.T @ b + b @ a + 2.0 * rho * b
        conds.append(("flow", (i + 1, i + 1), True, lin, np.zeros((n, n))))
    for i, e in enumerate(props):
        for j in range(m):
            lin = blank()
            for l, b in enumerate(basis):
                lin[j * d + l] += e.T @ b @ e
                lin[i * d + l] -= decay * b
            conds.append(("jump", (i + 1, j + 1), True, lin, np.zeros((n, n))))
    for i in range(m):
        lower, upper = blank(), blank()
        for l, b in enumerate(basis):
            lower[i * d + l] = -b
            upper[i * d + l] = b
        conds.append(("lower", (i + 1, i + 1), False, lower, eye.copy()))
        conds.append(("upper", (i + 1, i + 1), False, upper, -bound * eye))
    return basis, conds


def search_dwell_quadratic(sys, rho, tau, budget=500, margin=DEFAULT_MARGIN, bound=100.0):
    """Look for ``P_i`` with ``I <= P_i <= bound I`` satisfying the dwell-time
    conditions.

    The conditions are affine in the entries of the ``P_i``, so the largest
    eigenvalue over all of them is a convex function of those entries. It is
    minimised with Kelley's cutting-plane method: every iteration solves a
    linear program over the supporting hyperplanes collected so far (one per
    condition and query point, from the top eigenvector). The search starts
    from ``P_i`` solving ``(A_i + rho I)^T P_i + P_i (A_i + rho I) = -I``.

    Returns a :class:`QuadraticCertificate` (``kind="dwell"``) that passes
    :func:`check_dwell_quadratic`, or :class:`NotFound`. When the linear
    program's lower bound turns positive, no certificate exists in the box
    and the search stops early.
    """
    from scipy.optimize import linprog

    if not rho > 0 or not tau > 0:
        raise ValueError("rho and tau must be positive")
    mats = _mats(sys)
    for i, a in enumerate(mats, start=1):
        lam = linalg.spectral_abscissa(a)
        if lam >= -rho:
            raise ValueError(f"mode {i} has spectral abscissa {lam:.6g} >= -rho")
    m, n = len(mats), mats[0].shape[0]
    basis, conds = _dwell_conditions(mats, rho, tau, bound)
    d = len(basis)
    npar = m * d

    def unpack(p):
        return [sum(p[i * d + l] * basis[l] for l in range(d)) for i in range(m)]

    def pack(ps):
        out = np.zeros(npar)
        for i, pm in enumerate(ps):
            out[i * d : (i + 1) * d] = [pm[r, c] for r in range(n) for c in range(r, n)]
        return out

    seed = [linalg.lyap_solve(a + rho * np.eye(n), np.eye(n)).matrix for a in mats]
    lo_eig = min(float(linalg.symmetric_eigs(s)[0]) for s in seed)
    hi_eig = max(float(linalg.symmetric_eigs(s)[-1]) for s in seed)
    # place the seed inside the box when its conditioning allows it
    scale = 1.0 / lo_eig if hi_eig / lo_eig <= bound else 2.0 / (lo_eig + hi_eig) * math.sqrt(bound)
    point = pack([scale * s for s in seed])

    rows, rhs = [], []
    lower_bound = -math.inf
    for it in range(1, budget + 1):
        worst = -math.inf
        for name, pair, strict, lin, const in conds:
            c = np.tensordot(point, lin, axes=1) + const
            w, v = linalg.symmetric_eigh(0.5 * (c + c.T))
            lam = float(w[-1])
            # strict conditions need a margin, the box bounds do not
            worst = max(worst, lam + margin if strict else lam)
            vec = v[:, -1]
            grad = np.einsum("i,lij,j->l", vec, lin, vec)
            rows.append(np.append(grad, -1.0))
            rhs.append(-float(vec @ const @ vec))
        if worst < 0:
            ps = unpack(point)
            try:
                cert = QuadraticCertificate(ps, rho, 0.0, 1.0, tau, kind="dwell")
            except linalg.NotPositiveDefiniteError:
                cert = None
            if cert is not None and check_dwell_quadratic(sys, cert.P, rho, tau, margin):
                return cert
        res = linprog(
            c=np.append(np.zeros(npar), 1.0),
            A_ub=np.asarray(rows),
            b_ub=np.asarray(rhs),
            bounds=[(-bound, bound)] * npar + [(-10.0 * bound, None)],
            method="highs",
        )
        if res.status != 0:
            return NotFound(f"cutting-plane LP failed: {res.message}", it, lower_bound)
        lower_bound = float(res.x[-1])
        if lower_bound > 0:
            return NotFound(
                f"no certificate with I <= P_i <= {bound:g} I (cutting-plane lower bound {lower_bound:.3g} > 0)",
                it,
                lower_bound,
            )
        point = res.x[:npar]
    return NotFound(f"budget of {budget} iterations exhausted", budget, lower_bound)


# ---------------------------------------------------------------------------
# comparison functions


def _bisect_inverse(f, y, kind):
    y = np.asarray(y, dtype=np.float64)
    if np.any(y < 0):
        raise ValueError("comparison functions are inverted on [0, inf)")
    hi = np.maximum(y, 1.0)
    for _ in range(200):
        short = f(hi) < y
        if not short.any():
            break
        hi = np.where(short, hi * 2.0, hi)
    else:
        raise ValueError("value outside the range of a bounded class-K function")
    lo = np.zeros_like(hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        below = f(mid) < y
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= 4e-16 * np.maximum(hi, 1e-300)):
            break
    return np.where(y == 0, 0.0, 0.5 * (lo + hi))


@dataclass(frozen=True)
class ComparisonFunction:
    """A class-K (``kind="K"``) or class-K-infinity (``kind="Kinf"``) function.

    ``func`` must accept numpy arrays. Inverse and derivative fall back to
    bisection and central differences when not supplied.
    """

    func: object
    kind: str = "Kinf"
    inverse: object = None
    derivative: object = None
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("K", "Kinf"):
            raise ValueError("kind must be 'K' or 'Kinf'")

    def _apply(self, g, s):
        arr = np.asarray(s, dtype=np.float64)
        out = np.asarray(g(arr), dtype=np.float64)
        if out.shape != arr.shape:
            out = np.broadcast_to(out, arr.shape).copy()
        return float(out) if out.ndim == 0 else out

    def __call__(self, s):
        return self._apply(self.func, s)

    def inv(self, y):
        if self.inverse is not None:
            return self._apply(self.inverse, y)
        return self._apply(lambda v: _bisect_inverse(self.func, v, self.kind), y)

    def deriv(self, s):
        if self.derivative is not None:
            return self._apply(self.derivative, s)

        def central(arr):
            h = 1e-6 * np.maximum(arr, 1e-3)
            lo = np.maximum(arr - h, 0.0)
            return (self.func(arr + h) - self.func(lo)) / (arr + h - lo)

        return self._apply(central, s)

    def validate(self, grid=None, probe=1e12):
        """Sampled class membership: ``f(0) = 0``, strictly increasing on the
        grid, and (for K-infinity) ``f(probe) > 10 f(1)``."""
        if grid is None:
            grid = np.geomspace(1e-6, 1e6, 241)
        grid = np.sort(np.asarray(grid, dtype=np.float64))
        if self(0.0) != 0.0:
            raise ValueError(f"{self.name or 'function'}: f(0) = {self(0.0)} != 0")
        vals = self(grid)
        if not np.all(np.diff(vals) > 0) or vals[0] <= 0:
            raise ValueError(f"{self.name or 'function'}: not strictly increasing on the grid")
        if self.kind == "Kinf" and not self(probe) > 10.0 * self(1.0):
            raise ValueError(f"{self.name or 'function'}: does not look unbounded")
        return True

    # constructors

    @classmethod
    def linear(cls, c, name=""):
        c = float(c)
        if not c > 0:
            raise ValueError("slope must be positive")
        return cls(lambda s: c * s, "Kinf", lambda y: y / c, lambda s: np.full_like(s, c), name or f"{c:g}*s")

    @classmethod
    def power(cls, c, p, name=""):
        c, p = float(c), float(p)
        if not (c > 0 and p > 0):
            raise ValueError("coefficient and exponent must be positive")
        return cls(
            lambda s: c * np.power(s, p),
            "Kinf",
            lambda y: np.power(y / c, 1.0 / p),
            lambda s: c * p * np.power(s, p - 1.0),
            name or f"{c:g}*s^{p:g}",
        )

    @classmethod
    def identity(cls):
        return cls.linear(1.0, "s")


def psi_eps(rho_fn, epsilon, t, grid=65, iters=80):
    """``min over s in [0, t] of rho(s) + epsilon (t - s)``, vectorised in t.

    A uniform scan locates the best cell, golden-section search refines it;
    the endpoints ``s = 0`` and ``s = t`` are always included.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr < 0):
        raise ValueError("psi is defined for t >= 0")
    tv = t_arr.reshape(-1, 1)
    u = np.linspace(0.0, 1.0, grid).reshape(1, -1)

    def obj(uu):
        s = tv * uu
        return np.asarray(rho_fn(s), dtype=np.float64) + epsilon * (tv - s)

    vals = obj(u)
    k = np.argmin(vals, axis=1)
    best = vals[np.arange(vals.shape[0]), k]
    lo = (np.maximum(k - 1, 0) / (grid - 1)).reshape(-1, 1)
    hi = (np.minimum(k + 1, grid - 1) / (grid - 1)).reshape(-1, 1)
    g = (math.sqrt(5.0) - 1.0) / 2.0
    x1, x2 = hi - g * (hi - lo), lo + g * (hi - lo)
    f1, f2 = obj(x1), obj(x2)
    for _ in range(iters):
        left = f1 < f2
        hi = np.where(left, x2, hi)
        lo = np.where(left, lo, x1)
        fresh = np.where(left, hi - g * (hi - lo), lo + g * (hi - lo))
        fv = obj(fresh)
        x1, x2 = np.where(left, fresh, x2), np.where(left, x1, fresh)
        f1, f2 = np.where(left, fv, f2), np.where(left, f1, fv)
        if np.max(hi - lo) < 1e-15:
            break
    best = np.minimum(best, np.minimum(f1, f2).ravel())
    out = np.where(t_arr.ravel() == 0.0, 0.0, best).reshape(t_arr.shape)
    return float(out) if out.ndim == 0 else out


def gamma_transform(rho_fn, epsilon, alpha, tau=None, tol=1e-12):
    """The rescaling ``gamma(s) = exp((1 + alpha) * integral_1^s dr / Psi(r))``.

    ``Psi`` is :func:`psi_eps` of ``rho_fn``. Composing multiple Lyapunov
    functions with ``gamma`` turns the decay ``-rho(V)`` into the linear
    ``-(1 + alpha) W``. When ``tau`` is given the expected jump gain
    ``exp(alpha tau)`` is attached as ``jump_gain``.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    k = 1.0 + alpha

    def log_gamma(s):
        s = np.asarray(s, dtype=np.float64)
        flat = s.ravel()
        out = np.full(flat.shape, -np.inf)
        pos = flat > 0
        if pos.any():
            out[pos] = k * integrate_log(
                lambda r: 1.0 / psi_eps(rho_fn, epsilon, r), np.ones(pos.sum()), flat[pos], tol=tol
            )
        return out.reshape(s.shape)

    def func(s):
        return np.exp(log_gamma(s))

    def deriv(s):
        s = np.asarray(s, dtype=np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(s > 0, func(s) * k / psi_eps(rho_fn, epsilon, np.maximum(s, 1e-300)), 0.0)

    gamma = ComparisonFunction(func, "Kinf", None, deriv, name="gamma")
    if tau is not None:
        object.__setattr__(gamma, "jump_gain", math.exp(alpha * tau))
    return gamma


# ---------------------------------------------------------------------------
# sampled nonlinear certificates


@dataclass(frozen=True)
class NonlinearCertificate:
    """Per-mode functions ``V_i`` with the comparison functions of the
    sandwich, decay and jump conditions."""

    V: tuple
    alpha1: ComparisonFunction
    alpha2: ComparisonFunction
    rho_fn: ComparisonFunction
    chi: ComparisonFunction
    epsilon: float = 1.0
    grad: tuple = None

    def __post_init__(self):
        object.__setattr__(self, "V", tuple(self.V))
        if self.grad is not None:
            object.__setattr__(self, "grad", tuple(self.grad))
            if len(self.grad) != len(self.V):
                raise ValueError("one gradient per function")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    @classmethod
    def from_quadratic(cls, cert):
        """Squared quadratic norms ``V_i = x^T P_i x`` with linear comparison
        functions."""
        ps = [p.matrix for p in cert.P]
        lo = min(p.eig_bounds()[0] for p in cert.P)
        hi = max(p.eig_bounds()[1] for p in cert.P)
        return cls(
            V=[(lambda x, p=p: float(x @ p @ x)) for p in ps],
            grad=[(lambda x, p=p: 2.0 * (p @ x)) for p in ps],
            alpha1=ComparisonFunction.power(lo, 2.0),
            alpha2=ComparisonFunction.power(hi, 2.0),
            rho_fn=ComparisonFunction.linear(2.0 * (cert.alpha + cert.rho)),
            chi=ComparisonFunction.linear(cert.nu**2),
            epsilon=2.0 * (cert.alpha + cert.rho),
        )


@dataclass(frozen=True)
class SampleVerdict:
    """``consistent`` is never a proof: conditions were only sampled."""

    consistent: bool
    point: tuple = None
    condition: str = None
    pair: tuple = None
    lhs: float = None
    rhs: float = None

    def __bool__(self):
        return self.consistent

    def to_json(self):
        if self.consistent:
            return {"verdict": "consistent_on_samples"}
        return {
            "verdict": "violated",
            "point": list(self.point),
            "condition": self.condition,
            "pair": list(self.pair),
            "lhs": self.lhs,
            "rhs": self.rhs,
        }


class SampleEvaluationError(RuntimeError):
    pass


def default_samples(n, radii=None, directions=None, seed=0):
    """Scaled spherical grid: log-spaced radii times unit directions."""
    if radii is None:
        radii = np.geomspace(1e-2, 1e2, 9)
    if n == 1:
        dirs = np.array([[1.0], [-1.0]])
    elif n == 2:
        k = 64 if directions is None else directions
        ang = 2.0 * math.pi * np.arange(k) / k
        dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    else:
        k = 200 if directions is None else directions
        raw = np.random.default_rng(seed).standard_normal((k, n))
        dirs = raw / np.linalg.norm(raw, axis=1, keepdims=True)
    return np.concatenate([r * dirs for r in radii])


def _rk4_step(f, x, h):
    k1 = np.asarray(f(x), dtype=np.float64)
    k2 = np.asarray(f(x + 0.5 * h * k1), dtype=np.float64)
    k3 = np.asarray(f(x + 0.5 * h * k2), dtype=np.float64)
    k4 = np.asarray(f(x + h * k3), dtype=np.float64)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def check_nonlinear_sampled(sys, cert, samples=None, h=1e-4, slack=1e-3, rtol=1e-9):
    """Check the sandwich, decay and jump conditions at sample points.

    The decay ``D+ V_i(x) <= -rho(V_i(x))`` uses the gradient when the
    certificate provides one, otherwise the forward quotient over one RK4 step
    of length ``h``; a slack of ``slack * rho(V_i(x))`` absorbs the
    discretisation error.
    """
    m = sys.mode_count
    if len(cert.V) != m:
        raise ValueError(f"{len(cert.V)} functions for {m} modes")
    pts = default_samples(sys.dimension) if samples is None else np.atleast_2d(np.asarray(samples, dtype=np.float64))
    if pts.shape[1] != sys.dimension:
        raise ValueError("sample dimension does not match the system")
    for x in pts:
        r = float(np.linalg.norm(x))
        if r == 0.0:
            raise ValueError("samples must avoid the origin")
        try:
            vals = [float(v(x)) for v in cert.V]
        except Exception as exc:  # user callbacks may raise anything
            raise SampleEvaluationError(f"V evaluation failed at {x.tolist()}: {exc}") from exc
        lo, hi = cert.alpha1(r), cert.alpha2(r)
        for i, v in enumerate(vals, start=1):
            if v < lo * (1.0 - rtol) or v > hi * (1.0 + rtol):
                return SampleVerdict(False, tuple(x), "sandwich", (i, i), v, hi if v > hi else lo)
        for i, v in enumerate(vals, start=1):
            f = sys.field(i)
            bound = -cert.rho_fn(v)
            try:
                if cert.grad is not None:
                    rate = float(np.dot(cert.grad[i - 1](x), f(x)))
                else:
                    rate = (float(cert.V[i - 1](_rk4_step(f, x, h))) - v) / h
            except Exception as exc:
                raise SampleEvaluationError(f"flow evaluation failed at {x.tolist()}: {exc}") from exc
            if rate > bound + slack * abs(bound):
                return SampleVerdict(False, tuple(x), "flow", (i, i), rate, bound)
        for i, vi in enumerate(vals, start=1):
            for j, vj in enumerate(vals, start=1):
                if i == j:
                    continue
                cap = cert.chi(vj)
                if vi > cap * (1.0 + rtol):
                    return SampleVerdict(False, tuple(x), "jump", (i, j), vi, cap)
    return SampleVerdict(True)


# ---------------------------------------------------------------------------
# JSON


def certificate_to_json(cert):
    return {
        "P": [linalg.matrix_to_json(p) for p in cert.P],
        "rho": cert.rho,
        "alpha": cert.alpha,
        "nu": cert.nu,
        "tau": cert.tau,
        "kind": cert.kind,
    }


def certificate_from_json(obj):
    if isinstance(obj, dict) and "P" not in obj and "certificate" in obj:
        obj = obj["certificate"]  # report summaries nest the certificate
    try:
        return QuadraticCertificate(
            [linalg.matrix_from_json(p) for p in obj["P"]],
            float(obj["rho"]),
            float(obj.get("alpha", 0.0)),
            float(obj.get("nu", 1.0)),
            float(obj["tau"]),
            obj.get("kind", "adt"),
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed certificate object: {exc}") from exc
