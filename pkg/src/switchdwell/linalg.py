"""Small dense linear algebra: matrix exponential, Lyapunov equations and
eigenvalue routines.

Everything here targets the small matrices (n <= 20) that appear in switched
system certificates, and is implemented directly on top of numpy so that the
inner loops can be compiled by numba (see ``switchdwell._jit``).

Matrices are plain ``numpy.ndarray`` objects of dtype float64. Symmetric
positive definite matrices are wrapped in :class:`SpdMatrix`, which carries a
Cholesky factor as a witness of positive definiteness.
"""
import math

import numpy as np

from ._jit import kernel

__all__ = [
    "DEFAULT_MARGIN",
    "MAX_DIM",
    "NotHurwitzError",
    "NotPositiveDefiniteError",
    "ConvergenceError",
    "SpdMatrix",
    "as_matrix",
    "expm",
    "lyap_solve",
    "gen_eig_max",
    "symmetric_eigs",
    "symmetric_eigh",
    "eigvals_general",
    "spectral_abscissa",
    "cholesky",
    "matrix_to_json",
    "matrix_from_json",
]

#: absolute eigenvalue margin used to decide strict (semi)definiteness
DEFAULT_MARGIN = 1e-9

#: dimension cap; the Kronecker Lyapunov solve is O(n^6)
MAX_DIM = 20

_THETA_13 = 5.371920351148152
_PADE_13 = np.array(
    [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ]
)


class NotHurwitzError(ValueError):
    """Raised when a matrix that must be Hurwitz has an eigenvalue with
    non-negative real part."""

    def __init__(self, eigenvalue, message=None):
        self.eigenvalue = complex(eigenvalue)
        super().__init__(message or f"matrix is not Hurwitz: eigenvalue {self.eigenvalue}")


class NotPositiveDefiniteError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# kernels


@kernel
def _matmul(a, b):
    n, k = a.shape
    m = b.shape[1]
    out = np.zeros((n, m))
    for i in range(n):
        for p in range(k):
            aip = a[i, p]
            if aip != 0.0:
                for j in range(m):
                    out[i, j] += aip * b[p, j]
    return out


@kernel
def _gauss_solve(a, b):
    """Solve ``a @ x = b`` by Gaussian elimination with partial pivoting.

    Returns ``(x, ok)``; ``ok`` is False when a pivot vanishes.
    """
    n = a.shape[0]
    m = b.shape[1]
    lu = a.copy()
    x = b.copy()
    scale = 0.0
    for i in range(n):
        for j in range(n):
            v = abs(lu[i, j])
            if v > scale:
                scale = v
    tiny = scale * 1e-15 if scale > 0.0 else 1e-300
    for k in range(n):
        piv = k
        best = abs(lu[k, k])
        for i in range(k + 1, n):
            v = abs(lu[i, k])
            if v > best:
                best = v
                piv = i
        if best <= tiny:
            return x, False
        if piv != k:
            for j in range(n):
                tmp = lu[k, j]
                lu[k, j] = lu[piv, j]
                lu[piv, j] = tmp
            for j in range(m):
                tmp = x[k, j]
                x[k, j] = x[piv, j]
                x[piv, j] = tmp
        inv = 1.0 / lu[k, k]
        for i in range(k + 1, n):
            f = lu[i, k] * inv
            if f != 0.0:
                lu[i, k] = 0.0
                for j in range(k + 1, n):
                    lu[i, j] -= f * lu[k, j]
                for j in range(m):
                    x[i, j] -= f * x[k, j]
    for k in range(n - 1, -1, -1):
        inv = 1.0 / lu[k, k]
        for j in range(m):
            s = x[k, j]
            for p in range(k + 1, n):
                s -= lu[k, p] * x[p, j]
            x[k, j] = s * inv
    return x, True


@kernel
def _expm_kernel(a, coeffs):
    n = a.shape[0]
    norm1 = 0.0
    for j in range(n):
        s = 0.0
        for i in range(n):
            s += abs(a[i, j])
        if s > norm1:
            norm1 = s
    squarings = 0
    if norm1 > 5.371920351148152:
        squarings = int(math.ceil(math.log2(norm1 / 5.371920351148152)))
    a = a / (2.0**squarings)
    ident = np.eye(n)
    a2 = _matmul(a, a)
    a4 = _matmul(a2, a2)
    a6 = _matmul(a2, a4)
    b = coeffs
    inner_u = b[13] * a6 + b[11] * a4 + b[9] * a2
    u = _matmul(a6, inner_u) + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident
    u = _matmul(a, u)
    inner_v = b[12] * a6 + b[10] * a4 + b[8] * a2
    v = _matmul(a6, inner_v) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident
    r, ok = _gauss_solve(v - u, v + u)
    for _ in range(squarings):
        r = _matmul(r, r)
    return r, ok


@kernel
def _cholesky_kernel(s):
    n = s.shape[0]
    low = np.zeros((n, n))
    for j in range(n):
        d = s[j, j]
        for k in range(j):
            d -= low[j, k] * low[j, k]
        if not d > 0.0:
            return low, False
        low[j, j] = math.sqrt(d)
        for i in range(j + 1, n):
            v = s[i, j]
            for k in range(j):
                v -= low[i, k] * low[j, k]
            low[i, j] = v / low[j, j]
    return low, True


@kernel
def _forward_sub(low, b):
    # solves low @ x = b for lower-triangular low
    n = low.shape[0]
    m = b.shape[1]
    x = np.zeros((n, m))
    for j in range(m):
        for i in range(n):
            s = b[i, j]
            for k in range(i):
                s -= low[i, k] * x[k, j]
            x[i, j] = s / low[i, i]
    return x


@kernel
def _jacobi_kernel(s, tol, max_sweeps):
    """Cyclic Jacobi eigen-decomposition of a symmetric matrix.

    Returns ``(eigenvalues, eigenvectors, converged)``; eigenvectors are the
    columns of the second output.
    """
    n = s.shape[0]
    a = s.copy()
    v = np.eye(n)
    fro = 0.0
    for i in range(n):
        for j in range(n):
            fro += a[i, j] * a[i, j]
    fro = math.sqrt(fro)
    converged = False
    for _ in range(max_sweeps):
        off = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off += 2.0 * a[i, j] * a[i, j]
        if math.sqrt(off) <= tol * fro:
            converged = True
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + math.sqrt(1.0 + theta * theta))
                else:
                    t = -1.0 / (-theta + math.sqrt(1.0 + theta * theta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                sn = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - sn * akq
                    a[k, q] = sn * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - sn * aqk
                    a[q, k] = sn * apk + c * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - sn * vkq
                    v[k, q] = sn * vkp + c * vkq
    if not converged:
        off = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off += 2.0 * a[i, j] * a[i, j]
        converged = math.sqrt(off) <= tol * fro
    w = np.empty(n)
    for i in range(n):
        w[i] = a[i, i]
    return w, v, converged


@kernel
def _hessenberg_kernel(a):
    n = a.shape[0]
    h = a.copy()
    for k in range(n - 2):
        alpha = 0.0
        for i in range(k + 1, n):
            alpha += h[i, k] * h[i, k]
        alpha = math.sqrt(alpha)
        if alpha == 0.0:
            continue
        if h[k + 1, k] > 0.0:
            alpha = -alpha
        v = np.zeros(n)
        for i in range(k + 1, n):
            v[i] = h[i, k]
        v[k + 1] -= alpha
        vnorm = 0.0
        for i in range(k + 1, n):
            vnorm += v[i] * v[i]
        if vnorm == 0.0:
            continue
        # h <- (I - 2vv^T/|v|^2) h (I - 2vv^T/|v|^2)
        for j in range(n):
            d = 0.0
            for i in range(k + 1, n):
                d += v[i] * h[i, j]
            d = 2.0 * d / vnorm
            for i in range(k + 1, n):
                h[i, j] -= d * v[i]
        for i in range(n):
            d = 0.0
            for j in range(k + 1, n):
                d += h[i, j] * v[j]
            d = 2.0 * d / vnorm
            for j in range(k + 1, n):
                h[i, j] -= d * v[j]
        for i in range(k + 2, n):
            h[i, k] = 0.0
    return h


@kernel
def _hqr_kernel(h0, max_its):
    """Eigenvalues of an upper Hessenberg matrix by the shifted (Francis
    double-shift) QR iteration. Returns ``(re, im, ok)``."""
    n = h0.shape[0]
    # 1-based working copy keeps the index arithmetic readable
    a = np.zeros((n + 1, n + 1))
    for i in range(n):
        for j in range(n):
            a[i + 1, j + 1] = h0[i, j]
    wr = np.zeros(n + 1)
    wi = np.zeros(n + 1)
    anorm = 0.0
    for i in range(1, n + 1):
        for j in range(max(i - 1, 1), n + 1):
            anorm += abs(a[i, j])
    nn = n
    t = 0.0
    p = q = r = s = w = x = y = z = 0.0
    while nn >= 1:
        its = 0
        while True:
            l = 1
            for ll in range(nn, 1, -1):
                s = abs(a[ll - 1, ll - 1]) + abs(a[ll, ll])
                if s == 0.0:
                    s = anorm
                if abs(a[ll, ll - 1]) + s == s:
                    a[ll, ll - 1] = 0.0
                    l = ll
                    break
            x = a[nn, nn]
            if l == nn:
                wr[nn] = x + t
                wi[nn] = 0.0
                nn -= 1
            else:
                y = a[nn - 1, nn - 1]
                w = a[nn, nn - 1] * a[nn - 1, nn]
                if l == nn - 1:
                    p = 0.5 * (y - x)
                    q = p * p + w
                    z = math.sqrt(abs(q))
                    x += t
                    if q >= 0.0:
                        z = p + (z if p >= 0.0 else -z)
                        wr[nn - 1] = x + z
                        wr[nn] = x + z
                        if z != 0.0:
                            wr[nn] = x - w / z
                        wi[nn - 1] = 0.0
                        wi[nn] = 0.0
                    else:
                        wr[nn - 1] = x + p
                        wr[nn] = x + p
                        wi[nn - 1] = -z
                        wi[nn] = z
                    nn -= 2
                else:
                    if its >= max_its:
                        return wr[1:], wi[1:], False
                    if its == 10 or its == 20:
                        # exceptional shift
                        t += x
                        for i in range(1, nn + 1):
                            a[i, i] -= x
                        s = abs(a[nn, nn - 1]) + abs(a[nn - 1, nn - 2])
                        x = 0.75 * s
                        y = x
                        w = -0.4375 * s * s
                    its += 1
                    m = nn - 2
                    while m >= l:
                        z = a[m, m]
                        r = x - z
                        s = y - z
                        p = (r * s - w) / a[m + 1, m] + a[m, m + 1]
                        q = a[m + 1, m + 1] - z - r - s
                        r = a[m + 2, m + 1]
                        s = abs(p) + abs(q) + abs(r)
                        p /= s
                        q /= s
                        r /= s
                        if m == l:
                            break
                        u = abs(a[m, m - 1]) * (abs(q) + abs(r))
                        v = abs(p) * (abs(a[m - 1, m - 1]) + abs(z) + abs(a[m + 1, m + 1]))
                        if u + v == v:
                            break
                        m -= 1
                    for i in range(m + 2, nn + 1):
                        a[i, i - 2] = 0.0
                        if i != m + 2:
                            a[i, i - 3] = 0.0
                    for k in range(m, nn):
                        if k != m:
                            p = a[k, k - 1]
                            q = a[k + 1, k - 1]
                            r = 0.0
                            if k != nn - 1:
                                r = a[k + 2, k - 1]
                            x = abs(p) + abs(q) + abs(r)
                            if x != 0.0:
                                p /= x
                                q /= x
                                r /= x
                        s = math.sqrt(p * p + q * q + r * r)
                        if p < 0.0:
                            s = -s
                        if s != 0.0:
                            if k == m:
                                if l != m:
                                    a[k, k - 1] = -a[k, k - 1]
                            else:
                                a[k, k - 1] = -s * x
                            p += s
                            x = p / s
                            y = q / s
                            z = r / s
                            q /= p
                            r /= p
                            for j in range(k, nn + 1):
                                p = a[k, j] + q * a[k + 1, j]
                                if k != nn - 1:
                                    p += r * a[k + 2, j]
                                    a[k + 2, j] -= p * z
                                a[k + 1, j] -= p * y
                                a[k, j] -= p * x
                            mmin = nn if nn < k + 3 else k + 3
                            for i in range(l, mmin + 1):
                                p = x * a[i, k] + y * a[i, k + 1]
                                if k != nn - 1:
                                    p += z * a[i, k + 2]
                                    a[i, k + 2] -= p * r
                                a[i, k + 1] -= p * q
                                a[i, k] -= p
            if nn < 1 or l >= nn - 1:
                break
    return wr[1:], wi[1:], True


@kernel
def _lyap_kernel(a, q):
    """Solve ``a.T @ p + p @ a = -q`` through the Kronecker form."""
    n = a.shape[0]
    nn = n * n
    k = np.zeros((nn, nn))
    # column-major vec: vec(A^T P) = (I kron A^T) vec P, vec(P A) = (A^T kron I) vec P
    for col in range(n):
        for i in range(n):
            row = col * n + i
            for j in range(n):
                k[row, col * n + j] += a[j, i]
                k[row, j * n + i] += a[j, col]
    rhs = np.zeros((nn, 1))
    for col in range(n):
        for i in range(n):
            rhs[col * n + i, 0] = -q[i, col]
    x, ok = _gauss_solve(k, rhs)
    p = np.zeros((n, n))
    for col in range(n):
        for i in range(n):
            p[i, col] = x[col * n + i, 0]
    return 0.5 * (p + p.T), ok


# ---------------------------------------------------------------------------
# public API


def as_matrix(a, square=True, name="matrix"):
    """Coerce ``a`` to a finite float64 2-D array."""
    arr = np.array(a, dtype=np.float64, copy=True)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if square and arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return np.ascontiguousarray(arr)


def cholesky(s):
    """Lower Cholesky factor of a symmetric matrix.

    Raises
    ------
    NotPositiveDefiniteError
        If a pivot is not strictly positive.
    """
    s = as_matrix(s)
    low, ok = _cholesky_kernel(0.5 * (s + s.T))
    if not ok:
        raise NotPositiveDefiniteError("matrix is not positive definite (Cholesky pivot <= 0)")
    return low


class SpdMatrix:
    """A symmetric positive definite matrix together with its Cholesky factor.

    The input is symmetrized on construction; the factorization doubles as
    the positive-definiteness witness.
    """

    __slots__ = ("_m", "_chol")

    def __init__(self, matrix):
        m = as_matrix(matrix, name="SPD matrix")
        m = 0.5 * (m + m.T)
        self._chol = cholesky(m)
        self._chol.setflags(write=False)
        m.setflags(write=False)
        self._m = m

    @property
    def matrix(self):
        return self._m

    @property
    def cholesky_factor(self):
        return self._chol

    @property
    def n(self):
        return self._m.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self._m if dtype is None else self._m.astype(dtype)

    def quad(self, x):
        """Quadratic form ``x^T P x``."""
        x = np.asarray(x, dtype=float)
        return float(x @ self._m @ x)

    def norm(self, x):
        """Induced quadratic norm ``sqrt(x^T P x)``."""
        return math.sqrt(max(self.quad(x), 0.0))

    def eig_bounds(self):
        w = symmetric_eigs(self._m)
        return float(w[0]), float(w[-1])

    def scaled(self, c):
        return SpdMatrix(c * self._m)

    def __repr__(self):
        return f"SpdMatrix({self._m.tolist()!r})"


def expm(a, t=1.0):
    """Matrix exponential ``e^{a t}``.

    Uses scaling and squaring with the degree-13 Padé approximant; no
    balancing is performed.

    Parameters
    ----------
    a : (n, n) array_like
    t : float
        Time (may be negative).

    Returns
    -------
    (n, n) ndarray
    """
    a = as_matrix(a)
    t = float(t)
    if not math.isfinite(t):
        raise ValueError("t must be finite")
    if t == 0.0:
        return np.eye(a.shape[0])
    r, ok = _expm_kernel(a * t, _PADE_13)
    if not ok:
        raise np.linalg.LinAlgError("Padé denominator is singular")
    return r


def symmetric_eigh(s, tol=1e-14, max_sweeps=100):
    """Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric
    matrix by cyclic Jacobi rotations."""
    s = as_matrix(s)
    asym = np.max(np.abs(s - s.T)) if s.size else 0.0
    scale = max(np.max(np.abs(s)) if s.size else 0.0, 1.0)
    if asym > 1e-12 * scale:
        raise ValueError(f"matrix is not symmetric (asymmetry {asym:.3e})")
    s = 0.5 * (s + s.T)
    w, v, ok = _jacobi_kernel(s, tol, max_sweeps)
    if not ok:
        raise ConvergenceError("Jacobi iteration did not converge")
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def symmetric_eigs(s):
    """Full spectrum of a symmetric matrix, ascending."""
    return symmetric_eigh(s)[0]


def gen_eig_max(p, q):
    """Smallest ``lam`` with ``p <= lam * q`` in the Loewner order.

    Computed as the largest eigenvalue of ``L^{-1} p L^{-T}`` where
    ``q = L L^T``.
    """
    p_mat = p.matrix if isinstance(p, SpdMatrix) else as_matrix(p)
    q_spd = q if isinstance(q, SpdMatrix) else SpdMatrix(q)
    if p_mat.shape != q_spd.matrix.shape:
        raise ValueError(f"dimension mismatch: {p_mat.shape} vs {q_spd.matrix.shape}")
    low = q_spd.cholesky_factor
    y = _forward_sub(low, p_mat)  # L^{-1} P
    m = _forward_sub(low, np.ascontiguousarray(y.T))  # L^{-1} (L^{-1} P)^T
    m = 0.5 * (m + m.T)
    return float(symmetric_eigs(m)[-1])


def eigvals_general(a, max_its=60):
    """Eigenvalues of a real square matrix (Hessenberg reduction followed by
    shifted QR)."""
    a = as_matrix(a)
    n = a.shape[0]
    if n > MAX_DIM:
        raise ValueError(f"dimension {n} exceeds cap {MAX_DIM}")
    if n == 0:
        return np.zeros(0, dtype=complex)
    h = _hessenberg_kernel(a)
    wr, wi, ok = _hqr_kernel(h, max_its)
    if not ok:
        raise ConvergenceError("QR iteration did not converge")
    return wr + 1j * wi


def spectral_abscissa(a):
    """Largest real part of the eigenvalues of ``a``."""
    return float(np.max(eigvals_general(a).real))


def lyap_solve(a, q):
    """Solve ``a^T p + p a = -q`` for SPD ``p``.

    Parameters
    ----------
    a : (n, n) array_like
        Hurwitz matrix.
    q : SpdMatrix or array_like
        Symmetric positive definite right-hand side.

    Raises
    ------
    NotHurwitzError
        When ``a`` has an eigenvalue with real part >= -1e-12 (carried on the
        exception).
    numpy.linalg.LinAlgError
        When the Kronecker system is numerically singular.
    """
    a = as_matrix(a, name="A")
    q_spd = q if isinstance(q, SpdMatrix) else SpdMatrix(q)
    n = a.shape[0]
    if q_spd.n != n:
        raise ValueError(f"dimension mismatch: A is {n}x{n}, Q is {q_spd.n}x{q_spd.n}")
    if n > MAX_DIM:
        raise ValueError(f"dimension {n} exceeds cap {MAX_DIM}")
    eigs = eigvals_general(a)
    worst = eigs[np.argmax(eigs.real)]
    if worst.real >= -1e-12:
        raise NotHurwitzError(worst)
    p, ok = _lyap_kernel(a, q_spd.matrix)
    if not ok:
        raise np.linalg.LinAlgError("Kronecker Lyapunov system is singular")
    qn = np.max(np.abs(q_spd.matrix))
    resid = np.max(np.abs(a.T @ p + p @ a + q_spd.matrix))
    if resid > 1e-9 * qn:
        # one step of iterative refinement on the residual equation
        dp, ok = _lyap_kernel(a, a.T @ p + p @ a + q_spd.matrix)
        if ok:
            p = p + dp
    return SpdMatrix(p)


def matrix_to_json(a):
    a = np.asarray(a.matrix if isinstance(a, SpdMatrix) else a, dtype=float)
    return {"rows": int(a.shape[0]), "cols": int(a.shape[1]), "data": [float(v) for v in a.ravel()]}


def matrix_from_json(obj):
    try:
        rows, cols, data = int(obj["rows"]), int(obj["cols"]), obj["data"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed matrix object: {obj!r}") from exc
    if len(data) != rows * cols:
        raise ValueError(f"matrix data has {len(data)} entries, expected {rows * cols}")
    return as_matrix(np.asarray(data, dtype=float).reshape(rows, cols), square=False)
