"""Vectorised adaptive Simpson quadrature.

Many independent integrals are refined together: every level of the
recursion evaluates the integrand once on the batch of all still-active
subintervals, which suits integrands that are themselves costly vectorised
minimisations.
"""
import numpy as np

__all__ = ["QuadratureError", "adaptive_simpson", "integrate_log"]


class QuadratureError(ArithmeticError):
    pass


def adaptive_simpson(f, a, b, tol=1e-12, max_depth=50):
    """Integrate ``f`` over each ``[a[k], b[k]]``.

    ``f`` maps a 1-D array of abscissae to values of the same shape. Returns an
    array with one integral per interval. Intervals with ``a > b`` yield the
    negated integral.
    """
    a = np.atleast_1d(np.asarray(a, dtype=np.float64))
    b = np.atleast_1d(np.asarray(b, dtype=np.float64))
    a, b = np.broadcast_arrays(a, b)
    total = np.zeros(a.shape)
    owner = np.arange(a.size)
    lo, hi = a.ravel().copy(), b.ravel().copy()
    keep = lo != hi
    owner, lo, hi = owner[keep], lo[keep], hi[keep]
    if owner.size == 0:
        return total
    mid = 0.5 * (lo + hi)
    vals = f(np.concatenate([lo, mid, hi]))
    flo, fmid, fhi = np.split(np.asarray(vals, dtype=np.float64), 3)
    whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)
    scale = np.abs(whole)
    eps = np.full(lo.shape, tol)
    flat = total.ravel()
    for _ in range(max_depth):
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        vals = np.asarray(f(np.concatenate([lm, rm])), dtype=np.float64)
        flm, frm = np.split(vals, 2)
        left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi)
        delta = left + right - whole
        if not np.all(np.isfinite(delta)):
            raise QuadratureError("non-finite integrand value")
        done = np.abs(delta) <= 15.0 * np.maximum(eps, 1e-15 * scale)
        np.add.at(flat, owner[done], (left + right + delta / 15.0)[done])
        act = ~done
        if not act.any():
            return total
        # split the active intervals into their halves
        owner = np.concatenate([owner[act], owner[act]])
        new_lo = np.concatenate([lo[act], mid[act]])
        new_hi = np.concatenate([mid[act], hi[act]])
        flo = np.concatenate([flo[act], fmid[act]])
        fhi = np.concatenate([fmid[act], fhi[act]])
        fmid = np.concatenate([flm[act], frm[act]])
        whole = np.concatenate([left[act], right[act]])
        scale = np.concatenate([scale[act], scale[act]])
        eps = np.concatenate([eps[act], eps[act]]) / 2.0
        lo, hi = new_lo, new_hi
        mid = 0.5 * (lo + hi)
    raise QuadratureError(f"adaptive Simpson did not converge within depth {max_depth}")


def integrate_log(g, a, b, tol=1e-12, max_depth=50):
    """Integrate ``g`` over ``[a, b]`` (positive bounds) with ``r = exp(u)``.

    Integrands behaving like ``1/r`` near the origin become bounded after the
    substitution.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if np.any(a <= 0) or np.any(b <= 0):
        raise ValueError("log substitution needs positive bounds")

    def h(u):
        r = np.exp(u)
        return np.asarray(g(r), dtype=np.float64) * r

    out = adaptive_simpson(h, np.log(a), np.log(b), tol=tol, max_depth=max_depth)
    return out.reshape(np.broadcast(a, b).shape) if np.ndim(a) or np.ndim(b) else out[0]
