"""JSON formats for systems, nonlinear certificates and comparison functions.

Linear systems::

    {"kind": "linear", "matrices": [{"rows": 2, "cols": 2, "data": [...]}, ...]}

(plain nested lists are accepted for matrices too).

Nonlinear systems and certificates use expression strings parsed with sympy,
in the state variables ``x1 .. xn`` and, for comparison functions, ``s``::

    {"kind": "nonlinear", "dimension": 2, "fields": [["-x1", "-x2"], ...]}
    {"V": ["x1**2 + x2**2", ...], "alpha1": "s**2", "alpha2": "s**2",
     "rho": "s", "chi": "s", "epsilon": 1.0}
"""
import json

import numpy as np

from . import linalg
from .certify import ComparisonFunction, NonlinearCertificate
from .sim import SwitchedSystem

__all__ = [
    "load_json",
    "system_to_json",
    "system_from_json",
    "comparison_from_expr",
    "nonlinear_certificate_from_json",
]


def load_json(path):
    with open(path) as fh:
        return json.load(fh)


def _matrix(obj):
    if isinstance(obj, dict):
        return linalg.matrix_from_json(obj)
    return linalg.as_matrix(np.asarray(obj, dtype=float))


def system_to_json(sys):
    if not sys.is_linear:
        raise TypeError("only linear systems serialise; nonlinear ones are defined by expressions")
    return {"kind": "linear", "matrices": [linalg.matrix_to_json(a) for a in sys.matrices]}


def _state_symbols(n):
    import sympy

    return sympy.symbols(" ".join(f"x{k + 1}" for k in range(n)) + ("," if n == 1 else ""))


def _parse(expr, symbols):
    import sympy

    try:
        parsed = sympy.sympify(expr, locals={str(s): s for s in symbols})
    except (sympy.SympifyError, SyntaxError, TypeError) as exc:
        raise ValueError(f"cannot parse expression {expr!r}: {exc}") from exc
    stray = parsed.free_symbols - set(symbols)
    if stray:
        raise ValueError(f"expression {expr!r} uses unknown symbols {sorted(map(str, stray))}")
    return parsed


def _vector_function(exprs, symbols):
    import sympy

    fn = sympy.lambdify([sympy.Matrix(symbols)], sympy.Matrix(exprs), "numpy")

    def call(x):
        return np.asarray(fn(np.asarray(x, dtype=float).reshape(-1, 1)), dtype=float).reshape(-1)

    return call


def system_from_json(obj):
    """Build a :class:`SwitchedSystem` from its JSON object."""
    try:
        kind = obj.get("kind", "linear")
        if kind == "linear":
            return SwitchedSystem.linear([_matrix(a) for a in obj["matrices"]])
        if kind == "nonlinear":
            n = int(obj["dimension"])
            syms = _state_symbols(n)
            fields = []
            for k, comps in enumerate(obj["fields"], start=1):
                if len(comps) != n:
                    raise ValueError(f"field {k} has {len(comps)} components, expected {n}")
                fields.append(_vector_function([_parse(c, syms) for c in comps], syms))
            return SwitchedSystem.nonlinear(fields, n, labels=tuple(map(tuple, obj["fields"])))
        raise ValueError(f"unknown system kind {kind!r}")
    except (KeyError, TypeError, AttributeError) as exc:
        raise ValueError(f"malformed system object: {exc}") from exc


def comparison_from_expr(expr, kind="Kinf", name=""):
    """Comparison function from an expression in ``s`` (derivative by sympy)."""
    import sympy

    s = sympy.Symbol("s")
    parsed = _parse(expr, (s,))
    f = sympy.lambdify(s, parsed, "numpy")
    df = sympy.lambdify(s, sympy.diff(parsed, s), "numpy")

    def func(v):
        return np.broadcast_to(np.asarray(f(v), dtype=float), np.shape(v)).copy()

    def deriv(v):
        return np.broadcast_to(np.asarray(df(v), dtype=float), np.shape(v)).copy()

    return ComparisonFunction(func, kind, None, deriv, name or str(expr))


def nonlinear_certificate_from_json(obj, dimension):
    """Parse a nonlinear certificate; gradients of ``V_i`` come from sympy."""
    import sympy

    try:
        syms = _state_symbols(dimension)
        vs, grads = [], []
        for expr in obj["V"]:
            parsed = _parse(expr, syms)
            f = sympy.lambdify([sympy.Matrix(syms)], parsed, "numpy")
            vs.append(lambda x, f=f: float(np.asarray(f(np.asarray(x, dtype=float).reshape(-1, 1))).reshape(-1)[0]))
            grads.append(_vector_function([sympy.diff(parsed, v) for v in syms], syms))
        return NonlinearCertificate(
            V=vs,
            grad=grads,
            alpha1=comparison_from_expr(obj["alpha1"], name="alpha1"),
            alpha2=comparison_from_expr(obj["alpha2"], name="alpha2"),
            rho_fn=comparison_from_expr(obj["rho"], obj.get("rho_kind", "K"), name="rho"),
            chi=comparison_from_expr(obj["chi"], name="chi"),
            epsilon=float(obj.get("epsilon", 1.0)),
        )
    except (KeyError, TypeError, AttributeError) as exc:
        raise ValueError(f"malformed nonlinear certificate: {exc}") from exc
