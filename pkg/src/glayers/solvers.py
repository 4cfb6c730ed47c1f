"""Robust one-dimensional numerical kernels.

Bracketed minimization and root finding (Brent's methods) plus the principal
branch of the Lambert W function and the heavy-tail inverse map built on it.
These are the scalar workhorses behind the data-dependent layers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BracketError, ConvergenceError, DomainError, EvaluationError

_GOLDEN = 0.3819660112501051  # (3 - sqrt(5)) / 2
_BRANCH_POINT = -math.exp(-1.0)


@dataclass(frozen=True)
class Bracket:
    """Search interval [lo, hi] with lo < hi, both finite."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise BracketError("bracket endpoints must be finite")
        if not self.lo < self.hi:
            raise BracketError(f"bracket requires lo < hi, got [{self.lo}, {self.hi}]")


def _checked(f, x):
    fx = float(f(x))
    if not math.isfinite(fx):
        raise EvaluationError(f"objective returned non-finite value {fx!r} at x={x!r}")
    return fx


def brent_minimize(f, bracket: Bracket, tol: float = 1e-10, max_iter: int = 200) -> float:
    """Minimize a scalar function on a bracket with Brent's parabolic/golden method.

    Returns x* with |x* - argmin| bounded by ~tol under unimodality, and
    guarantees f(x*) <= min(f(lo), f(hi)).
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    a, b = bracket.lo, bracket.hi
    flo, fhi = _checked(f, a), _checked(f, b)

    x = w = v = a + _GOLDEN * (b - a)
    fx = fw = fv = _checked(f, x)
    d = e = 0.0

    converged = False
    for _ in range(max_iter):
        m = 0.5 * (a + b)
        tol1 = tol * abs(x) + 0.25 * tol
        tol2 = 2.0 * tol1
        if abs(x - m) <= tol2 - 0.5 * (b - a):
            converged = True
            break
        if abs(e) > tol1:
            # trial parabolic fit through (x, w, v)
            r = (x - w) * (fx - fv)
            q = (x - v) * (fx - fw)
            p = (x - v) * q - (x - w) * r
            q = 2.0 * (q - r)
            if q > 0.0:
                p = -p
            q = abs(q)
            e_prev = e
            e = d
            if abs(p) >= abs(0.5 * q * e_prev) or p <= q * (a - x) or p >= q * (b - x):
                e = (a - x) if x >= m else (b - x)
                d = _GOLDEN * e
            else:
                d = p / q
                u = x + d
                if u - a < tol2 or b - u < tol2:
                    d = math.copysign(tol1, m - x)
        else:
            e = (a - x) if x >= m else (b - x)
            d = _GOLDEN * e
        u = x + d if abs(d) >= tol1 else x + math.copysign(tol1, d)
        fu = _checked(f, u)
        if fu <= fx:
            if u >= x:
                a = x
            else:
                b = x
            v, w, x = w, x, u
            fv, fw, fx = fw, fx, fu
        else:
            if u < x:
                a = u
            else:
                b = u
            if fu <= fw or w == x:
                v, w = w, u
                fv, fw = fw, fu
            elif fu <= fv or v == x or v == w:
                v, fv = u, fu
    # endpoint guarantee: never return worse than an endpoint
    best_x, best_f = x, fx
    if flo < best_f:
        best_x, best_f = bracket.lo, flo
    if fhi < best_f:
        best_x, best_f = bracket.hi, fhi
    if not converged:
        raise ConvergenceError(
            f"brent_minimize: no convergence in {max_iter} iterations", best=best_x
        )
    return best_x


def brent_root(g, bracket: Bracket, tol: float = 1e-10, max_iter: int = 200) -> float:
    """Find a root of g on a sign-changing bracket (Brent-Dekker method).

    Returns r with |g(r)| <= tol or enclosing-interval width <= tol.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    a, b = bracket.lo, bracket.hi
    fa, fb = _checked(g, a), _checked(g, b)
    if fa * fb > 0.0:
        raise BracketError(f"no sign change on [{a}, {b}]: g(lo)={fa}, g(hi)={fb}")
    c, fc = a, fa
    d = e = b - a
    for _ in range(max_iter):
        if abs(fc) < abs(fb):
            a, b, c = b, c, b
            fa, fb, fc = fb, fc, fb
        tol1 = 2.0 * np.finfo(float).eps * abs(b) + 0.5 * tol
        xm = 0.5 * (c - b)
        if abs(xm) <= tol1 or abs(fb) <= tol:
            return b
        if abs(e) >= tol1 and abs(fa) > abs(fb):
            s = fb / fa
            if a == c:
                p = 2.0 * xm * s
                q = 1.0 - s
            else:
                q = fa / fc
                r = fb / fc
                p = s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0))
                q = (q - 1.0) * (r - 1.0) * (s - 1.0)
            if p > 0.0:
                q = -q
            p = abs(p)
            if 2.0 * p < min(3.0 * xm * q - abs(tol1 * q), abs(e * q)):
                e = d
                d = p / q
            else:
                d = xm
                e = d
        else:
            d = xm
            e = d
        a, fa = b, fb
        b = b + (d if abs(d) > tol1 else math.copysign(tol1, xm))
        fb = _checked(g, b)
        if (fb > 0.0) == (fc > 0.0):
            c, fc = a, fa
            d = e = b - a
    raise ConvergenceError(f"brent_root: no convergence in {max_iter} iterations", best=b)


def lambert_w0(q):
    """Principal branch of the Lambert W function, W(q)·exp(W(q)) = q.

    Accepts scalars or arrays with q >= -1/e (up to machine slack); vectorized
    Halley iteration with a log-based seed for q >= 0 and the branch-point
    series seed near -1/e.
    """
    arr = np.asarray(q, dtype=float)
    scalar = arr.ndim == 0
    a = np.atleast_1d(arr).astype(float).copy()
    if np.any(a < _BRANCH_POINT - 1e-12):
        raise DomainError(f"lambert_w0 requires q >= -1/e, got min {a.min()}")
    a = np.maximum(a, _BRANCH_POINT)

    t = np.empty_like(a)
    near = a < -0.2
    if np.any(near):
        p = np.sqrt(2.0 * (1.0 + math.e * a[near]))
        t[near] = -1.0 + p - p * p / 3.0 + (11.0 / 72.0) * p**3
    t[~near] = np.log1p(a[~near])

    scale = np.maximum(np.abs(a), 1e-300)
    with np.errstate(all="ignore"):
        for _ in range(100):
            ew = np.exp(t)
            r = t * ew - a
            done = np.abs(r) <= 1e-14 * scale + 1e-300
            if np.all(done):
                break
            # Halley step; frozen (done or non-finite) entries stay put
            denom = ew * (t + 1.0) - (t + 2.0) * r / (2.0 * t + 2.0)
            step = np.where(done, 0.0, r / denom)
            step = np.where(np.isfinite(step), step, 0.0)
            t = t - step
    return float(t[0]) if scalar else t.reshape(arr.shape)


def w_delta(u, delta: float):
    """Inverse of the heavy-tail map u = s·exp((delta/2)·s^2) on the standardized scale.

    Computes sign(u)·sqrt(W(delta·u^2)/delta) for delta > 0 and the identity for
    delta = 0; odd and monotone in u.
    """
    if delta < 0:
        raise DomainError(f"w_delta requires delta >= 0, got {delta}")
    arr = np.asarray(u, dtype=float)
    if delta == 0.0:
        return float(arr) if arr.ndim == 0 else arr.copy()
    t = lambert_w0(delta * arr * arr)
    out = np.sign(arr) * np.sqrt(np.asarray(t) / delta)
    return float(out) if arr.ndim == 0 else out
