"""One-dimensional marginal Gaussianization layers.

Two data-dependent elementwise maps fitted by scalar optimization over all
entries jointly (one shared parameter each):

* Yeo-Johnson power transform: lambda maximizes the profile log-likelihood
  l(lambda) = -(n/2) log Var(s(lambda, p)) + (lambda - 1) sum sign(p) log(1+|p|);
  fitted by bracketed minimization then a root polish on the analytic score.
* Lambert W x F_X tail transform: delta minimizes |Kurt(W_delta(u)) - 3|^2 with
  (mu, sigma) refined by iterated method-of-moments updates; skipped entirely
  when the input kurtosis is already <= 3.

Both layers back-propagate through the fitted scalar with the implicit function
theorem on the stationarity condition of their objective; the moment updates of
the tail layer are differentiated by taping the iterations that executed.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .errors import (
    ConvergenceError,
    DomainError,
    NumericError,
    ShapeError,
    SolverError,
    VarianceError,
)
from .solvers import Bracket, brent_minimize, brent_root, lambert_w0, w_delta

LAMBDA_LO, LAMBDA_HI = -5.0, 5.0
DELTA_LO, DELTA_HI = 1e-6, 5.0


# ---------------------------------------------------------------------------
# moment helpers (population conventions; Gaussian kurtosis = 3)


def skewness(x) -> float:
    x = np.asarray(x, float).ravel()
    xc = x - x.mean()
    m2 = np.mean(xc * xc)
    if m2 == 0.0:
        raise VarianceError("skewness undefined for constant input")
    return float(np.mean(xc**3) / m2**1.5)


def kurtosis(x) -> float:
    x = np.asarray(x, float).ravel()
    xc = x - x.mean()
    m2 = np.mean(xc * xc)
    if m2 == 0.0:
        raise VarianceError("kurtosis undefined for constant input")
    return float(np.mean(xc**4) / (m2 * m2))


# ---------------------------------------------------------------------------
# Yeo-Johnson transform: stable branch kernels


def _gratio(y):
    """(e^y (y-1) + 1) / y^2, series below |y| < 0.1."""
    y = np.asarray(y, float)
    out = np.empty_like(y)
    small = np.abs(y) < 0.1
    ys = y[small]
    out[small] = 0.5 + ys * (
        1 / 3 + ys * (1 / 8 + ys * (1 / 30 + ys * (1 / 144 + ys * (1 / 840 + ys / 5760))))
    )
    yl = y[~small]
    out[~small] = (np.exp(yl) * (yl - 1.0) + 1.0) / (yl * yl)
    return out


def _hratio(y):
    """(e^y (y^2 - 2y + 2) - 2) / y^3, series below |y| < 0.1."""
    y = np.asarray(y, float)
    out = np.empty_like(y)
    small = np.abs(y) < 0.1
    ys = y[small]
    out[small] = 1 / 3 + ys * (
        1 / 4 + ys * (1 / 10 + ys * (1 / 36 + ys * (1 / 168 + ys * (1 / 960 + ys / 6480))))
    )
    yl = y[~small]
    out[~small] = (np.exp(yl) * (yl * yl - 2.0 * yl + 2.0) - 2.0) / (yl**3)
    return out


def yeo_johnson_forward(p, lam: float):
    """Four-branch power map; identity at lambda = 1, total on finite inputs."""
    p = np.asarray(p, float)
    lam = float(lam)
    if not np.isfinite(lam):
        raise DomainError("lambda must be finite")
    s = np.empty_like(p)
    pos = p >= 0
    u = np.log1p(p[pos])
    s[pos] = u if lam == 0.0 else np.expm1(lam * u) / lam
    v = np.log1p(-p[~pos])
    mu = 2.0 - lam
    s[~pos] = -v if mu == 0.0 else -np.expm1(mu * v) / mu
    return s


def _yj_pieces(lam: float, p: np.ndarray):
    """Value plus the partials needed for the implicit gradient.

    Returns (s, t, r, q, w) with t = ds/dlam, r = ds/dp, q = d2s/dlam2,
    w = d2s/(dlam dp), all elementwise.
    """
    p = np.asarray(p, float)
    s = np.empty_like(p)
    t = np.empty_like(p)
    r = np.empty_like(p)
    q = np.empty_like(p)
    w = np.empty_like(p)

    pos = p >= 0
    u = np.log1p(p[pos])
    y = lam * u
    s[pos] = u if lam == 0.0 else np.expm1(y) / lam
    t[pos] = u * u * _gratio(y)
    q[pos] = u**3 * _hratio(y)
    r[pos] = np.exp((lam - 1.0) * u)
    w[pos] = r[pos] * u

    v = np.log1p(-p[~pos])
    mu = 2.0 - lam
    y2 = mu * v
    s[~pos] = -v if mu == 0.0 else -np.expm1(y2) / mu
    t[~pos] = v * v * _gratio(y2)
    q[~pos] = -(v**3) * _hratio(y2)
    r[~pos] = np.exp((mu - 1.0) * v)
    w[~pos] = -r[~pos] * v
    return s, t, r, q, w


def yj_loglik(lam: float, p: np.ndarray) -> float:
    """Profile log-likelihood of the power transform (up to a constant)."""
    p = np.asarray(p, float)
    s = yeo_johnson_forward(p, lam)
    var = float(np.var(s, ddof=1))
    if var <= 0.0:
        raise VarianceError("degenerate transformed variance")
    c = float(np.sum(np.sign(p) * np.log1p(np.abs(p))))
    return -0.5 * len(p) * np.log(var) + (lam - 1.0) * c


def yj_score(lam: float, p: np.ndarray) -> float:
    """Analytic d/dlambda of the profile log-likelihood."""
    p = np.asarray(p, float)
    n = p.size
    s, t, _, _, _ = _yj_pieces(lam, p)
    sc = s - s.mean()
    var = float(np.sum(sc * sc) / (n - 1))
    a = 2.0 * float(np.sum(sc * t)) / (n - 1)
    c = float(np.sum(np.sign(p) * np.log1p(np.abs(p))))
    return -0.5 * n * a / var + c


def fit_lambda(p: np.ndarray, lo: float = LAMBDA_LO, hi: float = LAMBDA_HI) -> float:
    """Maximize the profile likelihood: bracketed minimize, then root polish."""
    p = np.asarray(p, float).ravel()
    if p.size < 8:
        raise ShapeError("lambda fit requires at least 8 samples")
    if np.ptp(p) == 0.0:
        raise VarianceError("lambda fit requires non-constant input")
    lam0 = brent_minimize(lambda lam: -yj_loglik(lam, p), Bracket(lo, hi), tol=1e-6)
    if min(lam0 - lo, hi - lam0) < 1e-6:
        raise ConvergenceError(
            f"lambda optimum pinned at search-bracket edge ({lam0:.6f})", best=lam0
        )
    width = 1e-3 * (1.0 + abs(lam0))
    for _ in range(12):
        a, b = max(lo, lam0 - width), min(hi, lam0 + width)
        sa, sb = yj_score(a, p), yj_score(b, p)
        if sa * sb <= 0.0:
            return brent_root(lambda lam: yj_score(lam, p), Bracket(a, b), tol=1e-13)
        width *= 2.0
    return lam0  # score numerically flat around the minimum


def _yj_lambda_sensitivity(lam: float, p: np.ndarray) -> np.ndarray:
    """d lambda / d p at the fitted optimum via the implicit function theorem."""
    p = np.asarray(p, float)
    n = p.size
    m = n - 1
    s, t, r, q, w = _yj_pieces(lam, p)
    sc = s - s.mean()
    tc = t - t.mean()
    var = float(np.sum(sc * sc) / m)
    a = 2.0 * float(np.sum(sc * t)) / m
    b = 2.0 * (float(np.sum(tc * tc)) + float(np.sum(sc * q))) / m
    var_p = 2.0 * sc * r / m
    a_p = 2.0 * (r * tc + sc * w) / m
    # L = -(n/2) a/var + c;  dL/dlam and dL/dp_j
    l_lam = -0.5 * n * (b * var - a * a) / var**2
    l_p = -0.5 * n * (a_p * var - a * var_p) / var**2 + 1.0 / (1.0 + np.abs(p))
    if abs(l_lam) < 1e-12 * max(1.0, float(np.max(np.abs(l_p)))):
        raise NumericError("flat likelihood curvature: lambda sensitivity undefined")
    return -l_p / l_lam


def yj_lambda_t(p: ad.Var) -> ad.Var:
    """Taped fitted lambda with the IFT pullback."""
    pv = p.value.ravel()
    lam = fit_lambda(pv)
    dlam_dp = _yj_lambda_sensitivity(lam, pv).reshape(p.shape)
    return p.tape._record(np.asarray(lam), (p.index,), lambda g: (float(g) * dlam_dp,))


def yj_transform_t(p: ad.Var, lam: ad.Var) -> ad.Var:
    """Taped elementwise power map with branch partials."""
    lam_val = float(lam.value)
    s, t, r, _, _ = _yj_pieces(lam_val, p.value)
    return p.tape._record(
        s,
        (p.index, lam.index),
        lambda g: (g * r, np.asarray(float(np.sum(g * t)))),
    )


def yeo_johnson_layer_t(p: ad.Var) -> ad.Var:
    """Fit lambda on all entries jointly, then apply the transform."""
    return yj_transform_t(p, yj_lambda_t(p))


def yeo_johnson_layer(p: np.ndarray):
    """Plain-array layer; returns (transformed values, fitted lambda)."""
    p = np.asarray(p, float)
    lam = fit_lambda(p.ravel())
    return yeo_johnson_forward(p, lam), lam


# ---------------------------------------------------------------------------
# Lambert W x F_X tail layer


def _w_delta_partials(u: np.ndarray, delta: float, w: np.ndarray):
    """dw/du and dw/ddelta of w = sign(u) sqrt(W(delta u^2)/delta)."""
    t = delta * w * w
    denom = 1.0 + t
    dwdu = np.ones_like(u)
    nz = np.abs(u) > 1e-300
    dwdu[nz] = w[nz] / (u[nz] * denom[nz])
    dwdd = -(w**3) / (2.0 * denom)
    return dwdu, dwdd


def _kurt_grad_wrt_values(w: np.ndarray):
    """Gradient of Kurt(w) = m4/m2^2 with respect to each entry."""
    n = w.size
    wc = w - w.mean()
    m2 = float(np.mean(wc * wc))
    m3 = float(np.mean(wc**3))
    m4 = float(np.mean(wc**4))
    k = m4 / (m2 * m2)
    return (4.0 / n) * ((wc**3 - m3) / (m2 * m2) - k * wc / m2), k


def solve_delta(u: np.ndarray, lo: float = DELTA_LO, hi: float = DELTA_HI):
    """Tail parameter minimizing |Kurt(W_delta(u)) - 3|^2 over delta in [lo, hi].

    Searched over log delta for positivity, then polished to the kurtosis
    root when one exists in the bracket. Returns (delta, pinned): ``pinned``
    marks a constrained optimum at the bracket top where the kurtosis target
    is unreachable (the argmin is then locally constant in the data).
    """
    u = np.asarray(u, float).ravel()

    def excess(delta):
        return kurtosis(w_delta(u, delta)) - 3.0

    if excess(hi) > 0.0:
        return float(hi), True
    # coarse minimize localizes the optimum; the root polish supplies precision
    obj = lambda l: excess(np.exp(l)) ** 2
    l_hat = brent_minimize(obj, Bracket(np.log(lo), np.log(hi)), tol=1e-3)
    delta = float(np.exp(l_hat))
    width = 0.25
    for _ in range(8):
        a = max(np.log(lo), l_hat - width)
        b = min(np.log(hi), l_hat + width)
        ea, eb = excess(np.exp(a)), excess(np.exp(b))
        if ea * eb <= 0.0:
            root = brent_root(lambda l: excess(np.exp(l)), Bracket(a, b), tol=1e-14)
            return float(np.exp(root)), False
        width *= 2.0
    return delta, False


def w_delta_t(u: ad.Var, delta: ad.Var) -> ad.Var:
    """Taped elementwise heavy-tail inverse with analytic partials."""
    dval = float(delta.value)
    w = w_delta(u.value, dval)
    dwdu, dwdd = _w_delta_partials(u.value, dval, w)
    return u.tape._record(
        w,
        (u.index, delta.index),
        lambda g: (g * dwdu, np.asarray(float(np.sum(g * dwdd)))),
    )


def delta_solve_t(u: ad.Var):
    """Taped tail-parameter solve; pullback by IFT on Kurt(W_delta(u)) = 3.

    At a pinned (bracket-top) constrained optimum the solved delta is locally
    constant in the data, so its sensitivity is exactly zero.
    """
    uval = u.value.ravel()
    delta, pinned = solve_delta(uval)
    if pinned:
        sens = np.zeros(u.shape)
    else:
        w = w_delta(uval, delta)
        kw, _ = _kurt_grad_wrt_values(w)
        dwdu, dwdd = _w_delta_partials(uval, delta, w)
        k_u = (kw * dwdu).reshape(u.shape)
        k_d = float(np.sum(kw * dwdd))
        if abs(k_d) < 1e-300:
            raise NumericError("kurtosis insensitive to delta: sensitivity undefined")
        sens = -k_u / k_d
    var = u.tape._record(np.asarray(delta), (u.index,), lambda g: (float(g) * sens,))
    return var, pinned


def _igmm_core(s: ad.Var, cfg):
    """IGMM loop on the tape; returns (output Var, fitted delta or None on skip)."""
    flat = s.value.ravel()
    if flat.size < 8:
        raise ShapeError("tail layer requires at least 8 samples")
    if kurtosis(flat) <= 3.0:
        return s, None
    mu = ad.amean(s)
    sigma = ad.sqrt(ad.variance(s))
    delta = None
    pinned = False
    xi_prev = np.array([float(mu.value), float(sigma.value), 0.0])
    converged = False
    last_x = None
    for _ in range(cfg.max_inner):
        u = (s - mu) / sigma
        delta, pinned = delta_solve_t(u)
        w = w_delta_t(u, delta)
        x = w * sigma + mu
        last_x = x
        mu_new = ad.amean(x)
        sigma_new = ad.sqrt(ad.variance(x))
        xi = np.array([float(mu_new.value), float(sigma_new.value), float(delta.value)])
        mu, sigma = mu_new, sigma_new
        if float(np.linalg.norm(xi - xi_prev)) < cfg.tol:
            converged = True
            break
        xi_prev = xi
    if not converged:
        raise ConvergenceError(
            f"tail moment iteration: no convergence in {cfg.max_inner} rounds",
            best=None if last_x is None else last_x.value,
        )
    if pinned:
        raise SolverError(
            "tail solve pinned at the bracket top: kurtosis not reducible to 3"
        )
    u = (s - mu) / sigma
    return w_delta_t(u, delta) * sigma + mu, float(delta.value)


def lambert_layer_t(s: ad.Var, cfg) -> ad.Var:
    """Iterated method-of-moments tail correction (taped).

    Returns the input unchanged when its kurtosis is already <= 3; otherwise
    alternates the delta solve with (mu, sigma) moment refreshes until the
    parameter triple moves less than cfg.tol, then applies the final inverse.
    """
    out, _ = _igmm_core(s, cfg)
    return out


def lambert_layer(s: np.ndarray, cfg):
    """Plain-array layer; returns (values, fitted delta or None when skipped)."""
    tape = ad.Tape()
    out, delta = _igmm_core(tape.leaf(s), cfg)
    return out.value.copy(), delta


def standardize_t(x: ad.Var, gamma: float) -> ad.Var:
    """(x - mean)/std * gamma with one mean-removal degree of freedom."""
    if gamma <= 0:
        raise DomainError(f"temperature must be positive, got {gamma}")
    if np.ptp(x.value) == 0.0:
        raise VarianceError("standardize requires non-constant input")
    return (x - ad.amean(x)) / ad.sqrt(ad.variance(x)) * gamma


def standardize(x: np.ndarray, gamma: float) -> np.ndarray:
    tape = ad.Tape()
    return standardize_t(tape.leaf(x), gamma).value
