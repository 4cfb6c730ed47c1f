import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glayers.errors import BracketError, ConvergenceError, DomainError, EvaluationError
from glayers.solvers import Bracket, brent_minimize, brent_root, lambert_w0, w_delta


def yj_forward(lam, p):
    p = np.asarray(p, dtype=float)
    out = np.empty_like(p)
    pos = p >= 0
    if lam != 0:
        out[pos] = ((p[pos] + 1.0) ** lam - 1.0) / lam
    else:
        out[pos] = np.log1p(p[pos])
    if lam != 2:
        out[~pos] = -((1.0 - p[~pos]) ** (2.0 - lam) - 1.0) / (2.0 - lam)
    else:
        out[~pos] = -np.log1p(-p[~pos])
    return out


def yj_loglik(lam, p):
    s = yj_forward(lam, p)
    n = len(p)
    var = np.var(s)
    return -0.5 * n * np.log(var) + (lam - 1.0) * np.sum(np.sign(p) * np.log1p(np.abs(p)))


SKEWED = np.array([0.0, 0.1, 0.2, 0.5, 5.0])


def grid_argmax_lambda(p, lo=-5.0, hi=5.0, step=1e-4):
    grid = np.arange(lo, hi + step, step)
    vals = np.array([yj_loglik(l, p) for l in grid])
    return grid[int(np.argmax(vals))]


class TestBracket:
    def test_invalid_order(self):
        with pytest.raises(BracketError):
            Bracket(2.0, 1.0)

    def test_non_finite(self):
        with pytest.raises(BracketError):
            Bracket(0.0, math.inf)


class TestBrentMinimize:
    def test_quadratic(self):
        x = brent_minimize(lambda x: (x - 2.0) ** 2, Bracket(0.0, 5.0), tol=1e-10)
        assert abs(x - 2.0) <= 1e-8

    def test_abs(self):
        x = brent_minimize(abs, Bracket(-1.0, 3.0), tol=1e-10)
        assert abs(x) <= 1e-8

    def test_yeo_johnson_likelihood(self):
        # grid-search oracle over lambda in [-5, 5], step 1e-4
        lam_grid = grid_argmax_lambda(SKEWED)
        lam = brent_minimize(lambda l: -yj_loglik(l, SKEWED), Bracket(-5.0, 5.0))
        assert lam < 1.0
        assert abs(lam - lam_grid) <= 2e-4

    def test_endpoint_guarantee(self):
        f = lambda x: x  # monotone: minimum at the left endpoint
        x = brent_minimize(f, Bracket(0.0, 1.0))
        assert f(x) <= min(f(0.0), f(1.0))

    def test_non_finite_eval(self):
        with pytest.raises(EvaluationError):
            brent_minimize(lambda x: math.nan, Bracket(0.0, 1.0))

    def test_max_iter_carries_best(self):
        with pytest.raises(ConvergenceError) as err:
            brent_minimize(lambda x: (x - 2.0) ** 2, Bracket(0.0, 5.0), tol=1e-14, max_iter=3)
        assert err.value.best is not None


class TestBrentRoot:
    def test_parabola(self):
        r = brent_root(lambda x: x * x - 4.0, Bracket(0.0, 5.0))
        assert abs(r - 2.0) <= 1e-9

    def test_identity(self):
        r = brent_root(lambda x: x, Bracket(-1.0, 1.0))
        assert abs(r) <= 1e-9

    def test_likelihood_stationary_point(self):
        # central-difference derivative of the grid-evaluated likelihood
        h = 1e-6
        g = lambda l: (yj_loglik(l + h, SKEWED) - yj_loglik(l - h, SKEWED)) / (2 * h)
        lam0 = brent_minimize(lambda l: -yj_loglik(l, SKEWED), Bracket(-5.0, 5.0))
        r = brent_root(g, Bracket(lam0 - 0.1, lam0 + 0.1), tol=1e-10)
        assert abs(g(r)) <= 1e-10

    def test_no_sign_change(self):
        with pytest.raises(BracketError):
            brent_root(lambda x: x * x + 1.0, Bracket(-1.0, 1.0))

    @settings(max_examples=50, deadline=None)
    @given(
        st.floats(-10.0, -0.1),
        st.floats(0.1, 10.0),
        st.floats(-3.0, 3.0),
    )
    def test_root_within_bracket(self, lo, hi, shift):
        g = lambda x: np.tanh(x - shift * (hi + lo) / 4.0)
        if g(lo) * g(hi) > 0:
            return
        r = brent_root(g, Bracket(lo, hi))
        assert lo <= r <= hi


class TestLambertW:
    def test_zero(self):
        assert lambert_w0(0.0) == 0.0

    def test_e(self):
        assert abs(lambert_w0(math.e) - 1.0) <= 1e-12

    def test_omega_constant(self):
        # bisection oracle on t*exp(t) - 1 over [0, 1]
        lo, hi = 0.0, 1.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if mid * math.exp(mid) - 1.0 < 0:
                lo = mid
            else:
                hi = mid
        oracle = 0.5 * (lo + hi)
        assert abs(lambert_w0(1.0) - oracle) <= 1e-12
        assert abs(lambert_w0(1.0) - 0.5671432904097838) <= 1e-12

    def test_round_trip_log_grid(self):
        q = np.logspace(-6, 6, 121)
        w = lambert_w0(q)
        assert np.all(np.abs(w * np.exp(w) - q) / q <= 1e-10)

    def test_near_branch_point(self):
        q = -math.exp(-1.0) + 1e-10
        w = lambert_w0(q)
        assert w >= -1.0
        assert abs(w * math.exp(w) - q) <= 1e-12

    def test_domain_error(self):
        with pytest.raises(DomainError):
            lambert_w0(-0.4)


class TestWDelta:
    def test_identity_limit(self):
        assert w_delta(0.8, 0.0) == 0.8

    def test_zero_input(self):
        assert w_delta(0.0, 2.0) == 0.0

    def test_sqrt_e(self):
        # composed from W(e) = 1
        assert abs(w_delta(math.sqrt(math.e), 1.0) - 1.0) <= 1e-12

    def test_negative_delta(self):
        with pytest.raises(DomainError):
            w_delta(1.0, -0.1)

    def test_odd_and_monotone(self):
        u = np.linspace(-4.0, 4.0, 81)
        s = w_delta(u, 0.7)
        assert np.allclose(s, -w_delta(-u, 0.7), atol=1e-14)
        assert np.all(np.diff(s) > 0)

    @settings(max_examples=60, deadline=None)
    @given(st.floats(-20.0, 20.0), st.floats(1e-4, 5.0))
    def test_inverts_heavy_tail_map(self, u, delta):
        s = w_delta(u, delta)
        back = s * math.exp(0.5 * delta * s * s)
        assert abs(back - u) <= 1e-9 * max(1.0, abs(u))
