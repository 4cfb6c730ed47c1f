"""Minimal reverse-mode tape over dense numpy arrays.

Covers exactly the matrix and elementwise operations needed to differentiate
through the whitening and ICA fixed-point loops: matmul, transpose, reshape,
elementwise arithmetic, tanh/exp/log/integer powers, full and axis reductions,
diagonal extract/construct, and a symmetric eigendecomposition with the
standard adjoint. Loops are differentiated by recording the iterations that
actually executed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegeneracyError, NumericError, ShapeError, TapeError, VarianceError

_EIG_GAP_TOL = 1e-8


class Var:
    """A value recorded on a tape."""

    __slots__ = ("value", "tape", "index")

    def __init__(self, value, tape, index):
        self.value = value
        self.tape = tape
        self.index = index

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    @property
    def size(self):
        return self.value.size

    @property
    def T(self):
        return transpose(self)

    # arithmetic sugar; scalars and ndarrays are lifted to constants
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, k):
        return powi(self, k)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def sum(self, axis=None):
        return asum(self, axis=axis)

    def mean(self):
        return amean(self)

    def variance(self):
        return variance(self)

    def l2norm(self):
        return l2norm(self)


@dataclass
class _Node:
    parents: tuple
    vjp: object  # callable(adjoint) -> tuple of parent adjoints, or None for leaves


@dataclass
class Tape:
    """Append-only record of operations; parents always precede children."""

    _nodes: list = field(default_factory=list)
    last_sweep_visits: int = 0

    def leaf(self, value) -> Var:
        return self._record(np.asarray(value, dtype=float), (), None)

    def _record(self, value, parents, vjp) -> Var:
        value = np.asarray(value)
        if not np.all(np.isfinite(value)):
            raise NumericError("non-finite intermediate value recorded on tape")
        self._nodes.append(_Node(parents, vjp))
        return Var(value, self, len(self._nodes) - 1)

    def backward(self, head: Var, seed) -> list:
        """Reverse sweep from ``head`` seeded with cotangent ``seed``.

        Touches each reachable node exactly once; returns the adjoint list
        indexed by node position (None where unreached).
        """
        if head.tape is not self:
            raise TapeError("head is not recorded on this tape")
        seed = np.asarray(seed, dtype=float)
        if seed.shape != np.shape(head.value):
            if seed.size == np.size(head.value):
                seed = seed.reshape(np.shape(head.value))
            else:
                raise ShapeError(
                    f"seed shape {seed.shape} incompatible with head {np.shape(head.value)}"
                )
        adj = [None] * len(self._nodes)
        adj[head.index] = seed
        visits = 0
        for i in range(head.index, -1, -1):
            g = adj[i]
            if g is None:
                continue
            visits += 1
            node = self._nodes[i]
            if node.vjp is None:
                continue
            contribs = node.vjp(g)
            for p, c in zip(node.parents, contribs):
                if c is None:
                    continue
                if adj[p] is None:
                    adj[p] = np.array(c, dtype=float, copy=True)
                else:
                    adj[p] = adj[p] + c
        self.last_sweep_visits = visits
        return adj

    def grad(self, head: Var, leaf: Var) -> np.ndarray:
        """Exact reverse-mode gradient of a scalar head with respect to one leaf."""
        if leaf.tape is not self:
            raise TapeError("leaf is not recorded on this tape")
        if np.size(head.value) != 1:
            raise ShapeError("grad requires a scalar head")
        adj = self.backward(head, np.ones_like(np.asarray(head.value, dtype=float)))
        g = adj[leaf.index]
        if g is None:
            return np.zeros_like(np.asarray(leaf.value, dtype=float))
        return g

    def vjp(self, out: Var, cotangent, wrt) -> list:
        """Vector-Jacobian product: cotangent at ``out`` pulled back to each var in ``wrt``."""
        adj = self.backward(out, cotangent)
        outs = []
        for v in wrt:
            if v.tape is not self:
                raise TapeError("wrt variable is not recorded on this tape")
            g = adj[v.index]
            outs.append(np.zeros_like(np.asarray(v.value, dtype=float)) if g is None else g)
        return outs


def _lift(tape: Tape, x) -> Var:
    if isinstance(x, Var):
        if x.tape is not tape:
            raise TapeError("operands recorded on different tapes")
        return x
    return tape.leaf(np.asarray(x, dtype=float))


def _pair(a, b):
    if isinstance(a, Var):
        tape = a.tape
    elif isinstance(b, Var):
        tape = b.tape
    else:
        raise TypeError("at least one operand must be a Var")
    return tape, _lift(tape, a), _lift(tape, b)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    g = np.asarray(grad, dtype=float)
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g.reshape(shape)


def _combine(op, av, bv):
    try:
        return op(av, bv)
    except ValueError as exc:
        raise ShapeError(str(exc)) from None


def add(a, b) -> Var:
    tape, a, b = _pair(a, b)
    value = _combine(np.add, a.value, b.value)
    sa, sb = a.shape, b.shape
    return tape._record(
        value, (a.index, b.index), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb))
    )


def sub(a, b) -> Var:
    tape, a, b = _pair(a, b)
    value = _combine(np.subtract, a.value, b.value)
    sa, sb = a.shape, b.shape
    return tape._record(
        value, (a.index, b.index), lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb))
    )


def mul(a, b) -> Var:
    tape, a, b = _pair(a, b)
    value = _combine(np.multiply, a.value, b.value)
    av, bv, sa, sb = a.value, b.value, a.shape, b.shape
    return tape._record(
        value,
        (a.index, b.index),
        lambda g: (_unbroadcast(g * bv, sa), _unbroadcast(g * av, sb)),
    )


def div(a, b) -> Var:
    tape, a, b = _pair(a, b)
    value = _combine(np.divide, a.value, b.value)
    av, bv, sa, sb = a.value, b.value, a.shape, b.shape
    return tape._record(
        value,
        (a.index, b.index),
        lambda g: (_unbroadcast(g / bv, sa), _unbroadcast(-g * av / (bv * bv), sb)),
    )


def matmul(a, b) -> Var:
    tape, a, b = _pair(a, b)
    av, bv = a.value, b.value
    if av.ndim not in (1, 2) or bv.ndim not in (1, 2):
        raise ShapeError("matmul supports 1-D and 2-D operands only")
    try:
        value = av @ bv
    except ValueError as exc:
        raise ShapeError(str(exc)) from None

    if av.ndim == 2 and bv.ndim == 2:
        vjp = lambda g: (g @ bv.T, av.T @ g)
    elif av.ndim == 2 and bv.ndim == 1:
        vjp = lambda g: (np.outer(g, bv), av.T @ g)
    elif av.ndim == 1 and bv.ndim == 2:
        vjp = lambda g: (bv @ g, np.outer(av, g))
    else:  # inner product
        vjp = lambda g: (g * bv, g * av)
    return tape._record(value, (a.index, b.index), vjp)


def transpose(a: Var) -> Var:
    if a.ndim != 2:
        raise ShapeError("transpose expects a matrix")
    return a.tape._record(a.value.T, (a.index,), lambda g: (g.T,))


def reshape(a: Var, shape) -> Var:
    old = a.shape
    return a.tape._record(a.value.reshape(shape), (a.index,), lambda g: (g.reshape(old),))


def tanh(a: Var) -> Var:
    y = np.tanh(a.value)
    return a.tape._record(y, (a.index,), lambda g: (g * (1.0 - y * y),))


def exp(a: Var) -> Var:
    y = np.exp(a.value)
    return a.tape._record(y, (a.index,), lambda g: (g * y,))


def log(a: Var) -> Var:
    av = a.value
    return a.tape._record(np.log(av), (a.index,), lambda g: (g / av,))


def sqrt(a: Var) -> Var:
    """Elementwise square root composed from exp/log (positive inputs)."""
    return exp(0.5 * log(a))


def powi(a: Var, k: int) -> Var:
    k = int(k)
    av = a.value
    if k == 0:
        return a.tape._record(np.ones_like(av), (a.index,), lambda g: (np.zeros_like(av),))
    return a.tape._record(
        av**k, (a.index,), lambda g: (g * k * av ** (k - 1),)
    )


def asum(a: Var, axis=None) -> Var:
    av = a.shape
    if axis is None:
        return a.tape._record(
            np.sum(a.value), (a.index,), lambda g: (np.broadcast_to(g, av).copy(),)
        )
    ax = int(axis)
    return a.tape._record(
        np.sum(a.value, axis=ax),
        (a.index,),
        lambda g: (np.broadcast_to(np.expand_dims(g, ax), av).copy(),),
    )


def amean(a: Var) -> Var:
    n = a.size
    shape = a.shape
    return a.tape._record(
        np.mean(a.value), (a.index,), lambda g: (np.broadcast_to(g / n, shape).copy(),)
    )


def variance(a: Var) -> Var:
    """Sample variance with one mean-removal degree of freedom."""
    n = a.size
    if n < 2:
        raise VarianceError("variance requires at least two entries")
    centered = a.value - np.mean(a.value)
    value = float(np.sum(centered * centered) / (n - 1))
    return a.tape._record(
        np.asarray(value), (a.index,), lambda g: (g * 2.0 * centered / (n - 1),)
    )


def l2norm(a: Var) -> Var:
    av = a.value
    value = float(np.sqrt(np.sum(av * av)))
    if value == 0.0:
        vjp = lambda g: (np.zeros_like(av),)
    else:
        vjp = lambda g: (g * av / value,)
    return a.tape._record(np.asarray(value), (a.index,), vjp)


def diag_part(a: Var) -> Var:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError("diag_part expects a square matrix")
    n = a.shape[0]

    def vjp(g):
        out = np.zeros((n, n))
        np.fill_diagonal(out, g)
        return (out,)

    return a.tape._record(np.diagonal(a.value).copy(), (a.index,), vjp)


def diag_matrix(v: Var) -> Var:
    if v.ndim != 1:
        raise ShapeError("diag_matrix expects a vector")
    return v.tape._record(np.diag(v.value), (v.index,), lambda g: (np.diagonal(g).copy(),))


def take(a: Var, idx: int) -> Var:
    if a.ndim != 1:
        raise ShapeError("take expects a vector")
    n = a.shape[0]
    i = int(idx) % n

    def vjp(g):
        out = np.zeros(n)
        out[i] = g
        return (out,)

    return a.tape._record(np.asarray(a.value[i]), (a.index,), vjp)


def sym_eig(a: Var):
    """Eigendecomposition of a symmetric matrix; returns (eigenvalues, eigenvectors).

    Eigenvalues ascend. The eigenvector adjoint uses the standard pairwise
    1/(lambda_j - lambda_i) factors and raises on a (near-)degenerate spectrum;
    an eigenvalue-only adjoint needs no gaps.
    """
    av = a.value
    if av.ndim != 2 or av.shape[0] != av.shape[1]:
        raise ShapeError("sym_eig expects a square matrix")
    scale = max(1.0, float(np.max(np.abs(av))))
    if np.max(np.abs(av - av.T)) > 1e-8 * scale:
        raise ShapeError("sym_eig expects a symmetric matrix")
    s = 0.5 * (av + av.T)
    evals, evecs = np.linalg.eigh(s)

    def vjp_evals(gl):
        m = evecs @ np.diag(gl) @ evecs.T
        return (0.5 * (m + m.T),)

    def vjp_evecs(gu):
        if not np.any(gu):
            return (np.zeros_like(av),)
        diffs = evals[None, :] - evals[:, None]
        off = ~np.eye(len(evals), dtype=bool)
        if np.min(np.abs(diffs[off])) < _EIG_GAP_TOL:
            raise DegeneracyError(
                "eigenvector gradient undefined: eigenvalue gap below 1e-8"
            )
        f = np.zeros_like(diffs)
        f[off] = 1.0 / diffs[off]
        m = evecs @ (f * (evecs.T @ gu)) @ evecs.T
        return (0.5 * (m + m.T),)

    lam = a.tape._record(evals, (a.index,), vjp_evals)
    u = a.tape._record(evecs, (a.index,), vjp_evecs)
    return lam, u


def eig_max(a: Var) -> Var:
    """Largest eigenvalue of a symmetric matrix via the taped eigendecomposition."""
    lam, _ = sym_eig(a)
    return take(lam, -1)


@dataclass
class FdReport:
    """Result of the Taylor-remainder convergence test."""

    eps: np.ndarray
    err: np.ndarray
    slope: float | None
    exact_to_roundoff: bool
    used: np.ndarray
    f0: float

    def table(self) -> str:
        lines = ["eps        |E(eps)|   used"]
        for e, r, u in zip(self.eps, self.err, self.used):
            lines.append(f"{e:8.1e} {r:11.3e}   {'y' if u else 'n'}")
        if self.exact_to_roundoff:
            lines.append("slope: exact-to-roundoff")
        else:
            lines.append(f"slope = {self.slope:.3f}")
        return "\n".join(lines)


def fd_convergence_test(
    value_and_grad, x, seed=0, eps=(1e-1, 1e-2, 1e-3, 1e-4, 1e-5)
) -> FdReport:
    """Taylor-remainder check of a gradient: E(eps) = |f(x+eps*dx) - f(x) - eps*g.dx|.

    Draws a unit-norm direction from ``seed`` and returns the least-squares
    slope of log E against log eps. With an exact gradient the remainder is
    second order. Points at the roundoff floor (100*eps_mach*max(1,|f|)) are
    excluded from the fit; if all are, the report says exact-to-roundoff.
    """
    x = np.asarray(x, dtype=float)
    rng = np.random.default_rng(seed)
    dx = rng.standard_normal(x.shape)
    dx /= np.sqrt(np.sum(dx * dx))
    f0, g0 = value_and_grad(x)
    f0 = float(f0)
    gdot = float(np.sum(np.asarray(g0) * dx))
    eps = np.asarray(eps, dtype=float)
    errs = np.empty_like(eps)
    for i, e in enumerate(eps):
        fe, _ = value_and_grad(x + e * dx)
        errs[i] = abs(float(fe) - f0 - e * gdot)
    floor = 100.0 * np.finfo(float).eps * max(1.0, abs(f0))
    used = errs > floor
    if used.sum() < 2:
        return FdReport(eps, errs, None, True, used, f0)
    slope, _ = np.polyfit(np.log10(eps[used]), np.log10(errs[used]), 1)
    return FdReport(eps, errs, float(slope), False, used, f0)
