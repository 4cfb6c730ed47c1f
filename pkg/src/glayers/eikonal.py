"""First-arrival eikonal solver and its discrete adjoint.

The forward solve is the Godunov upwind discretization of |grad T| = 1/c,
iterated by Gauss-Seidel sweeps over the four axis orderings until the field
stops changing. The gradient of a receiver-misfit functional is computed by
the discrete adjoint of the converged stencil: a single back-substitution over
cells in decreasing-time (reverse-causal) order, routing each cell's adjoint
to its upwind parents.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ConvergenceError, DomainError, ShapeError

BIG = 1e12


@njit(cache=True)
def _sweep_once(t, s, h, i0, i1, istep, j0, j1, jstep, src_i, src_j):
    ny, nx = t.shape
    max_change = 0.0
    for i in range(i0, i1, istep):
        for j in range(j0, j1, jstep):
            if i == src_i and j == src_j:
                continue
            if i == 0:
                a = t[1, j]
            elif i == ny - 1:
                a = t[ny - 2, j]
            else:
                a = min(t[i - 1, j], t[i + 1, j])
            if j == 0:
                b = t[i, 1]
            elif j == nx - 1:
                b = t[i, nx - 2]
            else:
                b = min(t[i, j - 1], t[i, j + 1])
            sh = s[i, j] * h
            if abs(a - b) >= sh:
                tbar = min(a, b) + sh
            else:
                tbar = 0.5 * (a + b + np.sqrt(2.0 * sh * sh - (a - b) * (a - b)))
            if tbar < t[i, j]:
                change = t[i, j] - tbar
                if change > max_change:
                    max_change = change
                t[i, j] = tbar
    return max_change


@njit(cache=True)
def _solve_kernel(t, s, h, src_i, src_j, tol, max_rounds):
    ny, nx = t.shape
    for rounds in range(max_rounds):
        c1 = _sweep_once(t, s, h, 0, ny, 1, 0, nx, 1, src_i, src_j)
        c2 = _sweep_once(t, s, h, 0, ny, 1, nx - 1, -1, -1, src_i, src_j)
        c3 = _sweep_once(t, s, h, ny - 1, -1, -1, 0, nx, 1, src_i, src_j)
        c4 = _sweep_once(t, s, h, ny - 1, -1, -1, nx - 1, -1, -1, src_i, src_j)
        change = max(max(c1, c2), max(c3, c4))
        tmax = 0.0
        for i in range(ny):
            for j in range(nx):
                if t[i, j] < BIG and t[i, j] > tmax:
                    tmax = t[i, j]
        if change < tol * tmax:
            return rounds + 1
    return -1


@njit(cache=True)
def _adjoint_kernel(t, s, h, lam, grad_s, order, src_i, src_j):
    ny, nx = t.shape
    for k in range(order.shape[0]):
        flat = order[k]
        i = flat // nx
        j = flat % nx
        if i == src_i and j == src_j:
            continue
        l = lam[i, j]
        if l == 0.0:
            continue
        if i == 0:
            a, ia = t[1, j], 1
        elif i == ny - 1:
            a, ia = t[ny - 2, j], ny - 2
        else:
            if t[i - 1, j] <= t[i + 1, j]:
                a, ia = t[i - 1, j], i - 1
            else:
                a, ia = t[i + 1, j], i + 1
        if j == 0:
            b, jb = t[i, 1], 1
        elif j == nx - 1:
            b, jb = t[i, nx - 2], nx - 2
        else:
            if t[i, j - 1] <= t[i, j + 1]:
                b, jb = t[i, j - 1], j - 1
            else:
                b, jb = t[i, j + 1], j + 1
        sh = s[i, j] * h
        if abs(a - b) >= sh:
            # one-parent causal cell: T = min(a, b) + s h
            if a <= b:
                lam[ia, j] += l
            else:
                lam[i, jb] += l
            grad_s[i, j] += l * h
        else:
            r = np.sqrt(2.0 * sh * sh - (a - b) * (a - b))
            lam[ia, j] += l * 0.5 * (1.0 - (a - b) / r)
            lam[i, jb] += l * 0.5 * (1.0 + (a - b) / r)
            grad_s[i, j] += l * s[i, j] * h * h / r


def eikonal_solve(
    c: np.ndarray,
    source: tuple,
    h: float,
    tol: float = 1e-9,
    max_rounds: int = 100,
    init_radius: float = 0.0,
) -> np.ndarray:
    """Traveltime field from one source on a velocity grid.

    Gauss-Seidel sweeps in the four axis orderings repeat until the largest
    update falls below tol * max(T). A positive ``init_radius`` (in physical
    units) seeds the cells within that distance of the source with the exact
    local homogeneous solution, suppressing the point-source error that
    otherwise pollutes the first-order scheme along characteristics; leave it
    at zero when the discrete adjoint will be applied to the field.
    """
    c = np.asarray(c, float)
    if c.ndim != 2:
        raise ShapeError("velocity grid must be 2-D")
    if np.any(c <= 0) or not np.all(np.isfinite(c)):
        raise DomainError("velocity must be positive and finite everywhere")
    if h <= 0:
        raise DomainError("grid spacing must be positive")
    si, sj = int(source[0]), int(source[1])
    if not (0 <= si < c.shape[0] and 0 <= sj < c.shape[1]):
        raise DomainError(f"source {source} outside the grid {c.shape}")
    t = np.full(c.shape, BIG)
    t[si, sj] = 0.0
    if init_radius > 0.0:
        k = int(np.floor(init_radius / h))
        s0 = 1.0 / c[si, sj]
        for i in range(max(0, si - k), min(c.shape[0], si + k + 1)):
            for j in range(max(0, sj - k), min(c.shape[1], sj + k + 1)):
                r = np.hypot(i - si, j - sj) * h
                if r <= init_radius:
                    t[i, j] = s0 * r
    rounds = _solve_kernel(t, 1.0 / c, float(h), si, sj, float(tol), int(max_rounds))
    if rounds < 0:
        raise ConvergenceError(f"eikonal sweeps: no convergence in {max_rounds} rounds", best=t)
    return t


def eikonal_adjoint(
    c: np.ndarray, t: np.ndarray, residual_field: np.ndarray, h: float, source: tuple
) -> np.ndarray:
    """Gradient of chi = 1/2 sum (T - T_obs)^2 at seeded cells with respect to c.

    ``residual_field`` holds (T_pred - T_obs) at receiver cells and zero
    elsewhere. Back-substitutes the upwind-transposed stencil in reverse-causal
    (decreasing T) order, then maps the slowness gradient to velocity.
    """
    c = np.asarray(c, float)
    t = np.asarray(t, float)
    residual_field = np.asarray(residual_field, float)
    if not (c.shape == t.shape == residual_field.shape):
        raise ShapeError("velocity, time field, and residual shapes must match")
    s = 1.0 / c
    lam = residual_field.copy()
    grad_s = np.zeros_like(c)
    order = np.argsort(t, axis=None, kind="stable")[::-1].astype(np.int64)
    _adjoint_kernel(t, s, float(h), lam, grad_s, order, int(source[0]), int(source[1]))
    return -grad_s / (c * c)


@dataclass(frozen=True)
class EikonalGeometry:
    """Square acquisition: sources on the boundary, receivers on the other three sides."""

    n: int
    h: float
    sources: tuple  # ((i, j), ...)
    receivers: tuple  # per source: array of (i, j) rows

    def __post_init__(self):
        if self.h <= 0:
            raise DomainError("grid spacing must be positive")
        for (i, j) in self.sources:
            if not (i in (0, self.n - 1) or j in (0, self.n - 1)):
                raise DomainError(f"source ({i},{j}) not on the boundary")
        for rec in self.receivers:
            for (i, j) in rec:
                if not (i in (0, self.n - 1) or j in (0, self.n - 1)):
                    raise DomainError(f"receiver ({i},{j}) not on the boundary")

    @property
    def n_rec(self) -> int:
        return len(self.receivers[0])


def make_acquisition(n: int, h: float, sources_per_side: int = 4) -> EikonalGeometry:
    """Evenly spaced boundary sources; receivers at every boundary cell of the
    three non-source sides (corners excluded with the source's own side)."""
    pos = np.linspace(0, n - 1, sources_per_side + 2)[1:-1].round().astype(int)
    top = [(0, int(j)) for j in pos]
    bottom = [(n - 1, int(j)) for j in pos]
    left = [(int(i), 0) for i in pos]
    right = [(int(i), n - 1) for i in pos]
    boundary = [(i, j) for i in range(n) for j in range(n) if i in (0, n - 1) or j in (0, n - 1)]

    def side_of(src):
        i, j = src
        if i == 0:
            return "top"
        if i == n - 1:
            return "bottom"
        return "left" if j == 0 else "right"

    def on_side(cell, side):
        i, j = cell
        return {"top": i == 0, "bottom": i == n - 1, "left": j == 0, "right": j == n - 1}[side]

    sources = tuple(top + bottom + left + right)
    receivers = []
    for src in sources:
        side = side_of(src)
        rec = [cell for cell in boundary if not on_side(cell, side)]
        receivers.append(np.array(sorted(rec), dtype=int))
    return EikonalGeometry(n=n, h=h, sources=sources, receivers=tuple(receivers))


class EikonalModel:
    """Traveltime tables for all sources, with the adjoint-state gradient."""

    name = "eikonal"

    def __init__(self, geometry: EikonalGeometry, tol: float = 1e-9, max_rounds: int = 100):
        self.geometry = geometry
        self.tol = tol
        self.max_rounds = max_rounds

    def forward(self, c: np.ndarray):
        """Returns (tables, fields): (n_src, n_rec) receiver times and full fields."""
        g = self.geometry
        tables = np.empty((len(g.sources), g.n_rec))
        fields = []
        for k, src in enumerate(g.sources):
            t = eikonal_solve(c, src, g.h, self.tol, self.max_rounds)
            rec = g.receivers[k]
            tables[k] = t[rec[:, 0], rec[:, 1]]
            fields.append(t)
        return tables, fields

    def vjp(self, c: np.ndarray, fields, residual_tables: np.ndarray) -> np.ndarray:
        """Pull a receiver-table residual back to a velocity gradient."""
        g = self.geometry
        grad = np.zeros_like(np.asarray(c, float))
        for k, src in enumerate(g.sources):
            rec = g.receivers[k]
            rf = np.zeros_like(grad)
            rf[rec[:, 0], rec[:, 1]] = residual_tables[k]
            grad += eikonal_adjoint(c, fields[k], rf, g.h, src)
        return grad
