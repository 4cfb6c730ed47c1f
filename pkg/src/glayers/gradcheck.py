"""Named gradient checks: Taylor-remainder slopes for every differentiable
stage and objective, and the adjoint-vs-finite-difference check for the
eikonal solver."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .eikonal import EikonalModel, make_acquisition
from .errors import ConfigError
from .invert import InversionConfig, InversionContext
from .models import ToyGenerator, velocity_map
from .partition import PatchPartition
from .pipeline import (
    GaussianizeConfig,
    IcaStage,
    IterativeWhitenStage,
    LambertStage,
    PipelineStage,
    StandardizeStage,
    YeoJohnsonStage,
    ZcaWhitenStage,
)
from .reparam import SkewParam, cayley, cayley_vjp, make_reparam

SLOPE_WINDOW = (1.8, 2.2)
EIKONAL_FD_TOL = 1e-4


@dataclass
class GradCheckReport:
    target: str
    kind: str  # "slope" or "adjoint-fd"
    passed: bool
    slope: float | None = None
    exact_to_roundoff: bool = False
    table: str = ""
    max_rel_err: float | None = None


def _quadratic_head(out: ad.Var, seed: int) -> ad.Var:
    cot = np.random.default_rng(seed).standard_normal(out.shape)
    return 0.5 * (out * out).sum() + (out * cot).sum()


def _stage_slope(name, stage, x, seed) -> GradCheckReport:
    def value_and_grad(xx):
        tape = ad.Tape()
        xv = tape.leaf(xx)
        head = _quadratic_head(stage.build(xv), seed=4242)
        return float(head.value), tape.grad(head, xv)

    rep = ad.fd_convergence_test(value_and_grad, x, seed=seed)
    if rep.exact_to_roundoff:
        return GradCheckReport(name, "slope", True, None, True, rep.table())
    ok = SLOPE_WINDOW[0] <= rep.slope <= SLOPE_WINDOW[1]
    return GradCheckReport(name, "slope", ok, rep.slope, False, rep.table())


def _objective_slope(name, problem, seed) -> GradCheckReport:
    cfg = InversionConfig(problem=problem, reparam="glayers", snr_db=20.0, seeds=(1,))
    ctx = InversionContext(cfg)
    reparam = make_reparam("glayers", ctx.latent_shape, ctx.part, ctx.gauss_cfg, seed)
    vag = ctx.make_objective(reparam)
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(ctx.latent_shape).ravel()
    rep = ad.fd_convergence_test(vag, v0, seed=seed)
    if rep.exact_to_roundoff:
        return GradCheckReport(name, "slope", True, None, True, rep.table())
    ok = SLOPE_WINDOW[0] <= rep.slope <= SLOPE_WINDOW[1]
    return GradCheckReport(name, "slope", ok, rep.slope, False, rep.table())


def _eikonal_adjoint_check(seed) -> GradCheckReport:
    rng = np.random.default_rng(seed)
    n = 48
    m = np.tanh(rng.standard_normal((n, n)) * 0.3)
    c = velocity_map(m)
    geo = make_acquisition(n, 0.004, 2)
    model = EikonalModel(geo)
    tables, fields = model.forward(c)
    t_obs = tables * (1.0 + 0.001 * rng.standard_normal(tables.shape))
    grad = model.vjp(c, fields, tables - t_obs)

    def chi(cc):
        tt, _ = model.forward(cc)
        return 0.5 * float(np.sum((tt - t_obs) ** 2))

    lines = ["cell          adjoint           central-fd        rel-err"]
    worst = 0.0
    h = 1e-3
    for i, j in rng.integers(1, n - 1, size=(5, 2)):
        cp = c.copy()
        cp[i, j] += h
        cm = c.copy()
        cm[i, j] -= h
        fd = (chi(cp) - chi(cm)) / (2 * h)
        rel = abs(fd - grad[i, j]) / max(abs(fd), 1e-30)
        worst = max(worst, rel)
        lines.append(f"({i:3d},{j:3d})  {grad[i, j]:+.9e}  {fd:+.9e}  {rel:.2e}")
    return GradCheckReport(
        "eikonal", "adjoint-fd", worst <= EIKONAL_FD_TOL, table="\n".join(lines), max_rel_err=worst
    )


def run_gradcheck(target: str, seed: int = 0) -> GradCheckReport:
    """Run the named check; see :data:`GRADCHECK_IDS` for valid names."""
    rng = np.random.default_rng(seed)
    cfg = GaussianizeConfig()
    if target == "zca":
        return _stage_slope(target, ZcaWhitenStage(cfg), rng.standard_normal((8, 64)), seed)
    if target == "iter-whiten":
        return _stage_slope(target, IterativeWhitenStage(cfg), rng.standard_normal((8, 64)), seed)
    if target == "ica":
        v = rng.standard_normal((6, 96))
        v -= v.mean(axis=1, keepdims=True)
        return _stage_slope(target, IcaStage(cfg), v, seed)
    if target == "yeo-johnson":
        x = rng.gamma(2.0, 1.0, size=256) - 1.0
        return _stage_slope(target, YeoJohnsonStage(), x, seed)
    if target == "lambert":
        u = rng.standard_normal(512)
        return _stage_slope(target, LambertStage(cfg), u * np.exp(0.15 * u * u), seed)
    if target == "standardize":
        return _stage_slope(target, StandardizeStage(0.7), rng.standard_normal(128), seed)
    if target == "pipeline":
        part = PatchPartition((16, 16), (2, 2))
        z = rng.standard_normal((16, 16))
        z = z + 0.25 * z * z
        return _stage_slope(target, PipelineStage(part, cfg), z, seed)
    if target == "spherical":

        class _Sph:
            def build(self, xv):
                n = xv.size
                return xv * (np.sqrt(n) / ad.l2norm(xv))

        return _stage_slope(target, _Sph(), rng.standard_normal(64), seed)
    if target == "cayley":
        dim = 8
        skew0 = SkewParam.zeros(dim)
        a = rng.standard_normal((dim, dim))

        def vag(params):
            sk = SkewParam.from_values(dim, params)
            r = cayley(sk)
            return float(np.sum(a * r)), cayley_vjp(sk, a)

        x0 = 0.3 * rng.standard_normal(skew0.values.size)
        rep = ad.fd_convergence_test(vag, x0, seed=seed)
        ok = rep.exact_to_roundoff or SLOPE_WINDOW[0] <= rep.slope <= SLOPE_WINDOW[1]
        return GradCheckReport(target, "slope", ok, rep.slope, rep.exact_to_roundoff, rep.table())
    if target == "toygen":
        gen = ToyGenerator()
        cot = rng.standard_normal(gen.m_shape)

        def vag(z):
            z = z.reshape(gen.z_shape)
            m = gen.forward(z)
            loss = 0.5 * float(np.sum(m * m)) + float(np.sum(m * cot))
            return loss, gen.vjp(z, m + cot).ravel()

        rep = ad.fd_convergence_test(vag, rng.standard_normal(gen.z_shape).ravel(), seed=seed)
        ok = rep.exact_to_roundoff or SLOPE_WINDOW[0] <= rep.slope <= SLOPE_WINDOW[1]
        return GradCheckReport(target, "slope", ok, rep.slope, rep.exact_to_roundoff, rep.table())
    if target in ("deblur", "csmri"):
        return _objective_slope(target, target, seed)
    if target == "eikonal":
        return _eikonal_adjoint_check(seed)
    raise ConfigError(f"unknown gradcheck target {target!r}; known: {sorted(GRADCHECK_IDS)}")


GRADCHECK_IDS = (
    "zca",
    "iter-whiten",
    "ica",
    "yeo-johnson",
    "lambert",
    "standardize",
    "pipeline",
    "spherical",
    "cayley",
    "toygen",
    "deblur",
    "csmri",
    "eikonal",
)
