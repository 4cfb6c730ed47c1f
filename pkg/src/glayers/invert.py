"""Experiment runner: objective assembly, multi-start inversion, reporting.

The objective is the pure data misfit 1/2 ||d - f(g(h(v)))||^2 with the
gradient chained through the forward-model adjoint, the generator pullback,
and the reparameterization pullback. No penalty term is ever added: the
reparameterization carries the prior. Restarts draw independent standard
Gaussian initializations and the report keeps the best value per metric.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, fields as dc_fields

import numpy as np

from .errors import ConfigError, ConvergenceError
from .eikonal import EikonalModel, make_acquisition
from .gtns import read_gtns, trailing_to_complex
from .metrics import psnr, ssim
from .models import (
    CsmriModel,
    DeblurModel,
    EIGHT_BIT_SCALE,
    ToyGenerator,
    add_noise_gaussian,
    make_mask,
    traveltime_noise,
    velocity_map,
    velocity_map_vjp,
)
from .partition import PatchPartition
from .pipeline import GaussianizeConfig, diagnostics, gaussianity_gates
from .reparam import make_reparam
from .optimize import OptimizerConfig, lbfgs

PROBLEMS = ("deblur", "csmri", "eikonal")
REPARAMS = ("none", "spherical", "orthogonal", "glayers")
TARGET_MODES = ("generator", "generator_reparam", "piecewise")

REPORT_KEYS = ("config", "restarts", "best", "noise_energy", "wall_time_s")
RESTART_KEYS = (
    "seed",
    "final_loss",
    "psnr",
    "ssim",
    "iterations",
    "converged",
    "status",
    "diagnostics",
    "gates",
    "failure",
)


@dataclass
class InversionConfig:
    problem: str = "deblur"
    reparam: str = "glayers"
    seeds: tuple = (1, 2, 3)
    temperature: float = 1.0
    patch: tuple = (2, 2)
    target_mode: str = "generator"
    target_seed: int = 7
    noise_seed: int = 99
    mask_seed: int = 11
    accl: float = 8.0
    center_lines: int = 8
    snr_db: float = 20.0
    blur_sigma: float = 3.0
    blur_sigma_inversion: float | None = None
    noise_std_8bit: float = 50.0
    eikonal_sources_per_side: int = 4
    eikonal_spacing: float = 0.004
    traveltime_noise_std: float = 0.001
    gauss_eta: float = 1e-4
    gauss_alpha: float = 0.8
    gauss_max_outer: int = 10
    gauss_max_inner: int = 100
    gauss_tol: float = 1e-5
    gauss_whiten: str = "zca"
    gauss_ica: bool = True
    gauss_yj: bool = True
    gauss_lambert: bool = True
    opt_memory: int = 10
    opt_max_iter: int = 300
    opt_grad_tol: float = 1e-8
    target_file: str = ""
    mask_file: str = ""
    data_file: str = ""

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ConfigError(f"problem must be one of {PROBLEMS}, got {self.problem!r}")
        if self.reparam not in REPARAMS:
            raise ConfigError(f"reparam must be one of {REPARAMS}, got {self.reparam!r}")
        if self.target_mode not in TARGET_MODES:
            raise ConfigError(f"target_mode must be one of {TARGET_MODES}")
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        for path in (self.target_file, self.mask_file, self.data_file):
            if path and not os.path.exists(path):
                raise ConfigError(f"referenced file does not exist: {path}")

    def gaussianize_config(self) -> GaussianizeConfig:
        return GaussianizeConfig(
            eta=self.gauss_eta,
            alpha=self.gauss_alpha,
            max_outer=self.gauss_max_outer,
            max_inner=self.gauss_max_inner,
            tol=self.gauss_tol,
            whiten=self.gauss_whiten,
            ica=self.gauss_ica,
            yeo_johnson=self.gauss_yj,
            lambert=self.gauss_lambert,
            temperature=self.temperature,
        )

    def optimizer_config(self) -> OptimizerConfig:
        return OptimizerConfig(
            memory=self.opt_memory, max_iter=self.opt_max_iter, grad_tol=self.opt_grad_tol
        )

    def echo(self) -> dict:
        out = {}
        for f in dc_fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out


_BOOL = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def parse_config(text: str) -> InversionConfig:
    """Parse the line-based ``key = value`` run-config format."""
    values = {}
    valid = {f.name: f for f in dc_fields(InversionConfig)}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in valid:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = val
    kwargs = {}
    defaults = InversionConfig.__new__(InversionConfig)
    for key, val in values.items():
        f = valid[key]
        try:
            if key == "seeds":
                kwargs[key] = tuple(int(s) for s in val.replace(",", " ").split())
            elif key == "patch":
                kwargs[key] = tuple(int(s) for s in val.lower().replace("x", " ").split())
            elif f.type in ("bool", bool):
                kwargs[key] = _BOOL[val.lower()]
            elif f.type in ("int", int):
                kwargs[key] = int(val)
            elif f.type in ("float", float, "float | None"):
                kwargs[key] = float(val)
            else:
                kwargs[key] = val
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"bad value for {key!r}: {val!r} ({exc})") from None
    del defaults
    return InversionConfig(**kwargs)


def piecewise_target(shape=(64, 64), seed: int = 0) -> np.ndarray:
    """Hand-drawn piecewise-constant image in [-1, 1]: out-of-range target mode."""
    rng = np.random.default_rng(seed)
    img = np.full(shape, -0.5)
    levels = [0.7, -0.1, 0.4, -0.9, 0.9]
    for k in range(3):
        i0, j0 = rng.integers(4, shape[0] - 20, size=2)
        hgt, wid = rng.integers(8, 20, size=2)
        img[i0 : i0 + hgt, j0 : j0 + wid] = levels[k]
    ci, cj = rng.integers(16, shape[0] - 16, size=2)
    rad = int(rng.integers(6, 12))
    ii, jj = np.meshgrid(np.arange(shape[0]), np.arange(shape[1]), indexing="ij")
    img[(ii - ci) ** 2 + (jj - cj) ** 2 <= rad * rad] = levels[3]
    return img


@dataclass
class Observation:
    """Simulated data with its provenance."""

    data: np.ndarray
    model: str
    noise: dict
    noise_energy: float


class InversionContext:
    """Everything one inversion needs: generator, target, forward model, data."""

    def __init__(self, cfg: InversionConfig):
        self.cfg = cfg
        self.generator = ToyGenerator()
        self.latent_shape = self.generator.z_shape
        self.part = PatchPartition(self.latent_shape, cfg.patch)
        self.gauss_cfg = cfg.gaussianize_config()
        self.m_true = self._build_target()
        self.obs = self._simulate()

    def _build_target(self) -> np.ndarray:
        cfg = self.cfg
        if cfg.target_file:
            return read_gtns(cfg.target_file)
        if cfg.target_mode == "piecewise":
            return piecewise_target(self.generator.m_shape, cfg.target_seed)
        rng = np.random.default_rng(cfg.target_seed)
        z_star = rng.standard_normal(self.latent_shape)
        if cfg.target_mode == "generator_reparam":
            rep = make_reparam(
                cfg.reparam, self.latent_shape, self.part, self.gauss_cfg, cfg.target_seed
            )
            return self.generator.forward(rep.latent(z_star.ravel()))
        return self.generator.forward(z_star)

    def _simulate(self) -> Observation:
        cfg = self.cfg
        if cfg.problem == "deblur":
            sigma_inv = cfg.blur_sigma_inversion or cfg.blur_sigma
            self.model = DeblurModel(self.generator.m_shape, sigma_inv)
            if cfg.data_file:
                return Observation(read_gtns(cfg.data_file), "deblur", {"kind": "file"}, 0.0)
            truth_model = DeblurModel(self.generator.m_shape, cfg.blur_sigma)
            clean = truth_model.forward(self.m_true)
            std = cfg.noise_std_8bit * EIGHT_BIT_SCALE
            data = add_noise_gaussian(clean, std, cfg.noise_seed)
            noise_energy = float(np.sum((data - clean) ** 2))
            return Observation(
                data, "deblur", {"kind": "gaussian", "std_8bit": cfg.noise_std_8bit}, noise_energy
            )
        if cfg.problem == "csmri":
            if cfg.mask_file:
                mask = read_gtns(cfg.mask_file)
            else:
                mask = make_mask(self.generator.m_shape, cfg.accl, cfg.center_lines, cfg.mask_seed)
            self.model = CsmriModel(mask)
            if cfg.data_file:
                data = trailing_to_complex(read_gtns(cfg.data_file))
                return Observation(data, "csmri", {"kind": "file"}, 0.0)
            clean = self.model.forward(self.m_true)
            if np.isinf(cfg.snr_db):
                data = clean.copy()
            else:
                # noise only on measured (kept) k-space entries, scaled so the
                # measured-data SNR matches the target
                n_meas = 2.0 * float(np.count_nonzero(mask))
                sigma = (
                    float(np.linalg.norm(clean.ravel()))
                    / np.sqrt(n_meas)
                    * 10.0 ** (-cfg.snr_db / 20.0)
                )
                rng = np.random.default_rng(cfg.noise_seed)
                noise = sigma * (
                    rng.standard_normal(mask.shape) + 1j * rng.standard_normal(mask.shape)
                )
                data = clean + mask * noise
            noise_energy = float(np.sum(np.abs(data - clean) ** 2))
            return Observation(
                data, "csmri", {"kind": "complex_snr", "snr_db": cfg.snr_db}, noise_energy
            )
        # eikonal
        geo = make_acquisition(
            self.generator.m_shape[0], cfg.eikonal_spacing, cfg.eikonal_sources_per_side
        )
        self.model = EikonalModel(geo)
        if cfg.data_file:
            data = read_gtns(cfg.data_file)
            return Observation(data, "eikonal", {"kind": "file"}, 0.0)
        c_true = velocity_map(self.m_true)
        clean, _ = self.model.forward(c_true)
        data = traveltime_noise(clean, cfg.traveltime_noise_std, cfg.noise_seed)
        noise_energy = float(np.sum((data - clean) ** 2))
        return Observation(
            data, "eikonal", {"kind": "multiplicative", "std": cfg.traveltime_noise_std}, noise_energy
        )

    def misfit_and_model_grad(self, m: np.ndarray):
        """1/2 ||d - f(m)||^2 and its gradient with respect to the image."""
        cfg = self.cfg
        if cfg.problem == "deblur":
            r = self.model.forward(m) - self.obs.data
            return 0.5 * float(np.sum(r * r)), self.model.vjp(r)
        if cfg.problem == "csmri":
            r = self.model.forward(m) - self.obs.data
            return 0.5 * float(np.sum(np.abs(r) ** 2)), self.model.vjp(r)
        c = velocity_map(m)
        tables, fields = self.model.forward(c)
        r = tables - self.obs.data
        loss = 0.5 * float(np.sum(r * r))
        return loss, velocity_map_vjp(m, self.model.vjp(c, fields, r))

    def make_objective(self, reparam):
        """(loss, grad) of the reparameterized data misfit; no penalty term."""
        gen = self.generator

        def value_and_grad(params):
            z = reparam.latent(params)
            m = gen.forward(z)
            loss, dm = self.misfit_and_model_grad(m)
            dz = gen.vjp(z, dm)
            return loss, reparam.vjp(params, dz)

        return value_and_grad


def run_inversion(cfg: InversionConfig) -> dict:
    """Multi-start inversion; returns the report as a JSON-ready dictionary."""
    t0 = time.perf_counter()
    ctx = InversionContext(cfg)
    opt_cfg = cfg.optimizer_config()
    restarts = []
    histories = []
    for seed in cfg.seeds:
        entry = {"seed": int(seed)}
        try:
            reparam = make_reparam(
                cfg.reparam, ctx.latent_shape, ctx.part, ctx.gauss_cfg, int(seed)
            )
            rng = np.random.default_rng(int(seed))
            params0 = reparam.initial(rng)
            result = lbfgs(ctx.make_objective(reparam), params0, opt_cfg)
            z_final = reparam.latent(result.x)
            m_final = ctx.generator.forward(z_final)
            diag = diagnostics(z_final, ctx.part)
            entry.update(
                final_loss=float(result.f),
                psnr=psnr(ctx.m_true, m_final),
                ssim=ssim(ctx.m_true, m_final),
                iterations=int(result.iterations),
                converged=bool(result.converged),
                status=result.status,
                diagnostics=diag.flat_dict(),
                gates=gaussianity_gates(diag, cfg.temperature),
                failure=None,
            )
            histories.append((int(seed), list(result.trace)))
        except Exception as exc:  # noqa: BLE001 - a restart failure must not kill the run
            entry.update(
                final_loss=None,
                psnr=None,
                ssim=None,
                iterations=0,
                converged=False,
                status="error",
                diagnostics=None,
                gates=None,
                failure=f"{type(exc).__name__}: {exc}",
            )
        restarts.append(entry)
    ok = [r for r in restarts if r["failure"] is None]
    if not ok:
        raise ConvergenceError("all restarts failed: " + "; ".join(r["failure"] for r in restarts))
    best = {
        "psnr": max(r["psnr"] for r in ok),
        "ssim": max(r["ssim"] for r in ok),
        "loss": min(r["final_loss"] for r in ok),
    }
    report = {
        "config": cfg.echo(),
        "restarts": restarts,
        "best": best,
        "noise_energy": ctx.obs.noise_energy,
        "wall_time_s": time.perf_counter() - t0,
    }
    report["_histories"] = histories
    return report


def history_csv(report: dict) -> str:
    """Loss-per-iteration history in CSV form for plotting."""
    lines = ["restart_seed,iteration,loss"]
    for seed, trace in report.get("_histories", []):
        for i, loss in enumerate(trace):
            lines.append(f"{seed},{i},{loss!r}")
    return "\n".join(lines) + "\n"


def report_json(report: dict) -> str:
    clean = {k: v for k, v in report.items() if not k.startswith("_")}
    return json.dumps(clean, indent=2, sort_keys=True)


def write_report(report: dict, out_path: str, csv_path: str | None = None) -> None:
    with open(out_path, "w") as fh:
        fh.write(report_json(report))
    if csv_path:
        with open(csv_path, "w") as fh:
            fh.write(history_csv(report))
