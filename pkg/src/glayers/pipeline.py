"""Stage contract, pipeline assembly, and Gaussianity diagnostics.

The pipeline applies, in fixed order: patch partition, whitening, ICA,
Yeo-Johnson, Lambert tail correction, standardization with temperature, and
patch assembly. Disabled stages are skipped (whitening and standardization
always run). Every stage is differentiable; the pipeline chains their
vector-Jacobian products by building one tape.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import ConfigError, VarianceError
from .ica import ica_layer_t
from .marginal import (
    kurtosis,
    lambert_layer_t,
    skewness,
    standardize_t,
    yeo_johnson_layer_t,
)
from .partition import PatchPartition, assemble_t, partition_t
from .whiten import iterative_whiten_t, zca_whiten_t

# Frozen diagnostic gates (validated against direct standard-Gaussian sampling)
SKEW_GATE = 0.5
KURT_GATE = 1.0
CORR_GATE = 0.15
NORM_RTOL = 0.05


@dataclass
class GaussianizeConfig:
    """Knobs of the Gaussianization pipeline."""

    eta: float = 1e-4  # covariance blend with the identity
    alpha: float = 0.8  # ICA damping
    max_outer: int = 10  # ICA fixed-point iterations (J)
    max_inner: int = 100  # decorrelation / moment iterations (K)
    tol: float = 1e-5  # fixed-point tolerance
    contrast: str = "logcosh"
    whiten: str = "zca"  # or "iterative"
    ica: bool = True
    yeo_johnson: bool = True
    lambert: bool = True
    temperature: float = 1.0  # gamma
    shared_1d: bool = True  # one lambda/delta fitted over all entries jointly

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not 0.0 < self.eta < 1.0:
            raise ConfigError(f"eta must lie in (0,1), got {self.eta}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0,1), got {self.alpha}")
        if self.temperature <= 0.0:
            raise ConfigError(f"temperature must be positive, got {self.temperature}")
        if self.contrast != "logcosh":
            raise ConfigError(f"unsupported contrast {self.contrast!r}")
        if self.whiten not in ("zca", "iterative"):
            raise ConfigError(f"whiten must be 'zca' or 'iterative', got {self.whiten!r}")
        if not self.shared_1d:
            raise ConfigError("per-component 1D fitting is not implemented")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ConfigError("iteration caps must be >= 1")
        if self.tol <= 0:
            raise ConfigError("tol must be positive")


class Stage:
    """Differentiable operator: forward application plus vector-Jacobian product."""

    name = "stage"

    def build(self, x: ad.Var) -> ad.Var:
        raise NotImplementedError

    def apply(self, x: np.ndarray) -> np.ndarray:
        tape = ad.Tape()
        return self.build(tape.leaf(x)).value

    def vjp(self, x: np.ndarray, y: np.ndarray, cotangent: np.ndarray) -> np.ndarray:
        tape = ad.Tape()
        xv = tape.leaf(x)
        out = self.build(xv)
        (g,) = tape.vjp(out, cotangent, [xv])
        return g


class ZcaWhitenStage(Stage):
    name = "zca"

    def __init__(self, cfg: GaussianizeConfig):
        self.cfg = cfg

    def build(self, x):
        return zca_whiten_t(x, self.cfg.eta)


class IterativeWhitenStage(Stage):
    name = "iter-whiten"

    def __init__(self, cfg: GaussianizeConfig):
        self.cfg = cfg

    def build(self, x):
        return iterative_whiten_t(x, self.cfg.eta, max_iter=self.cfg.max_inner)


class IcaStage(Stage):
    name = "ica"

    def __init__(self, cfg: GaussianizeConfig):
        self.cfg = cfg

    def build(self, x):
        return ica_layer_t(x, self.cfg)


class YeoJohnsonStage(Stage):
    name = "yeo-johnson"

    def build(self, x):
        return yeo_johnson_layer_t(x)


class LambertStage(Stage):
    name = "lambert"

    def __init__(self, cfg: GaussianizeConfig):
        self.cfg = cfg

    def build(self, x):
        return lambert_layer_t(x, self.cfg)


class StandardizeStage(Stage):
    name = "standardize"

    def __init__(self, gamma: float):
        self.gamma = gamma

    def build(self, x):
        return standardize_t(x, self.gamma)


class PipelineStage(Stage):
    """Whitening -> ICA -> Yeo-Johnson -> Lambert -> standardization over patches."""

    name = "pipeline"

    def __init__(self, part: PatchPartition, cfg: GaussianizeConfig):
        self.part = part
        self.cfg = cfg

    def build(self, x):
        part, cfg = self.part, self.cfg
        v = partition_t(part, x)
        if cfg.whiten == "zca":
            v = zca_whiten_t(v, cfg.eta)
        else:
            v = iterative_whiten_t(v, cfg.eta, max_iter=cfg.max_inner)
        if cfg.ica:
            v = ica_layer_t(v, cfg)
        flat = v.reshape(part.size)
        if cfg.yeo_johnson:
            flat = yeo_johnson_layer_t(flat)
        if cfg.lambert:
            flat = lambert_layer_t(flat, cfg)
        flat = standardize_t(flat, cfg.temperature)
        return assemble_t(part, flat.reshape(part.D, part.N))


def gaussianize_pipeline(v: np.ndarray, part: PatchPartition, cfg: GaussianizeConfig) -> np.ndarray:
    """Apply the full pipeline to a tensor; returns the Gaussianized tensor."""
    return PipelineStage(part, cfg).apply(v)


@dataclass
class GaussianityDiagnostics:
    """Moment and geometry checks of how standard-Gaussian a tensor looks.

    Per-patch statistics are per patch coordinate, measured across the patch
    ensemble; pooled statistics cover all entries at once.
    """

    component_skewness: np.ndarray
    component_kurtosis_excess: np.ndarray
    pooled_skewness: float
    pooled_kurtosis_excess: float
    max_offdiag_correlation: float
    norm_ratio: float
    degenerate: bool = False

    def flat_dict(self) -> dict:
        return {
            "pooled_skewness": self.pooled_skewness,
            "pooled_kurtosis_excess": self.pooled_kurtosis_excess,
            "max_component_skewness": float(np.max(np.abs(self.component_skewness)))
            if not self.degenerate
            else float("nan"),
            "max_component_kurtosis_excess": float(
                np.max(np.abs(self.component_kurtosis_excess))
            )
            if not self.degenerate
            else float("nan"),
            "max_offdiag_correlation": self.max_offdiag_correlation,
            "norm_ratio": self.norm_ratio,
            "degenerate": self.degenerate,
        }

    def to_json(self) -> str:
        d = self.flat_dict()
        return json.dumps({k: (v if v == v else None) if isinstance(v, float) else v for k, v in d.items()})


def diagnostics(z: np.ndarray, part: PatchPartition) -> GaussianityDiagnostics:
    """Skewness/kurtosis per patch coordinate and pooled, patch-coordinate
    correlations, and the annulus norm ratio ||z||_2 / sqrt(n)."""
    z = np.asarray(z, float)
    v = part.partition(z)
    d, n = v.shape
    norm_ratio = float(np.linalg.norm(z) / np.sqrt(z.size))
    pooled = z.ravel()
    if np.ptp(pooled) == 0.0 or np.any(np.ptp(v, axis=1) == 0.0):
        nanvec = np.full(d, np.nan)
        return GaussianityDiagnostics(
            component_skewness=nanvec,
            component_kurtosis_excess=nanvec.copy(),
            pooled_skewness=float("nan"),
            pooled_kurtosis_excess=float("nan"),
            max_offdiag_correlation=float("nan"),
            norm_ratio=norm_ratio,
            degenerate=True,
        )
    comp_skew = np.array([skewness(v[i]) for i in range(d)])
    comp_kurt = np.array([kurtosis(v[i]) - 3.0 for i in range(d)])
    corr = np.corrcoef(v)
    off = corr[~np.eye(d, dtype=bool)]
    return GaussianityDiagnostics(
        component_skewness=comp_skew,
        component_kurtosis_excess=comp_kurt,
        pooled_skewness=skewness(pooled),
        pooled_kurtosis_excess=kurtosis(pooled) - 3.0,
        max_offdiag_correlation=float(np.max(np.abs(off))) if d > 1 else 0.0,
        norm_ratio=norm_ratio,
        degenerate=False,
    )


def gaussianity_gates(diag: GaussianityDiagnostics, gamma: float = 1.0) -> dict:
    """Frozen pass/fail gates on the pooled moments, coordinate correlations,
    and the annulus norm; returns per-gate booleans plus ``all_pass``."""
    if diag.degenerate:
        gates = {"skewness": False, "kurtosis": False, "correlation": False, "norm": False}
    else:
        gates = {
            "skewness": abs(diag.pooled_skewness) < SKEW_GATE,
            "kurtosis": abs(diag.pooled_kurtosis_excess) < KURT_GATE,
            "correlation": diag.max_offdiag_correlation < CORR_GATE,
            "norm": abs(diag.norm_ratio / gamma - 1.0) <= NORM_RTOL,
        }
    gates["all_pass"] = all(gates.values())
    return gates
