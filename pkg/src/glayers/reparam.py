"""Latent reparameterizations for regularized inversion.

Four interchangeable latent maps: identity, spherical projection onto the
radius gamma*sqrt(n) shell, a learnable per-patch rotation through the Cayley
transform of a skew-symmetric parameter, and the Gaussianization pipeline.
Each exposes the same driver surface: draw an initial parameter, map it to a
latent tensor, and pull a cotangent back to the parameter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError, NumericError, ShapeError
from .partition import PatchPartition
from .pipeline import GaussianizeConfig, PipelineStage

MAX_ROTATION_DIM = 4096


def spherical(v: np.ndarray, gamma: float = 1.0) -> np.ndarray:
    """Project onto the sphere of radius gamma*sqrt(dim(v))."""
    v = np.asarray(v, float)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise DomainError("spherical reparameterization undefined at the zero tensor")
    return v * (gamma * np.sqrt(v.size) / norm)


def spherical_vjp(v: np.ndarray, cotangent: np.ndarray, gamma: float = 1.0) -> np.ndarray:
    """Pullback of :func:`spherical`: the projection-scaled normalization Jacobian."""
    v = np.asarray(v, float)
    ct = np.asarray(cotangent, float)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise DomainError("spherical reparameterization undefined at the zero tensor")
    vhat = v / norm
    scale = gamma * np.sqrt(v.size) / norm
    return scale * (ct - vhat * float(np.sum(vhat * ct)))


@dataclass
class SkewParam:
    """Strictly lower-triangular free parameters of a skew-symmetric D x D matrix."""

    dim: int
    values: np.ndarray

    @classmethod
    def zeros(cls, dim: int) -> "SkewParam":
        return cls(dim, np.zeros(dim * (dim - 1) // 2))

    @classmethod
    def from_values(cls, dim: int, values) -> "SkewParam":
        values = np.asarray(values, float).ravel()
        if values.size != dim * (dim - 1) // 2:
            raise ShapeError(
                f"skew parameter needs {dim * (dim - 1) // 2} entries for dim {dim}"
            )
        return cls(dim, values)

    def matrix(self) -> np.ndarray:
        w = np.zeros((self.dim, self.dim))
        il = np.tril_indices(self.dim, k=-1)
        w[il] = self.values
        return w - w.T

    @staticmethod
    def project_gradient(dim: int, wbar: np.ndarray) -> np.ndarray:
        """Collapse a full-matrix gradient onto the free lower-triangular entries."""
        il = np.tril_indices(dim, k=-1)
        return (wbar - wbar.T)[il]


def cayley(skew) -> np.ndarray:
    """Rotation matrix (I + W)(I - W)^{-1} of a skew-symmetric W."""
    w = skew.matrix() if isinstance(skew, SkewParam) else np.asarray(skew, float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ShapeError("cayley expects a square matrix")
    if np.max(np.abs(w + w.T)) > 1e-12 * max(1.0, float(np.max(np.abs(w)))):
        raise ShapeError("cayley expects a skew-symmetric matrix")
    d = w.shape[0]
    try:
        q = np.linalg.solve(np.eye(d) - w, np.eye(d))
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"cayley solve failed: {exc}") from None
    return (np.eye(d) + w) @ q


def cayley_vjp(skew: SkewParam, rbar: np.ndarray) -> np.ndarray:
    """Pullback of the Cayley map onto the free skew parameters."""
    w = skew.matrix()
    d = skew.dim
    q = np.linalg.solve(np.eye(d) - w, np.eye(d))
    # R = (I + W) Q with Q = (I - W)^{-1}: dR = dW Q + (I + W) Q dW Q
    wbar = rbar @ q.T + q.T @ (np.eye(d) + w).T @ rbar @ q.T
    return SkewParam.project_gradient(d, wbar)


class Reparam:
    """Driver-facing latent map: parameter vector -> latent tensor."""

    name = "none"

    def __init__(self, shape: tuple):
        self.shape = tuple(int(s) for s in shape)
        self.size = int(np.prod(self.shape))

    def initial(self, rng: np.random.Generator) -> np.ndarray:
        return rng.standard_normal(self.shape).ravel()

    def latent(self, params: np.ndarray) -> np.ndarray:
        return params.reshape(self.shape)

    def vjp(self, params: np.ndarray, cotangent: np.ndarray) -> np.ndarray:
        return np.asarray(cotangent, float).ravel()


class SphericalReparam(Reparam):
    name = "spherical"

    def __init__(self, shape: tuple, gamma: float = 1.0):
        super().__init__(shape)
        self.gamma = gamma

    def latent(self, params):
        return spherical(params.reshape(self.shape), self.gamma)

    def vjp(self, params, cotangent):
        return spherical_vjp(params.reshape(self.shape), cotangent, self.gamma).ravel()


class OrthogonalReparam(Reparam):
    """z = R v per patch block with v drawn once per run and frozen."""

    name = "orthogonal"

    def __init__(self, shape: tuple, part: PatchPartition, seed: int):
        super().__init__(shape)
        if part.dims != self.shape:
            raise ShapeError("partition dims must match the latent shape")
        if part.D > MAX_ROTATION_DIM:
            raise ConfigError(
                f"rotation block dimension {part.D} exceeds the {MAX_ROTATION_DIM} limit"
            )
        self.part = part
        self.v_fixed = np.random.default_rng(seed).standard_normal(self.shape)
        self._v_mat = part.partition(self.v_fixed)

    def initial(self, rng):
        return SkewParam.zeros(self.part.D).values.copy()

    def latent(self, params):
        skew = SkewParam.from_values(self.part.D, params)
        r = cayley(skew)
        return self.part.assemble(r @ self._v_mat)

    def vjp(self, params, cotangent):
        skew = SkewParam.from_values(self.part.D, params)
        rbar = self.part.partition(np.asarray(cotangent, float)) @ self._v_mat.T
        return cayley_vjp(skew, rbar)


class GlayersReparam(Reparam):
    """z = assemble(pipeline(partition(v))): the Gaussianization latent map.

    The taped forward build is cached per parameter vector so the usual
    latent-then-pullback call pattern runs the pipeline once.
    """

    name = "glayers"

    def __init__(self, shape: tuple, part: PatchPartition, cfg: GaussianizeConfig):
        super().__init__(shape)
        if part.dims != self.shape:
            raise ShapeError("partition dims must match the latent shape")
        self.stage = PipelineStage(part, cfg)
        self._cache = None  # (params bytes, tape, input var, output var)

    def _build(self, params):
        from . import autodiff as ad

        key = params.tobytes()
        if self._cache is not None and self._cache[0] == key:
            return self._cache[1], self._cache[2], self._cache[3]
        tape = ad.Tape()
        xv = tape.leaf(params.reshape(self.shape))
        out = self.stage.build(xv)
        self._cache = (key, tape, xv, out)
        return tape, xv, out

    def latent(self, params):
        _, _, out = self._build(np.asarray(params, float))
        return out.value

    def vjp(self, params, cotangent):
        tape, xv, out = self._build(np.asarray(params, float))
        (g,) = tape.vjp(out, np.asarray(cotangent, float), [xv])
        return g.ravel()


def glayer_reparam(v: np.ndarray, part: PatchPartition, cfg: GaussianizeConfig) -> np.ndarray:
    """Functional form of the Gaussianization latent map h applied blockwise."""
    return PipelineStage(part, cfg).apply(v)


def make_reparam(name: str, shape: tuple, part: PatchPartition | None, cfg, seed: int) -> Reparam:
    """Factory keyed by the run-config value."""
    if name == "none":
        return Reparam(shape)
    if name == "spherical":
        gamma = cfg.temperature if cfg is not None else 1.0
        return SphericalReparam(shape, gamma)
    if name == "orthogonal":
        if part is None:
            raise ConfigError("orthogonal reparameterization requires a patch partition")
        return OrthogonalReparam(shape, part, seed)
    if name == "glayers":
        if part is None or cfg is None:
            raise ConfigError("glayers reparameterization requires a partition and config")
        return GlayersReparam(shape, part, cfg)
    raise ConfigError(f"unknown reparam {name!r}")
