"""Reversible mapping between a latent tensor and a matrix of non-overlapping patches.

Patches are extracted in raster (row-major) order over the block grid, and
entries within a patch are row-major too, so column i of the patch matrix is
the i-th patch flattened. An optional per-axis roll shifts the tensor with
wrap-around before extraction (and shifts back on assembly), which moves the
patch seams by a fixed offset.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import PartitionError


@dataclass(frozen=True)
class PatchPartition:
    """Partition of a ``dims`` tensor into non-overlapping ``patch`` blocks."""

    dims: tuple
    patch: tuple
    roll: tuple | None = None

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        patch = tuple(int(p) for p in self.patch)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "patch", patch)
        if len(dims) != len(patch):
            raise PartitionError(f"rank mismatch: dims {dims} vs patch {patch}")
        if any(d < 1 for d in dims) or any(p < 1 for p in patch):
            raise PartitionError("all extents must be >= 1")
        if any(d % p != 0 for d, p in zip(dims, patch)):
            raise PartitionError(f"patch {patch} does not tile dims {dims}")
        if self.roll is not None:
            roll = tuple(int(r) for r in self.roll)
            if len(roll) != len(dims):
                raise PartitionError("roll offsets must match tensor rank")
            object.__setattr__(self, "roll", roll)

    @classmethod
    def half_patch_roll(cls, dims, patch) -> "PatchPartition":
        """Partition shifted by half a patch along every axis (wrap-around)."""
        patch = tuple(int(p) for p in patch)
        return cls(tuple(dims), patch, tuple(p // 2 for p in patch))

    @property
    def D(self) -> int:
        return int(np.prod(self.patch))

    @property
    def N(self) -> int:
        return int(np.prod([d // p for d, p in zip(self.dims, self.patch)]))

    @property
    def size(self) -> int:
        return int(np.prod(self.dims))

    def partition(self, z: np.ndarray) -> np.ndarray:
        """Extract the patch matrix V of shape (D, N)."""
        z = np.asarray(z)
        if z.shape != self.dims:
            raise PartitionError(f"tensor shape {z.shape} does not match dims {self.dims}")
        if self.roll is not None:
            z = np.roll(z, shift=self.roll, axis=tuple(range(z.ndim)))
        rank = len(self.dims)
        blocks = [d // p for d, p in zip(self.dims, self.patch)]
        inter = []
        for b, p in zip(blocks, self.patch):
            inter.extend([b, p])
        z = z.reshape(inter)
        order = list(range(0, 2 * rank, 2)) + list(range(1, 2 * rank, 2))
        return z.transpose(order).reshape(self.N, self.D).T.copy()

    def assemble(self, v: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`partition`; exact bit-for-bit round trip."""
        v = np.asarray(v)
        if v.shape != (self.D, self.N):
            raise PartitionError(f"patch matrix shape {v.shape} != ({self.D}, {self.N})")
        rank = len(self.dims)
        blocks = [d // p for d, p in zip(self.dims, self.patch)]
        z = v.T.reshape(blocks + list(self.patch))
        order = []
        for i in range(rank):
            order.extend([i, rank + i])
        z = z.transpose(order).reshape(self.dims)
        if self.roll is not None:
            z = np.roll(z, shift=tuple(-r for r in self.roll), axis=tuple(range(z.ndim)))
        return z.copy()


def partition_t(part: PatchPartition, z: ad.Var) -> ad.Var:
    """Taped patch extraction; the pullback reassembles the cotangent."""
    value = part.partition(z.value)
    return z.tape._record(value, (z.index,), lambda g: (part.assemble(g),))


def assemble_t(part: PatchPartition, v: ad.Var) -> ad.Var:
    """Taped patch assembly; the pullback re-extracts the cotangent."""
    value = part.assemble(v.value)
    return v.tape._record(value, (v.index,), lambda g: (part.partition(g),))
