"""Block-diagonal linear matrix inequality problems.

Primal: ``min c^T x  s.t.  F_0 + sum_i x_i F_i >= 0`` (block by block).
Dual:   ``max -tr(F_0 Z)  s.t.  tr(F_i Z) = c_i,  Z >= 0``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from ..errors import DimensionMismatchError, NonSymmetricError


@dataclass
class LmiBlock:
    """One symmetric block ``F_0 + sum_i x_i F_i``.

    The coefficient matrices are stored as upper-triangular entries
    ``F_{var}[row, col] = F_{var}[col, row] = val`` with ``row <= col``.
    """

    f0: np.ndarray
    var: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    row: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    col: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    val: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.f0 = np.asarray(self.f0, dtype=float)
        if self.f0.ndim != 2 or self.f0.shape[0] != self.f0.shape[1]:
            raise DimensionMismatchError("F0 must be square")
        if np.max(np.abs(self.f0 - self.f0.T), initial=0.0) > 1e-12 * max(
                np.max(np.abs(self.f0), initial=0.0), 1e-300):
            raise NonSymmetricError("F0 is not symmetric")
        self.var = np.asarray(self.var, dtype=np.int64)
        row = np.asarray(self.row, dtype=np.int64)
        col = np.asarray(self.col, dtype=np.int64)
        self.row, self.col = np.minimum(row, col), np.maximum(row, col)
        self.val = np.asarray(self.val, dtype=float)
        n = len(self.var)
        if not (len(self.row) == len(self.col) == len(self.val) == n):
            raise DimensionMismatchError("entry arrays differ in length")
        if n and (self.row.min() < 0 or self.col.max() >= self.size):
            raise DimensionMismatchError("entry index outside the block")

    @property
    def size(self) -> int:
        return self.f0.shape[0]

    def coefficient(self, i: int) -> np.ndarray:
        """Dense ``F_i`` for this block."""
        out = np.zeros_like(self.f0)
        sel = self.var == i
        np.add.at(out, (self.row[sel], self.col[sel]), self.val[sel])
        off = sel & (self.row != self.col)
        np.add.at(out, (self.col[off], self.row[off]), self.val[off])
        return out

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        out = self.f0.copy()
        w = self.val * x[self.var]
        np.add.at(out, (self.row, self.col), w)
        off = self.row != self.col
        np.add.at(out, (self.col[off], self.row[off]), w[off])
        return out

    def adjoint(self, z: np.ndarray, n_vars: int) -> np.ndarray:
        """``(tr(F_i Z))_i`` restricted to this block."""
        mult = np.where(self.row == self.col, 1.0, 2.0)
        return np.bincount(self.var, weights=mult * self.val * z[self.row, self.col],
                           minlength=n_vars)


@dataclass
class SdpProblem:
    objective: np.ndarray
    blocks: List[LmiBlock]

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        for b in self.blocks:
            if len(b.var) and b.var.max() >= self.variable_dim:
                raise DimensionMismatchError("block references an unknown variable")

    @property
    def variable_dim(self) -> int:
        return self.objective.size

    @property
    def block_sizes(self) -> List[int]:
        return [b.size for b in self.blocks]

    def evaluate(self, x: Sequence[float]) -> List[np.ndarray]:
        x = np.asarray(x, dtype=float)
        return [b.evaluate(x) for b in self.blocks]

    def adjoint(self, z_blocks: Sequence[np.ndarray]) -> np.ndarray:
        out = np.zeros(self.variable_dim)
        for b, z in zip(self.blocks, z_blocks):
            out += b.adjoint(np.asarray(z), self.variable_dim)
        return out

    def primal_objective(self, x) -> float:
        return float(self.objective @ np.asarray(x, dtype=float))

    def dual_objective(self, z_blocks) -> float:
        return float(-sum(np.sum(b.f0 * z) for b, z in zip(self.blocks, z_blocks)))
