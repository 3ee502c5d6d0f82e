"""Plain-text dump/load of LMI problems and matrices.

Layout::

    sdp <n_vars> <n_blocks>
    objective
    <n_vars values>
    block <b> <size>
    F0
    <size rows of size values>
    F <i>
    <size rows of size values>
    ...
    end

Only coefficient matrices that are nonzero on a block are written.
"""
from __future__ import annotations

from pathlib import Path
from typing import List, TextIO, Union

import numpy as np

from .problem import LmiBlock, SdpProblem

PathLike = Union[str, Path]


def _fmt(v: float) -> str:
    return repr(float(v))


def _write_matrix(fh: TextIO, a: np.ndarray) -> None:
    for row in np.atleast_2d(a):
        fh.write(" ".join(_fmt(v) for v in row) + "\n")


def dump_matrix(a: np.ndarray, path: PathLike) -> None:
    """``rows cols`` header, then row-major entries."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    with open(path, "w") as fh:
        fh.write(f"{a.shape[0]} {a.shape[1]}\n")
        _write_matrix(fh, a)


def load_matrix(path: PathLike) -> np.ndarray:
    with open(path) as fh:
        rows, cols = (int(t) for t in fh.readline().split())
        data = np.array([float(t) for line in fh for t in line.split()])
    if data.size != rows * cols:
        raise ValueError(f"expected {rows * cols} entries, found {data.size}")
    return data.reshape(rows, cols)


def dump_problem(problem: SdpProblem, path: PathLike) -> None:
    with open(path, "w") as fh:
        fh.write(f"sdp {problem.variable_dim} {len(problem.blocks)}\n")
        fh.write("objective\n")
        fh.write(" ".join(_fmt(v) for v in problem.objective) + "\n")
        for b_idx, block in enumerate(problem.blocks):
            fh.write(f"block {b_idx} {block.size}\n")
            fh.write("F0\n")
            _write_matrix(fh, block.f0)
            for i in np.unique(block.var):
                fh.write(f"F {int(i)}\n")
                _write_matrix(fh, block.coefficient(int(i)))
        fh.write("end\n")


def load_problem(path: PathLike) -> SdpProblem:
    with open(path) as fh:
        lines = [ln.split() for ln in fh if ln.strip()]
    pos = 0

    def take():
        nonlocal pos
        pos += 1
        return lines[pos - 1]

    head = take()
    if head[0] != "sdp":
        raise ValueError("not an sdp problem file")
    n_vars, n_blocks = int(head[1]), int(head[2])
    if take()[0] != "objective":
        raise ValueError("missing objective")
    objective = np.array([float(t) for t in take()])
    if objective.size != n_vars:
        raise ValueError("objective length does not match header")

    def read_matrix(size: int) -> np.ndarray:
        return np.array([[float(t) for t in take()] for _ in range(size)])

    blocks: List[LmiBlock] = []
    for _ in range(n_blocks):
        tag = take()
        if tag[0] != "block":
            raise ValueError(f"expected block header, got {tag}")
        size = int(tag[2])
        if take()[0] != "F0":
            raise ValueError("missing F0")
        f0 = read_matrix(size)
        var, row, col, val = [], [], [], []
        while lines[pos][0] == "F":
            i = int(take()[1])
            fi = read_matrix(size)
            r, c = np.nonzero(np.triu(fi))
            var += [i] * r.size
            row += r.tolist()
            col += c.tolist()
            val += fi[r, c].tolist()
        blocks.append(LmiBlock(f0, var, row, col, val))
    if take()[0] != "end":
        raise ValueError("missing end marker")
    return SdpProblem(objective, blocks)
