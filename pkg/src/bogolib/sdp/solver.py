"""Primal-dual interior-point solver for block-diagonal LMI problems.

Infeasible-start path following with Nesterov-Todd scaling and Mehrotra
predictor-corrector steps. Blocks of equal size are stacked so that the
per-block factorizations run as batched numpy calls; the Schur complement is
assembled directly from the sparse coefficient entries.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .problem import SdpProblem

STEP_FRACTION = 0.99


class SdpStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    MAX_ITER = "max_iter"
    NUMERICAL_TROUBLE = "numerical_trouble"


@dataclass
class SdpSolution:
    x: np.ndarray
    Z_blocks: List[np.ndarray]
    S_blocks: List[np.ndarray]
    primal_obj: float
    dual_obj: float
    gap: float
    status: SdpStatus
    iterations: int
    primal_infeasibility: float
    dual_infeasibility: float
    history: List[dict] = field(default_factory=list)

    @property
    def complementary_slackness(self) -> List[float]:
        """``max|Z S|`` per block."""
        return [float(np.max(np.abs(z @ s))) for z, s in zip(self.Z_blocks, self.S_blocks)]


class _Stack:
    """All blocks of one size, with their entries in both orientations."""

    def __init__(self, problem: SdpProblem, ids: List[int]):
        n = problem.variable_dim
        self.ids = ids
        self.m = len(ids)
        self.d = problem.blocks[ids[0]].size
        self.f0 = np.stack([problem.blocks[i].f0 for i in ids])
        parts = {k: [] for k in ("blk", "p", "q", "var", "val")}
        for k, i in enumerate(ids):
            b = problem.blocks[i]
            off = b.row != b.col
            parts["blk"].append(np.full(len(b.var) + int(off.sum()), k, dtype=np.int64))
            parts["p"].append(np.concatenate([b.row, b.col[off]]))
            parts["q"].append(np.concatenate([b.col, b.row[off]]))
            parts["var"].append(np.concatenate([b.var, b.var[off]]))
            parts["val"].append(np.concatenate([b.val, b.val[off]]))
        for k, v in parts.items():
            setattr(self, k, np.concatenate(v) if v else np.zeros(0))
        self.blk = self.blk.astype(np.int64)
        self.p = self.p.astype(np.int64)
        self.q = self.q.astype(np.int64)
        self.var = self.var.astype(np.int64)
        e = self.var.size
        self.n = n
        if self.m == 1:
            self.indicator_t = sp.csr_matrix((np.ones(e), (self.var, np.arange(e))), shape=(n, e))
        else:
            order = np.argsort(self.blk, kind="stable")
            bounds = np.searchsorted(self.blk[order], np.arange(self.m + 1))
            pe, pf = [], []
            for k in range(self.m):
                idx = order[bounds[k]:bounds[k + 1]]
                pe.append(np.repeat(idx, idx.size))
                pf.append(np.tile(idx, idx.size))
            self.pe = np.concatenate(pe)
            self.pf = np.concatenate(pf)
            self.pair_bin = self.var[self.pe] * n + self.var[self.pf]
            self.pair_val = self.val[self.pe] * self.val[self.pf]

    def linear(self, x: np.ndarray) -> np.ndarray:
        out = np.zeros((self.m, self.d, self.d))
        np.add.at(out, (self.blk, self.p, self.q), self.val * x[self.var])
        return out

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.f0 + self.linear(x)

    def adjoint(self, z: np.ndarray) -> np.ndarray:
        return np.bincount(self.var, weights=self.val * z[self.blk, self.q, self.p],
                           minlength=self.n)

    def schur(self, vw: np.ndarray) -> np.ndarray:
        """``M_ij = tr(F_i V F_j V)`` for the symmetric scaling ``V``."""
        if self.var.size == 0:
            return np.zeros((self.n, self.n))
        if self.m == 1:
            a = vw[0][np.ix_(self.q, self.p)]
            t = np.outer(self.val, self.val) * a * a.T
            half = self.indicator_t @ t
            return np.asarray(self.indicator_t @ half.T)
        t = (self.pair_val * vw[self.blk[self.pe], self.q[self.pe], self.p[self.pf]]
             * vw[self.blk[self.pe], self.q[self.pf], self.p[self.pe]])
        return np.bincount(self.pair_bin, weights=t, minlength=self.n * self.n).reshape(
            self.n, self.n)


def _sym(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def _tr_prod(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sum(a * b))


def _max_step(lam: np.ndarray, d_scaled: np.ndarray) -> float:
    """Largest ``a`` with ``diag(lam) + a*D >= 0``."""
    s = 1.0 / np.sqrt(lam)
    ev = np.linalg.eigvalsh(_sym(s[:, :, None] * d_scaled * s[:, None, :]))
    worst = float(ev.min())
    return np.inf if worst >= 0 else -1.0 / worst


def _nt_scaling(s: np.ndarray, z: np.ndarray):
    """``R`` with ``R^T Z R = R^-1 S R^-T = diag(lam)`` (batched)."""
    ls = np.linalg.cholesky(s)
    lz = np.linalg.cholesky(z)
    u, lam, vt = np.linalg.svd(np.swapaxes(lz, -1, -2) @ ls)
    v = np.swapaxes(vt, -1, -2)
    r = ls @ v / np.sqrt(lam)[:, None, :]
    ls_inv = np.linalg.inv(ls)
    r_inv = np.sqrt(lam)[:, :, None] * (vt @ ls_inv)
    return r, r_inv, lam


def solve(problem: SdpProblem, gap_tol: float = 1e-8, feas_tol: float = 1e-8,
          max_iter: int = 200, x0: Optional[np.ndarray] = None,
          z0_scale: Optional[float] = None, keep_history: bool = False) -> SdpSolution:
    """Solve ``min c^T x s.t. F(x) >= 0`` and its dual.

    Convergence requires relative primal and dual residuals below ``feas_tol``
    and a relative duality gap below ``gap_tol``. When the iteration stalls the
    best iterate seen is returned with a non-optimal status.
    """
    n = problem.variable_dim
    c = problem.objective
    sizes = problem.block_sizes
    by_size: dict = {}
    for i, d in enumerate(sizes):
        by_size.setdefault(d, []).append(i)
    stacks = [_Stack(problem, ids) for ids in by_size.values()]
    nu = float(sum(sizes))

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    s_list = [st.apply(x) for st in stacks]
    min_eig = min(float(np.linalg.eigvalsh(s).min()) for s in s_list)
    if min_eig <= 0:
        shift = 1.0 - min_eig
        s_list = [s + shift * np.eye(st.d) for s, st in zip(s_list, stacks)]
    f0_norm = 1.0 + max(float(np.max(np.abs(st.f0), initial=0.0)) for st in stacks)
    c_norm = 1.0 + float(np.max(np.abs(c), initial=0.0))
    if z0_scale is None:
        z0_scale = c_norm
    z_list = [z0_scale * np.broadcast_to(np.eye(st.d), (st.m, st.d, st.d)).copy()
              for st in stacks]

    history = []
    best = None
    status = SdpStatus.MAX_ITER
    it = 0

    def pack(xv, sl, zl, st_status, iters, pinf, dinf, pobj, dobj):
        z_blocks = [None] * len(sizes)
        s_blocks = [None] * len(sizes)
        for stck, zz, ss in zip(stacks, zl, sl):
            for k, i in enumerate(stck.ids):
                z_blocks[i] = _sym(zz[k]).copy()
                s_blocks[i] = _sym(ss[k]).copy()
        return SdpSolution(xv.copy(), z_blocks, s_blocks, pobj, dobj, pobj - dobj, st_status,
                           iters, pinf, dinf, history)

    for it in range(max_iter + 1):
        fx = [st.apply(x) for st in stacks]
        rp = [f - s for f, s in zip(fx, s_list)]
        rd = c - sum(st.adjoint(z) for st, z in zip(stacks, z_list))
        pobj = float(c @ x)
        dobj = -sum(_tr_prod(st.f0, z) for st, z in zip(stacks, z_list))
        compl = sum(_tr_prod(s, z) for s, z in zip(s_list, z_list))
        mu = compl / nu
        pinf = max(float(np.max(np.abs(r))) for r in rp) / f0_norm
        dinf = float(np.max(np.abs(rd), initial=0.0)) / c_norm
        scale = 1.0 + abs(pobj) + abs(dobj)
        rel_gap = max(abs(pobj - dobj), compl) / scale
        merit = max(pinf / feas_tol, dinf / feas_tol, rel_gap / gap_tol)
        if keep_history:
            history.append(dict(iter=it, pobj=pobj, dobj=dobj, pinf=pinf, dinf=dinf, mu=mu))
        if best is None or merit < best[0]:
            best = (merit, x.copy(), [s.copy() for s in s_list], [z.copy() for z in z_list],
                    pinf, dinf, pobj, dobj)
        if pinf <= feas_tol and dinf <= feas_tol and rel_gap <= gap_tol:
            return pack(x, s_list, z_list, SdpStatus.OPTIMAL, it, pinf, dinf, pobj, dobj)
        if it == max_iter:
            break
        if not (np.isfinite(pobj) and np.isfinite(dobj)):
            status = SdpStatus.NUMERICAL_TROUBLE
            break
        if max(abs(pobj), abs(dobj)) > 1e12 * c_norm * f0_norm:
            # iterates running off to infinity: no bounded optimum
            status = SdpStatus.INFEASIBLE
            break

        try:
            scal = [_nt_scaling(s, z) for s, z in zip(s_list, z_list)]
        except np.linalg.LinAlgError:
            status = SdpStatus.NUMERICAL_TROUBLE
            break
        vw = [np.swapaxes(ri, -1, -2) @ ri for _, ri, _ in scal]
        m_mat = sum(st.schur(v) for st, v in zip(stacks, vw))
        m_mat = 0.5 * (m_mat + m_mat.T)
        try:
            factor = sla.cho_factor(m_mat)
        except np.linalg.LinAlgError:
            reg = 1e-13 * max(float(np.trace(m_mat)) / n, 1e-300)
            try:
                factor = sla.cho_factor(m_mat + reg * np.eye(n))
            except np.linalg.LinAlgError:
                status = SdpStatus.NUMERICAL_TROUBLE
                break
        base = -rd - sum(st.adjoint(v @ r @ v) for st, v, r in zip(stacks, vw, rp))

        def direction(k_list):
            t_list = [_sym(np.swapaxes(ri, -1, -2) @ k @ ri)
                      for (_, ri, _), k in zip(scal, k_list)]
            dx = sla.cho_solve(factor, base + sum(st.adjoint(t) for st, t in zip(stacks, t_list)))
            ds = [st.linear(dx) + r for st, r in zip(stacks, rp)]
            dz = [_sym(t - v @ d @ v) for t, v, d in zip(t_list, vw, ds)]
            return dx, ds, dz

        def scaled(ds, dz):
            out_s = [ri @ d @ np.swapaxes(ri, -1, -2) for (_, ri, _), d in zip(scal, ds)]
            out_z = [np.swapaxes(r, -1, -2) @ d @ r for (r, _, _), d in zip(scal, dz)]
            return out_s, out_z

        def steps(ds_sc, dz_sc):
            ap = min(_max_step(lam, d) for (_, _, lam), d in zip(scal, ds_sc))
            ad = min(_max_step(lam, d) for (_, _, lam), d in zip(scal, dz_sc))
            return ap, ad

        lams = [lam for _, _, lam in scal]
        k_aff = [-lam[:, :, None] * np.eye(st.d) for lam, st in zip(lams, stacks)]
        dx_a, ds_a, dz_a = direction(k_aff)
        ds_sc, dz_sc = scaled(ds_a, dz_a)
        ap, ad = steps(ds_sc, dz_sc)
        ap, ad = min(1.0, ap), min(1.0, ad)
        mu_aff = sum(_tr_prod(s + ap * d1, z + ad * d2)
                     for s, z, d1, d2 in zip(s_list, z_list, ds_a, dz_a)) / nu
        sigma = min(1.0, max(0.0, mu_aff / mu)) ** 3 if mu > 0 else 0.0

        k_corr = []
        for lam, st, d1, d2 in zip(lams, stacks, ds_sc, dz_sc):
            rhs = -_sym(d1 @ d2)
            idx = np.arange(st.d)
            rhs[:, idx, idx] += sigma * mu - lam ** 2
            k_corr.append(2.0 * rhs / (lam[:, :, None] + lam[:, None, :]))
        dx, ds, dz = direction(k_corr)
        ds_sc, dz_sc = scaled(ds, dz)
        ap, ad = steps(ds_sc, dz_sc)
        ap = min(1.0, STEP_FRACTION * ap)
        ad = min(1.0, STEP_FRACTION * ad)
        x = x + ap * dx
        s_list = [_sym(s + ap * d) for s, d in zip(s_list, ds)]
        z_list = [_sym(z + ad * d) for z, d in zip(z_list, dz)]
        if ap < 1e-12 and ad < 1e-12:
            status = SdpStatus.NUMERICAL_TROUBLE
            break

    _, xb, sb, zb, pinf, dinf, pobj, dobj = best
    return pack(xb, sb, zb, status, it, pinf, dinf, pobj, dobj)
