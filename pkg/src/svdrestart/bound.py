"""Lower bound on the minimum loss and incremental reconstruction-loss tracking.

After a full decomposition at slice ``t'`` the minimum loss of the perturbed
matrix ``S + dS`` (``dS = S_t - S_t'``) satisfies

    L(S + dS, k) >= L(S, k) + [||S + dS||_F^2 - ||S||_F^2] - Lambda_k(N)

with ``N = S dS + dS S + dS dS`` and ``Lambda_k`` the sum of the ``k`` largest
(signed) eigenvalues. ``N`` is applied implicitly and only on the rows within
one hop of the support of ``dS``, so the cost tracks the size of the change,
not the size of the network.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .lanczos import ALGEBRAIC, lanczos_eigsh
from .spectral import (
    DeltaMatrix,
    SpectralFactors,
    SymSparseMatrix,
    gram_term,
    min_loss,
    reconstruction_loss,
)

__all__ = [
    "MonitorState",
    "NablaOperator",
    "delta_tr2",
    "lower_bound",
    "loss_update_delta",
    "loss_update_rows",
    "nabla_topk",
]


@dataclass
class MonitorState:
    """Running monitor quantities anchored at the last restart ``t_prime``."""

    anchor: SymSparseMatrix
    anchor_loss: float
    cum_delta: DeltaMatrix
    current_loss: float
    current_bound: float
    t_prime: int = 0
    initial_loss: float | None = None
    gram_u: np.ndarray | None = None
    gram_v: np.ndarray | None = None
    # instrumentation: stored entries visited by loss updates since creation
    entry_visits: int = 0
    stats: dict = field(default_factory=dict)

    @property
    def anchor_frob_sq(self) -> float:
        return self.anchor.frob_sq

    @classmethod
    def at_restart(cls, s: SymSparseMatrix, topk_values: np.ndarray, t: int,
                   initial_loss: float | None = None) -> "MonitorState":
        """Fresh state after a full decomposition of ``s`` at slice ``t``.

        The loss comes from the cached Frobenius norm and the top-k values, so
        it costs O(M + k) beyond the snapshot of ``s``.
        """
        loss = min_loss(s.frob_sq, topk_values)
        return cls(
            anchor=s.copy(),
            anchor_loss=loss,
            cum_delta=DeltaMatrix(s.n),
            current_loss=loss,
            current_bound=loss,
            t_prime=t,
            initial_loss=loss if initial_loss is None else initial_loss,
        )

    def absorb(self, delta: DeltaMatrix) -> None:
        """Fold one slice into ``S_t - S_t'``; repeated positions coalesce."""
        self.cum_delta.apply(delta)


def delta_tr2(s_anchor: SymSparseMatrix, delta: SymSparseMatrix) -> float:
    """``||S + dS||_F^2 - ||S||_F^2`` summed over the stored positions of ``dS``."""
    if delta.n != s_anchor.n:
        raise ValueError(f"dimension mismatch: {s_anchor.n} vs {delta.n}")
    terms = []
    for i, j, d in delta.entries():
        old = s_anchor.get(i, j)
        new = old + d
        term = new * new - old * old
        terms.append(term if i == j else 2.0 * term)
    return math.fsum(terms)


class NablaOperator:
    """Implicit ``S dS + dS S + dS dS`` restricted to its nonzero rows.

    With ``R`` the rows touched by ``dS`` and ``W = R + neighbours of R in S``,
    every nonzero of the operator lies in ``W x W``. Only rows of ``R`` are ever
    read from ``S``; ``rows_read`` records them for inspection.
    """

    def __init__(self, s_anchor: SymSparseMatrix, delta: SymSparseMatrix):
        if delta.n != s_anchor.n:
            raise ValueError(f"dimension mismatch: {s_anchor.n} vs {delta.n}")
        self.n = s_anchor.n
        R = delta.support_rows()
        self.rows_read = set(R)
        extra = sorted({j for i in R for j in s_anchor.row(i)} - self.rows_read)
        self.support = np.asarray(R + extra, dtype=np.int64)
        pos = {int(g): loc for loc, g in enumerate(self.support)}
        r = len(R)
        self._r = r

        rows, cols, vals = [], [], []
        for li, i in enumerate(R):
            for j, w in s_anchor.row(i).items():
                rows.append(li)
                cols.append(pos[j])
                vals.append(w)
        self._s_rw = sp.csr_matrix((vals, (rows, cols)), shape=(r, len(self.support)))
        rows, cols, vals = [], [], []
        for li, i in enumerate(R):
            for j, w in delta.row(i).items():
                rows.append(li)
                cols.append(pos[j])
                vals.append(w)
        self._d = sp.csr_matrix((vals, (rows, cols)), shape=(r, r))
        self._s_wr = self._s_rw.T.tocsr()
        self.matvecs = 0

    @property
    def n_support(self) -> int:
        """Number of rows the operator can be nonzero on (N_L)."""
        return len(self.support)

    @property
    def entries_per_matvec(self) -> int:
        """Stored entries read by one local matvec; stands in for M_L."""
        return 2 * self._s_rw.nnz + 2 * self._d.nnz

    @property
    def entry_visits(self) -> int:
        return self.matvecs * self.entries_per_matvec

    def local_matvec(self, x: np.ndarray) -> np.ndarray:
        self.matvecs += 1
        r = self._r
        xr = x[:r]
        dx = self._d @ xr
        y = self._s_wr @ dx
        y[:r] += self._d @ (self._s_rw @ x) + self._d @ dx
        return y

    def matvec(self, v: np.ndarray) -> np.ndarray:
        """Full-length product; zero outside ``support``."""
        out = np.zeros(self.n)
        if self.n_support:
            out[self.support] = self.local_matvec(np.asarray(v, dtype=float)[self.support])
        return out

    def to_dense(self) -> np.ndarray:
        m = len(self.support)
        local = np.column_stack([self.local_matvec(e) for e in np.eye(m)]) if m else np.zeros((0, 0))
        out = np.zeros((self.n, self.n))
        out[np.ix_(self.support, self.support)] = local
        return out


def nabla_topk(op: NablaOperator, k: int, tol: float = 1e-10) -> np.ndarray:
    """``k`` largest signed eigenvalues of the full ``n x n`` operator, descending.

    Eigenvalues of the rows outside the support are exact zeros and are merged in.
    """
    if k < 1:
        raise ValueError("k must be positive")
    m = op.n_support
    if m == 0 or op.entries_per_matvec == 0:
        return np.zeros(k)
    kk = min(k, m)
    values, _ = lanczos_eigsh(op.local_matvec, m, kk, which=ALGEBRAIC, tol=tol)
    zeros = np.zeros(min(k, op.n - m))
    merged = np.sort(np.concatenate([values, zeros]))[::-1]
    return merged[:k]


def lower_bound(state: MonitorState, k: int, tol: float = 1e-10) -> float:
    """Bound ``B(t)`` on ``L(S_t, k)``; also stored in ``state.current_bound``.

    May be zero or negative when the accumulated change is large.
    """
    if state.cum_delta.is_empty():
        state.current_bound = state.anchor_loss
        state.stats = {"n_support": 0, "entries_per_matvec": 0, "matvecs": 0, "rows_read": 0}
        return state.current_bound
    op = NablaOperator(state.anchor, state.cum_delta)
    lam = nabla_topk(op, k, tol)
    bound = state.anchor_loss + delta_tr2(state.anchor, state.cum_delta) - math.fsum(lam)
    state.current_bound = bound
    state.stats = {
        "n_support": op.n_support,
        "entries_per_matvec": op.entries_per_matvec,
        "matvecs": op.matvecs,
        "rows_read": len(op.rows_read),
    }
    return bound


def _check_dims(f: SpectralFactors, *mats: SymSparseMatrix) -> None:
    for m in mats:
        if m.n != f.n:
            raise ValueError(f"dimension mismatch: matrix n={m.n}, factors n={f.n}")


def loss_update_delta(state: MonitorState, f: SpectralFactors, s_prev: SymSparseMatrix,
                      delta: SymSparseMatrix) -> float:
    """Reconstruction loss after ``s_prev += delta`` with the factors held at ``f``.

    Only stored positions of ``delta`` are visited, O(k) each. Updates
    ``state.current_loss`` and returns it.
    """
    _check_dims(f, s_prev, delta)
    rows, cols, d = delta.coo()
    if d.size == 0:
        return state.current_loss
    prev = np.fromiter((s_prev.get(i, j) for i, j in zip(rows.tolist(), cols.tolist())),
                       dtype=float, count=d.size)
    r = f.entries_at(rows, cols)
    # (prev + d - r)^2 - (prev - r)^2
    change = float(np.dot(d, 2.0 * (prev - r) + d))
    state.entry_visits += int(d.size)
    state.current_loss = max(state.current_loss + change, 0.0)
    return state.current_loss


def _ensure_grams(state: MonitorState, f: SpectralFactors) -> None:
    if state.gram_u is None or state.gram_u.shape != (f.k, f.k):
        state.gram_u = f.u.T @ f.u
        state.gram_v = f.v.T @ f.v


def loss_update_rows(state: MonitorState, f_old: SpectralFactors, f_new: SpectralFactors,
                     changed_nodes, s: SymSparseMatrix) -> float:
    """Reconstruction loss on ``s`` after replacing rows ``changed_nodes`` of U and V.

    Only the cross terms on rows/columns of changed nodes are revisited
    (O(k d_i) per node) and the cached k x k Gram matrices are patched
    (O(k^2) per node). A change of ``sigma`` falls back to a full recompute.
    Updates ``state.current_loss`` and returns it.
    """
    _check_dims(f_old, s)
    _check_dims(f_new, s)
    if f_old.k != f_new.k:
        raise ValueError("factor ranks differ")
    changed = np.unique(np.asarray(sorted(changed_nodes), dtype=np.int64))
    if changed.size and (changed[0] < 0 or changed[-1] >= s.n):
        raise ValueError("changed node index out of range")
    mask = np.zeros(s.n, dtype=bool)
    mask[changed] = True
    if not (np.array_equal(f_old.u[~mask], f_new.u[~mask])
            and np.array_equal(f_old.v[~mask], f_new.v[~mask])):
        raise ValueError("factors differ on rows not listed in changed_nodes")

    if not np.array_equal(f_old.sigma, f_new.sigma) or changed.size == s.n:
        state.current_loss = reconstruction_loss(s, f_new)
        state.gram_u = f_new.u.T @ f_new.u
        state.gram_v = f_new.v.T @ f_new.v
        state.entry_visits += s.nnz
        return state.current_loss
    if changed.size == 0:
        return state.current_loss

    _ensure_grams(state, f_old)
    sigma = f_old.sigma
    old_gram = gram_term(sigma, state.gram_u, state.gram_v)

    # stored (i, j) with i or j changed; S symmetric, so row j lists column i
    rows, cols, vals = [], [], []
    for i in changed.tolist():
        for j, w in s.row(i).items():
            rows.append(i)
            cols.append(j)
            vals.append(w)
            if not mask[j]:
                rows.append(j)
                cols.append(i)
                vals.append(w)
    if vals:
        rows_a = np.asarray(rows, dtype=np.int64)
        cols_a = np.asarray(cols, dtype=np.int64)
        d_cross = float(np.dot(vals, f_new.entries_at(rows_a, cols_a) - f_old.entries_at(rows_a, cols_a)))
    else:
        d_cross = 0.0

    uo, un = f_old.u[changed], f_new.u[changed]
    vo, vn = f_old.v[changed], f_new.v[changed]
    state.gram_u = state.gram_u + un.T @ un - uo.T @ uo
    state.gram_v = state.gram_v + vn.T @ vn - vo.T @ vo
    new_gram = gram_term(sigma, state.gram_u, state.gram_v)

    state.entry_visits += len(vals)
    state.current_loss = max(state.current_loss - 2.0 * d_cross + new_gram - old_gram, 0.0)
    return state.current_loss
