"""Symmetric sparse matrices, truncated spectral factors and the two loss functionals.

Conventions used throughout the package:

* a symmetric matrix stores both ``(i, j)`` and ``(j, i)``; the diagonal once;
* truncated factors keep ``sigma = |lambda|`` and ``v[:, l] = sign(lambda_l) u[:, l]``
  so that ``U diag(sigma) V^T`` reproduces a signed symmetric matrix;
* the reconstruction loss is ``||S - U diag(sigma) V^T||_F^2`` and the minimum
  loss at rank ``k`` is the sum of squared eigenvalues outside the top ``k`` by
  magnitude.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np
import scipy.sparse as sp

from .lanczos import ALGEBRAIC, MAGNITUDE, EigenSolverError, lanczos_eigsh, order_indices

__all__ = [
    "ALGEBRAIC",
    "MAGNITUDE",
    "DENSE_CAP",
    "DeltaMatrix",
    "EigenSolverError",
    "SimilarityFn",
    "SpectralFactors",
    "SymSparseMatrix",
    "apply_similarity",
    "dense_eigs_oracle",
    "dense_min_loss",
    "min_loss",
    "reconstruction_loss",
    "topk_eigs",
]

DENSE_CAP = 2000


class SymSparseMatrix:
    """Symmetric sparse matrix with O(1) entry lookup.

    Each row is a dict ``column -> weight`` (the hash index); rows are sorted
    only when exported. The squared Frobenius norm is maintained under every
    mutation with a compensated running sum.
    """

    def __init__(self, n: int):
        if n < 0:
            raise ValueError("n must be non-negative")
        self.n = int(n)
        self._rows: list[dict[int, float]] = [{} for _ in range(self.n)]
        self._frob = 0.0
        self._frob_c = 0.0
        self._nnz = 0
        self._csr = None

    # construction ---------------------------------------------------------

    @classmethod
    def from_entries(cls, n: int, entries: Iterable[tuple[int, int, float]]):
        """Build by accumulating ``(i, j, w)`` additively (symmetrically)."""
        m = cls(n)
        for i, j, w in entries:
            m.add(i, j, w)
        return m

    @classmethod
    def from_dense(cls, a: np.ndarray, atol: float = 0.0):
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("expected a square matrix")
        if not np.allclose(a, a.T, rtol=0.0, atol=atol):
            raise ValueError("matrix is not symmetric")
        m = cls(a.shape[0])
        rows, cols = np.nonzero(np.triu(a))
        for i, j in zip(rows.tolist(), cols.tolist()):
            m.set(i, j, float(a[i, j]))
        return m

    def copy(self):
        out = type(self)(self.n)
        out._rows = [dict(r) for r in self._rows]
        out._frob, out._frob_c, out._nnz = self._frob, self._frob_c, self._nnz
        return out

    # access ---------------------------------------------------------------

    def get(self, i: int, j: int) -> float:
        return self._rows[i].get(j, 0.0)

    __getitem__ = lambda self, ij: self.get(*ij)  # noqa: E731

    def row(self, i: int) -> dict[int, float]:
        """Read-only view of row ``i`` as ``{column: weight}``. Do not mutate."""
        return self._rows[i]

    def degree(self, i: int) -> int:
        return len(self._rows[i])

    @property
    def nnz(self) -> int:
        """Number of stored positions, counting ``(i, j)`` and ``(j, i)`` separately."""
        return self._nnz

    @property
    def num_edges(self) -> int:
        """Number of stored unordered positions (upper triangle incl. diagonal)."""
        diag = sum(1 for i in range(self.n) if i in self._rows[i])
        return (self._nnz + diag) // 2

    @property
    def frob_sq(self) -> float:
        return self._frob + self._frob_c

    def recompute_frob_sq(self) -> float:
        return math.fsum(w * w for r in self._rows for w in r.values())

    def support_rows(self) -> list[int]:
        return [i for i, r in enumerate(self._rows) if r]

    def is_empty(self) -> bool:
        return self._nnz == 0

    def entries(self) -> Iterator[tuple[int, int, float]]:
        """Upper-triangle entries ``(i, j, w)`` with ``i <= j`` in row-major order."""
        for i, r in enumerate(self._rows):
            for j in sorted(r):
                if j >= i:
                    yield i, j, r[j]

    def coo(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """All stored positions (both triangles) as sorted COO arrays."""
        rows, cols, vals = [], [], []
        for i, r in enumerate(self._rows):
            for j in sorted(r):
                rows.append(i)
                cols.append(j)
                vals.append(r[j])
        return (
            np.asarray(rows, dtype=np.int64),
            np.asarray(cols, dtype=np.int64),
            np.asarray(vals, dtype=float),
        )

    def to_csr(self) -> sp.csr_matrix:
        if self._csr is None:
            rows, cols, vals = self.coo()
            self._csr = sp.csr_matrix((vals, (rows, cols)), shape=(self.n, self.n))
        return self._csr

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        for i, r in enumerate(self._rows):
            for j, w in r.items():
                out[i, j] = w
        return out

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.to_csr() @ x

    # mutation -------------------------------------------------------------

    def _accumulate(self, x: float) -> None:
        # Neumaier compensated summation
        t = self._frob + x
        if abs(self._frob) >= abs(x):
            self._frob_c += (self._frob - t) + x
        else:
            self._frob_c += (x - t) + self._frob
        self._frob = t

    def set(self, i: int, j: int, w: float) -> None:
        """Set ``(i, j)`` and ``(j, i)`` to ``w``; ``w == 0`` removes the position."""
        if not (0 <= i < self.n and 0 <= j < self.n):
            raise IndexError(f"position ({i}, {j}) outside {self.n}x{self.n}")
        w = float(w)
        old = self._rows[i].get(j, 0.0)
        if old == w:
            return
        mult = 1 if i == j else 2
        if w == 0.0:
            del self._rows[i][j]
            if i != j:
                del self._rows[j][i]
            self._nnz -= mult
        else:
            if old == 0.0:
                self._nnz += mult
            self._rows[i][j] = w
            self._rows[j][i] = w
        self._accumulate(mult * (w * w - old * old))
        if self._nnz == 0:
            self._frob = self._frob_c = 0.0
        self._csr = None

    def add(self, i: int, j: int, w: float) -> None:
        self.set(i, j, self.get(i, j) + w)

    def apply(self, delta: "SymSparseMatrix") -> None:
        """In-place ``self += delta``."""
        self._check_shape(delta)
        for i, j, w in delta.entries():
            self.add(i, j, w)

    def _check_shape(self, other: "SymSparseMatrix") -> None:
        if other.n != self.n:
            raise ValueError(f"dimension mismatch: {self.n} vs {other.n}")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SymSparseMatrix):
            return NotImplemented
        return self.n == other.n and self._rows == other._rows

    def __repr__(self) -> str:
        return f"{type(self).__name__}(n={self.n}, nnz={self.nnz})"


class DeltaMatrix(SymSparseMatrix):
    """Signed symmetric change for one time slice (or accumulated since a restart)."""

    @property
    def nnz_count(self) -> int:
        return self.nnz


@dataclass
class SpectralFactors:
    """Truncated factors ``(U, sigma, V)`` of rank ``k``."""

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        self.sigma = np.asarray(self.sigma, dtype=float)
        if self.u.shape != self.v.shape or self.u.ndim != 2:
            raise ValueError(f"u and v shapes differ: {self.u.shape} vs {self.v.shape}")
        if self.sigma.shape != (self.u.shape[1],):
            raise ValueError("sigma length must equal the number of columns")

    @property
    def k(self) -> int:
        return self.sigma.shape[0]

    @property
    def n(self) -> int:
        return self.u.shape[0]

    @classmethod
    def from_eigs(cls, values: np.ndarray, vectors: np.ndarray) -> "SpectralFactors":
        values = np.asarray(values, dtype=float)
        signs = np.where(values < 0, -1.0, 1.0)
        return cls(u=vectors.copy(), sigma=np.abs(values), v=vectors * signs)

    @classmethod
    def zeros(cls, n: int, k: int) -> "SpectralFactors":
        return cls(u=np.zeros((n, k)), sigma=np.zeros(k), v=np.zeros((n, k)))

    def signs(self) -> np.ndarray:
        return np.where(np.einsum("ij,ij->j", self.u, self.v) < 0, -1.0, 1.0)

    def signed_values(self) -> np.ndarray:
        """Eigenvalues implied by the sign convention ``v = sign * u``."""
        return self.sigma * self.signs()

    def entries_at(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        """Reconstructed values ``(U diag(sigma) V^T)[rows, cols]`` in O(k) each."""
        return np.einsum("ij,ij->i", self.u[rows] * self.sigma, self.v[cols])

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.sigma) @ self.v.T

    def copy(self) -> "SpectralFactors":
        return SpectralFactors(self.u.copy(), self.sigma.copy(), self.v.copy())


# ---------------------------------------------------------------------------
# similarity functions


@dataclass(frozen=True)
class SimilarityFn:
    """Adjacency-to-similarity transform.

    ``identity`` returns the adjacency matrix; ``laplacian`` returns the
    symmetrically normalized ``D^{-1/2} A D^{-1/2}`` with ``D`` the absolute
    weighted degree (isolated rows stay zero).
    """

    name: str = "identity"

    def __post_init__(self):
        if self.name not in ("identity", "laplacian"):
            raise ValueError(f"unknown similarity {self.name!r}")

    def apply(self, a: SymSparseMatrix) -> SymSparseMatrix:
        return apply_similarity(self, a)

    def delta(self, a_prev: SymSparseMatrix, delta_a: SymSparseMatrix,
              s_prev: SymSparseMatrix) -> DeltaMatrix:
        """Similarity change caused by applying ``delta_a`` to ``a_prev``.

        For the normalized variant only rows whose degree changed (and their
        neighbours) are revisited.
        """
        out = DeltaMatrix(a_prev.n)
        if self.name == "identity":
            for i, j, w in delta_a.entries():
                out.set(i, j, w)
            return out
        a_new = a_prev.copy()
        a_new.apply(delta_a)
        # S(x, y) changes only if A(x, y) changed or d_x / d_y changed, and both
        # imply x or y lies in the support of delta_a
        deg: dict[int, float] = {}

        def degree(x: int) -> float:
            if x not in deg:
                deg[x] = _abs_degree(a_new, x)
            return deg[x]

        positions = set()
        for x in delta_a.support_rows():
            for y in set(a_new.row(x)) | set(a_prev.row(x)):
                positions.add((min(x, y), max(x, y)))
        for x, y in sorted(positions):
            w = a_new.get(x, y)
            dx, dy = degree(x), degree(y)
            new = w / math.sqrt(dx * dy) if w != 0.0 and dx > 0 and dy > 0 else 0.0
            change = new - s_prev.get(x, y)
            if change != 0.0:
                out.set(x, y, change)
        return out


def _abs_degree(a: SymSparseMatrix, i: int) -> float:
    return math.fsum(abs(w) for w in a.row(i).values())


def apply_similarity(fn: SimilarityFn, a: SymSparseMatrix) -> SymSparseMatrix:
    if fn.name == "identity":
        return a.copy()
    deg = np.array([_abs_degree(a, i) for i in range(a.n)])
    out = SymSparseMatrix(a.n)
    for i, j, w in a.entries():
        if deg[i] > 0 and deg[j] > 0:
            out.set(i, j, w / math.sqrt(deg[i] * deg[j]))
    return out


# ---------------------------------------------------------------------------
# eigen-decompositions


def topk_eigs(
    m: SymSparseMatrix,
    k: int,
    tol: float = 1e-10,
    which: str = MAGNITUDE,
) -> tuple[np.ndarray, np.ndarray]:
    """Top-``k`` eigenpairs of ``m`` by Lanczos.

    ``which='magnitude'`` orders by ``|lambda|`` (ties: positive first), the
    ordering the minimum loss needs; ``which='algebraic'`` orders by signed
    value. Residuals satisfy ``||m u - lambda u|| <= tol * ||m||_F``.
    """
    if not 1 <= k <= m.n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={m.n}")
    scale = math.sqrt(m.frob_sq)
    if scale == 0.0:
        return np.zeros(k), np.eye(m.n, k)
    csr = m.to_csr()
    return lanczos_eigsh(csr.dot, m.n, k, which=which, tol=tol, scale=scale)


def dense_eigs_oracle(m, which: str = MAGNITUDE, cap: int = DENSE_CAP):
    """Full spectrum by dense ``eigh``; ordered like :func:`topk_eigs`.

    Accepts a :class:`SymSparseMatrix` or a dense symmetric array.
    """
    a = m.to_dense() if isinstance(m, SymSparseMatrix) else np.asarray(m, dtype=float)
    if a.shape[0] > cap:
        raise ValueError(f"dense oracle capped at n={cap}, got n={a.shape[0]}")
    values, vectors = np.linalg.eigh(a)
    scale = float(np.max(np.abs(values))) if values.size else 0.0
    order = order_indices(values, which, tie_tol=1e-12 * scale)
    return values[order], vectors[:, order]


def dense_min_loss(m, k: int, cap: int = DENSE_CAP) -> float:
    """Minimum rank-``k`` loss from the dense spectrum (tail sum of squares)."""
    a = m.to_dense() if isinstance(m, SymSparseMatrix) else np.asarray(m, dtype=float)
    if a.shape[0] > cap:
        raise ValueError(f"dense oracle capped at n={cap}, got n={a.shape[0]}")
    values = np.linalg.eigvalsh(a)
    sq = np.sort(values * values)[::-1]
    return math.fsum(sq[k:])


# ---------------------------------------------------------------------------
# losses


def min_loss(frob_sq: float, topk_values: np.ndarray) -> float:
    """``||S||_F^2 - sum of top-k squared eigenvalues``, clamped at zero."""
    top = math.fsum(float(x) * float(x) for x in np.asarray(topk_values).ravel())
    return max(frob_sq - top, 0.0)


def cross_term(s: SymSparseMatrix, f: SpectralFactors) -> float:
    """``tr(S^T U diag(sigma) V^T)`` summed over stored entries of ``S`` only."""
    rows, cols, vals = s.coo()
    if vals.size == 0:
        return 0.0
    return float(np.dot(vals, f.entries_at(rows, cols)))


def gram_term(sigma: np.ndarray, gram_u: np.ndarray, gram_v: np.ndarray) -> float:
    """``||U diag(sigma) V^T||_F^2`` from the k x k Gram matrices."""
    return float(sigma @ (gram_u * gram_v) @ sigma)


def reconstruction_loss(s: SymSparseMatrix, f: SpectralFactors) -> float:
    """``||S - U diag(sigma) V^T||_F^2`` without forming the dense product."""
    if f.n != s.n:
        raise ValueError(f"dimension mismatch: matrix n={s.n}, factors n={f.n}")
    if f.k == 0:
        return s.frob_sq
    gram = gram_term(f.sigma, f.u.T @ f.u, f.v.T @ f.v)
    return max(s.frob_sq - 2.0 * cross_term(s, f) + gram, 0.0)
