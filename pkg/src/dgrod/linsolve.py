"""Sparse linear algebra: triplet assembly and direct/iterative solves.

Thin, deterministic layer over scipy.sparse: triplets are summed in sorted
(row, col) order so the compressed matrix is bitwise independent of
accumulation order, and every solve is verified against its residual
contract before being returned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DIRECT_LIMIT = 300_000


class IndexOutOfRange(Exception):
    """A triplet index falls outside the matrix dimension."""


class SingularMatrix(Exception):
    """The factorization failed; the matrix is (numerically) singular."""


class DidNotConverge(Exception):
    """The solver stopped above the requested residual tolerance."""

    def __init__(self, residual: float, tol: float):
        super().__init__(f"achieved relative residual {residual:.3e} "
                         f"(requested {tol:.3e})")
        self.residual = residual


@dataclass
class SparseMatrix:
    """CSR matrix with deterministic duplicate summation."""

    csr: sp.csr_matrix

    @property
    def n(self) -> int:
        return self.csr.shape[0]

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.csr @ x

    def dump_coordinates(self) -> str:
        """Debug dump, one ``i j value`` line per stored entry."""
        coo = self.csr.tocoo()
        return "\n".join(f"{i} {j} {v:.17g}"
                         for i, j, v in zip(coo.row, coo.col, coo.data)) + "\n"


def to_compressed(rows, cols, vals, n: int) -> SparseMatrix:
    """Sum duplicate triplets into CSR, independent of input order.

    Entries are sorted by (row, col, value) and runs are summed left to
    right, so permuting the triplet list cannot change the result bitwise.
    Entries below 1e-300 in magnitude are pruned.
    """
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=float)
    if len(rows) and (rows.min() < 0 or rows.max() >= n
                      or cols.min() < 0 or cols.max() >= n):
        raise IndexOutOfRange(f"triplet indices outside [0, {n})")
    if not np.all(np.isfinite(vals)):
        raise ValueError("non-finite matrix entries")
    if len(rows) == 0:
        return SparseMatrix(sp.csr_matrix((n, n)))

    order = np.lexsort((vals, cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    new = np.empty(len(rows), dtype=bool)
    new[0] = True
    new[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
    starts = np.flatnonzero(new)
    summed = np.add.reduceat(vals, starts)
    r, c = rows[starts], cols[starts]
    keep = np.abs(summed) >= 1e-300
    csr = sp.csr_matrix((summed[keep], (r[keep], c[keep])), shape=(n, n))
    csr.sort_indices()
    return SparseMatrix(csr)


def solve(A: SparseMatrix, rhs: np.ndarray, tol: float = 1e-12,
          max_work: int = 2000) -> np.ndarray:
    """Solve ``A x = rhs`` to ``||Ax - rhs|| <= tol * ||rhs||``.

    Sparse LU up to :data:`DIRECT_LIMIT` unknowns (with iterative refinement
    if round-off leaves the residual above the contract), GMRES with an
    incomplete-LU preconditioner beyond that.  Failures raise; a returned
    vector always satisfies the contract.
    """
    rhs = np.asarray(rhs, dtype=float)
    n = A.n
    if rhs.shape != (n,):
        raise ValueError("right-hand side has the wrong length")
    norm_rhs = float(np.linalg.norm(rhs))
    if norm_rhs == 0.0:
        return np.zeros(n)

    if n <= DIRECT_LIMIT:
        try:
            lu = spla.splu(A.csr.tocsc())
        except RuntimeError as exc:
            raise SingularMatrix(str(exc)) from None
        x = lu.solve(rhs)
        for _ in range(3):
            res = rhs - A.matvec(x)
            if np.linalg.norm(res) <= tol * norm_rhs:
                break
            x = x + lu.solve(res)
    else:
        ilu = spla.spilu(A.csr.tocsc(), drop_tol=1e-6, fill_factor=20)
        M = spla.LinearOperator((n, n), ilu.solve)
        x, info = spla.gmres(A.csr, rhs, rtol=tol, atol=0.0, M=M,
                             maxiter=max_work, restart=200)
        if info != 0:
            res = float(np.linalg.norm(rhs - A.matvec(x))) / norm_rhs
            raise DidNotConverge(res, tol)

    res = float(np.linalg.norm(rhs - A.matvec(x))) / norm_rhs
    if not np.isfinite(res):
        raise SingularMatrix("solution contains non-finite entries")
    if res > tol:
        raise DidNotConverge(res, tol)
    return x
