"""Log-determinant ratios and traces for the energy and force integrands."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import SignMismatchError, SingularMatrixError

PIVOT_FLOOR = 1e-30
SERIES_NORM = 0.05


@dataclass(frozen=True)
class Factorization:
    """LU factors with partial pivoting, log|det| and determinant sign."""

    lu: np.ndarray
    piv: np.ndarray
    logabsdet: float
    sign: float

    @classmethod
    def of(cls, A: np.ndarray) -> "Factorization":
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"need a square matrix, got shape {A.shape}")
        if A.shape[0] == 0:
            return cls(A.copy(), np.zeros(0, dtype=np.int32), 0.0, 1.0)
        if not np.all(np.isfinite(A)):
            raise SingularMatrixError("matrix has non-finite entries")
        lu, piv = sla.lu_factor(A, check_finite=False)
        d = np.diag(lu)
        scale = max(1.0, float(np.abs(A).max()))
        if np.min(np.abs(d)) <= PIVOT_FLOOR * scale:
            raise SingularMatrixError(
                f"pivot {np.min(np.abs(d)):.3e} below {PIVOT_FLOOR:g} (relative)")
        swaps = np.count_nonzero(piv != np.arange(len(piv)))
        sign = (-1.0) ** swaps * np.prod(np.sign(d))
        return cls(lu, piv, float(np.sum(np.log(np.abs(d)))), float(sign))

    @property
    def n(self) -> int:
        return self.lu.shape[0]

    def solve(self, b, trans: int = 0):
        return sla.lu_solve((self.lu, self.piv), b, trans=trans, check_finite=False)

    def unpack(self):
        """Return (P, L, U) with A = P L U."""
        n = self.n
        L = np.tril(self.lu, -1) + np.eye(n)
        U = np.triu(self.lu)
        perm = np.arange(n)
        for i, p in enumerate(self.piv):
            perm[i], perm[p] = perm[p], perm[i]
        P = np.eye(n)[:, perm]
        return P, L, U


def _as_array(M):
    return M.matrix if hasattr(M, "matrix") else np.asarray(M, dtype=float)


def _blocks(M, Minf):
    offs = getattr(Minf, "offsets", None)
    if offs is None:
        offs = getattr(M, "offsets", None)
    n = _as_array(M).shape[0]
    if offs is None:
        return [slice(0, n)]
    return [slice(int(a), int(b)) for a, b in zip(offs[:-1], offs[1:])]


def log_det(M) -> tuple:
    """(sign, log|det M|) through one LU factorization."""
    f = Factorization.of(_as_array(M))
    return f.sign, f.logabsdet


def log_det_inf(Minf) -> tuple:
    """(sign, log|det|) of a block-diagonal matrix from its diagonal blocks."""
    A = _as_array(Minf)
    sign, tot = 1.0, 0.0
    for s in _blocks(Minf, Minf):
        f = Factorization.of(A[s, s])
        sign *= f.sign
        tot += f.logabsdet
    return sign, tot


def log_det_ratio(M, Minf, factors=None) -> float:
    """log det M - log det Minf for block-diagonal ``Minf``.

    Computed as log det(I + W) with W = Minf^{-1} (M - Minf), using the
    diagonal-block factorizations of Minf.  For small W the power series of
    log det(I + W) is summed directly, which keeps full relative accuracy
    when the bodies barely interact.
    """
    A, B = _as_array(M), _as_array(Minf)
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch {A.shape} vs {B.shape}")
    blocks = _blocks(M, Minf)
    if factors is None:
        factors = [Factorization.of(B[s, s]) for s in blocks]
    if len(blocks) == 1:
        if np.array_equal(A, B):
            return 0.0
        f = Factorization.of(A)
        if f.sign != factors[0].sign:
            raise SignMismatchError("det M and det Minf have opposite signs")
        return f.logabsdet - factors[0].logabsdet
    W = np.empty_like(A)
    same_diag = True
    for s, f in zip(blocks, factors):
        R = A[s, :].copy()
        R[:, s] -= B[s, s]
        same_diag &= not np.any(R[:, s])
        W[s, :] = f.solve(R)
    if not np.any(W):
        return 0.0
    if len(blocks) == 2 and same_diag:
        # det [[I, W12], [W21, I]] = det(I - W12 W21)
        s1, s2 = blocks
        return _logdet_one_plus(-(W[s1, s2] @ W[s2, s1]))
    return _logdet_one_plus(W)


def _logdet_one_plus(W):
    """log det(I + W), raising on a negative determinant."""
    nrm = np.linalg.norm(W)
    if nrm < SERIES_NORM:
        return _series(W)
    f = Factorization.of(np.eye(len(W)) + W)
    if f.sign < 0:
        raise SignMismatchError("det M and det Minf have opposite signs")
    return f.logabsdet


def _series(W, max_terms: int = 200):
    # log det(I + W) = sum_k (-1)^(k+1) tr(W^k) / k
    total = 0.0
    P = W.copy()
    for k in range(1, max_terms + 1):
        term = np.trace(P) / k
        total += term if k % 2 else -term
        if abs(term) <= 1e-17 * max(abs(total), 1e-300) and k > 2:
            break
        P = P @ W
    return float(total)


def force_trace(M, dM, factorization: Factorization | None = None,
                body: int | None = None, symmetric: bool = False) -> float:
    """Tr(M^{-1} dM).

    When ``dM`` is nonzero only in the rows and columns of one body
    (``body``, or ``dM.displaced``), only the columns of M^{-1} belonging to
    that body and the matching rows are solved for.  With ``symmetric`` the
    relation M^T = D M D (D = +1 on K rows, -1 on N rows) and the same
    relation for dM halve the work again: Tr = 2 Tr(M^{-1} U) where U holds
    the columns of the displaced body.
    """
    A, dA = _as_array(M), _as_array(dM)
    if A.shape != dA.shape:
        raise ValueError(f"shape mismatch {A.shape} vs {dA.shape}")
    if not np.any(dA):
        return 0.0
    f = factorization or Factorization.of(A)
    if body is None:
        body = getattr(dM, "displaced", None)
    if body is None:
        X = f.solve(dA)
        return float(np.trace(X))
    blocks = _blocks(dM, dM)
    s = blocks[body]
    n = A.shape[0]
    others = np.ones(n, dtype=bool)
    others[s] = False
    E = np.zeros((n, s.stop - s.start))
    E[s, :] = np.eye(s.stop - s.start)
    # rows s of M^{-1}: Y = M^{-T} E_s, (M^{-1})[c, r] = Y[r, c - s.start]
    Y = f.solve(E, trans=1)
    t_cols = float(np.sum(Y[others, :] * dA[others, s]))
    if symmetric:
        return 2.0 * t_cols
    # columns s of M^{-1}: X = M^{-1} E_s, (M^{-1})[c, r] for r in s
    X = f.solve(E)
    t_rows = float(np.sum(X[others, :].T * dA[s, :][:, others]))
    return t_cols + t_rows
