"""Small dense linear algebra used by the critical-point solvers.

Everything here targets tiny problems (dimension well below 64): partial
pivot elimination, cyclic Jacobi eigensolving, inertia counting, the
0-in-convex-hull test, a damped Newton iteration and central differences.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Callable

import numpy as np

MAX_DIM = 64

LINEAR_TOL = 1e-10
EIG_OFFDIAG_TOL = 1e-12
NEWTON_TOL = 1e-9
INERTIA_REL_TOL = 1e-7


class SingularMatrixError(ArithmeticError):
    """Elimination met a pivot below tolerance."""

    def __init__(self, pivot: float, column: int):
        super().__init__(f"matrix singular to tolerance: pivot {pivot:.3e} in column {column}")
        self.pivot = pivot
        self.column = column


class NotSymmetricError(ValueError):
    pass


class NewtonError(RuntimeError):
    """Newton iteration did not reach the residual tolerance."""

    def __init__(self, message: str, x: np.ndarray, residual: float, iterations: int):
        super().__init__(message)
        self.x = x
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class InertiaTriple:
    neg: int
    zero: int
    pos: int
    tol: float

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.neg, self.zero, self.pos)


@dataclass(frozen=True)
class BarycentricSolution:
    lambdas: np.ndarray
    feasible: bool
    residual: float


@dataclass(frozen=True)
class NewtonResult:
    x: np.ndarray
    residual: float
    iterations: int


def solve_linear(A, b, tol: float = 1e-13) -> np.ndarray:
    """Solve ``A x = b`` by Gaussian elimination with partial pivoting.

    A pivot smaller than ``tol * max|A|`` raises :class:`SingularMatrixError`.
    """
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    m = A.shape[0]
    if A.ndim != 2 or A.shape[1] != m:
        raise ValueError(f"matrix must be square, got shape {A.shape}")
    if b.shape != (m,):
        raise ValueError(f"right-hand side has shape {b.shape}, expected ({m},)")
    scale = np.abs(A).max() if A.size else 0.0
    thresh = tol * scale
    for col in range(m):
        piv = col + int(np.argmax(np.abs(A[col:, col])))
        pval = A[piv, col]
        if abs(pval) <= thresh or pval == 0.0:
            raise SingularMatrixError(abs(pval), col)
        if piv != col:
            A[[col, piv]] = A[[piv, col]]
            b[[col, piv]] = b[[piv, col]]
        factors = A[col + 1 :, col] / A[col, col]
        A[col + 1 :, col:] -= np.outer(factors, A[col, col:])
        b[col + 1 :] -= factors * b[col]
    x = np.empty(m)
    for row in range(m - 1, -1, -1):
        x[row] = (b[row] - A[row, row + 1 :] @ x[row + 1 :]) / A[row, row]
    return x


def _check_symmetric(A) -> np.ndarray:
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise NotSymmetricError(f"expected a square matrix, got shape {A.shape}")
    if A.shape[0] > MAX_DIM:
        raise ValueError(f"dimension {A.shape[0]} exceeds the supported maximum {MAX_DIM}")
    norm = np.linalg.norm(A)
    if np.linalg.norm(A - A.T) > 1e-10 * (1.0 + norm):
        raise NotSymmetricError("matrix is not symmetric")
    return 0.5 * (A + A.T)


def sym_eig(A) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvectors (columns).

    Cyclic Jacobi sweeps run until the off-diagonal Frobenius norm drops
    below ``1e-12 * ||A||``.
    """
    A = _check_symmetric(A)
    m = A.shape[0]
    Q = np.eye(m)
    norm = np.linalg.norm(A)
    if m <= 1 or norm == 0.0:
        return np.diag(A).copy(), Q
    target = EIG_OFFDIAG_TOL * norm
    for _ in range(100):
        off = float(np.linalg.norm(A - np.diag(np.diag(A))))
        if off < target:
            break
        for p in range(m - 1):
            for q in range(p + 1, m):
                apq = A[p, q]
                if abs(apq) < 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap = A[:, p].copy()
                aq = A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                rp = A[p, :].copy()
                rq = A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                A[p, q] = A[q, p] = 0.0
                qp = Q[:, p].copy()
                qq = Q[:, q].copy()
                Q[:, p] = c * qp - s * qq
                Q[:, q] = s * qp + c * qq
    vals = np.diag(A).copy()
    order = np.argsort(vals, kind="stable")
    return vals[order], Q[:, order]


def inertia(A, tol: float | None = None) -> InertiaTriple:
    """Count eigenvalues below ``-tol``, within ``[-tol, tol]`` and above ``tol``.

    The default band is ``1e-7 * ||A||_F``.
    """
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return InertiaTriple(0, 0, 0, 0.0 if tol is None else tol)
    if tol is None:
        tol = INERTIA_REL_TOL * float(np.linalg.norm(A))
    vals, _ = sym_eig(A)
    neg = int(np.sum(vals < -tol))
    pos = int(np.sum(vals > tol))
    return InertiaTriple(neg, len(vals) - neg - pos, pos, float(tol))


def orth_complement(vectors, n: int, rel_tol: float = 1e-9) -> np.ndarray:
    """Orthonormal basis (as columns) of the complement of ``span(vectors)``."""
    V = np.asarray(vectors, dtype=float).reshape(-1, n)
    if V.shape[0] == 0:
        return np.eye(n)
    G = V.T @ V
    vals, vecs = sym_eig(G)
    cut = rel_tol * max(float(vals[-1]), 1e-300)
    return vecs[:, vals <= cut]


def singular_values(M) -> np.ndarray:
    """Singular values of a small matrix via the Gram eigenvalues."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    G = M.T @ M if M.shape[0] >= M.shape[1] else M @ M.T
    vals, _ = sym_eig(G)
    return np.sqrt(np.clip(vals, 0.0, None))[::-1]


def _affine_barycentric(V: np.ndarray) -> tuple[np.ndarray, float] | None:
    """Min-norm point of the affine hull of the rows of V, as weights."""
    k1 = V.shape[0]
    K = np.zeros((k1 + 1, k1 + 1))
    K[:k1, :k1] = V @ V.T
    K[:k1, k1] = 1.0
    K[k1, :k1] = 1.0
    rhs = np.zeros(k1 + 1)
    rhs[k1] = 1.0
    try:
        sol = solve_linear(K, rhs, tol=1e-12)
    except SingularMatrixError:
        return None
    lam = sol[:k1]
    return lam, float(np.linalg.norm(lam @ V))


def barycentric_zero(vectors, tol: float = 1e-8, scale: float | None = None) -> BarycentricSolution:
    """Decide whether the origin lies in the convex hull of ``vectors``.

    Affinely independent inputs are handled by one bordered linear solve;
    dependent inputs fall back to enumerating faces. ``tol`` is relative to
    ``scale`` (default: the largest vector norm), so a common positive
    scaling changes only the reported residual.
    """
    V = np.atleast_2d(np.asarray(vectors, dtype=float))
    k1, n = V.shape
    if k1 < 1:
        raise ValueError("need at least one vector")
    if k1 > n + 1:
        raise ValueError(f"{k1} vectors exceed n + 1 = {n + 1}")
    if scale is None:
        scale = float(np.max(np.linalg.norm(V, axis=1)))
    if scale <= 1e-300:
        return BarycentricSolution(np.full(k1, 1.0 / k1), True, 0.0)
    # work with unit-scale vectors so the bordered system stays well scaled
    V = V / scale

    direct = _affine_barycentric(V)
    if direct is not None:
        lam, res = direct
        ok = bool(res <= tol and np.all(lam >= -tol))
        return BarycentricSolution(lam, ok, res * scale)

    best: BarycentricSolution | None = None
    for size in range(1, k1 + 1):
        for face in combinations(range(k1), size):
            got = _affine_barycentric(V[list(face)])
            if got is None:
                continue
            lam_f, res = got
            if res <= tol and np.all(lam_f >= -tol):
                lam = np.zeros(k1)
                lam[list(face)] = lam_f
                return BarycentricSolution(lam, True, res * scale)
            if best is None or res * scale < best.residual:
                lam = np.zeros(k1)
                lam[list(face)] = lam_f
                best = BarycentricSolution(lam, False, res * scale)
    assert best is not None
    return best


def newton(
    F: Callable[[np.ndarray], np.ndarray],
    J: Callable[[np.ndarray], np.ndarray],
    x0,
    *,
    max_iter: int = 50,
    damping: float = 1.0,
    tol: float = NEWTON_TOL,
) -> NewtonResult:
    """Damped Newton with step halving.

    Each step is halved until the residual norm decreases (at most 20
    halvings). Raises :class:`NewtonError` when ``max_iter`` is exhausted;
    a singular Jacobian propagates as :class:`SingularMatrixError`.
    """
    x = np.array(x0, dtype=float)
    fx = np.asarray(F(x), dtype=float)
    res = float(np.linalg.norm(fx))
    if not np.isfinite(res):
        raise NewtonError("non-finite residual at start", x, res, 0)
    for it in range(max_iter):
        if res <= tol:
            return NewtonResult(x, res, it)
        dx = solve_linear(J(x), -fx)
        t = damping
        for _ in range(20):
            trial = x + t * dx
            ft = np.asarray(F(trial), dtype=float)
            rt = float(np.linalg.norm(ft))
            if np.isfinite(rt) and rt < res:
                break
            t *= 0.5
        if not np.isfinite(rt):
            raise NewtonError("non-finite residual", x, res, it + 1)
        x, fx, res = trial, ft, rt
    if res <= tol:
        return NewtonResult(x, res, max_iter)
    raise NewtonError(f"no convergence in {max_iter} iterations (residual {res:.3e})", x, res, max_iter)


def fd_gradient(f: Callable[[np.ndarray], float], x, h: float = 1e-5) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


def fd_hessian(f: Callable[[np.ndarray], float], x, h: float = 1e-4) -> np.ndarray:
    """Central-difference Hessian, symmetrized by averaging."""
    x = np.asarray(x, dtype=float)
    n = x.size
    H = np.empty((n, n))
    f0 = f(x)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h
        H[i, i] = (f(x + ei) - 2.0 * f0 + f(x - ei)) / (h * h)
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = h
            H[i, j] = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (4.0 * h * h)
            H[j, i] = H[i, j]
    return 0.5 * (H + H.T)
