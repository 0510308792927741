"""Generalized symmetric eigenproblem ``K u = lam M u`` with diagonal ``M``.

Both paths work on the symmetric standard form ``A = M^-1/2 K M^-1/2``:
``solve_dense`` diagonalizes it with LAPACK (the verification oracle), and
``solve_lowest`` runs a block shift-invert Lanczos iteration with thick
restarts and full reorthogonalization around a slightly negative shift, so
the six rigid-body modes at zero are found along with the lowest elastic
ones.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .fem import SystemMatrices

log = logging.getLogger(__name__)

DENSE_CAP = 3000
RIGID_TOL = 1e-6


class EigenError(RuntimeError):
    pass


class ConvergenceError(EigenError):
    def __init__(self, message, residual):
        self.residual = residual
        super().__init__(f"{message} (worst relative residual {residual:.3e})")


@dataclass(frozen=True, eq=False)
class EigenSolution:
    """Ascending eigenvalues and M-orthonormal eigenvectors (columns).

    ``lambda_max`` is the (estimated) top of the full spectrum, used to scale
    the rigid-body threshold.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    lambda_max: float

    @property
    def n_modes(self) -> int:
        return int(self.eigenvalues.shape[0])

    def rigid_mask(self, tol: float = RIGID_TOL) -> np.ndarray:
        return self.eigenvalues < tol * self.lambda_max

    def take(self, mask) -> "EigenSolution":
        return EigenSolution(self.eigenvalues[mask], self.eigenvectors[:, mask], self.lambda_max)


def fix_signs(U: np.ndarray) -> np.ndarray:
    """Flip columns so that each column's largest-magnitude entry is positive."""
    if U.size == 0:
        return U
    rows = np.argmax(np.abs(U), axis=0)
    s = np.sign(U[rows, np.arange(U.shape[1])])
    s[s == 0] = 1.0
    return U * s


def _mode_hz(lam, alpha, beta):
    c = 0.5 * (alpha + beta * lam)
    disc = lam - c * c
    return np.where(disc > 0, np.sqrt(np.maximum(disc, 0.0)) / (2.0 * math.pi), 0.0)


def _standard_dense(sys: SystemMatrices) -> np.ndarray:
    d = 1.0 / np.sqrt(sys.M)
    A = sys.K.toarray() * d[:, None] * d[None, :]
    return 0.5 * (A + A.T)


def solve_dense(sys: SystemMatrices, dense_cap: int = DENSE_CAP) -> EigenSolution:
    """Full spectrum by symmetric dense factorization."""
    n = sys.dof_count
    if n > dense_cap:
        raise EigenError(f"dense solve limited to {dense_cap} dof, got {n}")
    lam, V = np.linalg.eigh(_standard_dense(sys))
    U = V / np.sqrt(sys.M)[:, None]
    return EigenSolution(lam, fix_signs(U), float(lam[-1]))


def estimate_lambda_max(sys: SystemMatrices, iterations: int = 60) -> float:
    """Power-iteration estimate of the largest eigenvalue."""
    d = 1.0 / np.sqrt(sys.M)
    x = np.random.default_rng(12345).standard_normal(sys.dof_count)
    x /= np.linalg.norm(x)
    rq = 0.0
    for _ in range(iterations):
        y = d * (sys.K @ (d * x))
        rq = float(x @ y)
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0
        x = y / ny
    return rq


def _orthonormal_fill(V, q, cols, rng):
    """Random unit vectors orthogonal to ``V[:, :q]`` and to each other."""
    out = np.empty((V.shape[0], cols))
    for i in range(cols):
        w = rng.standard_normal(V.shape[0])
        for _ in range(2):
            w -= V[:, :q] @ (V[:, :q].T @ w)
            if i:
                w -= out[:, :i] @ (out[:, :i].T @ w)
        out[:, i] = w / np.linalg.norm(w)
    return out


def _block_lanczos(apply_op, n, k, block, m, tol, max_restarts, seed):
    """Largest ``k`` eigenpairs of a symmetric operator.

    Returns Ritz values (descending), Ritz vectors and the worst relative
    residual over the wanted pairs.
    """
    rng = np.random.default_rng(seed)
    V = np.empty((n, m + block))
    T = np.zeros((m, m))
    V[:, :block] = np.linalg.qr(rng.standard_normal((n, block)))[0]
    p = 0
    R = np.zeros((block, block))
    worst = np.inf
    for _ in range(max_restarts):
        while p + block <= m:
            q = p + block
            W = apply_op(V[:, p:q])
            scale = np.linalg.norm(W)
            H = V[:, :q].T @ W
            W -= V[:, :q] @ H
            H2 = V[:, :q].T @ W
            W -= V[:, :q] @ H2
            H += H2
            T[:q, p:q] = H
            T[p:q, :q] = H.T
            T[p:q, p:q] = 0.5 * (H[p:q] + H[p:q].T)
            Q, R = np.linalg.qr(W)
            bad = np.abs(np.diag(R)) <= 1e-12 * max(scale, 1e-300)
            if bad.any():
                R[bad, :] = 0.0
                V[:, q:q + block] = Q
                good = np.flatnonzero(~bad)
                V[:, q:q + len(good)] = Q[:, good]
                V[:, q + len(good):q + block] = _orthonormal_fill(V, q + len(good), int(bad.sum()), rng)
                R = np.vstack([R[good], np.zeros((int(bad.sum()), block))])
            else:
                V[:, q:q + block] = Q
            p = q
        theta, Y = np.linalg.eigh(T[:p, :p])
        theta, Y = theta[::-1], Y[:, ::-1]
        resid = np.linalg.norm(R @ Y[p - block:p, :], axis=0)
        rel = resid[:k] / np.maximum(np.abs(theta[:k]), 1e-300)
        worst = float(rel.max())
        if worst <= tol:
            return theta[:k], V[:, :p] @ Y[:, :k], worst
        keep = min(max(k + (m - k) // 2, k), p - block)
        pending = V[:, p:p + block].copy()
        V[:, :keep] = V[:, :p] @ Y[:, :keep]
        V[:, keep:keep + block] = pending
        T[:] = 0.0
        T[np.arange(keep), np.arange(keep)] = theta[:keep]
        p = keep
    raise ConvergenceError("shift-invert Lanczos did not converge", worst)


def solve_lowest(
    sys: SystemMatrices,
    n_modes: int,
    freq_cap: float = math.inf,
    damping=(0.0, 0.0),
    *,
    block: int = 6,
    tol: float = 1e-12,
    max_restarts: int = 400,
    shift: float | None = None,
    seed: int = 0,
) -> EigenSolution:
    """Lowest ``n_modes`` eigenpairs, then drop modes whose damped frequency exceeds ``freq_cap``.

    Overdamped and rigid modes count as 0 Hz for the cap. Requests at or near
    the full spectrum size are answered by the dense path.
    """
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    n = sys.dof_count
    k = min(int(n_modes), n)
    if k + 3 * block + 10 > n:
        sol = solve_dense(sys, dense_cap=max(DENSE_CAP, n))
        sol = sol.take(slice(0, k))
    else:
        lam_max = estimate_lambda_max(sys)
        diag_scale = float(np.max(sys.K.diagonal() / sys.M))
        sigma = -1e-4 * diag_scale if shift is None else float(shift)
        if sigma >= 0:
            raise ValueError("shift must be negative")
        mh = np.sqrt(sys.M)
        lu = splu(sp.csc_matrix(sys.K - sigma * sp.diags(sys.M)))

        def apply_op(Y):
            return mh[:, None] * lu.solve(np.ascontiguousarray(mh[:, None] * Y))

        m = min(n - block, max(2 * k + 2 * block, k + 4 * block))
        m -= m % block
        if m < k + block:
            m = k + block + (-(k + block)) % block
        theta, Y, worst = _block_lanczos(apply_op, n, k, block, m, tol, max_restarts, seed)
        log.debug("lanczos converged, worst residual %.2e", worst)
        U = Y / mh[:, None]
        # Rayleigh-Ritz on the original pencil sharpens values and M-orthonormality
        KU = sys.K @ U
        Kp = U.T @ KU
        Mp = U.T @ (sys.M[:, None] * U)
        lam, Z = sla.eigh(0.5 * (Kp + Kp.T), 0.5 * (Mp + Mp.T))
        U = U @ Z
        U = U / np.sqrt(np.einsum("ij,ij->j", U, sys.M[:, None] * U))[None, :]
        sol = EigenSolution(lam, fix_signs(U), max(lam_max, float(lam[-1])))
    if math.isfinite(freq_cap):
        hz = _mode_hz(sol.eigenvalues, float(damping[0]), float(damping[1]))
        hz[sol.rigid_mask()] = 0.0
        sol = sol.take(hz <= freq_cap)
    return sol


def residuals(sys: SystemMatrices, sol: EigenSolution, rigid_tol: float = RIGID_TOL):
    """Per-mode relative residual and the max entrywise deviation of U^T M U from I.

    Elastic modes are measured against ``|K u|``. Rigid modes have ``K u`` near
    zero, so they are measured against ``lambda_max |M u|`` instead.
    """
    U = sol.eigenvectors
    KU = sys.K @ U
    MU = sys.M[:, None] * U
    R = KU - MU * sol.eigenvalues[None, :]
    rnorm = np.linalg.norm(R, axis=0)
    ku = np.linalg.norm(KU, axis=0)
    mu = np.linalg.norm(MU, axis=0)
    rigid = sol.eigenvalues < rigid_tol * sol.lambda_max
    denom = np.where(rigid, sol.lambda_max * mu, ku)
    rel = rnorm / np.maximum(denom, 1e-300)
    ortho = float(np.max(np.abs(U.T @ MU - np.eye(U.shape[1])))) if U.shape[1] else 0.0
    return rel, ortho
