"""Eigensolvers for the normalized graph operator.

Two independent routes are provided on purpose: a dense cyclic Jacobi
solver that serves as the brute-force oracle for small operators, and a
Lanczos iteration with full reorthogonalization for the extreme (top-k /
bottom-k) eigenpairs of large sparse operators. The two never share code
paths beyond the input matrix, so they can be used to cross-check each
other.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .graph import NormalizedGraph


class ConvergenceError(RuntimeError):
    """Raised when an iterative solver stops before reaching tolerance.

    Carries the residual norms achieved for the requested pairs.
    """

    def __init__(self, message: str, residuals: np.ndarray):
        super().__init__(message)
        self.residuals = residuals


@dataclass(frozen=True)
class EigenSystem:
    """Eigenvalue/eigenvector pairs, either the full spectrum or extreme bands.

    ``eigenvalues`` is ascending and column j of ``eigenvectors`` pairs with
    eigenvalue j. For an extreme system the first ``k_low`` entries are the
    smallest eigenvalues and the last ``k_high`` the largest; a complete
    system holds all ``source_n`` pairs and both bands cover everything.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    source_n: int
    complete: bool
    k_low: int | None = None
    k_high: int | None = None

    def __len__(self) -> int:
        return self.eigenvalues.size

    @property
    def available_low(self) -> int:
        return self.source_n if self.complete else int(self.k_low or 0)

    @property
    def available_high(self) -> int:
        return self.source_n if self.complete else int(self.k_high or 0)

    def validate(self, operator: np.ndarray | NormalizedGraph | None = None,
                 tol: float = 1e-8) -> None:
        """Check column orthonormality and, when the operator is given,
        the per-pair residual bound."""
        U = self.eigenvectors
        if U.shape[1] != len(self):
            raise ValueError("eigenvector/value count mismatch")
        if len(self):
            gram = U.T @ U
            if np.abs(gram - np.eye(len(self))).max() > tol:
                raise ValueError("eigenvectors are not orthonormal")
            if np.any(np.diff(self.eigenvalues) < 0):
                raise ValueError("eigenvalues not sorted ascending")
        if operator is not None and len(self):
            if isinstance(operator, NormalizedGraph):
                AU = operator.matmul(U)
            else:
                AU = operator @ U
            res = np.linalg.norm(AU - U * self.eigenvalues[None, :], axis=0)
            if res.max() > tol:
                raise ValueError(f"residual bound violated: max {res.max():.3e}")


def _fix_signs(U: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude component of each column positive."""
    if U.size == 0:
        return U
    idx = np.abs(U).argmax(axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs[None, :]


def _round_robin_pairs(n: int) -> list[np.ndarray]:
    """Tournament schedule: n-1 (or n for odd n) rounds of disjoint pairs
    covering every (p, q) pair exactly once."""
    m = n if n % 2 == 0 else n + 1
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        half = m // 2
        pairs = [(players[i], players[m - 1 - i]) for i in range(half)]
        pairs = [(min(p, q), max(p, q)) for p, q in pairs if p < n and q < n]
        rounds.append(np.asarray(pairs, dtype=np.int64))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def dense_eigh(M: np.ndarray, cap: int = 4096) -> EigenSystem:
    """Full symmetric eigendecomposition by cyclic Jacobi rotations.

    Rotations are applied in a fixed round-robin schedule (disjoint pairs
    per round, vectorized) until the off-diagonal Frobenius norm falls
    below 1e-12 times the Frobenius norm of the input. Deterministic,
    unconditionally stable, intended as the oracle for everything else.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    n = M.shape[0]
    if n > cap:
        raise ValueError(f"dimension {n} exceeds cap {cap}")
    if n and np.abs(M - M.T).max() > 1e-10:
        raise ValueError("matrix is not symmetric within 1e-10")

    A = 0.5 * (M + M.T)
    V = np.eye(n)
    fro = np.linalg.norm(M)
    target = 1e-12 * fro
    if n <= 1 or fro == 0.0:
        vals = np.diag(A).copy() if n else np.zeros(0)
        return EigenSystem(vals, V, source_n=n, complete=True)

    schedule = _round_robin_pairs(n)
    floor_tol = target / (10.0 * n)
    for _ in range(60):
        B = A.copy()
        np.fill_diagonal(B, 0.0)
        off = np.linalg.norm(B)
        if off <= target:
            break
        # Threshold sweep: rotating entries already far below the current
        # off-diagonal level cannot speed convergence, so skip them. The
        # stopping test above uses the true norm, so this only saves work.
        skip_tol = max(off / (20.0 * n), floor_tol)
        for pairs in schedule:
            p, q = pairs[:, 0], pairs[:, 1]
            apq = A[p, q]
            act = np.abs(apq) > skip_tol
            if not act.any():
                continue
            p, q, apq = p[act], q[act], apq[act]
            app, aqq = A[p, p], A[q, q]
            theta = (aqq - app) / (2.0 * apq)
            sign = np.where(theta >= 0.0, 1.0, -1.0)
            t = sign / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            Ap, Aq = A[:, p].copy(), A[:, q].copy()
            A[:, p] = c * Ap - s * Aq
            A[:, q] = s * Ap + c * Aq
            Rp, Rq = A[p, :].copy(), A[q, :].copy()
            A[p, :] = c[:, None] * Rp - s[:, None] * Rq
            A[q, :] = s[:, None] * Rp + c[:, None] * Rq
            A[p, p] = app - t * apq
            A[q, q] = aqq + t * apq
            A[p, q] = 0.0
            A[q, p] = 0.0
            Vp, Vq = V[:, p].copy(), V[:, q].copy()
            V[:, p] = c * Vp - s * Vq
            V[:, q] = s * Vp + c * Vq
        A = 0.5 * (A + A.T)
    else:
        raise ConvergenceError("Jacobi sweep limit reached",
                               residuals=np.array([float(off)]))

    vals = np.diag(A).copy()
    order = np.argsort(vals, kind="stable")
    return EigenSystem(vals[order], _fix_signs(V[:, order]), source_n=n, complete=True)


def lanczos_extreme(
    ng: NormalizedGraph,
    k_low: int,
    k_high: int,
    tol: float = 1e-10,
    max_iter: int | None = None,
    seed: int = 0,
) -> EigenSystem:
    """Extreme eigenpairs of a normalized graph operator by Lanczos iteration.

    Builds a Krylov basis with full reorthogonalization (every new direction
    is re-orthogonalized against the whole basis twice, which removes ghost
    copies at the price of O(n * j) work per step). On lucky breakdown the
    iteration restarts from a fresh random direction in the orthogonal
    complement, so invariant subspaces — including degenerate extreme
    eigenvalues — are eventually explored. After the requested bands first
    converge, one probe restart is forced and convergence is only accepted
    once the requested Ritz values survive it unchanged; this guards
    against missed copies of multiple eigenvalues.

    Deterministic under ``seed``. Raises ConvergenceError with the achieved
    residuals when ``max_iter`` basis vectors were not enough.
    """
    n = ng.n
    if k_low < 0 or k_high < 0 or k_low + k_high > n:
        raise ValueError(f"k_low + k_high must be in [0, {n}]")
    if tol <= 0:
        raise ValueError("tol must be positive")
    k = k_low + k_high
    if k == 0:
        return EigenSystem(np.zeros(0), np.zeros((n, 0)), source_n=n,
                           complete=False, k_low=0, k_high=0)
    if max_iter is None:
        max_iter = n
    max_iter = min(max_iter, n)
    if max_iter < k:
        raise ValueError("max_iter smaller than the requested pair count")

    A = ng.to_scipy()
    rng = np.random.default_rng(seed)
    Q = np.zeros((n, min(max_iter, max(2 * k + 64, 128))))
    alphas: list[float] = []
    betas: list[float] = []

    def ensure_capacity(cols: int) -> None:
        nonlocal Q
        if cols > Q.shape[1]:
            grown = np.zeros((n, min(max_iter, max(cols, 2 * Q.shape[1]))))
            grown[:, :Q.shape[1]] = Q
            Q = grown

    def fresh_direction(j: int) -> np.ndarray | None:
        # Random vector orthogonalized against the current basis; None when
        # the basis already spans everything reachable.
        for _ in range(20):
            v = rng.standard_normal(n)
            v -= Q[:, :j] @ (Q[:, :j].T @ v)
            v -= Q[:, :j] @ (Q[:, :j].T @ v)
            nv = np.linalg.norm(v)
            if nv > 1e-8 * np.sqrt(n):
                return v / nv
        return None

    q = rng.standard_normal(n)
    q /= np.linalg.norm(q)
    Q[:, 0] = q
    beta_prev = 0.0
    q_prev = np.zeros(n)

    last_wanted: np.ndarray | None = None
    probe_pending = False
    j = 0
    theta = np.zeros(0)
    S = np.zeros((0, 0))

    def wanted_indices(m: int) -> np.ndarray:
        lo = min(k_low, m)
        hi = min(k_high, m - lo)
        return np.concatenate([np.arange(lo), np.arange(m - hi, m)])

    while True:
        u = A @ Q[:, j]
        alpha = float(Q[:, j] @ u)
        alphas.append(alpha)
        r = u - alpha * Q[:, j] - beta_prev * q_prev
        r -= Q[:, :j + 1] @ (Q[:, :j + 1].T @ r)
        r -= Q[:, :j + 1] @ (Q[:, :j + 1].T @ r)
        beta = float(np.linalg.norm(r))

        m = j + 1
        converged = False
        if m >= k:
            theta, S = eigh_tridiagonal(np.asarray(alphas), np.asarray(betas))
            idx = wanted_indices(m)
            est = abs(beta) * np.abs(S[-1, idx])
            if np.all(est <= 0.5 * tol) or m == n:
                wanted = theta[idx]
                if m == n:
                    converged = True
                elif last_wanted is not None and wanted.size == last_wanted.size \
                        and np.abs(wanted - last_wanted).max() <= max(tol, 1e-12):
                    converged = True
                else:
                    # Force a probe restart before trusting the band: a fresh
                    # random direction exposes any missed degenerate copy.
                    last_wanted = wanted
                    probe_pending = True
        if converged:
            break
        if m == max_iter:
            idx = wanted_indices(m)
            if m >= k:
                U = Q[:, :m] @ S[:, idx]
                res = np.linalg.norm(A @ U - U * theta[idx][None, :], axis=0)
            else:
                res = np.full(k, np.inf)
            raise ConvergenceError(
                f"Lanczos did not converge in {max_iter} iterations "
                f"(max residual {res.max():.3e})", residuals=res)

        ensure_capacity(m + 1)
        if beta <= 1e-13 * max(1.0, np.abs(np.asarray(alphas)).max()) or probe_pending:
            nxt = fresh_direction(m)
            probe_pending = False
            if nxt is None:
                # Reachable space exhausted below n; should not happen with
                # random restarts, treat as convergence of what we have.
                theta, S = eigh_tridiagonal(np.asarray(alphas), np.asarray(betas))
                break
            betas.append(0.0)
            beta_prev = 0.0
            q_prev = np.zeros(n)
            Q[:, m] = nxt
        else:
            betas.append(beta)
            beta_prev = beta
            q_prev = Q[:, j]
            Q[:, m] = r / beta
        j += 1

    m = len(alphas)
    idx = wanted_indices(m)
    U = Q[:, :m] @ S[:, idx]
    vals = theta[idx]
    res = np.linalg.norm(A @ U - U * vals[None, :], axis=0)
    if res.max() > tol:
        raise ConvergenceError(
            f"Lanczos residuals above tolerance (max {res.max():.3e})",
            residuals=res)
    lo = min(k_low, m)
    return EigenSystem(vals, _fix_signs(U), source_n=n,
                       complete=(k == n), k_low=lo, k_high=vals.size - lo)


def select_band(es: EigenSystem, which: str, count: int) -> EigenSystem:
    """Extract one extreme band (``low`` or ``high``) as a new EigenSystem."""
    if which not in ("low", "high"):
        raise ValueError("which must be 'low' or 'high'")
    avail = es.available_low if which == "low" else es.available_high
    if count < 0 or count > avail:
        raise ValueError(f"requested {count} {which} pairs, only {avail} available")
    if which == "low":
        sl = slice(0, count)
        k_lo, k_hi = count, 0
    else:
        sl = slice(len(es) - count, len(es))
        k_lo, k_hi = 0, count
    return EigenSystem(es.eigenvalues[sl].copy(), es.eigenvectors[:, sl].copy(),
                       source_n=es.source_n, complete=False, k_low=k_lo, k_high=k_hi)


def extreme_bands(es: EigenSystem, k_low: int, k_high: int) -> EigenSystem:
    """Restrict to the k_low smallest plus k_high largest pairs of ``es``.

    The result carries the band split needed for spectrum partitioning.
    """
    if k_low > es.available_low or k_high > es.available_high:
        raise ValueError(
            f"bands ({k_low}, {k_high}) exceed available "
            f"({es.available_low}, {es.available_high})")
    if k_low + k_high > len(es):
        raise ValueError("bands overlap: k_low + k_high exceeds stored pairs")
    lo = slice(0, k_low)
    hi = slice(len(es) - k_high, len(es))
    vals = np.concatenate([es.eigenvalues[lo], es.eigenvalues[hi]])
    vecs = np.concatenate([es.eigenvectors[:, lo], es.eigenvectors[:, hi]], axis=1)
    return EigenSystem(vals, vecs, source_n=es.source_n,
                       complete=(k_low + k_high == es.source_n),
                       k_low=k_low, k_high=k_high)
