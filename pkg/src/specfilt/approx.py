"""Numerical verification lab for the filter approximation theory.

Everything here works on explicit spectra: Vandermonde least squares, the
error-dominance oracle comparing a single global polynomial fit against
the global-plus-adaptive construction (both proof cases), evaluation-basis
rank computations for the filter/graph family dimension claims, and the
seeded composite-waveform fitting experiment.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import qr, solve_triangular


def vandermonde(spectrum, K: int) -> np.ndarray:
    """Rows (1, lam, lam^2, ..., lam^K) over the given points."""
    if K < 0:
        raise ValueError("degree must be nonnegative")
    lam = np.asarray(spectrum, dtype=np.float64).ravel()
    return lam[:, None] ** np.arange(K + 1, dtype=np.float64)[None, :]


@dataclass(frozen=True)
class FitResult:
    """Least-squares fit: coefficients, residual vector and its 2-norm."""

    gamma: np.ndarray
    residual_vec: np.ndarray
    residual_norm: float


def lstsq(V: np.ndarray, target) -> FitResult:
    """Least-squares solve via column-pivoted QR.

    Columns are equilibrated to unit norm internally so the rank test is
    scale-invariant; coefficients are returned in the original basis.
    Requires at least as many rows as columns and full column rank (which
    distinct evaluation points guarantee for Vandermonde systems); rank
    deficiency beyond 1e-12 relative raises.
    """
    V = np.asarray(V, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64).ravel()
    rows, cols = V.shape
    if rows < cols:
        raise ValueError(f"underdetermined system: {rows} rows < {cols} columns")
    if t.size != rows:
        raise ValueError("target length does not match rows")
    scale = np.linalg.norm(V, axis=0)
    scale[scale == 0.0] = 1.0
    Q, R, piv = qr(V / scale[None, :], mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size and diag.min() <= 1e-12 * diag.max():
        raise ValueError("rank-deficient system (evaluation points not distinct?)")
    gamma_p = solve_triangular(R, Q.T @ t, lower=False)
    gamma = np.empty_like(gamma_p)
    gamma[piv] = gamma_p
    gamma /= scale
    resid = t - V @ gamma
    return FitResult(gamma=gamma, residual_vec=resid,
                     residual_norm=float(np.linalg.norm(resid)))


def _poly_fit_values(x: np.ndarray, y: np.ndarray, degree: int
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Fitted values and residual of the best degree-``degree`` polynomial.

    The fit runs in an affinely rescaled monomial basis (points mapped onto
    [-1, 1]) which spans the same polynomial space but stays well
    conditioned on clustered, off-center point sets; the returned values
    are basis-independent. Point sets smaller than degree+1 are
    interpolated exactly via the minimum-norm solution.
    """
    if x.size == 0:
        return np.zeros(0), np.zeros(0)
    mid = 0.5 * (x.max() + x.min())
    half = 0.5 * (x.max() - x.min())
    if half == 0.0:
        half = 1.0
    V = vandermonde((x - mid) / half, degree)
    if x.size >= degree + 1:
        fit = lstsq(V, y)
        return y - fit.residual_vec, fit.residual_vec
    gamma, *_ = np.linalg.lstsq(V, y, rcond=None)
    fitted = V @ gamma
    return fitted, y - fitted


@dataclass(frozen=True)
class ApproxProblem:
    """A target response over a distinct spectrum with adaptive supports.

    ``supports`` are disjoint contiguous half-open index ranges into the
    spectrum, each strictly larger than the global degree K; ``K_prime``
    is the degree of the per-support correction polynomials (<= K).
    """

    spectrum: np.ndarray
    target: np.ndarray
    K: int
    K_prime: int
    supports: tuple[tuple[int, int], ...]

    def __post_init__(self):
        lam = np.asarray(self.spectrum, dtype=np.float64)
        if np.unique(lam).size != lam.size:
            raise ValueError("assumption violated: spectrum values must be distinct")
        if self.target.shape != lam.shape:
            raise ValueError("target must align with the spectrum")
        if not (0 <= self.K_prime <= self.K):
            raise ValueError("need 0 <= K_prime <= K")
        taken = np.zeros(lam.size, dtype=bool)
        for s, e in self.supports:
            if not (0 <= s < e <= lam.size):
                raise ValueError(f"support ({s}, {e}) out of range")
            if e - s <= self.K:
                raise ValueError(
                    f"assumption violated: support ({s}, {e}) has size {e - s}, "
                    f"needs more than K={self.K}")
            if taken[s:e].any():
                raise ValueError("assumption violated: supports must be disjoint")
            taken[s:e] = True

    @property
    def complement(self) -> np.ndarray:
        mask = np.ones(self.spectrum.size, dtype=bool)
        for s, e in self.supports:
            mask[s:e] = False
        return np.where(mask)[0]


@dataclass(frozen=True)
class OracleResult:
    """Both approximation errors plus the pieces behind the multi-fit.

    ``piece_norms``/``complement_norm`` decompose err_multi; for the K'=K
    case ``err_multi_direct`` recomputes the error from the assembled
    coefficients, which the orthogonal-decomposition identity compares
    against the piecewise sum.
    """

    err_single: float
    err_multi: float
    case: int
    piece_norms: tuple[float, ...]
    complement_norm: float
    err_multi_direct: float


def thm41_oracle(p: ApproxProblem) -> OracleResult:
    """Compare the global polynomial fit against the adaptive construction.

    With K'=K each support and the complement are fitted independently at
    degree K; with K'<K the global degree-K coefficients are frozen and
    degree-K' corrections are fitted per support. Both constructions
    reproduce the global fit when the corrections are zero, so the
    multi-polynomial error can never exceed the single-polynomial error.
    """
    lam = np.asarray(p.spectrum, dtype=np.float64)
    fitted_g, resid_g = _poly_fit_values(lam, p.target, p.K)
    err_single = float(np.linalg.norm(resid_g))
    comp = p.complement

    piece_sq = []
    prediction = np.empty_like(p.target)
    if p.K_prime == p.K:
        case = 1
        for s, e in p.supports:
            fitted, resid = _poly_fit_values(lam[s:e], p.target[s:e], p.K)
            piece_sq.append(float(resid @ resid))
            prediction[s:e] = fitted
        fitted_L, resid_L = _poly_fit_values(lam[comp], p.target[comp], p.K)
        comp_sq = float(resid_L @ resid_L)
        prediction[comp] = fitted_L
    else:
        case = 2
        for s, e in p.supports:
            correction, resid = _poly_fit_values(
                lam[s:e], p.target[s:e] - fitted_g[s:e], p.K_prime)
            piece_sq.append(float(resid @ resid))
            prediction[s:e] = fitted_g[s:e] + correction
        resid_L = resid_g[comp]
        comp_sq = float(resid_L @ resid_L)
        prediction[comp] = fitted_g[comp]

    err_multi = float(np.sqrt(sum(piece_sq) + comp_sq))
    err_direct = float(np.linalg.norm(p.target - prediction))
    return OracleResult(
        err_single=err_single,
        err_multi=err_multi,
        case=case,
        piece_norms=tuple(np.sqrt(piece_sq)),
        complement_norm=float(np.sqrt(comp_sq)),
        err_multi_direct=err_direct,
    )


def random_problem(rng: np.random.Generator, n: int = 64) -> ApproxProblem:
    """One randomized oracle trial: sorted distinct spectrum in [-1, 1],
    standard-normal target, K in [2, 10], K' in [1, K], and 1 to 4 disjoint
    contiguous supports of size K+1 to K+4 placed with random gaps."""
    K = int(rng.integers(2, 11))
    Kp = int(rng.integers(1, K + 1))
    m = int(rng.integers(1, 5))
    while True:
        lam = np.sort(rng.uniform(-1.0, 1.0, n))
        if np.unique(lam).size == n:
            break
    sizes = (K + 1 + rng.integers(0, 4, size=m)).tolist()
    slack = n - sum(sizes)
    supports, pos = [], 0
    for size in sizes:
        gap = int(rng.integers(0, slack + 1))
        slack -= gap
        pos += gap
        supports.append((pos, pos + size))
        pos += size
    return ApproxProblem(spectrum=lam, target=rng.standard_normal(n),
                         K=K, K_prime=Kp, supports=tuple(supports))


def run_fuzz(trials: int, seed: int, n: int = 64) -> dict:
    """Run the randomized oracle suite; returns violation counts and the
    worst error gap plus the worst Case-1 decomposition mismatch."""
    rng = np.random.default_rng(seed)
    violations = 0
    max_gap = -np.inf
    worst_identity = 0.0
    cases = {1: 0, 2: 0}
    for _ in range(trials):
        r = thm41_oracle(random_problem(rng, n))
        cases[r.case] += 1
        gap = r.err_multi - r.err_single
        max_gap = max(max_gap, gap)
        if gap > 1e-9:
            violations += 1
        if r.case == 1:
            rel = abs(r.err_multi_direct - r.err_multi) / max(r.err_multi, 1e-30)
            worst_identity = max(worst_identity, rel)
    return {"trials": trials, "violations": violations, "max_gap": float(max_gap),
            "case_counts": cases, "worst_case1_identity": worst_identity}


def _check_dim_preconditions(n: int, K: int, K_prime: int, t: int) -> None:
    if K < 0 or not (0 <= K_prime <= K):
        raise ValueError("need 0 <= K_prime <= K")
    if t == 0:
        if n < K + 1:
            raise ValueError("need n >= K+1")
        return
    if not (t < n / 2):
        raise ValueError("need t < n/2")
    if t < K_prime + 1:
        raise ValueError("need t >= K_prime + 1")
    if n - 2 * t < K + 1:
        raise ValueError("need n - 2t >= K + 1")


def numerical_rank(M: np.ndarray, rel_tol: float = 1e-9) -> int:
    """Count singular values above rel_tol times the largest."""
    if M.size == 0:
        return 0
    sv = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(sv > rel_tol * sv[0]))


def _filter_basis(spectrum, K: int, K_prime: int, t: int,
                  include_global: bool = True) -> np.ndarray:
    """Evaluation basis of the filter family on the given spectrum.

    Columns: global monomials lam^0..lam^K on all points (optional), then
    monomials lam^0..lam^K' masked to the top-t points and to the
    bottom-t points. With t=0 the masked columns are removed entirely.
    """
    lam = np.asarray(spectrum, dtype=np.float64).ravel()
    if np.unique(lam).size != lam.size:
        raise ValueError("spectrum values must be distinct")
    _check_dim_preconditions(lam.size, K, K_prime, t)
    cols = []
    if include_global:
        cols.append(vandermonde(lam, K))
    if t > 0:
        order = np.argsort(lam)
        bottom = np.zeros(lam.size)
        top = np.zeros(lam.size)
        bottom[order[:t]] = 1.0
        top[order[-t:]] = 1.0
        Vp = vandermonde(lam, K_prime)
        cols.append(Vp * top[:, None])
        cols.append(Vp * bottom[:, None])
    if not cols:
        raise ValueError("basis is empty")
    return np.concatenate(cols, axis=1)


def filter_space_dim(spectrum, K: int, K_prime: int, t: int,
                     include_global: bool = True) -> int:
    """Dimension (numerical rank) of the spanned filter-response family."""
    return numerical_rank(_filter_basis(spectrum, K, K_prime, t, include_global))


def graph_space_dim(spectrum, K: int, K_prime: int, t: int, seed: int = 0,
                    include_global: bool = True) -> int:
    """Dimension of the adapted-operator family under a random orthogonal basis.

    Each filter basis element b becomes the matrix U^T diag(b) U for a
    seeded random orthogonal U; the rank of the stacked vectorizations must
    match ``filter_space_dim`` because conjugation by U is injective.
    """
    basis = _filter_basis(spectrum, K, K_prime, t, include_global)
    n = basis.shape[0]
    rng = np.random.default_rng(seed)
    Uq, R = np.linalg.qr(rng.standard_normal((n, n)))
    Uq = Uq * np.sign(np.diag(R))[None, :]
    stacked = np.stack([(Uq.T @ (b[:, None] * Uq)).ravel() for b in basis.T])
    return numerical_rank(stacked)


@dataclass(frozen=True)
class WaveformSpec:
    """Shape parameters of the seeded composite test waveform."""

    n_sinusoids: int = 3
    n_bumps: int = 4
    freq_lo: float = 2.0
    freq_hi: float = 6.0
    amp_lo: float = 0.5
    amp_hi: float = 1.5
    bump_height: float = 2.0
    bump_width_lo: float = 0.04
    bump_width_hi: float = 0.12


def sample_waveform(spec: WaveformSpec, x: np.ndarray, seed: int) -> np.ndarray:
    """Deterministic composite waveform: sinusoids plus localized bumps.

    Frequencies, phases, amplitudes and bump placements are drawn from the
    seeded generator; continuous draws make the sinusoid frequencies
    incommensurate almost surely.
    """
    rng = np.random.default_rng(seed)
    y = np.zeros_like(x)
    for _ in range(spec.n_sinusoids):
        freq = rng.uniform(spec.freq_lo, spec.freq_hi)
        amp = rng.uniform(spec.amp_lo, spec.amp_hi)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        y += amp * np.sin(2.0 * np.pi * freq * x + phase)
    for _ in range(spec.n_bumps):
        center = rng.uniform(-0.9, 0.9)
        width = rng.uniform(spec.bump_width_lo, spec.bump_width_hi)
        height = rng.uniform(-spec.bump_height, spec.bump_height)
        y += height * np.exp(-((x - center) ** 2) / (2.0 * width * width))
    return y


def _tile_supports(n: int, m: int) -> list[tuple[int, int]]:
    base, rem = divmod(n, m)
    out, pos = [], 0
    for i in range(m):
        size = base + 1 if i < rem else base
        out.append((pos, pos + size))
        pos += size
    return out


def waveform_experiment(
    spec: WaveformSpec,
    grid_n: int,
    K_single: int,
    K_adaptive: int,
    m_adaptive: int,
    seed: int,
) -> tuple[float, float]:
    """Fit the seeded waveform two ways and return (rmse_single, rmse_multi).

    The single fit is one degree-K_single polynomial over the whole grid.
    The multi fit freezes those global coefficients and adds an independent
    degree-K_adaptive correction on each of m_adaptive contiguous supports
    tiling the grid, so by construction rmse_multi <= rmse_single.
    """
    if m_adaptive < 1 or grid_n < K_single + 1:
        raise ValueError("grid too small for the single fit")
    supports = _tile_supports(grid_n, m_adaptive)
    if min(e - s for s, e in supports) < K_adaptive + 1:
        raise ValueError("supports too small relative to the adaptive degree")
    x = np.linspace(-1.0, 1.0, grid_n)
    y = sample_waveform(spec, x, seed)

    _, resid_single = _poly_fit_values(x, y, K_single)
    rmse_single = float(np.linalg.norm(resid_single) / np.sqrt(grid_n))

    total_sq = 0.0
    for s, e in supports:
        _, resid = _poly_fit_values(x[s:e], resid_single[s:e], K_adaptive)
        total_sq += float(resid @ resid)
    rmse_multi = float(np.sqrt(total_sq / grid_n))
    return rmse_single, rmse_multi
