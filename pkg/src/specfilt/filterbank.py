"""Spectrum partitioning and piecewise polynomial filter banks.

A filter bank is the sum of three parts: low-degree polynomial pieces on
contiguous bins of the bottom eigenvalue band, the same on the top band,
and one globally supported polynomial. Each part carries its own mixing
weight. The boundary penalty softly ties consecutive pieces together at
the shared knots of a band.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spectral import EigenSystem


@dataclass(frozen=True)
class PartitionSpec:
    """Contiguous index bins over the selected low and high eigenvalue bands.

    Bin ranges are half-open (start, stop) positions into the eigenvalue
    array of the system the partition was built from; ``boundaries`` record
    the actual (min, max) eigenvalue of each bin so a partition can be
    checked against a different eigensystem later.
    """

    source_len: int
    k_low: int
    k_high: int
    low_bins: tuple[tuple[int, int], ...]
    high_bins: tuple[tuple[int, int], ...]
    low_boundaries: tuple[tuple[float, float], ...]
    high_boundaries: tuple[tuple[float, float], ...]

    @property
    def num_low(self) -> int:
        return len(self.low_bins)

    @property
    def num_high(self) -> int:
        return len(self.high_bins)

    def check_against(self, es: EigenSystem, tol: float = 1e-9) -> None:
        """Verify the partition refers to eigenvalues present in ``es``."""
        if self.source_len != len(es):
            raise ValueError(
                f"partition built for {self.source_len} eigenvalues, "
                f"eigensystem holds {len(es)}")
        for bins, bounds in ((self.low_bins, self.low_boundaries),
                             (self.high_bins, self.high_boundaries)):
            for (s, e), (lo, hi) in zip(bins, bounds):
                if abs(es.eigenvalues[s] - lo) > tol or abs(es.eigenvalues[e - 1] - hi) > tol:
                    raise ValueError("partition boundaries do not match eigensystem")


@dataclass
class FilterBank:
    """Piecewise polynomial filter: per-bin coefficients plus a global term.

    Coefficient vectors are in ascending-power order; entry p multiplies
    lambda**p. ``gpr_coeffs`` has length K+1 for a degree-K global term.
    """

    partition: PartitionSpec
    low_coeffs: list[np.ndarray]
    high_coeffs: list[np.ndarray]
    gpr_coeffs: np.ndarray
    eta_low: float = 0.0
    eta_high: float = 0.0
    eta_gpr: float = 1.0

    def validate(self) -> None:
        if len(self.low_coeffs) != self.partition.num_low:
            raise ValueError("one coefficient vector per low bin required")
        if len(self.high_coeffs) != self.partition.num_high:
            raise ValueError("one coefficient vector per high bin required")
        for c in (*self.low_coeffs, *self.high_coeffs, self.gpr_coeffs):
            if not np.all(np.isfinite(c)):
                raise ValueError("non-finite filter coefficient")

    def copy(self) -> "FilterBank":
        return FilterBank(
            partition=self.partition,
            low_coeffs=[c.copy() for c in self.low_coeffs],
            high_coeffs=[c.copy() for c in self.high_coeffs],
            gpr_coeffs=self.gpr_coeffs.copy(),
            eta_low=self.eta_low, eta_high=self.eta_high, eta_gpr=self.eta_gpr)


def _bin_sizes(count: int, m: int) -> list[int]:
    # Equal-count bins; the remainder goes to the first bins.
    base, rem = divmod(count, m)
    return [base + 1 if i < rem else base for i in range(m)]


def make_partitions(es: EigenSystem, m_low: int, m_high: int) -> PartitionSpec:
    """Split the selected extreme bands into contiguous equal-count bins.

    The eigensystem must carry its band split (k_low/k_high); restrict a
    complete system with ``extreme_bands`` first unless only one side is
    partitioned, in which case the whole spectrum is that band.
    """
    if m_low < 0 or m_high < 0:
        raise ValueError("bin counts must be nonnegative")
    if es.complete and es.k_low is None:
        band_low = len(es) if m_high == 0 else None
        band_high = len(es) if m_low == 0 else None
        if m_low > 0 and m_high > 0:
            raise ValueError(
                "complete eigensystem has no band split; restrict with "
                "extreme_bands before partitioning both ends")
    else:
        band_low, band_high = es.k_low or 0, es.k_high or 0

    def build(m: int, band: int | None, offset: int):
        if m == 0:
            return (), ()
        if band is None or m > band:
            raise ValueError(f"{m} bins requested over a band of {band or 0} eigenvalues")
        bins, bounds, pos = [], [], offset
        for size in _bin_sizes(band, m):
            bins.append((pos, pos + size))
            bounds.append((float(es.eigenvalues[pos]),
                           float(es.eigenvalues[pos + size - 1])))
            pos += size
        return tuple(bins), tuple(bounds)

    low_bins, low_bounds = build(m_low, band_low, 0)
    high_offset = len(es) - (band_high or 0)
    high_bins, high_bounds = build(m_high, band_high, high_offset)
    if es.complete and es.k_low is None:
        k_low, k_high = (len(es), 0) if m_high == 0 else (0, len(es))
    else:
        k_low, k_high = int(es.k_low or 0), int(es.k_high or 0)
    return PartitionSpec(source_len=len(es), k_low=k_low, k_high=k_high,
                         low_bins=low_bins, high_bins=high_bins,
                         low_boundaries=low_bounds, high_boundaries=high_bounds)


def eval_piece(coeffs: np.ndarray, lam) -> float | np.ndarray:
    """Horner evaluation of an ascending-power coefficient vector."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    out = np.zeros_like(np.asarray(lam, dtype=np.float64))
    for c in coeffs[::-1]:
        out = out * lam + c
    if np.ndim(lam) == 0:
        return float(out)
    return out


def freq_response(fb: FilterBank, es: EigenSystem) -> np.ndarray:
    """Total filter gain at every eigenvalue of ``es``.

    Eigenvalues inside a bin receive that bin's piece scaled by the band
    weight; every eigenvalue receives the global polynomial term.
    """
    fb.partition.check_against(es)
    lam = es.eigenvalues
    resp = fb.eta_gpr * np.asarray(eval_piece(fb.gpr_coeffs, lam))
    for (s, e), coef in zip(fb.partition.low_bins, fb.low_coeffs):
        resp[s:e] += fb.eta_low * eval_piece(coef, lam[s:e])
    for (s, e), coef in zip(fb.partition.high_bins, fb.high_coeffs):
        resp[s:e] += fb.eta_high * eval_piece(coef, lam[s:e])
    return resp


def _knot_terms(bounds, coeffs):
    # Yields (weight, gap, i) for consecutive bins of one band:
    # weight = exp(-(knot distance)^2), gap = h_i(right edge) - h_{i+1}(left edge).
    for i in range(len(coeffs) - 1):
        right = bounds[i][1]
        left = bounds[i + 1][0]
        w = float(np.exp(-((right - left) ** 2)))
        gap = eval_piece(coeffs[i], right) - eval_piece(coeffs[i + 1], left)
        yield w, gap, i


def boundary_penalty(fb: FilterBank) -> float:
    """Soft continuity penalty at the knots of each band, summed over bands.

    Zero when every pair of consecutive pieces agrees where the bins meet;
    the low and high bands are penalized independently because the spectrum
    between them is not partitioned.
    """
    total = 0.0
    for bounds, coeffs in ((fb.partition.low_boundaries, fb.low_coeffs),
                           (fb.partition.high_boundaries, fb.high_coeffs)):
        for w, gap, _ in _knot_terms(bounds, coeffs):
            total += w * gap * gap
    return total


def boundary_penalty_grad(fb: FilterBank) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Gradient of the boundary penalty w.r.t. every piece coefficient."""
    grads = []
    for bounds, coeffs in ((fb.partition.low_boundaries, fb.low_coeffs),
                           (fb.partition.high_boundaries, fb.high_coeffs)):
        g = [np.zeros_like(c) for c in coeffs]
        for w, gap, i in _knot_terms(bounds, coeffs):
            right = bounds[i][1]
            left = bounds[i + 1][0]
            powers_r = right ** np.arange(len(coeffs[i]), dtype=np.float64)
            powers_l = left ** np.arange(len(coeffs[i + 1]), dtype=np.float64)
            g[i] += 2.0 * w * gap * powers_r
            g[i + 1] -= 2.0 * w * gap * powers_l
        grads.append(g)
    return grads[0], grads[1]


def gpr_init(scheme: str, alpha: float, K: int, seed: int = 0) -> np.ndarray:
    """Initial coefficients for the global polynomial term.

    ``ppr``: decaying restart weights alpha*(1-alpha)^k with the tail mass
    (1-alpha)^K on the last coefficient (sums to 1 exactly).
    ``nppr``: alternating (-alpha)^k, scaled to unit 1-norm.
    ``random``: seeded uniform in [-1, 1], scaled to unit 1-norm.
    """
    if K < 0:
        raise ValueError("K must be nonnegative")
    scheme = scheme.lower()
    if scheme in ("ppr", "nppr") and not (0.0 < alpha < 1.0):
        raise ValueError("alpha must be in (0, 1)")
    if scheme == "ppr":
        coeffs = alpha * (1.0 - alpha) ** np.arange(K + 1, dtype=np.float64)
        coeffs[K] = (1.0 - alpha) ** K
        return coeffs
    if scheme == "nppr":
        coeffs = (-alpha) ** np.arange(K + 1, dtype=np.float64)
        return coeffs / np.abs(coeffs).sum()
    if scheme == "random":
        rng = np.random.default_rng(seed)
        coeffs = rng.uniform(-1.0, 1.0, K + 1)
        return coeffs / np.abs(coeffs).sum()
    raise ValueError(f"unknown init scheme '{scheme}'")
