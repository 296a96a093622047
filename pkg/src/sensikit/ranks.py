"""Rank statistics: neighbor permutations and single-sample sensitivity estimators.

Given one i.i.d. sample of (V, Y), sorting by V and pairing each point with
the holder of the next rank yields cheap surrogates for the paired designs
that classical variance-based sensitivity estimation requires. All p
first-order indices can then be estimated from a single n-sample.

All estimators here are invariant under any strictly increasing transform
of the conditioning variable (they see only its ranks) and, on tie-free
data, under permutations of the sample rows.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .exceptions import DegenerateDataError
from .sampling import IidDesign

_VAR_GUARD = 1e-14  # relative floor below which an output sample counts as constant


@dataclass(frozen=True)
class RankData:
    """Ranks of a sample: pi[j] is the 1-based rank of v[j].

    pi_inv holds 0-based sample indices ordered by rank, so
    pi_inv[pi[j] - 1] == j. Ties are broken by original sample index
    (stable), and tie_flag records whether any were present.
    """

    pi: np.ndarray
    pi_inv: np.ndarray
    tie_flag: bool

    @property
    def n(self) -> int:
        return len(self.pi)


@dataclass(frozen=True)
class NeighborMap:
    """Next-rank map over a sample; mapping holds 0-based indices.

    kind "prime" fixes the sample maximum (exactly one fixed point);
    kind "cyclic" wraps the maximum around to the minimum and is a
    fixed-point-free bijection for every n >= 2.
    """

    kind: str
    mapping: np.ndarray


def compute_ranks(v) -> RankData:
    """Rank a sample with stable tie-breaking by input index."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ValueError("expected a 1-d sample")
    n = len(v)
    if n < 2:
        raise ValueError(f"need at least 2 observations, got {n}")
    if np.any(np.isnan(v)):
        raise ValueError("sample contains NaN")
    order = np.argsort(v, kind="stable")
    pi = np.empty(n, dtype=np.int64)
    pi[order] = np.arange(1, n + 1)
    ties = bool(np.any(np.diff(v[order]) == 0.0))
    order = order.astype(np.int64)
    pi.flags.writeable = False
    order.flags.writeable = False
    return RankData(pi=pi, pi_inv=order, tie_flag=ties)


def neighbor_map(ranks: RankData, kind: str = "cyclic") -> NeighborMap:
    """Map each sample index to the holder of the next rank of v.

    kind "prime" sends the maximum to itself; kind "cyclic" sends it to
    the minimum.
    """
    if kind not in ("prime", "cyclic"):
        raise ValueError(f"kind must be 'prime' or 'cyclic', got {kind!r}")
    n = ranks.n
    pi, inv = ranks.pi, ranks.pi_inv
    mapping = np.empty(n, dtype=np.int64)
    interior = pi < n
    mapping[interior] = inv[pi[interior]]
    top = inv[n - 1]
    mapping[top] = top if kind == "prime" else inv[0]
    mapping.flags.writeable = False
    return NeighborMap(kind=kind, mapping=mapping)


def _sorted_by_rank(v, y):
    v = np.asarray(v, dtype=float)
    y = np.asarray(y, dtype=float)
    if v.shape != y.shape or v.ndim != 1:
        raise ValueError("v and y must be 1-d arrays of equal length")
    ranks = compute_ranks(v)
    return ranks, y[ranks.pi_inv]


def chatterjee_xi(v, y) -> float:
    """Rank correlation of y on v that converges to a CDF-based index.

    Sorts the sample by v, pairs each point with its next-rank neighbor
    (the maximum paired with itself) and compares the joint empirical CDF
    along neighbor pairs with its independence counterpart:

        [ mean_j F_n(min(Y_j, Y_next(j))) - mean_j G_n(Y_j)^2 ]
        / mean_j F_n(Y_j) (1 - F_n(Y_j))

    with F_n the empirical CDF of y and G_n the empirical survival
    function (both including the point itself). The value approaches 1
    when y is a function of v and 0 under independence.

    Raises DegenerateDataError when y is constant (zero denominator).
    """
    _, ys = _sorted_by_rank(v, y)
    n = len(ys)
    sorted_y = np.sort(ys)

    def ecdf(t):
        return np.searchsorted(sorted_y, t, side="right") / n

    pair_min = np.minimum(ys[:-1], ys[1:])
    term1 = (np.sum(ecdf(pair_min)) + ecdf(ys[-1])) / n
    surv = (n - np.searchsorted(sorted_y, ys, side="left")) / n
    term2 = np.mean(surv**2)
    cdf_vals = ecdf(ys)
    denom = np.mean(cdf_vals * (1.0 - cdf_vals))
    if denom <= 0.0:
        raise DegenerateDataError("constant output sample: CDF-ratio index is undefined")
    return float((term1 - term2) / denom)


def _apply_map(fn: Callable, y: np.ndarray) -> np.ndarray:
    try:
        out = np.asarray(fn(y), dtype=float)
        if out.shape == y.shape:
            return out
    except (TypeError, ValueError):
        pass
    return np.vectorize(fn, otypes=[float])(y)


def chi_general(v, y, g: Callable, h: Callable, kind: str = "cyclic",
                clip: Optional[float] = None) -> float:
    """Single-sample estimate of E[ E[g(Y)|V] * E[h(Y)|V] ].

    Averages g(Y_j) h(Y_tau(j)) over the sample, with tau the chosen
    next-rank neighbor map of v. With g = h = identity this is the raw
    numerator moment of the rank-based Sobol' estimator; with indicator
    functions it recovers CDF-type indices.

    Args:
        g, h: scalar maps, finite on the sample range. Applied vectorized
            when possible.
        kind: neighbor map, "cyclic" (fixed-point-free) or "prime".
        clip: optional symmetric clamp; when set, g and h outputs are
            clipped to [-clip, clip] before averaging.
    """
    _, ys = _sorted_by_rank(v, y)
    gy = _apply_map(g, ys)
    hy = _apply_map(h, ys)
    if not (np.all(np.isfinite(gy)) and np.all(np.isfinite(hy))):
        raise ValueError("g or h produced non-finite values on the sample")
    if clip is not None:
        if clip <= 0:
            raise ValueError("clip must be positive")
        gy = np.clip(gy, -clip, clip)
        hy = np.clip(hy, -clip, clip)
    if kind not in ("prime", "cyclic"):
        raise ValueError(f"kind must be 'prime' or 'cyclic', got {kind!r}")
    n = len(ys)
    total = np.dot(gy[:-1], hy[1:])
    total += gy[-1] * (hy[0] if kind == "cyclic" else hy[-1])
    return float(total / n)


def rank_sobol(v, y) -> float:
    """Single-sample estimate of the first-order Sobol' index of y on v.

    Ratio of the neighbor-pair covariance surrogate to the empirical
    variance, using the cyclic next-rank map:

        [ mean_j Y_j Y_next(j) - (mean Y)^2 ] / [ mean Y^2 - (mean Y)^2 ]

    Raises DegenerateDataError when y is (numerically) constant.
    """
    _, ys = _sorted_by_rank(v, y)
    n = len(ys)
    # centered form: exact for the cyclic map (a bijection preserves the
    # sample mean of the neighbor sequence) and stable under output shifts
    dy = ys - np.mean(ys)
    den = float(np.mean(dy**2))
    if den <= _VAR_GUARD * float(np.mean(ys**2)):
        raise DegenerateDataError("constant output sample: variance-ratio index is undefined")
    num = (np.dot(dy[:-1], dy[1:]) + dy[-1] * dy[0]) / n
    return float(num / den)


def rank_sobol_indices(X, y) -> np.ndarray:
    """Rank-based first-order Sobol' estimates for every column of X."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.array([rank_sobol(X[:, i], y) for i in range(X.shape[1])])


def rank_cvm_indices(X, y) -> np.ndarray:
    """Rank-based CDF-ratio (Cramer-von-Mises) estimates for every column."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.array([chatterjee_xi(X[:, i], y) for i in range(X.shape[1])])


def rank_sobol_all(design: IidDesign) -> np.ndarray:
    """All first-order Sobol' estimates from one i.i.d. design.

    Reuses the design's single sample; no further model evaluations.
    """
    return rank_sobol_indices(design.x, design.y)


def rank_cvm_all(design: IidDesign) -> np.ndarray:
    """All first-order CDF-ratio estimates from one i.i.d. design."""
    return rank_cvm_indices(design.x, design.y)


def tie_columns(X) -> list:
    """1-based indices of columns containing tied values."""
    X = np.asarray(X, dtype=float)
    out = []
    for i in range(X.shape[1]):
        col = np.sort(X[:, i])
        if np.any(np.diff(col) == 0.0):
            out.append(i + 1)
    return out
