"""Classical Pick-Freeze estimators of variance-based and CDF-based indices."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .exceptions import DegenerateDataError
from .models import ModelSpec
from .sampling import PickFreezeDesign, RngStream, TripleDesign, sample_inputs, sample_pickfreeze

_VAR_GUARD = 1e-14


@dataclass(frozen=True)
class EstimateResult:
    """A point estimate with its sampling cost and optional uncertainty.

    evaluations records the model calls consumed by the underlying design
    (n, 2n or 3n). When a confidence interval is attached, lo <= value <= hi.
    """

    value: float
    n: int
    evaluations: int
    sigma_hat: Optional[float] = None
    ci: Optional[Tuple[float, float]] = None
    method: str = ""


def _guard_variance(y: np.ndarray) -> float:
    mean_sq = float(np.mean(y**2))
    var = float(np.mean((y - np.mean(y)) ** 2))
    if var <= _VAR_GUARD * mean_sq:
        raise DegenerateDataError("output variance is numerically zero")
    return var


def sn_value(y, y_u) -> float:
    """Covariance-over-variance estimate from a Pick-Freeze pair.

    Uses the biased 1/n moment normalizers; computed in centered form
    (algebraically identical, numerically stable under output shifts).
    """
    y = np.asarray(y, dtype=float)
    y_u = np.asarray(y_u, dtype=float)
    _guard_variance(y)
    dy = y - np.mean(y)
    dyu = y_u - np.mean(y_u)
    return float(np.mean(dy * dyu) / np.mean(dy**2))


def tn_value(y, y_u) -> float:
    """Pooled variant of the Pick-Freeze estimate.

    Centers and normalizes with the moments of the pooled pair, which makes
    the statistic exactly symmetric under swapping the two output vectors.
    """
    y = np.asarray(y, dtype=float)
    y_u = np.asarray(y_u, dtype=float)
    pooled_mean = float(np.mean((y + y_u) / 2.0))
    dy = y - pooled_mean
    dyu = y_u - pooled_mean
    den = float(np.mean((dy**2 + dyu**2) / 2.0))
    pooled_sq = float(np.mean((y**2 + y_u**2) / 2.0))
    if den <= _VAR_GUARD * pooled_sq:
        raise DegenerateDataError("output variance is numerically zero")
    return float(np.mean(dy * dyu) / den)


def sobol_sn(d: PickFreezeDesign) -> EstimateResult:
    """First-order (or closed) Sobol' estimate from a Pick-Freeze design."""
    return EstimateResult(value=sn_value(d.y, d.y_u), n=d.n,
                          evaluations=d.evaluations, method="pf-sn")


def sobol_tn(d: PickFreezeDesign) -> EstimateResult:
    """Pooled Sobol' estimate; invariant under swapping y and y_u."""
    return EstimateResult(value=tn_value(d.y, d.y_u), n=d.n,
                          evaluations=d.evaluations, method="pf-tn")


def cvm_value(y, y_u, w) -> float:
    """CDF-comparison index from a Pick-Freeze pair and integration nodes w.

    For each node W_k, compares the joint frequency of {Y <= W_k, Y_u <= W_k}
    with the product of the marginal frequencies, normalized by the
    empirical CDF variance of y at the nodes. Node comparisons use <=.
    Always lies in [0, 1] on non-degenerate data.
    """
    y = np.asarray(y, dtype=float)
    y_u = np.asarray(y_u, dtype=float)
    w = np.asarray(w, dtype=float)
    n = len(y)
    sy = np.sort(y)
    syu = np.sort(y_u)
    smax = np.sort(np.maximum(y, y_u))
    f_y = np.searchsorted(sy, w, side="right") / n
    f_yu = np.searchsorted(syu, w, side="right") / n
    f_joint = np.searchsorted(smax, w, side="right") / n
    num = np.mean(f_joint - f_y * f_yu)
    den = np.mean(f_y * (1.0 - f_y))
    if den <= 0.0:
        raise DegenerateDataError("empirical CDF variance at the nodes is zero")
    return float(num / den)


def cvm_pickfreeze(d: TripleDesign) -> EstimateResult:
    """CDF-comparison (Cramer-von-Mises) index from a triple design."""
    return EstimateResult(value=cvm_value(d.y, d.y_u, d.w), n=d.n,
                          evaluations=d.evaluations, method="pf-cvm")


def pf_identity_check(model: ModelSpec, u: Sequence[int], n: int, stream: RngStream,
                      inner: int = 8) -> Tuple[float, float]:
    """Diagnostic for Cov(Y, Y_u) = Var(E[Y | X_u]).

    Returns the empirical covariance of a Pick-Freeze pair of size n and an
    independent nested-loop estimate of the conditional-expectation variance
    (outer groups share X_u, `inner` copies of the remaining coordinates per
    group; the within-group noise bias is subtracted).
    """
    if n < 100:
        raise ValueError("identity check needs n >= 100")
    if inner < 2:
        raise ValueError("need at least 2 inner copies per group")
    d = sample_pickfreeze(model, u, n, stream)
    cov = float(np.mean(d.y * d.y_u) - np.mean(d.y) * np.mean(d.y_u))

    gen = RngStream(stream.root_seed, stream.stream_id + 1).generator()
    groups = n // inner
    cols = [i - 1 for i in u]
    x = sample_inputs(model, groups * inner, gen)
    shared = sample_inputs(model, groups, gen)[:, cols]
    x[:, cols] = np.repeat(shared, inner, axis=0)
    vals = model.evaluate_batch(x).reshape(groups, inner)
    group_means = vals.mean(axis=1)
    between = float(np.var(group_means, ddof=1))
    within = float(np.mean(np.var(vals, axis=1, ddof=1)))
    return cov, between - within / inner
