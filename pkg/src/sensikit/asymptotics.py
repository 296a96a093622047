"""Limiting-variance machinery for the rank-based Sobol' estimator.

The estimator is a smooth function Psi(x, y, z) = (x - y^2)/(z - y^2) of the
three empirical moments

    ( mean_j Y_j Y_next(j),  mean_j Y_j,  mean_j Y_j^2 ),

whose joint fluctuations split into two independent 3x3 covariance pieces:
a conditional-moment part (sigma_b, from the spread of the output given the
conditioning input) and a spacing part (sigma_c, from the gaps between the
order statistics of the conditioning input, which enter through the first
partial derivative of the model). The delta method then gives

    sigma^2 = grad Psi(m_b)^T (sigma_b + sigma_c) grad Psi(m_b),

the variance of sqrt(n) times the estimation error. This module provides
closed forms for the linear benchmark, a generic Monte-Carlo plug-in for any
model exposing a first-coordinate derivative (assumes a smooth, bounded
model with a continuous first input; these assumptions are the caller's
responsibility), and normal confidence intervals.

Budget-weighted comparisons: entries of v_pf carry the (p + 1) factor that
accounts for the Pick-Freeze design needing (p + 1) N runs where the
single-sample route needs n, so v_pf, v_rank and v_eff are directly
comparable per model call.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.special import ndtri

from .exceptions import DegenerateDataError
from .models import ModelSpec, transform_input
from .pickfreeze import EstimateResult
from .ranks import compute_ranks
from .sampling import RngStream, uniform_open

_VAR_GUARD = 1e-14


@dataclass(frozen=True)
class MomentSet:
    """First and second moments of the two complementary input sums.

    (m1p, m2p, vp) describe X_2 + ... + X_p; (m1pa, m2pa, vpa) describe
    alpha X_1 + X_3 + ... + X_p.
    """

    m1p: float
    m2p: float
    m1pa: float
    m2pa: float
    vp: float
    vpa: float


@dataclass(frozen=True)
class SigmaComponents:
    """Pieces of the limiting variance: sigma2 = g^T (sigma_b + sigma_c) g."""

    sigma_b: np.ndarray
    sigma_c: np.ndarray
    m_b: np.ndarray
    g: np.ndarray
    sigma2: float


def linear_moments(alpha: float, p: int) -> MomentSet:
    """Moments of the complementary sums for the linear benchmark."""
    if p < 2:
        raise ValueError("p must be >= 2")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    m1p = (p - 1) / 2.0
    m2p = (p - 1) * (3 * p - 2) / 12.0
    m1pa = (alpha + p - 2) / 2.0
    m2pa = alpha**2 / 3.0 + (p - 2) * alpha / 2.0 + (p - 2) * (3 * p - 5) / 12.0
    return MomentSet(m1p=m1p, m2p=m2p, m1pa=m1pa, m2pa=m2pa,
                     vp=m2p - m1p**2, vpa=m2pa - m1pa**2)


def _var_product(alpha: float, m: float, v: float) -> float:
    # Var(Y Y') for Y = alpha X + Z, Y' an independent-copy pairing sharing X,
    # with (m, v) the mean and variance of Z
    return (4.0 / 45.0 * alpha**4 + m / 3.0 * alpha**3
            + (2.0 * v + m**2) / 3.0 * alpha**2 + 2.0 * m * v * alpha
            + v * (v + 2.0 * m**2))


def _rank_limit(alpha: float, m: float, v: float) -> float:
    return (4.0 / 45.0 * alpha**4 + m / 3.0 * alpha**3
            + (4.0 * v + m**2) / 3.0 * alpha**2 + 4.0 * m * v * alpha
            + v * (v + 4.0 * m**2))


def _eff_limit(alpha: float, m: float, v: float) -> float:
    return (4.0 / 45.0 * alpha**4 + m / 3.0 * alpha**3
            + (4.0 * v + m**2) / 3.0 * alpha**2 + 4.0 * m * v * alpha
            + 4.0 * v * m**2)


def v_pf(alpha: float, p: int) -> np.ndarray:
    """Budget-weighted Pick-Freeze limiting variances for the linear model.

    Entry i is (p + 1) Var(Y Y^i); the weight charges the (p + 1) N model
    calls the paired design spends where the single-sample route spends n.
    """
    mom = linear_moments(alpha, p)
    out = np.full(p, (p + 1) * _var_product(1.0, mom.m1pa, mom.vpa))
    out[0] = (p + 1) * _var_product(alpha, mom.m1p, mom.vp)
    return out


def v_rank(alpha: float, p: int) -> np.ndarray:
    """Limiting variances of the rank-based route for the linear model.

    Entry i is the (1,1) element sum sigma_b[0,0] + sigma_c[0,0] of the
    moment-vector covariance taken with respect to input i (no budget
    weight; one n-sample serves all indices).
    """
    mom = linear_moments(alpha, p)
    out = np.full(p, _rank_limit(1.0, mom.m1pa, mom.vpa))
    out[0] = _rank_limit(alpha, mom.m1p, mom.vp)
    return out


def v_eff(alpha: float, p: int) -> np.ndarray:
    """Influence-function (minimal) variances Var(E[Y|X_i] (2Y - E[Y|X_i])).

    Differs from v_rank by exactly the squared variance of the
    complementary sum in each entry.
    """
    mom = linear_moments(alpha, p)
    out = np.full(p, _eff_limit(1.0, mom.m1pa, mom.vpa))
    out[0] = _eff_limit(alpha, mom.m1p, mom.vp)
    return out


def cov_yy1_yyi(alpha: float, p: int) -> float:
    """Cov(Y Y^1, Y Y^i) for the linear model, i >= 2.

    Closed form obtained by conditional-moment integration over the two
    shared coordinates; cross-checked against direct Monte-Carlo.
    """
    if p < 2:
        raise ValueError("p must be >= 2")
    a = float(alpha)
    return (a**4 / 24.0 + a**3 * (p - 1) / 12.0
            + a**2 * (p**2 / 24.0 - p / 16.0 + 7.0 / 144.0)
            + a * p * (p - 1) / 24.0 + p * (p - 1) ** 2 / 48.0)


# ---------------------------------------------------------------------------
# closed-form covariance components for the linear benchmark
# ---------------------------------------------------------------------------

def _gradient(m_b: np.ndarray) -> np.ndarray:
    d, ey, e2 = m_b
    var_y = e2 - ey**2
    if var_y <= _VAR_GUARD * max(e2, 1e-300):
        raise DegenerateDataError("output variance is zero: delta method is undefined")
    s = (d - ey**2) / var_y
    return np.array([1.0, 2.0 * ey * (s - 1.0), -s]) / var_y


def linear_sigma_components(alpha: float, p: int) -> SigmaComponents:
    """Exact covariance pieces and sigma^2 for the linear benchmark.

    All entries are polynomial moments of sums of uniforms, evaluated in
    closed form; sigma_c uses the constant first-coordinate slope alpha.
    """
    mom = linear_moments(alpha, p)
    q = p - 1
    m, v = mom.m1p, mom.vp
    kappa = q / 80.0 + q * (q - 1) / 48.0  # 4th central moment of the sum
    e1 = alpha / 2.0 + m
    e2 = alpha**2 / 3.0 + alpha * m + m**2

    quad = v * (4.0 / 3.0 * alpha**2 + 4.0 * alpha * m + 4.0 * m**2)
    sb = np.array([
        [4.0 * v * e2 + v**2, 2.0 * v * e1, quad],
        [2.0 * v * e1, v, v * (alpha + 2.0 * m)],
        [quad, v * (alpha + 2.0 * m), quad + kappa - v**2],
    ])
    c_diag = 4.0 * alpha**2 * (alpha**2 / 45.0 + alpha * m / 12.0 + m**2 / 12.0)
    c_off = alpha**3 / 12.0 + alpha**2 * m / 6.0
    sc = np.array([
        [c_diag, c_off, c_diag],
        [c_off, alpha**2 / 12.0, c_off],
        [c_diag, c_off, c_diag],
    ])
    m_b = np.array([e2, e1, e2 + v])
    g = _gradient(m_b)
    sigma2 = float(g @ (sb + sc) @ g)
    return SigmaComponents(sigma_b=sb, sigma_c=sc, m_b=m_b, g=g, sigma2=sigma2)


# ---------------------------------------------------------------------------
# generic Monte-Carlo plug-in
# ---------------------------------------------------------------------------

_PAIRS = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
_TRIPLES = [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)]


def _project_psd(mat: np.ndarray) -> np.ndarray:
    """Nearest positive-semidefinite matrix (eigenvalue clipping)."""
    sym = (mat + mat.T) / 2.0
    w, vecs = np.linalg.eigh(sym)
    w = np.clip(w, 0.0, None)
    out = vecs @ np.diag(w) @ vecs.T
    return (out + out.T) / 2.0


def _first_coord_derivative(model: ModelSpec, u1: np.ndarray, x_mat: np.ndarray,
                            allow_fd: bool) -> np.ndarray:
    """Derivative of the output with respect to the underlying uniform u1.

    For a non-uniform first input the model is differentiated through the
    quantile map (composition with the inverse CDF).
    """
    dist = model.inputs[0]
    if model.deriv1 is not None or model.deriv1_batch is not None:
        if dist.kind == "uniform01":
            return model.derivative1_batch(x_mat)
        if dist.kind == "uniform":
            return (dist.b - dist.a) * model.derivative1_batch(x_mat)
    if not allow_fd:
        raise ValueError("model exposes no usable first-coordinate derivative "
                         "and the finite-difference fallback is disabled")
    h = 1e-5
    lo = np.clip(u1 - h, 1e-9, 1.0 - 1e-9)
    hi = np.clip(u1 + h, 1e-9, 1.0 - 1e-9)
    xlo = x_mat.copy(); xlo[:, 0] = transform_input(dist, lo)
    xhi = x_mat.copy(); xhi[:, 0] = transform_input(dist, hi)
    return (model.evaluate_batch(xhi) - model.evaluate_batch(xlo)) / (hi - lo)


def _pair_mean(u: np.ndarray, w: np.ndarray, x: np.ndarray, block: int) -> Tuple[float, int]:
    """Within-block mean of u_i w_j min(x_i, x_j) over ordered pairs i != j."""
    nb = len(x) // block
    if nb == 0:
        return 0.0, 0
    xb = x[: nb * block].reshape(nb, block)
    ub = u[: nb * block].reshape(nb, block)
    wb = w[: nb * block].reshape(nb, block)
    mins = np.minimum(xb[:, :, None], xb[:, None, :])
    tot = np.einsum("bi,bj,bij->b", ub, wb, mins) - np.einsum("bi,bi,bi->b", ub, wb, xb)
    return float(np.sum(tot / (block * (block - 1)))), nb


def sigma_plugin(model: ModelSpec, n_mc: int, stream: RngStream,
                 allow_fd: bool = True, block: int = 32,
                 chunk: int = 100_000) -> SigmaComponents:
    """Monte-Carlo estimate of sigma_b, sigma_c, m_b, g and sigma^2.

    Per outer draw of the first coordinate, four independent copies of the
    remaining coordinates estimate the conditional-moment entries of
    sigma_b without bias (the highest-degree entry needs a fourth
    conditional power). The spacing entries of sigma_c pair draws within
    small blocks to average the min-weighted products, reusing the same
    draws. Both matrices are projected onto the positive-semidefinite cone
    before assembling sigma^2, which is therefore non-negative.

    Args:
        model: model whose first input is continuous; a first-coordinate
            derivative is taken analytically when exposed, otherwise by
            central differences through the quantile map (disable with
            allow_fd=False to make a missing derivative an error).
        n_mc: number of outer draws (>= 1000); total model cost is about
            4 n_mc evaluations, plus 2 n_mc when differences are needed.
        stream: random stream; the result is deterministic given it.
    """
    if n_mc < 1000:
        raise ValueError("n_mc must be at least 1000")
    gen = stream.generator()

    sums = np.zeros(11)  # A, Bt, C, D, E2, F, G, H, I, J, EY
    csums = np.zeros(6)  # P1, P2, P3, P12, P13, P23 (pair means by block count)
    qsums = np.zeros(3)  # q1, q2, q3
    blocks = 0
    done = 0
    while done < n_mc:
        c = int(min(chunk, n_mc - done))
        done += c
        u1 = uniform_open(gen, c)
        x1 = np.asarray(transform_input(model.inputs[0], u1), dtype=float)
        Y = np.empty((c, 4))
        x_first = None
        for k in range(4):
            x_mat = np.empty((c, model.p))
            x_mat[:, 0] = x1
            for j in range(1, model.p):
                x_mat[:, j] = transform_input(model.inputs[j], uniform_open(gen, c))
            Y[:, k] = model.evaluate_batch(x_mat)
            if k == 0:
                x_first = x_mat
        y2 = Y**2
        y3 = y2 * Y

        A = np.zeros(c); D = np.zeros(c)
        for a, b in _PAIRS:
            A += y2[:, a] * y2[:, b]
            D += Y[:, a] * Y[:, b]
        A /= len(_PAIRS); D /= len(_PAIRS)
        Bt = np.zeros(c); G = np.zeros(c); I_ = np.zeros(c)
        cnt_b = 0
        for a in range(4):
            rest = [r for r in range(4) if r != a]
            for bi in range(3):
                G += y3[:, a] * Y[:, rest[bi]]
                I_ += y2[:, a] * Y[:, rest[bi]]
                for ci in range(bi + 1, 3):
                    Bt += y2[:, a] * Y[:, rest[bi]] * Y[:, rest[ci]]
                    cnt_b += 1
        Bt /= cnt_b; G /= 12.0; I_ /= 12.0
        C = Y[:, 0] * Y[:, 1] * Y[:, 2] * Y[:, 3]
        H = np.zeros(c)
        for a, b, d3 in _TRIPLES:
            H += Y[:, a] * Y[:, b] * Y[:, d3]
        H /= len(_TRIPLES)
        E2 = y2.mean(axis=1); F = (y2**2).mean(axis=1)
        J = y3.mean(axis=1); EY = Y.mean(axis=1)
        sums += np.array([s.sum() for s in (A, Bt, C, D, E2, F, G, H, I_, J, EY)])

        d = _first_coord_derivative(model, u1, x_first, allow_fd)
        a_vec = (Y[:, 0] + Y[:, 1]) * d
        b_vec = Y[:, 1] * d
        qsums += np.array([(a_vec * u1).sum(), (d * u1).sum(), (b_vec * u1).sum()])
        for idx, (uu, ww) in enumerate(
            [(a_vec, a_vec), (d, d), (b_vec, b_vec), (a_vec, d), (a_vec, b_vec), (d, b_vec)]
        ):
            val, nb = _pair_mean(uu, ww, u1, block)
            csums[idx] += val
        blocks += nb

    A, Bt, C, D, E2, F, G, H, I_, J, EY = sums / n_mc
    sb = np.array([
        [A + 2 * Bt - 3 * C, 2 * (I_ - H), 2 * (G - Bt)],
        [2 * (I_ - H), E2 - D, J - I_],
        [2 * (G - Bt), J - I_, F - A],
    ])

    q1, q2, q3 = qsums / n_mc
    P1, P2, P3, P12, P13, P23 = csums / blocks
    sc = np.array([
        [P1 - q1**2, P12 - q1 * q2, 2 * (P13 - q1 * q3)],
        [P12 - q1 * q2, P2 - q2**2, 2 * (P23 - q2 * q3)],
        [2 * (P13 - q1 * q3), 2 * (P23 - q2 * q3), 4 * (P3 - q3**2)],
    ])

    sb = _project_psd(sb)
    sc = _project_psd(sc)
    m_b = np.array([D, EY, E2])
    g = _gradient(m_b)
    sigma2 = max(float(g @ (sb + sc) @ g), 0.0)
    return SigmaComponents(sigma_b=sb, sigma_c=sc, m_b=m_b, g=g, sigma2=sigma2)


def approx_sigma_from_sample(v, y) -> SigmaComponents:
    """Approximate sigma components from a single (v, y) sample, no model access.

    Substitutes the next-rank neighbors of each point (in the ordering of v)
    for the independent conditional copies that the conditional-moment
    entries require. The spacing part sigma_c needs the model derivative and
    is therefore not estimable from an unpaired sample; it is returned as
    zero, so intervals built from this value can undercover on models with
    a strong first-coordinate trend. Treat the output as approximate.
    """
    v = np.asarray(v, dtype=float)
    y = np.asarray(y, dtype=float)
    ranks = compute_ranks(v)
    ys = y[ranks.pi_inv]
    Y = np.column_stack([np.roll(ys, -k) for k in range(4)])
    y2 = Y**2
    y3 = y2 * Y
    n = len(ys)

    A = np.zeros(n); D = np.zeros(n)
    for a, b in _PAIRS:
        A += y2[:, a] * y2[:, b]
        D += Y[:, a] * Y[:, b]
    A /= len(_PAIRS); D /= len(_PAIRS)
    Bt = np.zeros(n); G = np.zeros(n); I_ = np.zeros(n)
    cnt_b = 0
    for a in range(4):
        rest = [r for r in range(4) if r != a]
        for bi in range(3):
            G += y3[:, a] * Y[:, rest[bi]]
            I_ += y2[:, a] * Y[:, rest[bi]]
            for ci in range(bi + 1, 3):
                Bt += y2[:, a] * Y[:, rest[bi]] * Y[:, rest[ci]]
                cnt_b += 1
    Bt /= cnt_b; G /= 12.0; I_ /= 12.0
    C = Y.prod(axis=1)
    H = np.zeros(n)
    for a, b, d3 in _TRIPLES:
        H += Y[:, a] * Y[:, b] * Y[:, d3]
    H /= len(_TRIPLES)
    terms = dict(A=A.mean(), B=Bt.mean(), C=C.mean(), D=D.mean(), E2=(y2.mean()),
                 F=(y2**2).mean(), G=G.mean(), H=H.mean(), I=I_.mean(),
                 J=y3.mean(), EY=Y.mean())
    sb = np.array([
        [terms["A"] + 2 * terms["B"] - 3 * terms["C"],
         2 * (terms["I"] - terms["H"]), 2 * (terms["G"] - terms["B"])],
        [2 * (terms["I"] - terms["H"]), terms["E2"] - terms["D"], terms["J"] - terms["I"]],
        [2 * (terms["G"] - terms["B"]), terms["J"] - terms["I"], terms["F"] - terms["A"]],
    ])
    sb = _project_psd(sb)
    sc = np.zeros((3, 3))
    m_b = np.array([terms["D"], terms["EY"], terms["E2"]])
    g = _gradient(m_b)
    sigma2 = max(float(g @ sb @ g), 0.0)
    return SigmaComponents(sigma_b=sb, sigma_c=sc, m_b=m_b, g=g, sigma2=sigma2)


# ---------------------------------------------------------------------------
# confidence intervals
# ---------------------------------------------------------------------------

def normal_quantile(q: float) -> float:
    """Standard normal quantile, absolute error well below 1e-8."""
    if not 0.0 < q < 1.0:
        raise ValueError("quantile level must lie in (0, 1)")
    return float(ndtri(q))


def confidence_interval(est: EstimateResult, sigma2: float, level: float) -> Tuple[float, float]:
    """Normal interval value +- z_(1+level)/2 * sqrt(sigma2 / n)."""
    if not 0.0 < level < 1.0:
        raise ValueError("confidence level must lie strictly between 0 and 1")
    if sigma2 < 0.0:
        raise ValueError("sigma2 must be non-negative")
    if est.n < 2:
        raise ValueError("need n >= 2")
    z = normal_quantile((1.0 + level) / 2.0)
    half = z * np.sqrt(sigma2 / est.n)
    return (est.value - half, est.value + half)
