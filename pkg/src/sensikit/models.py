"""Test models, input distributions and exact first-order Sobol' indices.

A model maps a point in R^p to a scalar output. Built-in benchmarks:

* ``gfunction``: the multiplicative benchmark prod_i (|4x_i - 2| + a_i)/(1 + a_i)
  on the unit cube, with analytically known first-order indices.
* ``linear``: alpha*x_1 + x_2 + ... + x_p with independent U[0,1] inputs.

Custom models can be registered by name for CLI use via ``register_model``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

FD_STEP = 1e-5  # central-difference step for the derivative fallback


# ---------------------------------------------------------------------------
# input distributions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DistributionSpec:
    """Marginal input distribution, represented through its quantile map.

    kind is one of "uniform01", "uniform" (with bounds a < b) or
    "inverse_cdf" (arbitrary law given by a monotone non-decreasing
    quantile function on (0,1)).
    """

    kind: str = "uniform01"
    a: float = 0.0
    b: float = 1.0
    inverse_cdf: Optional[Callable] = None

    def __post_init__(self):
        if self.kind not in ("uniform01", "uniform", "inverse_cdf"):
            raise ValueError(f"unknown distribution kind: {self.kind!r}")
        if self.kind == "uniform" and not self.a < self.b:
            raise ValueError(f"uniform(a, b) requires a < b, got a={self.a}, b={self.b}")
        if self.kind == "inverse_cdf" and self.inverse_cdf is None:
            raise ValueError("inverse_cdf distribution requires a quantile function")


def uniform01() -> DistributionSpec:
    return DistributionSpec("uniform01")


def uniform(a: float, b: float) -> DistributionSpec:
    return DistributionSpec("uniform", a=a, b=b)


def from_quantile(q: Callable) -> DistributionSpec:
    """Distribution given by its quantile (inverse CDF) function on (0,1)."""
    return DistributionSpec("inverse_cdf", inverse_cdf=q)


def transform_input(dist: DistributionSpec, u):
    """Map uniform variates u in (0,1) through the quantile function of ``dist``.

    Accepts scalars or arrays; monotone non-decreasing in u.
    """
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0.0) or np.any(u >= 1.0):
        raise ValueError("u must lie strictly inside (0, 1)")
    if dist.kind == "uniform01":
        out = u
    elif dist.kind == "uniform":
        out = dist.a + (dist.b - dist.a) * u
    else:
        try:
            out = np.asarray(dist.inverse_cdf(u), dtype=float)
        except (TypeError, ValueError):
            out = np.vectorize(dist.inverse_cdf, otypes=[float])(u)
        if out.shape != u.shape:
            out = np.broadcast_to(out, u.shape).astype(float)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# model specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelSpec:
    """Evaluatable scalar-output model with p distributed inputs.

    Fields
    ------
    p : input dimension.
    func : map from a p-vector to a scalar. Must be deterministic.
    inputs : one DistributionSpec per coordinate.
    deriv1 : optional partial derivative in the first coordinate.
    batch : optional vectorized evaluator mapping an (n, p) array to (n,).
    exact_sobol : optional vector of exact first-order indices, used as the
        reference by convergence and error studies.

    All fields are immutable after construction; ``func`` and ``deriv1``
    must be safe to call concurrently on distinct inputs.
    """

    p: int
    func: Callable
    inputs: Sequence[DistributionSpec] = ()
    deriv1: Optional[Callable] = None
    batch: Optional[Callable] = None
    deriv1_batch: Optional[Callable] = None
    exact_sobol: Optional[np.ndarray] = None
    name: str = ""

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("model dimension p must be >= 1")
        ins = tuple(self.inputs) if self.inputs else tuple(uniform01() for _ in range(self.p))
        if len(ins) != self.p:
            raise ValueError(f"expected {self.p} input distributions, got {len(ins)}")
        object.__setattr__(self, "inputs", ins)
        if self.exact_sobol is not None:
            arr = np.asarray(self.exact_sobol, dtype=float).copy()
            arr.flags.writeable = False
            object.__setattr__(self, "exact_sobol", arr)

    def evaluate(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.p,):
            raise ValueError(f"expected input of shape ({self.p},), got {x.shape}")
        return float(self.func(x))

    def evaluate_batch(self, X) -> np.ndarray:
        """Evaluate on every row of an (n, p) array."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.p:
            raise ValueError(f"expected an (n, {self.p}) array, got shape {X.shape}")
        if self.batch is not None:
            return np.asarray(self.batch(X), dtype=float)
        return np.fromiter((self.func(row) for row in X), dtype=float, count=len(X))

    def derivative1_batch(self, X) -> np.ndarray:
        """First partial derivative in coordinate 1 on every row.

        Uses the analytic derivative when available, otherwise a central
        difference with step 1e-5 clamped so both points stay in [0, 1].
        """
        X = np.asarray(X, dtype=float)
        if self.deriv1_batch is not None:
            return np.asarray(self.deriv1_batch(X), dtype=float)
        if self.deriv1 is not None:
            return np.fromiter((self.deriv1(row) for row in X), dtype=float, count=len(X))
        lo = np.clip(X[:, 0] - FD_STEP, 0.0, 1.0)
        hi = np.clip(X[:, 0] + FD_STEP, 0.0, 1.0)
        Xlo = X.copy(); Xlo[:, 0] = lo
        Xhi = X.copy(); Xhi[:, 0] = hi
        return (self.evaluate_batch(Xhi) - self.evaluate_batch(Xlo)) / (hi - lo)


class CountingModel:
    """Wrapper that counts evaluations of an underlying model.

    Thread-safe; used by tests and budget-accounting assertions.
    """

    def __init__(self, model: ModelSpec):
        import threading

        self._model = model
        self._lock = threading.Lock()
        self.count = 0

    def __getattr__(self, item):
        return getattr(self._model, item)

    def evaluate(self, x):
        with self._lock:
            self.count += 1
        return self._model.evaluate(x)

    def evaluate_batch(self, X):
        with self._lock:
            self.count += len(X)
        return self._model.evaluate_batch(X)

    def derivative1_batch(self, X):
        return self._model.derivative1_batch(X)


# ---------------------------------------------------------------------------
# g-function benchmark
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GFunctionParams:
    """Coefficients a_i >= 0; small a_i makes coordinate i influential."""

    a: tuple

    def __post_init__(self):
        a = tuple(float(v) for v in self.a)
        if len(a) == 0:
            raise ValueError("at least one coefficient required")
        if any(v < 0 for v in a):
            raise ValueError("all coefficients must be non-negative")
        object.__setattr__(self, "a", a)

    @property
    def p(self) -> int:
        return len(self.a)


def gfunction_eval(params: GFunctionParams, x) -> float:
    """Evaluate prod_i (|4 x_i - 2| + a_i) / (1 + a_i) at a point of [0,1]^p.

    Args:
        params: coefficient vector a.
        x: point in the unit cube, same length as a.

    Returns:
        Strictly positive product value.
    """
    x = np.asarray(x, dtype=float)
    a = np.asarray(params.a)
    if x.shape != a.shape:
        raise ValueError(f"dimension mismatch: x has shape {x.shape}, a has length {len(a)}")
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError("inputs must lie in [0, 1]")
    return float(np.prod((np.abs(4.0 * x - 2.0) + a) / (1.0 + a)))


def gfunction_exact_sobol(params: GFunctionParams) -> np.ndarray:
    """Exact first-order Sobol' indices of the g-function.

    Each factor has unit mean and variance V_i = (1/3) (1 + a_i)^-2, so

        S_i = V_i / (prod_j (1 + V_j) - 1).
    """
    a = np.asarray(params.a)
    V = (1.0 / 3.0) / (1.0 + a) ** 2
    denom = np.prod(1.0 + V) - 1.0
    return V / denom


def make_gfunction(a) -> ModelSpec:
    """Build the g-function model with vectorized evaluation."""
    params = GFunctionParams(tuple(a))
    avec = np.asarray(params.a)
    p = params.p

    def batch(X):
        return np.prod((np.abs(4.0 * X - 2.0) + avec) / (1.0 + avec), axis=1)

    def deriv1_batch(X):
        # piecewise slope of |4x - 2| in coordinate 1; 0 at the kink
        rest = np.prod((np.abs(4.0 * X[:, 1:] - 2.0) + avec[1:]) / (1.0 + avec[1:]), axis=1)
        return np.sign(4.0 * X[:, 0] - 2.0) * 4.0 / (1.0 + avec[0]) * rest

    return ModelSpec(
        p=p,
        func=lambda x: gfunction_eval(params, x),
        batch=batch,
        deriv1=lambda x: float(deriv1_batch(np.asarray(x, dtype=float)[None, :])[0]),
        deriv1_batch=deriv1_batch,
        exact_sobol=gfunction_exact_sobol(params),
        name="gfunction",
    )


# ---------------------------------------------------------------------------
# linear benchmark
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearModelParams:
    """Slope alpha > 0 on the first coordinate, unit slope on the others."""

    alpha: float
    p: int

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.p < 2:
            raise ValueError("linear model requires p >= 2")


def linear_exact_sobol(params: LinearModelParams) -> np.ndarray:
    """Exact first-order indices of alpha*X1 + X2 + ... + Xp on U[0,1]^p.

    S_1 = alpha^2 / (alpha^2 + p - 1) and S_i = 1 / (alpha^2 + p - 1) for i >= 2.
    """
    a2 = params.alpha**2
    out = np.full(params.p, 1.0 / (a2 + params.p - 1))
    out[0] = a2 / (a2 + params.p - 1)
    return out


def make_linear(alpha: float, p: int) -> ModelSpec:
    params = LinearModelParams(float(alpha), int(p))
    coef = np.ones(params.p)
    coef[0] = params.alpha
    return ModelSpec(
        p=params.p,
        func=lambda x: float(np.dot(coef, x)),
        batch=lambda X: X @ coef,
        deriv1=lambda x: params.alpha,
        deriv1_batch=lambda X: np.full(len(X), params.alpha),
        exact_sobol=linear_exact_sobol(params),
        name="linear",
    )


# ---------------------------------------------------------------------------
# registry for CLI model selection
# ---------------------------------------------------------------------------

MODEL_REGISTRY: dict = {}


def register_model(name: str, factory: Callable) -> None:
    """Register a factory (keyword params -> ModelSpec) under a CLI name."""
    MODEL_REGISTRY[name] = factory


def make_model(name: str, **params) -> ModelSpec:
    """Instantiate a model by registry name.

    Built-ins: "gfunction" (param a: sequence) and "linear"
    (params alpha, p). Other names resolve through the registry.
    """
    if name == "gfunction":
        return make_gfunction(params["a"])
    if name == "linear":
        return make_linear(params["alpha"], params["p"])
    if name in MODEL_REGISTRY:
        return MODEL_REGISTRY[name](**params)
    raise KeyError(f"unknown model {name!r}; registered: {sorted(MODEL_REGISTRY)}")
