"""Seeded, reproducible designs: i.i.d., Pick-Freeze pairs and triples.

Every design is a pure function of (root_seed, stream_id). Distinct stream
ids give statistically independent sequences, so replication studies can
run concurrently without shared state. Evaluation counts are recorded on
each design (n, 2n or 3n model calls) to support budget accounting.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .models import ModelSpec, transform_input

_U53 = float(2**53)


@dataclass(frozen=True)
class RngStream:
    """Addressable random stream: (root_seed, stream_id) fixes the sequence."""

    root_seed: int
    stream_id: int = 0

    def __post_init__(self):
        if self.root_seed < 0 or self.stream_id < 0:
            raise ValueError("seeds and stream ids must be non-negative")

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=self.root_seed, spawn_key=(self.stream_id,))
        return np.random.default_rng(seq)


def derive_stream(root_seed: int, label: str, replicate: int) -> RngStream:
    """Derive the substream for one replicate of a named study.

    The stream id is a stable 63-bit hash of (label, replicate), so
    replications are independent and reproducible across runs and
    worker counts.
    """
    digest = hashlib.sha256(f"{label}|{replicate}".encode()).digest()
    sid = int.from_bytes(digest[:8], "big") >> 1
    return RngStream(root_seed, sid)


def uniform_open(gen: np.random.Generator, size) -> np.ndarray:
    """Uniform variates with 53-bit mantissas, strictly inside (0, 1).

    Never returns 0.0 or 1.0, so quantile transforms stay finite.
    """
    return gen.integers(1, 2**53, size=size).astype(float) / _U53


def sample_inputs(model: ModelSpec, n: int, gen: np.random.Generator) -> np.ndarray:
    """Draw an (n, p) input matrix from the model's marginal distributions."""
    u = uniform_open(gen, (n, model.p))
    cols = [np.asarray(transform_input(d, u[:, i]), dtype=float) for i, d in enumerate(model.inputs)]
    return np.column_stack(cols)


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class IidDesign:
    """Plain i.i.d. input/output sample; costs n model calls."""

    x: np.ndarray
    y: np.ndarray
    evaluations: int

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def p(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class PickFreezeDesign:
    """Paired outputs sharing the coordinates in u; costs 2n model calls.

    u holds 1-based input coordinates (matching x1..xp column naming).
    """

    u: tuple
    y: np.ndarray
    y_u: np.ndarray
    evaluations: int

    @property
    def n(self) -> int:
        return len(self.y)


@dataclass(frozen=True)
class TripleDesign:
    """Pick-Freeze pair plus an independent output sample w; 3n model calls."""

    y: np.ndarray
    y_u: np.ndarray
    w: np.ndarray
    evaluations: int

    @property
    def n(self) -> int:
        return len(self.y)


@dataclass(frozen=True)
class PickFreezePanel:
    """Shared-base design for all p first-order indices.

    Column i of y_frozen re-evaluates the model with coordinate i+1 kept
    and all other coordinates redrawn. Total cost is (p + 1) n calls:
    one base sample plus one frozen sample per coordinate.
    """

    y: np.ndarray
    y_frozen: np.ndarray
    evaluations: int

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def p(self) -> int:
        return self.y_frozen.shape[1]

    def design_for(self, i: int) -> PickFreezeDesign:
        """Pick-Freeze pair for 1-based coordinate i."""
        return PickFreezeDesign(
            u=(i,), y=self.y, y_u=_freeze(self.y_frozen[:, i - 1]), evaluations=2 * self.n
        )


def _check_n(n: int) -> None:
    if n < 2:
        raise ValueError(f"need n >= 2 samples, got {n}")


def _check_subset(u: Sequence[int], p: int) -> tuple:
    u = tuple(int(i) for i in u)
    if len(u) == 0:
        raise ValueError("the frozen subset u must be non-empty")
    if len(set(u)) != len(u):
        raise ValueError(f"duplicate coordinates in u={u}")
    if any(i < 1 or i > p for i in u):
        raise ValueError(f"coordinates in u must lie in 1..{p}, got {u}")
    return u


def sample_iid(model: ModelSpec, n: int, stream: RngStream) -> IidDesign:
    """Draw n i.i.d. input rows and evaluate the model once per row."""
    _check_n(n)
    gen = stream.generator()
    x = sample_inputs(model, n, gen)
    y = model.evaluate_batch(x)
    return IidDesign(x=_freeze(x), y=_freeze(y), evaluations=n)


def sample_pickfreeze(model: ModelSpec, u: Sequence[int], n: int, stream: RngStream) -> PickFreezeDesign:
    """Draw a Pick-Freeze pair: coordinates in u shared, the rest redrawn.

    Costs exactly 2n model evaluations. With u = {1..p} the two output
    vectors coincide entrywise.
    """
    _check_n(n)
    u = _check_subset(u, model.p)
    gen = stream.generator()
    x = sample_inputs(model, n, gen)
    x_new = sample_inputs(model, n, gen)
    cols = [i - 1 for i in u]
    x_u = x_new.copy()
    x_u[:, cols] = x[:, cols]
    y = model.evaluate_batch(x)
    y_u = model.evaluate_batch(x_u)
    return PickFreezeDesign(u=u, y=_freeze(y), y_u=_freeze(y_u), evaluations=2 * n)


def sample_triple(model: ModelSpec, u: Sequence[int], n: int, stream: RngStream) -> TripleDesign:
    """Pick-Freeze pair plus an independent n-sample of the output (3n calls)."""
    _check_n(n)
    u = _check_subset(u, model.p)
    gen = stream.generator()
    x = sample_inputs(model, n, gen)
    x_new = sample_inputs(model, n, gen)
    cols = [i - 1 for i in u]
    x_u = x_new.copy()
    x_u[:, cols] = x[:, cols]
    x_w = sample_inputs(model, n, gen)
    y = model.evaluate_batch(x)
    y_u = model.evaluate_batch(x_u)
    w = model.evaluate_batch(x_w)
    return TripleDesign(y=_freeze(y), y_u=_freeze(y_u), w=_freeze(w), evaluations=3 * n)


def sample_pickfreeze_panel(model: ModelSpec, n: int, stream: RngStream) -> PickFreezePanel:
    """Shared-base Pick-Freeze design for all p first-order indices.

    One base sample of size n plus, per coordinate, a sample with that
    coordinate kept and every other redrawn: (p + 1) n calls in total.
    """
    _check_n(n)
    gen = stream.generator()
    x = sample_inputs(model, n, gen)
    y = model.evaluate_batch(x)
    frozen = np.empty((n, model.p))
    for i in range(model.p):
        x_i = sample_inputs(model, n, gen)
        x_i[:, i] = x[:, i]
        frozen[:, i] = model.evaluate_batch(x_i)
    return PickFreezePanel(y=_freeze(y), y_frozen=_freeze(frozen), evaluations=(model.p + 1) * n)


def budget_split(budget: int, p: int) -> tuple:
    """Split a total call budget between the two estimation routes.

    The single-sample rank route consumes the whole budget (n = budget);
    the Pick-Freeze route gets N = budget // (p + 1) rows per index so that
    its (p + 1) N total calls never exceed the budget.
    """
    if budget < 1:
        raise ValueError("budget must be positive")
    return int(budget), int(budget) // (p + 1)
