"""Sampled p_plus(t) curves and distances between them."""

from __future__ import annotations

import functools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .decoherence import apply_decoherence_grid
from .model import DEFAULT_EPS, DecoherenceConfig, FieldState, PhysicalParams, RepresentationConfig
from .terms import TermList, build_terms

__all__ = ["TimeGrid", "Curve", "cached_terms", "evaluate_curve", "sup_distance"]


@dataclass(frozen=True)
class TimeGrid:
    """``count`` equally spaced times on [start, stop].

    With ``open_start`` the grid is (start, stop] instead, e.g. 90 samples on
    (0, 90] us.  Sample i is always start + k * h for an integer k and a
    single step h, so halving h reproduces every existing time exactly.
    """

    stop: float
    count: int
    start: float = 0.0
    open_start: bool = False

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("grid needs at least one point")
        if self.count > 1 and not self.stop > self.start:
            raise ValueError("grid stop must exceed start")
        if self.start < 0:
            raise ValueError("grid start must be >= 0")

    @property
    def step(self) -> float:
        if self.open_start:
            return (self.stop - self.start) / self.count
        if self.count == 1:
            return 0.0
        return (self.stop - self.start) / (self.count - 1)

    def times(self) -> np.ndarray:
        k = np.arange(self.count, dtype=float)
        if self.open_start:
            k += 1.0
        return self.start + k * self.step


@dataclass(frozen=True, eq=False)
class Curve:
    times: np.ndarray
    values: np.ndarray
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape or t.ndim != 1:
            raise ValueError("times and values must be 1-D of equal length")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)


@functools.lru_cache(maxsize=64)
def cached_terms(rep: RepresentationConfig, state: FieldState, params: PhysicalParams,
                 eps: float = DEFAULT_EPS, weights: str = "binomial") -> TermList:
    return build_terms(rep, state, params, eps, weights)


def evaluate_curve(rep: RepresentationConfig, state: FieldState, params: PhysicalParams,
                   deco: DecoherenceConfig, grid: TimeGrid | np.ndarray, *,
                   eps: float = DEFAULT_EPS, weights: str = "binomial",
                   workers: int = 1) -> Curve:
    """Sample the decohered excited-state probability on ``grid``.

    The term list is built once (and cached); with ``workers > 1`` the grid is
    split into contiguous chunks evaluated on a thread pool and reassembled in
    order.  Output does not depend on ``workers``.
    """
    times = grid.times() if isinstance(grid, TimeGrid) else np.asarray(grid, dtype=float)
    if times.size == 0:
        raise ValueError("empty time grid")
    terms = cached_terms(rep, state, params, eps, weights)
    if workers > 1 and times.size > 1:
        chunks = np.array_split(times, min(workers, times.size))
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda c: apply_decoherence_grid(terms, c, deco), chunks))
        values = np.concatenate(parts)
    else:
        values = apply_decoherence_grid(terms, times, deco)
    meta = {"rep": rep, "state": state, "params": params, "deco": deco, "eps": eps,
            "weights": weights, "n_terms": len(terms)}
    return Curve(times, values, meta)


def sup_distance(c1: Curve, c2: Curve) -> float:
    """max |c1 - c2| over a shared time grid."""
    if c1.times.shape != c2.times.shape or np.any(c1.times != c2.times):
        raise ValueError("curves are sampled on different grids")
    return float(np.max(np.abs(c1.values - c2.values)))
