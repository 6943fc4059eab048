"""Fits of the timing uncertainty, kappa hypothesis tests, NZ scans and
collapse/revival detection."""

from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .curves import Curve, TimeGrid, cached_terms, evaluate_curve, sup_distance
from .decoherence import apply_decoherence_grid
from .errors import DataError
from .model import (
    DEFAULT_EPS,
    DecoherenceConfig,
    FieldState,
    PhysicalParams,
    RepresentationConfig,
)
from .terms import TermList

INV_PHI = (math.sqrt(5) - 1) / 2
DEFAULT_T_CAV = 220.0


@dataclass(frozen=True, eq=False)
class DataSet:
    t: np.ndarray
    p: np.ndarray
    err: np.ndarray | None = None

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        p = np.asarray(self.p, dtype=float)
        if t.ndim != 1 or t.shape != p.shape:
            raise DataError("t and p must be 1-D of equal length")
        if np.any(t < 0) or np.any(np.diff(t) < 0):
            raise DataError("times must be >= 0 and ascending")
        if np.any((p < 0) | (p > 1)):
            raise DataError("probabilities must lie in [0, 1]")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "p", p)
        if self.err is not None:
            e = np.asarray(self.err, dtype=float)
            if e.shape != t.shape or np.any(e < 0):
                raise DataError("error bars must be >= 0, one per point")
            object.__setattr__(self, "err", e)

    def __len__(self):
        return self.t.size

    @property
    def weights(self) -> np.ndarray:
        if self.err is None:
            return np.ones_like(self.t)
        with np.errstate(divide="ignore"):
            return np.where(self.err > 0, 1.0 / self.err ** 2, 1.0)

    def select(self, lo: float, hi: float, include_hi: bool = False) -> DataSet:
        m = (self.t >= lo) & ((self.t <= hi) if include_hi else (self.t < hi))
        return DataSet(self.t[m], self.p[m], None if self.err is None else self.err[m])

    @classmethod
    def from_curve(cls, curve: Curve) -> DataSet:
        return cls(curve.times, np.clip(curve.values, 0.0, 1.0))

    @classmethod
    def from_csv(cls, path: str | Path) -> DataSet:
        """Read a ``t_us,p_plus[,err]`` file; ``#`` lines are comments."""
        rows = []
        has_err = None
        with open(path, newline="", encoding="utf-8") as fh:
            header_seen = False
            for lineno, line in enumerate(fh, start=1):
                stripped = line.strip()
                if not stripped or stripped.startswith("#"):
                    continue
                fields = next(csv.reader([stripped]))
                if not header_seen:
                    names = [f.strip() for f in fields]
                    if names[:2] != ["t_us", "p_plus"] or names[2:] not in ([], ["err"]):
                        raise DataError(f"line {lineno}: expected header t_us,p_plus[,err]")
                    has_err = len(names) == 3
                    header_seen = True
                    continue
                if len(fields) != (3 if has_err else 2):
                    raise DataError(f"line {lineno}: expected {3 if has_err else 2} fields")
                try:
                    vals = [float(f) for f in fields]
                except ValueError:
                    raise DataError(f"line {lineno}: non-numeric field") from None
                if not all(math.isfinite(v) for v in vals):
                    raise DataError(f"line {lineno}: non-finite value")
                rows.append(vals)
        if not header_seen:
            raise DataError("empty data file")
        arr = np.array(rows, dtype=float).reshape(-1, 3 if has_err else 2)
        return cls(arr[:, 0], arr[:, 1], arr[:, 2] if has_err else None)


@dataclass(frozen=True)
class ModelConfig:
    """Everything needed to predict p_plus(t) except the decoherence."""

    rep: RepresentationConfig
    state: FieldState
    params: PhysicalParams
    eps: float = DEFAULT_EPS

    def terms(self) -> TermList:
        return cached_terms(self.rep, self.state, self.params, self.eps)


@dataclass
class FitResult:
    best_params: dict[str, float]
    residual_sse: float
    mean_signed_residual: float = 0.0
    per_window: list[tuple[tuple[float, float], float | None]] | None = None
    skipped_windows: list[tuple[float, float]] = field(default_factory=list)
    unit_weights: bool = True


def golden_section(f, a: float, b: float, tol: float = 1e-7) -> float:
    """Minimizer of a unimodal f on [a, b] to within ``tol``."""
    a, b = min(a, b), max(a, b)
    h = b - a
    if h <= tol:
        return 0.5 * (a + b)
    n = int(math.ceil(math.log(tol / h) / math.log(INV_PHI)))
    c = b - INV_PHI * h
    d = a + INV_PHI * h
    yc, yd = f(c), f(d)
    for _ in range(n):
        if yc < yd:
            b, d, yd = d, c, yc
            h = INV_PHI * h
            c = b - INV_PHI * h
            yc = f(c)
        else:
            a, c, yc = c, d, yd
            h = INV_PHI * h
            d = a + INV_PHI * h
            yd = f(d)
    return c if yc < yd else d


def _deco(kappa: float, value: float, linear: bool) -> DecoherenceConfig:
    if linear:
        return DecoherenceConfig(kappa, 0.0, dt_fraction=value)
    return DecoherenceConfig(kappa, value)


def _minimize_1d(objective, lo: float, hi: float, grid_step: float, tol: float) -> float:
    """Coarse scan at ``grid_step`` then golden section around the best node."""
    n = max(2, int(math.ceil((hi - lo) / grid_step)) + 1)
    nodes = lo + (hi - lo) * np.arange(n) / (n - 1)
    vals = [objective(x) for x in nodes]
    i = int(np.argmin(vals))
    a = nodes[max(i - 1, 0)]
    b = nodes[min(i + 1, n - 1)]
    x = golden_section(objective, a, b, tol)
    return x if objective(x) <= vals[i] else float(nodes[i])


def fit_delta_t(data: DataSet, model: ModelConfig, dt_range: tuple[float, float] = (0.0, 2.0),
                kappa_fixed: float = 0.0, *, linear: bool = False,
                grid_step: float = 0.02, tol: float = 1e-7) -> FitResult:
    """Least-squares estimate of the timing uncertainty.

    Minimizes sum w_i (p_model(t_i) - p_i)^2 with w_i = 1/err_i^2 (unit
    weights without error bars).  With ``linear`` the fitted parameter is
    the fraction c of dt(t) = c t and ``dt_range`` is read in those units.
    """
    if len(data) == 0:
        raise DataError("no data points to fit")
    lo, hi = dt_range
    if not 0 <= lo < hi:
        raise ValueError(f"degenerate dt range {dt_range}")
    terms = model.terms()
    w = data.weights

    def sse(x):
        pred = apply_decoherence_grid(terms, data.t, _deco(kappa_fixed, x, linear))
        return float(math.fsum(w * (pred - data.p) ** 2))

    best = _minimize_1d(sse, lo, hi, grid_step, tol)
    pred = apply_decoherence_grid(terms, data.t, _deco(kappa_fixed, best, linear))
    key = "dt_fraction" if linear else "dt_us"
    return FitResult({key: best, "kappa": kappa_fixed}, sse(best),
                     float(np.mean(pred - data.p)), unit_weights=data.err is None)


def parse_windows(text: str) -> list[tuple[float, float]]:
    """``"0:15,15:35"`` -> [(0, 15), (15, 35)]."""
    out = []
    for part in text.split(","):
        a, _, b = part.partition(":")
        try:
            lo, hi = float(a), float(b)
        except ValueError:
            raise ValueError(f"bad window {part!r}; expected start:stop") from None
        if not hi > lo:
            raise ValueError(f"window {part!r} is empty")
        out.append((lo, hi))
    return out


def fit_delta_t_windowed(data: DataSet, model: ModelConfig,
                         windows: Sequence[tuple[float, float]],
                         dt_range: tuple[float, float] = (0.0, 2.0), kappa_fixed: float = 0.0,
                         **kw) -> FitResult:
    """Independent fits of dt on each time window.

    Windows with fewer than three points are skipped and listed in
    ``skipped_windows``; their entry in ``per_window`` is None.
    """
    per_window = []
    skipped = []
    total = []
    last = len(windows) - 1
    for k, (lo, hi) in enumerate(windows):
        sub = data.select(lo, hi, include_hi=k == last)
        if len(sub) < 3:
            warnings.warn(f"window {lo}:{hi} has {len(sub)} points; skipped", stacklevel=2)
            skipped.append((lo, hi))
            per_window.append(((lo, hi), None))
            continue
        res = fit_delta_t(sub, model, dt_range, kappa_fixed, **kw)
        per_window.append(((lo, hi), next(iter(res.best_params.values()))))
        total.append(res.residual_sse)
    fitted = [v for _, v in per_window if v is not None]
    best = {"dt_us": float(np.mean(fitted)) if fitted else math.nan, "kappa": kappa_fixed}
    return FitResult(best, math.fsum(total), per_window=per_window, skipped_windows=skipped,
                     unit_weights=data.err is None)


@dataclass
class KappaComparison:
    damped: FitResult
    undamped: FitResult
    kappa_damped: float

    @property
    def preferred(self) -> str:
        return "kappa=0" if self.undamped.residual_sse <= self.damped.residual_sse else "kappa>0"


def compare_kappa_hypotheses(data: DataSet, model: ModelConfig,
                             dt_range: tuple[float, float] = (0.0, 2.0),
                             t_cav: float = DEFAULT_T_CAV, **kw) -> KappaComparison:
    """Fit dt with kappa = 1/(2 t_cav) and with kappa = 0.

    ``mean_signed_residual`` of each fit is mean(model - data), so a negative
    value means the fitted curve sits below the data.
    """
    kappa = 1.0 / (2.0 * t_cav)
    return KappaComparison(fit_delta_t(data, model, dt_range, kappa, **kw),
                           fit_delta_t(data, model, dt_range, 0.0, **kw), kappa)


def damped_sinusoid(t, a: float, b: float, omega: float, t_decay: float):
    """Phenomenological A + B exp(-t/T) sin^2(Omega t)."""
    t = np.asarray(t, dtype=float)
    return a + b * np.exp(-t / t_decay) * np.sin(omega * t) ** 2


def fit_decay_time(data: DataSet, a: float, b: float, omega: float,
                   t_range: tuple[float, float] = (1.0, 1000.0), grid_step: float = 1.0
                   ) -> FitResult:
    """Fit T of ``damped_sinusoid`` with A, B, Omega held fixed (diagnostic only)."""
    w = data.weights

    def sse(tau):
        return float(math.fsum(w * (damped_sinusoid(data.t, a, b, omega, tau) - data.p) ** 2))

    best = _minimize_1d(sse, t_range[0], t_range[1], grid_step, 1e-6)
    pred = damped_sinusoid(data.t, a, b, omega, best)
    return FitResult({"t_decay_us": best}, sse(best), float(np.mean(pred - data.p)),
                     unit_weights=data.err is None)


@dataclass
class NZScan:
    nz_grid: list[float]
    n_osc: list[int]
    distances: list[float]
    bound: float | None
    eps: float
    z_renorm: float
    rounding: str = "nearest"

    @property
    def attained(self) -> bool:
        return self.bound is not None


def scan_nz_lower_bound(params: PhysicalParams, state: FieldState, z_renorm: float,
                        nz_grid: Sequence[float], eps: float, grid: TimeGrid | np.ndarray,
                        deco: DecoherenceConfig, *, chi_p: float = 1.0,
                        reference: Curve | None = None, workers: int = 1) -> NZScan:
    """Smallest NZ on ``nz_grid`` whose reducible curve stays within ``eps``.

    The reference defaults to the irreducible curve for the same physical
    field (a coherent amplitude is renormalized with the same Z).  Every grid
    point is evaluated; no monotonicity in NZ is assumed.  N = round(NZ/Z).
    """
    nz_grid = [float(v) for v in nz_grid]
    if any(b <= a for a, b in zip(nz_grid, nz_grid[1:])):
        raise ValueError("nz_grid must be ascending")
    if not eps > 0:
        raise ValueError("eps must be positive")
    times = grid.times() if isinstance(grid, TimeGrid) else np.asarray(grid, dtype=float)
    if reference is None:
        irr = RepresentationConfig.irreducible(chi_p=chi_p, z_renorm=z_renorm)
        reference = evaluate_curve(irr, state, params, deco, times)
    elif reference.times.shape != times.shape or np.any(reference.times != times):
        raise ValueError("reference curve must be sampled on the scan grid")
    n_osc = [max(1, int(round(nz / z_renorm))) for nz in nz_grid]

    def distance(n):
        rep = RepresentationConfig.reducible(n, z_renorm, chi_p)
        return sup_distance(evaluate_curve(rep, state, params, deco, times), reference)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            dists = list(pool.map(distance, n_osc))
    else:
        dists = [distance(n) for n in n_osc]
    bound = next((nz for nz, d in zip(nz_grid, dists) if d < eps), None)
    return NZScan(nz_grid, n_osc, dists, bound, eps, z_renorm)


@dataclass
class RevivalReport:
    collapse_time: float | None
    revival_time: float | None
    envelope_times: np.ndarray
    envelope: np.ndarray
    status: str

    @property
    def observed(self) -> bool:
        return self.status == "OK"


class SamplingError(ValueError):
    """Curve too coarse to resolve the carrier oscillation."""


def oscillation_envelope(curve: Curve, period: float) -> tuple[np.ndarray, np.ndarray]:
    """Peak-to-trough amplitude in sliding windows one ``period`` long.

    Returned times are window centres.
    """
    dt = curve.times[1] - curve.times[0]
    width = int(round(period / dt)) + 1
    if width > curve.times.size:
        raise SamplingError("curve is shorter than one carrier period")
    win = sliding_window_view(curve.values, width)
    env = win.max(axis=1) - win.min(axis=1)
    centres = curve.times[: env.size] + 0.5 * (width - 1) * dt
    return centres, env


def detect_revival(curve: Curve, g_ph: float | None = None, *, collapse_frac: float = 0.1,
                   revival_factor: float = 3.0, noise_frac: float = 1e-3,
                   min_samples_per_period: int = 20) -> RevivalReport:
    """Locate the first collapse and the first revival of a resonant vacuum curve.

    Collapse is the first envelope value below ``collapse_frac`` of the
    initial one.  The collapsed floor is the running minimum of the envelope
    after collapse, but never below ``noise_frac`` of the initial envelope
    (round-off ripple).  The revival is the envelope maximum over the first
    stretch that rises above ``revival_factor`` times the floor; a stretch
    still rising at the end of the record does not count.
    """
    if g_ph is None:
        g_ph = curve.meta["params"].g_ph
    period = math.pi / g_ph
    t = curve.times
    if t.size < 2:
        raise SamplingError("need at least two samples")
    steps = np.diff(t)
    if np.max(steps) - np.min(steps) > 1e-9 * max(1.0, t[-1]):
        raise SamplingError("detect_revival needs a uniform time grid")
    per_period = period / steps[0]
    if per_period < min_samples_per_period:
        raise SamplingError(
            f"only {per_period:.1f} samples per carrier period {period:.4g} us; "
            f"use a step <= {period / min_samples_per_period:.4g} us")
    centres, env = oscillation_envelope(curve, period)
    env0 = env[0]
    below = np.nonzero(env < collapse_frac * env0)[0]
    if below.size == 0:
        return RevivalReport(None, None, centres, env, "NO_COLLAPSE")
    ic = int(below[0])
    floor_abs = noise_frac * env0
    running = env[ic]
    for j in range(ic + 1, env.size):
        if env[j] > revival_factor * max(running, floor_abs):
            thresh = revival_factor * max(running, floor_abs)
            k = j
            while k < env.size and env[k] > thresh:
                k += 1
            if k == env.size:
                break
            peak = j + int(np.argmax(env[j:k]))
            return RevivalReport(float(centres[ic]), float(centres[peak]), centres, env, "OK")
        running = min(running, env[j])
    return RevivalReport(float(centres[ic]), None, centres, env, "NO_REVIVAL")


def revival_time_estimate(nz: float, g_ph: float) -> float:
    """Rephasing time 2 pi NZ / g_ph of neighbouring Rabi frequencies near s = NZ."""
    return 2.0 * math.pi * nz / g_ph
