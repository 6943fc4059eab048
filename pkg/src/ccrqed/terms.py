"""Expansion of ideal-cavity probabilities into weighted sinusoid terms.

Every generator returns a :class:`TermList` such that

    p_plus(t) = sum_i (A_i + B_i sin^2(Omega_i t))

The first term always carries the constant offset (A = p_plus0, B = 0,
Omega = 0); every other term has A = 0.  Double sums are laid out with the
oscillator index s outermost and the photon number n innermost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterator

import numpy as np

from .errors import DomainError, UnsupportedConfigurationError
from .model import (
    DEFAULT_EPS,
    FieldKind,
    FieldState,
    PhysicalParams,
    RepKind,
    RepresentationConfig,
    binomial_weight,
    gaussian_weight,
    poisson_cutoff,
    poisson_pmf,
    rabi_freq,
    thermal_cutoff,
    thermal_pmf,
)

# Double-sum terms (n >= 1) lighter than this are discarded.
DROP_WEIGHT = 1e-15


@dataclass(frozen=True)
class OscillationTerm:
    a_off: float
    b_amp: float
    omega: float

    def __call__(self, t):
        return self.a_off + self.b_amp * np.sin(self.omega * np.asarray(t)) ** 2


@dataclass(frozen=True, eq=False)
class TermList:
    """Immutable, array-backed list of oscillation terms."""

    a_off: np.ndarray
    b_amp: np.ndarray
    omega: np.ndarray
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("a_off", "b_amp", "omega"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (self.a_off.shape == self.b_amp.shape == self.omega.shape):
            raise ValueError("term arrays must have equal length")
        if np.any(self.omega < 0):
            raise ValueError("term frequencies must be >= 0")

    def __len__(self) -> int:
        return self.a_off.size

    def __iter__(self) -> Iterator[OscillationTerm]:
        for a, b, w in zip(self.a_off, self.b_amp, self.omega):
            yield OscillationTerm(float(a), float(b), float(w))

    def __getitem__(self, i) -> OscillationTerm:
        return OscillationTerm(float(self.a_off[i]), float(self.b_amp[i]), float(self.omega[i]))

    def __add__(self, other: TermList) -> TermList:
        return concat(self, other)

    def ideal(self, t) -> np.ndarray:
        """p_plus at times ``t`` with no decoherence."""
        from .decoherence import apply_decoherence_grid  # noqa: PLC0415

        return apply_decoherence_grid(self, np.atleast_1d(np.asarray(t, dtype=float)))


def concat(*lists: TermList) -> TermList:
    return TermList(
        np.concatenate([tl.a_off for tl in lists]),
        np.concatenate([tl.b_amp for tl in lists]),
        np.concatenate([tl.omega for tl in lists]),
        {"concat": [tl.meta for tl in lists]},
    )


def _with_constant(a0, b, omega, meta) -> TermList:
    a = np.zeros(len(b) + 1)
    a[0] = a0
    return TermList(a, np.concatenate([[0.0], b]), np.concatenate([[0.0], omega]), meta)


def _bare_g2(params: PhysicalParams, rep: RepresentationConfig) -> float:
    if rep.z_renorm <= 0:
        raise DomainError("Z must be positive (bare coupling undefined)")
    return params.g_ph ** 2 / rep.z_renorm


def _require_reducible(rep: RepresentationConfig):
    if rep.kind is not RepKind.REDUCIBLE:
        raise DomainError("a reducible representation is required")


def _oscillator_weights(rep: RepresentationConfig, weights: str) -> tuple[np.ndarray, np.ndarray]:
    s = np.arange(1, rep.n_osc + 1)
    if weights == "binomial":
        w = binomial_weight(rep.n_osc, rep.z_p, s)
    elif weights in ("gaussian", "gaussian_small_z"):
        w = gaussian_weight(rep.n_osc, rep.z_p, s, small_z=weights == "gaussian_small_z")
    else:
        raise ValueError(f"unknown weight model {weights!r}")
    return s, np.atleast_1d(w)


def _thermal_coefficient(params: PhysicalParams, nbar: float) -> float:
    return params.p_plus0 - params.p_minus0 * nbar / (1.0 + nbar)


def vacuum_irreducible(params: PhysicalParams, chi_p: float = 1.0) -> TermList:
    """Standard vacuum Rabi flop with the coupling g_ph^2 chi_p."""
    if params.p_plus0 != 1.0:
        return thermal_irreducible(params, chi_p, 0.0)
    g2 = params.g_ph ** 2 * chi_p
    om = rabi_freq(params.delta, g2)
    meta = {"generator": "vacuum_irreducible", "chi_p": chi_p}
    return _with_constant(1.0, np.array([-g2 / om ** 2]), np.array([om]), meta)


def vacuum_reducible(params: PhysicalParams, rep: RepresentationConfig,
                     weights: str = "binomial") -> TermList:
    """Vacuum Rabi oscillation in the reducible N-oscillator representation.

    One term per s = 1..N with frequency sqrt(delta^2/4 + g^2 s/N), g the
    bare coupling.  ``weights`` may select the Gaussian approximants
    ("gaussian" or "gaussian_small_z") in place of the exact binomial.
    """
    _require_reducible(rep)
    if params.p_plus0 != 1.0:
        if weights != "binomial":
            raise UnsupportedConfigurationError("Gaussian weights need p_plus0 = 1")
        return thermal_reducible(params, rep, 0.0)
    g2 = _bare_g2(params, rep)
    s, w = _oscillator_weights(rep, weights)
    g2x = g2 * (s / rep.n_osc)
    om = rabi_freq(params.delta, g2x)
    meta = {"generator": "vacuum_reducible", "rep": rep, "weights": weights}
    return _with_constant(1.0, -w * g2x / om ** 2, om, meta)


def _double_sum(a0, w_s, w_sn, g2x, delta, coef, meta) -> TermList:
    """Flatten an (s, n) grid of weights into terms, s-major order."""
    w = w_s[:, None] * w_sn
    om = rabi_freq(delta, g2x)
    b = -w * coef * g2x / om ** 2
    n_idx = np.broadcast_to(np.arange(w.shape[1]), w.shape)
    keep = (n_idx == 0) | (w >= DROP_WEIGHT)
    return _with_constant(a0, b[keep], om[keep], meta)


def thermal_reducible(params: PhysicalParams, rep: RepresentationConfig, nbar: float,
                      eps: float = DEFAULT_EPS) -> TermList:
    _require_reducible(rep)
    g2 = _bare_g2(params, rep)
    n_max = thermal_cutoff(nbar, eps)
    n = np.arange(n_max + 1)
    s, w_s = _oscillator_weights(rep, "binomial")
    p_n = np.atleast_1d(thermal_pmf(nbar, n))
    g2x = g2 * np.outer(s / rep.n_osc, n + 1)
    meta = {"generator": "thermal_reducible", "rep": rep, "nbar": nbar, "eps": eps,
            "n_max": n_max}
    return _double_sum(params.p_plus0, w_s, np.broadcast_to(p_n, g2x.shape), g2x,
                       params.delta, _thermal_coefficient(params, nbar), meta)


def thermal_irreducible(params: PhysicalParams, chi_p: float, nbar: float,
                        eps: float = DEFAULT_EPS) -> TermList:
    """N -> infinity limit of ``thermal_reducible``.

    The numerator keeps the (n + 1) factor of the finite-N sum, i.e.
    B_n = -P(n) c g_ph^2 (n+1) chi_p / Omega_n^2.
    """
    n_max = thermal_cutoff(nbar, eps)
    n = np.arange(n_max + 1)
    p_n = np.atleast_1d(thermal_pmf(nbar, n))
    g2x = params.g_ph ** 2 * chi_p * (n + 1.0)
    meta = {"generator": "thermal_irreducible", "chi_p": chi_p, "nbar": nbar, "eps": eps,
            "n_max": n_max}
    return _double_sum(params.p_plus0, np.ones(1), p_n[None, :], g2x[None, :],
                       params.delta, _thermal_coefficient(params, nbar), meta)


def _require_excited(params: PhysicalParams):
    if params.p_plus0 != 1.0:
        raise UnsupportedConfigurationError(
            "coherent-state expressions exist only for an initially excited atom")


def coherent_reducible(params: PhysicalParams, rep: RepresentationConfig, z_amp: float,
                       eps: float = DEFAULT_EPS) -> TermList:
    """Coherent field |z> in the N-oscillator representation, atom excited.

    ``z_amp`` is the bare amplitude.  The photon cut-off is taken from the
    Poisson mean |z|^2, which bounds |z|^2 s/N for every s.
    """
    _require_reducible(rep)
    _require_excited(params)
    if z_amp < 0:
        raise DomainError("z_amp must be >= 0")
    g2 = _bare_g2(params, rep)
    lam_max = z_amp ** 2
    n_max = poisson_cutoff(lam_max, eps)
    n = np.arange(n_max + 1)
    s, w_s = _oscillator_weights(rep, "binomial")
    frac = s / rep.n_osc
    p_sn = poisson_pmf((lam_max * frac)[:, None], n[None, :])
    g2x = g2 * np.outer(frac, n + 1)
    meta = {"generator": "coherent_reducible", "rep": rep, "z_amp": z_amp, "eps": eps,
            "n_max": n_max}
    return _double_sum(1.0, w_s, p_sn, g2x, params.delta, 1.0, meta)


def coherent_irreducible(params: PhysicalParams, chi_p: float, z_amp_ph: float,
                         eps: float = DEFAULT_EPS) -> TermList:
    """Coherent-state collapse/revival sum with mean photon number |z_ph|^2 chi_p."""
    _require_excited(params)
    if z_amp_ph < 0:
        raise DomainError("z_amp_ph must be >= 0")
    lam = z_amp_ph ** 2 * chi_p
    n_max = poisson_cutoff(lam, eps)
    n = np.arange(n_max + 1)
    p_n = np.atleast_1d(poisson_pmf(lam, n))
    g2x = params.g_ph ** 2 * chi_p * (n + 1.0)
    meta = {"generator": "coherent_irreducible", "chi_p": chi_p, "z_amp_ph": z_amp_ph,
            "eps": eps, "n_max": n_max}
    return _double_sum(1.0, np.ones(1), p_n[None, :], g2x[None, :], params.delta, 1.0, meta)


def build_terms(rep: RepresentationConfig, state: FieldState, params: PhysicalParams,
                eps: float = DEFAULT_EPS, weights: str = "binomial") -> TermList:
    """Dispatch on (representation, field state) to the matching generator."""
    reducible = rep.kind is RepKind.REDUCIBLE
    if state.kind is FieldKind.VACUUM:
        if reducible:
            return vacuum_reducible(params, rep, weights)
        return vacuum_irreducible(params, rep.chi_p)
    if weights != "binomial":
        raise UnsupportedConfigurationError("Gaussian weights are only offered for vacuum")
    if state.kind is FieldKind.THERMAL:
        if reducible:
            return thermal_reducible(params, rep, state.nbar, eps)
        return thermal_irreducible(params, rep.chi_p, state.nbar, eps)
    if reducible:
        return coherent_reducible(params, rep, state.z_amp, eps)
    return coherent_irreducible(params, rep.chi_p, state.z_amp * math.sqrt(rep.z_renorm), eps)
