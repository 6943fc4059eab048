"""Dissipative and timing-uncertainty decoherence of sinusoid terms.

A term A + B sin^2(Omega t') observed at nominal time t is averaged with a
Gamma density of shape t/dt and scale dt (mean t, variance t dt), while
energy loss multiplies it by exp(-kappa t').  The average has the closed form

    D^(t/dt) [A + B/2 (1 - (1 + x^2)^(-t/(2 dt)) cos((t/dt) atan x))]

with D = 1/(1 + kappa dt) and x = 2 Omega dt / (1 + kappa dt).
``average_term_quadrature`` integrates the definition directly and is kept
independent of the closed form so it can serve as its check.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate

from .errors import DomainError, IntegrationError
from .model import DecoherenceConfig
from .terms import OscillationTerm, TermList

# Bound on (terms x times) evaluated per block.
_BLOCK = 1 << 22


def deformed_exp(kappa: float, t: float, dt: float) -> float:
    """(1 + kappa dt)^(-t/dt); the Gamma average of exp(-kappa t')."""
    r = kappa * dt
    if r == 0:
        return math.exp(-kappa * t)
    return math.exp(-t * kappa * (math.log1p(r) / r))


def gamma_pdf(t: float, t_prime, dt: float):
    """Density of the elapsed interaction time t' given nominal time t."""
    if not t > 0 or not dt > 0:
        raise DomainError("gamma_pdf needs t > 0 and dt > 0")
    tp = np.asarray(t_prime, dtype=float)
    if np.any(tp < 0):
        raise DomainError("t_prime must be >= 0")
    k = t / dt
    with np.errstate(divide="ignore"):
        logp = -tp / dt + (k - 1.0) * np.log(tp / dt) - math.lgamma(k) - math.log(dt)
    out = np.exp(logp)
    if k == 1.0:
        out = np.where(tp == 0, 1.0 / dt, out)
    return float(out) if np.ndim(t_prime) == 0 else out


def _closed_form(a, b, omega, t, dt, kappa):
    """Vectorized closed-form average; broadcasts over terms and times."""
    a, b, omega, t, dt = np.broadcast_arrays(*(np.asarray(v, dtype=float)
                                                for v in (a, b, omega, t, dt)))
    out = np.empty(a.shape)
    ideal = dt == 0
    if np.any(ideal):
        ti = t[ideal]
        out[ideal] = np.exp(-kappa * ti) * (a[ideal] + b[ideal] * np.sin(omega[ideal] * ti) ** 2)
    avg = ~ideal
    if np.any(avg):
        ta, da = t[avg], dt[avg]
        # exponents written without t/dt so tiny dt cannot overflow
        r = kappa * da
        rate = 2.0 * omega[avg] / (1.0 + r)
        x = rate * da
        damp = np.exp(-ta * kappa * _log1p_ratio(r))
        x2 = x * x
        beat = (np.exp(-0.5 * ta * rate * x * _log1p_ratio(x2))
                * np.cos(ta * rate * _atan_ratio(x)))
        out[avg] = damp * (a[avg] + 0.5 * b[avg] * (1.0 - beat))
    return out


def _log1p_ratio(u):
    """log1p(u)/u, equal to 1 at u = 0."""
    safe = np.where(u == 0, 1.0, u)
    return np.where(u == 0, 1.0, np.log1p(safe) / safe)


def _atan_ratio(u):
    """atan(u)/u, equal to 1 at u = 0."""
    safe = np.where(u == 0, 1.0, u)
    return np.where(u == 0, 1.0, np.arctan(safe) / safe)


def average_term_closed(term: OscillationTerm, t: float, dt: float, kappa: float) -> float:
    """Gamma- and exp(-kappa t)-averaged contribution of one term at time t."""
    if t < 0 or dt < 0 or kappa < 0:
        raise DomainError("t, dt and kappa must be >= 0")
    if t == 0:
        return term.a_off
    return float(_closed_form(term.a_off, term.b_amp, term.omega, t, dt, kappa))


def average_term_quadrature(term: OscillationTerm, t: float, dt: float, kappa: float,
                            tol: float = 1e-10) -> float:
    """Integrate gamma_pdf * exp(-kappa t') * (A + B sin^2(Omega t')) numerically.

    The range is [0, t + 40 sqrt(t dt)].  The smooth part and the
    cos(2 Omega t') part are integrated separately, the latter with an
    oscillatory-weight rule, on pieces split around the bulk of the density.
    Raises IntegrationError if any piece misses ``tol``.
    """
    if not t > 0 or not dt > 0:
        raise DomainError("quadrature needs t > 0 and dt > 0")
    sigma = math.sqrt(t * dt)
    hi = t + 40.0 * sigma
    cuts = [0.0]
    for c in (t - 12.0 * sigma, t - 4.0 * sigma, t, t + 4.0 * sigma, t + 12.0 * sigma):
        if cuts[-1] < c < hi:
            cuts.append(c)
    cuts.append(hi)

    def envelope(tp):
        return gamma_pdf(t, tp, dt) * math.exp(-kappa * tp)

    half_b = 0.5 * term.b_amp
    freq = 2.0 * term.omega
    piece_tol = tol / (2 * len(cuts))
    total = 0.0
    for lo_, hi_ in zip(cuts[:-1], cuts[1:]):
        res = integrate.quad(envelope, lo_, hi_, epsabs=piece_tol, epsrel=0.0, limit=500,
                             full_output=1)
        _check(res, piece_tol, "smooth part")
        total += (term.a_off + half_b) * res[0]
        if half_b != 0.0:
            if freq == 0.0:
                res = integrate.quad(envelope, lo_, hi_, epsabs=piece_tol, epsrel=0.0,
                                     limit=500, full_output=1)
            else:
                res = integrate.quad(envelope, lo_, hi_, weight="cos", wvar=freq,
                                     epsabs=piece_tol / abs(half_b), epsrel=0.0, limit=500,
                                     full_output=1)
            _check(res, piece_tol / abs(half_b), "oscillatory part")
            total -= half_b * res[0]
    return total


def _check(res, tol, what):
    if len(res) > 3 or res[1] > tol:
        msg = res[3] if len(res) > 3 else f"error estimate {res[1]:.3g} > {tol:.3g}"
        raise IntegrationError(f"quadrature of the {what} failed: {msg}")


def _column_sum(mat: np.ndarray) -> np.ndarray:
    """Neumaier-compensated sum down each column, rows in fixed order.

    Every column is reduced with the same elementwise operations, so a
    column's result depends only on that column.
    """
    total = mat[0].copy()
    comp = np.zeros_like(total)
    for row in mat[1:]:
        t = total + row
        comp += np.where(np.abs(total) >= np.abs(row), (total - t) + row, (row - t) + total)
        total = t
    return total + comp


def apply_decoherence_grid(terms: TermList, times, deco: DecoherenceConfig | None = None
                           ) -> np.ndarray:
    """Decohered p_plus at each time in ``times``.

    Term contributions are accumulated with compensated summation in term
    order; a sample depends only on its own time stamp, never on the rest of
    the grid.
    """
    deco = deco or DecoherenceConfig()
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise DomainError("times must be >= 0")
    dts = np.array([deco.dt_at(t) for t in times]) if times.size else np.empty(0)
    out = np.empty(times.size)
    # identically-zero terms cannot change an exactly rounded sum
    live = (terms.a_off != 0) | (terms.b_amp != 0)
    if not np.any(live):
        live[:1] = True
    a = terms.a_off[live][:, None]
    b = terms.b_amp[live][:, None]
    om = terms.omega[live][:, None]
    step = max(1, _BLOCK // max(a.shape[0], 1))
    for i in range(0, times.size, step):
        tt = times[i:i + step]
        contrib = _closed_form(a, b, om, tt[None, :], dts[i:i + step][None, :], deco.kappa)
        zero = tt == 0
        if np.any(zero):
            contrib[:, zero] = a
        out[i:i + step] = _column_sum(contrib)
    return out


def apply_decoherence(terms: TermList, t: float, deco: DecoherenceConfig | None = None
                      ) -> float:
    """Decohered p_plus at a single time; linear in the term list."""
    return float(apply_decoherence_grid(terms, np.array([t]), deco)[0])
