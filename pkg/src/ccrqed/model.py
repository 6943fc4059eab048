"""Physical parameters, photon and oscillator distributions, Rabi frequencies.

Units throughout the package: time in microseconds, angular frequencies in
rad/us.  All probability mass functions are evaluated in the log domain and
exponentiated at the end, so that N in the 10^3..10^5 range never overflows.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

__all__ = [
    "PhysicalParams",
    "RepKind",
    "RepresentationConfig",
    "FieldKind",
    "FieldState",
    "DecoherenceConfig",
    "gph_from_khz_over_pi",
    "thermal_pmf",
    "poisson_pmf",
    "binomial_weight",
    "gaussian_weight",
    "rabi_freq",
    "truncation_index",
    "thermal_cutoff",
    "poisson_cutoff",
]

DEFAULT_EPS = 1e-10
_LN_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def gph_from_khz_over_pi(khz: float) -> float:
    """Convert a coupling quoted as g/pi in kHz into rad/us."""
    return math.pi * khz * 1e-3


@dataclass(frozen=True)
class PhysicalParams:
    g_ph: float
    delta: float = 0.0
    p_plus0: float = 1.0
    p_minus0: float | None = None

    def __post_init__(self):
        if self.p_minus0 is None:
            object.__setattr__(self, "p_minus0", 1.0 - self.p_plus0)
        if not (self.g_ph > 0 and math.isfinite(self.g_ph)):
            raise DomainError(f"g_ph must be positive and finite, got {self.g_ph}")
        if not math.isfinite(self.delta):
            raise DomainError("delta must be finite")
        for name in ("p_plus0", "p_minus0"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {v}")
        if abs(self.p_plus0 + self.p_minus0 - 1.0) > 1e-12:
            raise DomainError("p_plus0 + p_minus0 must equal 1")


class RepKind(str, enum.Enum):
    IRREDUCIBLE = "irreducible"
    REDUCIBLE = "reducible"


@dataclass(frozen=True)
class RepresentationConfig:
    """Choice of CCR representation.

    ``z_renorm`` is the renormalization constant Z.  For the irreducible
    kind it is only used to turn a bare coherent amplitude z into the
    physical one, z * sqrt(Z).
    """

    kind: RepKind = RepKind.IRREDUCIBLE
    n_osc: int | None = None
    z_renorm: float = 1.0
    chi_p: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", RepKind(self.kind))
        if not 0.0 < self.chi_p <= 1.0:
            raise DomainError(f"chi_p must lie in (0, 1], got {self.chi_p}")
        if not 0.0 < self.z_renorm <= 1.0:
            raise DomainError(f"Z must lie in (0, 1], got {self.z_renorm}")
        if self.kind is RepKind.REDUCIBLE:
            if self.n_osc is None or int(self.n_osc) != self.n_osc or self.n_osc < 1:
                raise DomainError(f"N must be a positive integer, got {self.n_osc}")
            object.__setattr__(self, "n_osc", int(self.n_osc))

    @classmethod
    def irreducible(cls, chi_p: float = 1.0, z_renorm: float = 1.0) -> RepresentationConfig:
        return cls(RepKind.IRREDUCIBLE, None, z_renorm, chi_p)

    @classmethod
    def reducible(cls, n_osc: int, z_renorm: float, chi_p: float = 1.0) -> RepresentationConfig:
        return cls(RepKind.REDUCIBLE, n_osc, z_renorm, chi_p)

    @property
    def z_p(self) -> float:
        return self.chi_p * self.z_renorm

    @property
    def chi_p_prime(self) -> float:
        return math.sqrt(self.chi_p)


class FieldKind(str, enum.Enum):
    VACUUM = "vacuum"
    THERMAL = "thermal"
    COHERENT = "coherent"


@dataclass(frozen=True)
class FieldState:
    """Initial cavity field.  ``z_amp`` is the bare coherent amplitude |z|."""

    kind: FieldKind = FieldKind.VACUUM
    nbar: float = 0.0
    z_amp: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", FieldKind(self.kind))
        if not self.nbar >= 0.0:
            raise DomainError(f"nbar must be >= 0, got {self.nbar}")
        if not self.z_amp >= 0.0:
            raise DomainError(f"z_amp must be >= 0, got {self.z_amp}")

    @classmethod
    def vacuum(cls) -> FieldState:
        return cls(FieldKind.VACUUM)

    @classmethod
    def thermal(cls, nbar: float) -> FieldState:
        return cls(FieldKind.THERMAL, nbar=nbar)

    @classmethod
    def coherent(cls, z_amp: float) -> FieldState:
        return cls(FieldKind.COHERENT, z_amp=z_amp)

    @classmethod
    def coherent_with_mean(cls, mean_photons: float, rep: RepresentationConfig) -> FieldState:
        """Coherent state whose physical mean photon number |z_ph chi'_p|^2 is given."""
        if mean_photons < 0:
            raise DomainError("mean photon number must be >= 0")
        return cls.coherent(math.sqrt(mean_photons / (rep.z_renorm * rep.chi_p)))


@dataclass(frozen=True)
class DecoherenceConfig:
    """Energy damping ``kappa`` plus a Gamma-distributed timing uncertainty.

    The uncertainty is either constant (``dt_us``) or grows linearly with
    the nominal time, dt(t) = ``dt_fraction`` * t, when ``dt_fraction`` is set.
    """

    kappa: float = 0.0
    dt_us: float = 0.0
    dt_fraction: float | None = None
    t_cav: float | None = field(default=None)

    def __post_init__(self):
        if self.t_cav is not None:
            if not self.t_cav > 0:
                raise DomainError("t_cav must be positive")
            implied = 1.0 / (2.0 * self.t_cav)
            if self.kappa == 0.0:
                object.__setattr__(self, "kappa", implied)
            elif abs(self.kappa - implied) > 1e-12:
                raise DomainError("kappa disagrees with 1/(2 t_cav)")
        if not self.kappa >= 0:
            raise DomainError(f"kappa must be >= 0, got {self.kappa}")
        if not self.dt_us >= 0:
            raise DomainError(f"dt must be >= 0, got {self.dt_us}")
        if self.dt_fraction is not None and not self.dt_fraction >= 0:
            raise DomainError("dt_fraction must be >= 0")

    @classmethod
    def from_cavity_lifetime(cls, t_cav: float, dt_us: float = 0.0,
                             dt_fraction: float | None = None) -> DecoherenceConfig:
        return cls(1.0 / (2.0 * t_cav), dt_us, dt_fraction, t_cav)

    def dt_at(self, t: float) -> float:
        if self.dt_fraction is not None:
            return self.dt_fraction * t
        return self.dt_us


# -- log-domain pmf machinery (Loader's saddle-point form) -------------------

_STIRLERR_TABLE = np.array(
    [0.0] + [math.lgamma(k + 1.0) - (k + 0.5) * math.log(k) + k - _LN_SQRT_2PI
             for k in range(1, 16)])


def _stirlerr(n):
    """log(n!) - [(n + 1/2) log n - n + log sqrt(2 pi)] for integer n >= 1."""
    n = np.asarray(n, dtype=float)
    out = np.empty_like(n)
    small = n <= 15
    if np.any(small):
        out[small] = _STIRLERR_TABLE[n[small].astype(int)]
    big = ~small
    if np.any(big):
        nb = n[big]
        nn = nb * nb
        s0, s1, s2, s3, s4 = (1 / 12, 1 / 360, 1 / 1260, 1 / 1680, 1 / 1188)
        out[big] = (s0 - (s1 - (s2 - (s3 - s4 / nn) / nn) / nn) / nn) / nb
    return out


def _bd0(x, m):
    """Deviance term x log(x/m) + m - x, accurate when x is close to m."""
    x = np.asarray(x, dtype=float)
    m = np.broadcast_to(np.asarray(m, dtype=float), x.shape)
    out = x * np.log(x / m) + m - x
    close = np.abs(x - m) < 0.1 * (x + m)
    if np.any(close):
        xc, mc = x[close], m[close]
        v = (xc - mc) / (xc + mc)
        s = (xc - mc) * v
        ej = 2 * xc * v
        v2 = v * v
        j = 1
        done = np.zeros(xc.shape, dtype=bool)
        while not done.all() and j < 1000:
            ej = ej * v2
            s1 = s + ej / (2 * j + 1)
            done = done | (s1 == s)
            s = np.where(done, s, s1)
            j += 1
        out[close] = s
    return out


def _check_counts(n, name="n"):
    arr = np.asarray(n)
    if arr.dtype.kind == "f":
        if np.any(arr != np.floor(arr)):
            raise DomainError(f"{name} must be integer")
    elif arr.dtype.kind not in "iu":
        raise DomainError(f"{name} must be integer")
    if np.any(arr < 0):
        raise DomainError(f"{name} must be >= 0")
    return arr.astype(float)


def _scalar_or_array(out, like):
    return float(np.reshape(out, -1)[0]) if np.ndim(like) == 0 else out


def thermal_pmf(nbar: float, n):
    """Bose-Einstein photon-number distribution nbar^n / (1 + nbar)^(n+1)."""
    if not nbar >= 0:
        raise DomainError(f"nbar must be >= 0, got {nbar}")
    k = _check_counts(n)
    if nbar == 0:
        out = np.where(k == 0, 1.0, 0.0)
    else:
        out = np.exp(k * math.log(nbar) - (k + 1) * math.log1p(nbar))
    return _scalar_or_array(out, n)


def poisson_pmf(lam, n):
    """Poisson probability lam^n e^(-lam) / n!.

    ``lam`` and ``n`` broadcast against each other, so a column of means and
    a row of counts give the whole table in one call.
    """
    lam_arr = np.asarray(lam, dtype=float)
    if np.any(~(lam_arr >= 0)):
        raise DomainError(f"lambda must be >= 0, got {lam}")
    k = _check_counts(n)
    lam_b, k_b = np.broadcast_arrays(lam_arr, k)
    out = np.zeros(lam_b.shape)
    zero_lam = lam_b == 0
    out[zero_lam & (k_b == 0)] = 1.0
    zero_k = (k_b == 0) & ~zero_lam
    out[zero_k] = np.exp(-lam_b[zero_k])
    gen = (k_b > 0) & ~zero_lam
    if np.any(gen):
        kp, lp = k_b[gen], lam_b[gen]
        out[gen] = np.exp(-_stirlerr(kp) - _bd0(kp, lp)) / np.sqrt(2 * math.pi * kp)
    if np.ndim(lam) == 0 and np.ndim(n) == 0:
        return float(out)
    return out


def binomial_weight(n_osc: int, z_p: float, s):
    """Binomial probability C(N, s) z_p^s (1 - z_p)^(N - s).

    Accurate to a few ulps relative for N up to 10^5 and beyond; the
    degenerate success probabilities 0 and 1 are handled exactly.
    """
    if n_osc < 0 or int(n_osc) != n_osc:
        raise DomainError(f"N must be a nonnegative integer, got {n_osc}")
    if not 0.0 <= z_p <= 1.0:
        raise DomainError(f"z_p must lie in [0, 1], got {z_p}")
    k = _check_counts(s, "s")
    if np.any(k > n_osc):
        raise DomainError("s must lie in 0..N")
    n = float(n_osc)
    if z_p == 0.0:
        return _scalar_or_array(np.where(k == 0, 1.0, 0.0), s)
    if z_p == 1.0:
        return _scalar_or_array(np.where(k == n, 1.0, 0.0), s)
    q = 1.0 - z_p
    k = np.atleast_1d(k)
    out = np.empty(k.shape)
    lo = k == 0
    hi = k == n
    out[lo] = math.exp(n * math.log1p(-z_p))
    out[hi] = math.exp(n * math.log1p(-q))
    mid = ~(lo | hi)
    if np.any(mid):
        x = k[mid]
        # grouped so that (s, z_p) and (N - s, 1 - z_p) round identically
        lc = (_stirlerr(np.array([n]))[0] - (_stirlerr(x) + _stirlerr(n - x))
              - (_bd0(x, n * z_p) + _bd0(n - x, n * q)))
        out[mid] = np.exp(lc) * np.sqrt(n / (2 * math.pi * (x * (n - x))))
    return _scalar_or_array(out, s)


def gaussian_weight(n_osc: int, z: float, s, small_z: bool = False):
    """Large-N Gaussian stand-in for ``binomial_weight``.

    The variance is N Z (1 - Z), or N Z when ``small_z`` is set.
    """
    if not 0.0 < z < 1.0:
        raise DomainError(f"Z must lie in (0, 1), got {z}")
    if n_osc < 1:
        raise DomainError("N must be >= 1")
    var = n_osc * z if small_z else n_osc * z * (1.0 - z)
    x = np.asarray(s, dtype=float) - n_osc * z
    out = np.exp(-x * x / (2 * var)) / math.sqrt(2 * math.pi * var)
    return _scalar_or_array(out, s)


def rabi_freq(delta: float, g2x):
    """Rabi frequency sqrt(delta^2/4 + g2x) for a squared-coupling eigenvalue g2x."""
    g = np.asarray(g2x, dtype=float)
    if np.any(g < 0):
        raise DomainError("g2x must be >= 0")
    out = np.sqrt(0.25 * delta * delta + g)
    return _scalar_or_array(out, g2x)


def truncation_index(pmf, eps: float = DEFAULT_EPS, n_cap: int = 1_000_000) -> int:
    """Smallest n_max whose cumulative mass sum_{n<=n_max} pmf(n) >= 1 - eps."""
    if not 0 < eps < 1:
        raise DomainError("eps must lie in (0, 1)")
    acc = 0.0
    comp = 0.0
    for n in range(n_cap):
        # Kahan accumulation keeps 1 - acc meaningful near eps ~ 1e-14
        y = pmf(n) - comp
        t = acc + y
        comp = (t - acc) - y
        acc = t
        if acc >= 1.0 - eps:
            return n
    raise DomainError("truncation did not converge")


def thermal_cutoff(nbar: float, eps: float = DEFAULT_EPS) -> int:
    return truncation_index(lambda n: thermal_pmf(nbar, n), eps)


def poisson_cutoff(lam: float, eps: float = DEFAULT_EPS) -> int:
    return truncation_index(lambda n: poisson_pmf(lam, n), eps)
