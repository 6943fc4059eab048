import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize, stats

from conftest import G_PH
from ccrqed.errors import DomainError, UnsupportedConfigurationError
from ccrqed.model import FieldState, PhysicalParams, RepresentationConfig
from ccrqed.terms import (
    build_terms,
    coherent_irreducible,
    coherent_reducible,
    thermal_irreducible,
    thermal_reducible,
    vacuum_irreducible,
    vacuum_reducible,
)

T90 = np.linspace(0.0, 90.0, 1801)


def same_terms(a, b, tol=1e-12):
    assert len(a) == len(b)
    for arr in ("a_off", "b_amp", "omega"):
        assert np.allclose(getattr(a, arr), getattr(b, arr), rtol=tol, atol=tol)


def brute_thermal(t, g_ph, n_osc, z, p_plus, nbar, n_max):
    """Direct double sum for the thermal reducible probability."""
    p_minus = 1 - p_plus
    g2 = g_ph ** 2 / z
    coef = p_plus - p_minus * nbar / (1 + nbar)
    total = 0.0
    for s in range(n_osc + 1):
        ws = stats.binom.pmf(s, n_osc, z)
        for n in range(n_max + 1):
            pn = nbar ** n / (1 + nbar) ** (n + 1)
            x = g2 * (n + 1) * s / n_osc
            if x == 0:
                continue
            total += ws * pn * coef * x * math.sin(t * math.sqrt(x)) ** 2 / x
    return p_plus - total


class TestVacuum:
    def test_resonant_flop(self, params):
        terms = vacuum_irreducible(params)
        assert np.allclose(terms.ideal(T90), 1 - np.sin(G_PH * T90) ** 2, atol=1e-14)

    def test_full_inversion(self, params):
        assert vacuum_irreducible(params).ideal(math.pi / (2 * G_PH))[0] == pytest.approx(0, abs=1e-15)

    def test_first_zero(self, params):
        terms = vacuum_irreducible(params)
        res = optimize.minimize_scalar(lambda t: terms.ideal(t)[0], bounds=(5, 15),
                                       method="bounded", options={"xatol": 1e-8})
        assert res.x == pytest.approx(10.64, abs=0.01)
        assert res.x == pytest.approx(math.pi / (2 * G_PH), abs=1e-4)

    def test_single_oscillator_certainty(self, params):
        red = vacuum_reducible(params, RepresentationConfig.reducible(1, 1.0))
        assert len(red) == 2
        same_terms(red, vacuum_irreducible(params, 1.0))

    def test_term_count_and_normalization(self, params):
        red = vacuum_reducible(params, RepresentationConfig.reducible(2000, 0.1))
        assert len(red) == 2001
        # at resonance B_s = -w_s, and the s = 0 weight is 0.9^2000
        assert abs(-math.fsum(red.b_amp) + 0.9 ** 2000 - 1) < 1e-12

    def test_distinct_frequencies(self):
        p = PhysicalParams(G_PH, delta=0.3)
        red = vacuum_reducible(p, RepresentationConfig.reducible(50, 0.2))
        om = red.omega[1:]
        g2 = G_PH ** 2 / 0.2
        assert len(np.unique(om)) == 50
        expected = np.sqrt(0.3 ** 2 / 4 + g2 * np.arange(1, 51) / 50)
        assert np.allclose(om, expected, rtol=1e-15)

    def test_approaches_limit(self, params):
        lim = vacuum_irreducible(params).ideal(T90)
        d = [np.max(np.abs(vacuum_reducible(params, RepresentationConfig.reducible(n, 0.1))
                           .ideal(T90) - lim)) for n in (500, 2000, 8000)]
        assert d[0] > d[1] > d[2]

    def test_gaussian_mode(self, params):
        rep = RepresentationConfig.reducible(2000, 0.1)
        exact = vacuum_reducible(params, rep).ideal(T90)
        gauss = vacuum_reducible(params, rep, weights="gaussian").ideal(T90)
        assert np.max(np.abs(exact - gauss)) < 0.02

    def test_general_initial_state_delegates(self):
        p = PhysicalParams(G_PH, p_plus0=0.7)
        same_terms(vacuum_irreducible(p), thermal_irreducible(p, 1.0, 0.0))

    def test_zero_z_rejected(self, params):
        with pytest.raises(DomainError):
            RepresentationConfig.reducible(10, 0.0)


class TestThermal:
    def test_reduces_to_vacuum(self, params):
        rep = RepresentationConfig.reducible(300, 0.1)
        th = thermal_reducible(params, rep, 0.0)
        vac = vacuum_reducible(params, rep)
        assert np.array_equal(th.b_amp, vac.b_amp)
        assert np.array_equal(th.omega, vac.omega)
        same_terms(thermal_irreducible(params, 1.0, 0.0), vacuum_irreducible(params))

    def test_equilibrium_initial_state(self):
        nbar = 0.05
        p_minus = 1 / (1 + nbar / (1 + nbar))
        p = PhysicalParams(G_PH, p_plus0=1 - p_minus)
        assert abs(p.p_plus0 - p.p_minus0 * nbar / (1 + nbar)) < 1e-15
        th = thermal_reducible(p, RepresentationConfig.reducible(200, 0.1), nbar)
        assert np.max(np.abs(th.b_amp)) < 1e-16
        assert np.allclose(th.ideal(T90), p.p_plus0, atol=1e-15)

    def test_matches_brute_double_sum(self):
        p = PhysicalParams(G_PH, p_plus0=0.99)
        rep = RepresentationConfig.reducible(2000, 0.1)
        terms = thermal_reducible(p, rep, 0.05)
        n_max = terms.meta["n_max"]
        # independent cut-off: geometric tail (nbar/(1+nbar))^(n+1) <= eps
        r = 0.05 / 1.05
        assert n_max == math.ceil(math.log(1e-10) / math.log(r)) - 1
        rng = np.random.default_rng(7)
        ts = rng.uniform(0, 90, 10)
        got = terms.ideal(ts)
        want = [brute_thermal(t, G_PH, 2000, 0.1, 0.99, 0.05, n_max) for t in ts]
        assert np.allclose(got, want, atol=1e-10, rtol=0)

    def test_law_of_large_numbers(self):
        p = PhysicalParams(G_PH, p_plus0=0.99)
        lim = thermal_irreducible(p, 1.0, 0.05).ideal(T90)
        d = [np.max(np.abs(thermal_reducible(p, RepresentationConfig.reducible(n, 0.1), 0.05)
                           .ideal(T90) - lim)) for n in (2000, 8000)]
        assert d[1] < d[0]

    def test_large_nbar_cutoff(self, params):
        th = thermal_irreducible(params, 1.0, 10.0, eps=1e-10)
        assert th.meta["n_max"] >= 100


class TestCoherent:
    def test_zero_amplitude_is_vacuum(self, params):
        rep = RepresentationConfig.reducible(400, 0.1)
        co = coherent_reducible(params, rep, 0.0)
        vac = vacuum_reducible(params, rep)
        assert np.array_equal(co.b_amp, vac.b_amp)
        assert np.array_equal(co.omega, vac.omega)
        same_terms(coherent_irreducible(params, 1.0, 0.0), vacuum_irreducible(params))

    def test_weights_sum_to_one(self, params):
        rep = RepresentationConfig.reducible(2000, 0.1)
        z = FieldState.coherent_with_mean(0.85, rep).z_amp
        co = coherent_reducible(params, rep, z, eps=1e-12)
        # at resonance -B equals the joint (s, n) weight
        s0 = 0.9 ** 2000
        assert abs(-math.fsum(co.b_amp) + s0 - 1) < 1e-10

    def test_poisson_mean(self, params):
        co = coherent_irreducible(params, 0.64, 1.25, eps=1e-14)
        n = np.arange(len(co) - 1)
        w = -co.b_amp[1:]
        assert math.fsum(w * n) == pytest.approx(1.25 ** 2 * 0.64, rel=1e-10)

    def test_requires_excited_atom(self):
        p = PhysicalParams(G_PH, p_plus0=0.9)
        with pytest.raises(UnsupportedConfigurationError):
            coherent_irreducible(p, 1.0, 0.5)
        with pytest.raises(UnsupportedConfigurationError):
            coherent_reducible(p, RepresentationConfig.reducible(10, 0.1), 0.5)

    @pytest.mark.parametrize("mean", [0.4, 0.85])
    def test_converges_to_limit(self, params, mean):
        ds = []
        for n in (500, 2000, 8000):
            rep = RepresentationConfig.reducible(n, 0.1)
            state = FieldState.coherent_with_mean(mean, rep)
            irr = RepresentationConfig.irreducible(z_renorm=0.1)
            ds.append(np.max(np.abs(build_terms(rep, state, params).ideal(T90)
                                    - build_terms(irr, state, params).ideal(T90))))
        assert ds[0] > ds[1] > ds[2]


class TestReductions:
    @pytest.mark.parametrize("state", [FieldState.vacuum(), FieldState.thermal(0.3),
                                       FieldState.coherent(0.9)])
    def test_one_oscillator_equals_irreducible(self, state):
        p = PhysicalParams(G_PH, delta=0.05)
        red = build_terms(RepresentationConfig.reducible(1, 1.0), state, p)
        irr = build_terms(RepresentationConfig.irreducible(), state, p)
        same_terms(red, irr)


configs = st.tuples(
    st.sampled_from(["vacuum", "thermal", "coherent"]),
    st.one_of(st.none(), st.integers(1, 60)),
    st.floats(0.05, 1.0),
    st.floats(0.2, 1.0),
    st.floats(0.0, 3.0),
    st.floats(-0.3, 0.3),
)


@settings(max_examples=40, deadline=None)
@given(configs)
def test_probability_bounds_and_initial_value(cfg):
    kind, n_osc, z, chi, amp, delta = cfg
    p = PhysicalParams(G_PH, delta=delta)
    rep = (RepresentationConfig.irreducible(chi, z) if n_osc is None
           else RepresentationConfig.reducible(n_osc, z, chi))
    state = {"vacuum": FieldState.vacuum(), "thermal": FieldState.thermal(amp),
             "coherent": FieldState.coherent(amp)}[kind]
    terms = build_terms(rep, state, p)
    assert terms.ideal(0.0)[0] == p.p_plus0
    v = terms.ideal(np.linspace(0, 200, 2001))
    assert np.all(v >= -1e-9) and np.all(v <= 1 + 1e-9)
    assert 0 <= math.fsum(terms.a_off) <= 1


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 4.0), st.integers(1, 40), st.floats(0.05, 1.0))
def test_thermal_mixed_atom_bounds(p_plus, nbar, n_osc, z):
    p = PhysicalParams(G_PH, p_plus0=p_plus)
    for terms in (thermal_reducible(p, RepresentationConfig.reducible(n_osc, z), nbar),
                  thermal_irreducible(p, 1.0, nbar)):
        v = terms.ideal(np.linspace(0, 150, 1501))
        assert terms.ideal(0.0)[0] == p_plus
        assert np.all(v >= -1e-9) and np.all(v <= 1 + 1e-9)


def test_deterministic(params):
    rep = RepresentationConfig.reducible(700, 0.2)
    a = build_terms(rep, FieldState.thermal(0.3), params)
    b = build_terms(rep, FieldState.thermal(0.3), params)
    for arr in ("a_off", "b_amp", "omega"):
        assert getattr(a, arr).tobytes() == getattr(b, arr).tobytes()
