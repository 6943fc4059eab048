import math

import numpy as np
import pytest

from conftest import G_PH, KAPPA_TCAV, carrier_period
from ccrqed.analysis import (
    DataSet,
    ModelConfig,
    SamplingError,
    compare_kappa_hypotheses,
    damped_sinusoid,
    detect_revival,
    fit_decay_time,
    fit_delta_t,
    fit_delta_t_windowed,
    golden_section,
    parse_windows,
    revival_time_estimate,
    scan_nz_lower_bound,
)
from ccrqed.curves import TimeGrid, evaluate_curve
from ccrqed.decoherence import apply_decoherence_grid
from ccrqed.errors import DataError
from ccrqed.model import DecoherenceConfig, FieldState, PhysicalParams, RepresentationConfig

T = TimeGrid(90.0, 91).times()


def vacuum_model(params):
    return ModelConfig(RepresentationConfig.irreducible(), FieldState.vacuum(), params)


def synth(model, dt, kappa=0.0, t=T):
    return apply_decoherence_grid(model.terms(), t, DecoherenceConfig(kappa, dt))


def test_golden_section_quadratic():
    x = golden_section(lambda v: (v - 0.37) ** 2, 0.0, 1.0, 1e-9)
    assert x == pytest.approx(0.37, abs=1e-8)


class TestFit:
    def test_noiseless_recovery(self, params):
        model = vacuum_model(params)
        for dt in (0.13, 0.5, 1.21):
            data = DataSet(T, synth(model, dt, KAPPA_TCAV))
            res = fit_delta_t(data, model, (0.0, 2.0), KAPPA_TCAV)
            assert res.best_params["dt_us"] == pytest.approx(dt, abs=1e-3)
            assert res.unit_weights

    def test_noisy_recovery(self, params):
        model = vacuum_model(params)
        clean = synth(model, 0.5, KAPPA_TCAV)
        hits = 0
        for seed in range(40):
            rng = np.random.default_rng(seed)
            p = np.clip(clean + rng.normal(0, 0.02, clean.size), 0, 1)
            res = fit_delta_t(DataSet(T, p, np.full(T.size, 0.02)), model, (0.0, 2.0),
                              KAPPA_TCAV)
            hits += abs(res.best_params["dt_us"] - 0.5) <= 0.05
            assert not res.unit_weights
        assert hits >= 38

    def test_linear_model(self, params):
        model = vacuum_model(params)
        p = apply_decoherence_grid(model.terms(), T, DecoherenceConfig(0.0, 0.0, dt_fraction=0.01))
        res = fit_delta_t(DataSet(T, p), model, (0.0, 0.05), linear=True, grid_step=0.001)
        assert res.best_params["dt_fraction"] == pytest.approx(0.01, abs=1e-4)

    def test_empty_data(self, params):
        with pytest.raises(DataError):
            fit_delta_t(DataSet(np.array([]), np.array([])), vacuum_model(params))

    def test_bad_range(self, params):
        with pytest.raises(ValueError):
            fit_delta_t(DataSet(T, np.full(T.size, 0.5)), vacuum_model(params), (1.0, 1.0))


class TestWindows:
    def test_parse(self):
        assert parse_windows("0:15,15:35") == [(0.0, 15.0), (15.0, 35.0)]
        with pytest.raises(ValueError):
            parse_windows("5:5")
        with pytest.raises(ValueError):
            parse_windows("a:b")

    def test_per_window_recovery(self, params):
        model = vacuum_model(params)
        windows = parse_windows("0:15,15:35,35:60,60:90")
        truth = [0.7, 0.3, 0.7, 0.5]
        p = np.empty_like(T)
        for k, ((lo, hi), dt) in enumerate(zip(windows, truth)):
            m = (T >= lo) & ((T <= hi) if k == 3 else (T < hi))
            p[m] = synth(model, dt, KAPPA_TCAV, T[m])
        res = fit_delta_t_windowed(DataSet(T, p), model, windows, (0.0, 2.0), KAPPA_TCAV)
        got = [v for _, v in res.per_window]
        assert np.allclose(got, truth, atol=0.1)
        assert not res.skipped_windows

    def test_sparse_window_skipped(self, params):
        model = vacuum_model(params)
        data = DataSet(T, synth(model, 0.5))
        with pytest.warns(UserWarning, match="skipped"):
            res = fit_delta_t_windowed(data, model, [(0, 40), (40.2, 40.8), (41, 90)])
        assert res.skipped_windows == [(40.2, 40.8)]
        assert res.per_window[1][1] is None


class TestKappaComparison:
    def test_identifies_damped(self, params):
        model = vacuum_model(params)
        data = DataSet(T, synth(model, 0.5, KAPPA_TCAV))
        assert compare_kappa_hypotheses(data, model).preferred == "kappa>0"

    def test_identifies_undamped(self, params):
        model = vacuum_model(params)
        data = DataSet(T, synth(model, 0.5, 0.0))
        cmp = compare_kappa_hypotheses(data, model)
        assert cmp.preferred == "kappa=0"
        assert cmp.damped.mean_signed_residual < 0
        assert cmp.kappa_damped == pytest.approx(KAPPA_TCAV)


def test_decay_time_fit():
    t = np.linspace(0, 90, 181)
    p = damped_sinusoid(t, 0.0, 1.0, G_PH, 120.0)
    p = 1 - p
    res = fit_decay_time(DataSet(t, p), 1.0, -1.0, G_PH, (10.0, 500.0))
    assert res.best_params["t_decay_us"] == pytest.approx(120.0, rel=1e-4)


class TestScan:
    GRID = TimeGrid(90.0, 91)
    DECO = DecoherenceConfig(0.0, 0.5)

    def scan(self, params, eps, nz=(10, 20, 50, 100, 200)):
        return scan_nz_lower_bound(params, FieldState.vacuum(), 0.1, nz, eps, self.GRID,
                                   self.DECO)

    def test_large_eps_gives_first_point(self, params):
        s = self.scan(params, 1.0)
        assert s.bound == 10 and s.attained and s.n_osc[0] == 100

    def test_tiny_eps_not_attained(self, params):
        s = self.scan(params, 1e-9)
        assert s.bound is None and not s.attained

    def test_bound_monotone_in_eps(self, params):
        bounds = [self.scan(params, e).bound for e in (0.3, 0.1, 0.05)]
        vals = [math.inf if b is None else b for b in bounds]
        assert vals == sorted(vals)

    def test_descending_grid_rejected(self, params):
        with pytest.raises(ValueError):
            self.scan(params, 0.1, nz=(20, 10))


class TestRevival:
    @staticmethod
    def curve(params, n_osc, z, t_max=12000.0, per_period=40):
        step = carrier_period() / per_period
        grid = TimeGrid(t_max, int(round(t_max / step)) + 1)
        return evaluate_curve(RepresentationConfig.reducible(n_osc, z), FieldState.vacuum(),
                              params, DecoherenceConfig(), grid)

    def test_irreducible_never_collapses(self, params):
        grid = TimeGrid(2000.0, 4001)
        c = evaluate_curve(RepresentationConfig.irreducible(), FieldState.vacuum(), params,
                           DecoherenceConfig(), grid)
        rep = detect_revival(c)
        assert rep.status == "NO_COLLAPSE" and not rep.observed

    def test_depends_on_nz_only(self, params):
        a = detect_revival(self.curve(params, 600, 1 / 3))
        b = detect_revival(self.curve(params, 3000, 1 / 15))
        assert a.observed and b.observed
        assert abs(a.revival_time - b.revival_time) <= 0.1 * a.revival_time
        est = revival_time_estimate(200.0, G_PH)
        for r in (a, b):
            assert abs(r.revival_time - est) <= 0.2 * est
            assert r.collapse_time < 0.1 * r.revival_time

    def test_refinement_stable(self, params):
        a = detect_revival(self.curve(params, 300, 0.2, 4000.0, 40))
        b = detect_revival(self.curve(params, 300, 0.2, 4000.0, 80))
        assert a.observed and b.observed
        assert abs(a.revival_time - b.revival_time) <= 2 * carrier_period()

    def test_short_record_no_revival(self, params):
        r = detect_revival(self.curve(params, 600, 1 / 3, 3000.0))
        assert r.status == "NO_REVIVAL" and r.collapse_time is not None

    def test_coarse_sampling_refused(self, params):
        grid = TimeGrid(1000.0, 101)
        c = evaluate_curve(RepresentationConfig.reducible(600, 1 / 3), FieldState.vacuum(),
                           params, DecoherenceConfig(), grid)
        with pytest.raises(SamplingError, match="samples per carrier period"):
            detect_revival(c)

    def test_estimate_formula(self):
        assert revival_time_estimate(200, G_PH) == pytest.approx(2 * math.pi * 200 / G_PH)


class TestDataSet:
    def write(self, tmp_path, text):
        path = tmp_path / "d.csv"
        path.write_text(text)
        return path

    def test_reads_with_and_without_err(self, tmp_path):
        d = DataSet.from_csv(self.write(tmp_path, "# note\nt_us,p_plus,err\n0,1,0.02\n1,0.9,0.02\n"))
        assert d.err.tolist() == [0.02, 0.02]
        d = DataSet.from_csv(self.write(tmp_path, "t_us,p_plus\n0,1\n1,0.9\n"))
        assert d.err is None and np.all(d.weights == 1)

    @pytest.mark.parametrize("text,msg", [
        ("t,p\n0,1\n", "line 1"),
        ("t_us,p_plus\n0,1\n1,abc\n", "line 3"),
        ("t_us,p_plus\n0,1\n1,0.5,0.1\n", "line 3"),
        ("t_us,p_plus\n0,nan\n", "line 2"),
        ("", "empty"),
    ])
    def test_malformed(self, tmp_path, text, msg):
        with pytest.raises(DataError, match=msg):
            DataSet.from_csv(self.write(tmp_path, text))

    def test_out_of_range_probability(self):
        with pytest.raises(DataError):
            DataSet(np.array([0.0]), np.array([1.5]))

    def test_select_half_open(self):
        d = DataSet(np.arange(5.0), np.full(5, 0.5))
        assert d.select(1, 3).t.tolist() == [1.0, 2.0]
        assert d.select(1, 3, include_hi=True).t.tolist() == [1.0, 2.0, 3.0]
