"""Predicted and empirical densities of the log output norm."""

import math

import numpy as np
import pytest

from resnet_limits import (
    INV_SQRT2,
    DensityGrid,
    GridSpec,
    NetConfig,
    histogram,
    infinite_width_logout_density,
    log_chi2_density,
    predict_G,
    predicted_logout_density,
)
from resnet_limits.density import (
    default_grid_for,
    grid_from_csv,
    grid_to_csv,
    log_chi2_moments,
)
from resnet_limits.errors import (
    GridTooNarrowError,
    InsufficientDataError,
    ValidationError,
)
from resnet_limits.theory import HypoConstant, TheoryPrediction

EULER_GAMMA = 0.5772156649015329


def digamma_oracle(k_half):
    """psi at integer or half-integer arguments via the recurrence from
    psi(1) = -gamma and psi(1/2) = -gamma - 2 ln 2."""
    if k_half == int(k_half):
        val = -EULER_GAMMA
        x = 1.0
    else:
        assert (k_half * 2) == int(k_half * 2)
        val = -EULER_GAMMA - 2.0 * math.log(2.0)
        x = 0.5
    while x < k_half - 1e-9:
        val += 1.0 / x
        x += 1.0
    return val


class TestGridSpec:
    def test_validation(self):
        with pytest.raises(ValidationError):
            GridSpec(1.0, 0.0)
        with pytest.raises(ValidationError):
            GridSpec(0.0, 1.0, step=0.0)

    def test_xs_endpoints(self):
        xs = GridSpec(-1.0, 1.0, 0.5).xs
        np.testing.assert_allclose(xs, [-1.0, -0.5, 0.0, 0.5, 1.0])


class TestLogChi2:
    def test_normalization(self):
        for k in (1, 2, 10, 50):
            assert log_chi2_density(k).integral() == pytest.approx(1.0, abs=1e-3)

    def test_mode_for_k2(self):
        # density exp(x - e^x/2)/2 peaks where e^x = k, i.e. x = ln 2
        grid = log_chi2_density(2)
        assert grid.xs[int(np.argmax(grid.values))] == pytest.approx(math.log(2.0), abs=0.02)

    def test_mean_matches_digamma_oracle(self):
        for k in (3, 10):
            grid = log_chi2_density(k)
            expected = digamma_oracle(k / 2.0) + math.log(2.0)
            assert grid.mean() == pytest.approx(expected, abs=1e-3)

    def test_moment_helper_against_oracle(self):
        m, v = log_chi2_moments(10)
        assert m == pytest.approx(digamma_oracle(5.0) + math.log(2.0), rel=1e-12)
        # trigamma(5) from the series sum 1/(5+j)^2
        trig = sum(1.0 / (5.0 + j) ** 2 for j in range(200_000))
        assert v == pytest.approx(trig, abs=1e-5)

    def test_narrow_grid_rejected(self):
        with pytest.raises(GridTooNarrowError):
            log_chi2_density(10, GridSpec(0.0, 0.5, 0.01))

    def test_invalid_dof(self):
        with pytest.raises(ValidationError):
            log_chi2_density(0)


class TestInfiniteWidth:
    def test_nin_one_equals_log_chi2(self):
        grid = GridSpec(-15.0, 8.0, 0.01)
        a = infinite_width_logout_density(1, 4, grid)
        b = log_chi2_density(4, grid)
        assert float(np.max(np.abs(a.values - b.values))) < 1e-12

    def test_shift_property(self):
        # density(n_in = 10) is density(n_in = 1) translated left by ln 10
        step = 0.01
        shift = math.log(10.0)
        a = infinite_width_logout_density(10, 6, GridSpec(-14.0, 6.0, step))
        b = infinite_width_logout_density(1, 6, GridSpec(-14.0 + shift, 6.0 + shift, step))
        assert float(np.max(np.abs(a.values - b.values))) < 1e-6

    def test_departs_from_depth_prediction_at_small_ratio(self):
        # d/n = 0.1: integrated absolute difference between the two limits
        cfg = NetConfig.constant(
            n_in=10, n_out=10, n=100, d=10,
            alpha=INV_SQRT2, lam=INV_SQRT2, scheme="balanced",
        )
        pred = predict_G(cfg)
        depth = predicted_logout_density(cfg, pred)
        grid = GridSpec(depth.x_min, depth.x_max, depth.step)
        infw = infinite_width_logout_density(10, 10, grid)
        iad = float(np.sum(np.abs(depth.values - infw.values)) * depth.step)
        assert iad > 0.1


def fake_pred(mean, var):
    return TheoryPrediction(
        mean_G=mean, var_G=var, beta=var, c=0.0,
        h_total=0.0, i_total=0.0, prefactor_log=0.0,
    )


class TestPredictedDensity:
    def test_dirac_limit(self):
        cfg = NetConfig.constant(n_in=1, n_out=5, n=50, d=0, alpha=0.5, lam=0.5)
        pred = fake_pred(0.0, 1e-4)
        grid = GridSpec(-8.0, 6.0, 0.01)
        conv = predicted_logout_density(cfg, pred, grid=grid)
        ref = log_chi2_density(5, grid)
        assert float(np.max(np.abs(conv.values - ref.values))) < 1e-2

    def test_mean_additivity(self):
        cfg = NetConfig.constant(
            n_in=10, n_out=10, n=100, d=50,
            alpha=INV_SQRT2, lam=INV_SQRT2, scheme="balanced",
        )
        pred = predict_G(cfg)
        grid = predicted_logout_density(cfg, pred)
        chi_mean, chi_var = log_chi2_moments(10)
        expected = pred.mean_G + pred.prefactor_log + chi_mean
        assert grid.mean() == pytest.approx(expected, abs=1e-3)
        assert grid.var() == pytest.approx(pred.var_G + chi_var, abs=2e-3)

    def test_mass_and_positivity(self):
        cfg = NetConfig.constant(
            n_in=4, n_out=4, n=80, d=80,
            alpha=INV_SQRT2, lam=INV_SQRT2, seed=0,
        )
        pred = predict_G(cfg, HypoConstant(-0.88))
        grid = predicted_logout_density(cfg, pred)
        assert grid.integral() == pytest.approx(1.0, abs=1e-3)
        assert np.all(grid.values >= 0.0)
        assert np.all(np.isfinite(grid.values))

    def test_refinement_convergence(self):
        cfg = NetConfig.constant(
            n_in=3, n_out=3, n=60, d=30,
            alpha=INV_SQRT2, lam=INV_SQRT2, scheme="balanced",
        )
        pred = predict_G(cfg)
        coarse = predicted_logout_density(cfg, pred)
        fine_spec = GridSpec(coarse.x_min, coarse.x_max, coarse.step / 2.0)
        fine = predicted_logout_density(cfg, pred, grid=fine_spec)
        on_coarse = fine.interpolate(coarse.xs)
        assert float(np.max(np.abs(on_coarse - coarse.values))) < 1e-3

    def test_wide_grid_stays_finite(self):
        cfg = NetConfig.constant(
            n_in=1, n_out=1, n=50, d=10,
            alpha=INV_SQRT2, lam=INV_SQRT2, scheme="balanced",
        )
        pred = predict_G(cfg)
        grid = predicted_logout_density(cfg, pred, grid=GridSpec(-40.0, 40.0, 0.05))
        assert np.all(np.isfinite(grid.values))

    def test_requires_positive_variance(self):
        cfg = NetConfig.constant(n_in=1, n_out=1, n=50, d=0, alpha=0.5, lam=0.5)
        with pytest.raises(ValidationError):
            predicted_logout_density(cfg, fake_pred(0.0, 0.0))


class TestHistogram:
    def test_constant_samples_single_bin(self):
        grid = GridSpec(-1.0, 1.0, 0.1)
        h = histogram(np.full(500, 0.31), grid)
        assert int(np.count_nonzero(h.values)) == 1
        assert h.values[np.argmax(h.values)] == pytest.approx(1.0 / 0.1)

    def test_normal_histogram_close_to_pdf(self):
        rng = np.random.Generator(np.random.Philox(key=31))
        x = rng.standard_normal(1_000_000)
        grid = GridSpec(-6.0, 6.0, 0.05)
        h = histogram(x, grid)
        pdf = np.exp(-0.5 * grid.xs**2) / math.sqrt(2.0 * math.pi)
        assert float(np.max(np.abs(h.values - pdf))) < 0.01

    def test_mass_conservation(self):
        rng = np.random.Generator(np.random.Philox(key=32))
        x = rng.standard_normal(10_000)
        h = histogram(x, GridSpec(-8.0, 8.0, 0.1))
        # end bins are empty on this wide grid, so the trapezoid rule is exact
        assert h.integral() == pytest.approx(1.0, abs=1e-9)

    def test_insufficient_samples(self):
        with pytest.raises(InsufficientDataError):
            histogram(np.zeros(50), GridSpec(-1.0, 1.0, 0.1))


class TestSerialization:
    def test_round_trip(self, tmp_path):
        grid = log_chi2_density(6)
        path = tmp_path / "grid.csv"
        grid_to_csv(grid, path, header_lines=["resnet-limits-schema v1"])
        back = grid_from_csv(path)
        assert back.step == pytest.approx(grid.step)
        np.testing.assert_allclose(back.values, grid.values, rtol=1e-15)
        text = path.read_text()
        assert text.startswith("# resnet-limits-schema v1\n")

    def test_default_grid_span(self):
        spec = default_grid_for(2.0, 4.0)
        assert spec.x_min == pytest.approx(2.0 - 20.0)
        assert spec.x_max == pytest.approx(2.0 + 20.0)

    def test_grid_requires_rows(self, tmp_path):
        path = tmp_path / "tiny.csv"
        path.write_text("x,density\n0.0,1.0\n")
        with pytest.raises(ValidationError):
            grid_from_csv(path)

    def test_density_grid_interpolate_outside_is_zero(self):
        grid = DensityGrid(0.0, 1.0, 0.5, np.array([1.0, 1.0, 1.0]))
        assert grid.interpolate(5.0) == 0.0
