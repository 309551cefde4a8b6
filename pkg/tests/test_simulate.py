"""Monte Carlo simulators: determinism, distributional identities, and
agreement between the literal architecture and the norm-chain reduction."""

import math

import numpy as np
import pytest

from resnet_limits import (
    INV_SQRT2,
    NetConfig,
    RngStream,
    forward_chain,
    forward_full,
    jacobian_column,
    ks_test_2samp,
    sample_G,
    summarize,
)
from resnet_limits.density import log_chi2_moments
from resnet_limits.errors import ValidationError
from resnet_limits.simulate import (
    compose_lnorm_from_chain,
    sample_lnorm_full,
    sample_output_pairs,
)


def const_cfg(n, d, alpha=INV_SQRT2, lam=INV_SQRT2, scheme="vanilla", **kw):
    return NetConfig.constant(n=n, d=d, alpha=alpha, lam=lam, scheme=scheme, **kw)


class TestDeterminism:
    def test_worker_count_invariance(self):
        cfg = const_cfg(30, 10, scheme="balanced", seed=9)
        serial = sample_G(cfg, 64, workers=1)
        parallel = sample_G(cfg, 64, workers=3)
        np.testing.assert_array_equal(serial, parallel)

    def test_scalar_matches_batch(self):
        cfg = const_cfg(25, 8, scheme="balanced", seed=5)
        batch = sample_G(cfg, 6)
        singles = [forward_chain(cfg, RngStream(5, i)).g_value for i in range(6)]
        np.testing.assert_array_equal(batch, singles)

    def test_start_index_offsets(self):
        cfg = const_cfg(20, 5, seed=17)
        whole = sample_G(cfg, 10)
        tail = sample_G(cfg, 6, start_index=4)
        np.testing.assert_array_equal(whole[4:], tail)

    def test_distinct_streams_differ(self):
        cfg = const_cfg(20, 5, seed=17)
        g = sample_G(cfg, 100)
        assert len(set(g.tolist())) == 100

    def test_empty_and_invalid(self):
        cfg = const_cfg(20, 5)
        assert sample_G(cfg, 0).size == 0
        with pytest.raises(ValidationError):
            sample_G(cfg, -1)


class TestChainDistribution:
    def test_depth_zero_is_log_chi2(self):
        # G = ln(chi2_n / n) at d = 0
        cfg = const_cfg(100, 0, seed=11)
        s = summarize(sample_G(cfg, 100_000))
        m, v = log_chi2_moments(100)
        assert abs(s.mean - (m - math.log(100))) < 4.0 * s.mean_se
        assert abs(s.variance - v) < 4.0 * s.variance_se

    def test_balanced_moments_small_scale(self):
        cfg = const_cfg(150, 150, scheme="balanced", seed=13)
        s = summarize(sample_G(cfg, 20_000))
        assert abs(s.mean - (-1.131667)) < 4.0 * s.mean_se
        assert abs(s.variance - 2.263333) < 4.0 * s.variance_se

    def test_act_trace_range(self):
        cfg = const_cfg(40, 30, seed=3)
        _, acts = sample_G(cfg, 200, return_acts=True)
        assert np.all(acts >= 0.0) and np.all(acts <= 2.0)

    def test_vanilla_deep_layers_hypoactive(self):
        cfg = const_cfg(50, 50, seed=23)
        _, acts = sample_G(cfg, 4000, return_acts=True)
        deep = acts[:, 25:].mean()
        assert deep < 1.0

    def test_g_value_is_finite_and_consistent(self):
        cfg = const_cfg(30, 12, seed=2)
        sample = forward_chain(cfg, RngStream(2, 0))
        assert math.isfinite(sample.g_value)
        assert sample.act_trace.shape == (12,)
        assert sample.log_norm_ratios.shape == (12,)


class TestForwardFull:
    def test_depth_zero_output_law(self):
        # z_out entry is centered normal with variance ||x||^2 / n_in
        cfg = const_cfg(40, 0, n_in=4, n_out=1, seed=31)
        x = np.array([1.0, 2.0, 0.5, -1.0])
        vals = np.array(
            [forward_full(cfg, x, RngStream(31, i)).z_out[0] for i in range(4000)]
        )
        s = summarize(vals)
        target = float(x @ x) / 4.0
        assert abs(s.mean) < 4.0 * s.mean_se
        assert abs(s.variance - target) < 4.0 * s.variance_se

    def test_zero_input_gives_zero_output(self):
        cfg = const_cfg(20, 6, n_in=3, n_out=5, seed=1)
        trace = forward_full(cfg, np.zeros(3), RngStream(1, 0))
        np.testing.assert_array_equal(trace.z_out, np.zeros(5))

    def test_dimension_mismatch(self):
        cfg = const_cfg(20, 3, n_in=3)
        with pytest.raises(ValidationError):
            forward_full(cfg, np.ones(4), RngStream(0, 0))

    def test_positive_homogeneity(self):
        cfg = const_cfg(25, 10, n_in=3, n_out=4, scheme="balanced", seed=8)
        x = np.array([0.4, -1.2, 2.0])
        t1 = forward_full(cfg, x, RngStream(8, 7))
        t2 = forward_full(cfg, 3.5 * x, RngStream(8, 7))
        np.testing.assert_allclose(t2.z_out, 3.5 * t1.z_out, rtol=1e-12)
        for z1, z2 in zip(t1.z_layers, t2.z_layers):
            np.testing.assert_allclose(z2, 3.5 * z1, rtol=1e-12)

    def test_rotation_invariance_of_output_norm(self):
        cfg = const_cfg(20, 8, n_in=3, n_out=3, seed=45)
        x = np.array([math.sqrt(3.0), 0.0, 0.0])
        rng = np.random.Generator(np.random.Philox(key=99))
        q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        a = sample_lnorm_full(cfg, x, 2000)
        b = sample_lnorm_full(cfg.replace(seed=46), q @ x, 2000)
        _, passes = ks_test_2samp(a, b)
        assert passes[0.01]

    def test_balanced_masks_are_fair(self):
        cfg = const_cfg(50, 20, n_in=2, scheme="balanced", seed=6)
        x = np.array([1.0, 1.0])
        bits = []
        for i in range(200):
            trace = forward_full(cfg, x, RngStream(6, i))
            bits.append(np.concatenate([m.astype(float) for m in trace.activation_masks]))
        freq = np.concatenate(bits).mean()
        count = 200 * 20 * 50
        assert abs(freq - 0.5) < 4.0 * math.sqrt(1.0 / (4.0 * count))

    def test_vanilla_has_no_sign_masks(self):
        cfg = const_cfg(20, 4, n_in=2)
        trace = forward_full(cfg, np.ones(2), RngStream(0, 0))
        assert trace.sign_masks == []
        assert len(trace.activation_masks) == 4


class TestDistributionalReduction:
    def test_full_matches_chain_composition(self):
        # small-scale version of the Eq-level identity checked in acceptance
        cfg = const_cfg(15, 5, n_in=3, n_out=3, seed=51)
        x = np.full(3, 1.0)  # ||x||^2 = n_in
        a = sample_lnorm_full(cfg, x, 3000)
        b = compose_lnorm_from_chain(cfg.replace(seed=52), 1.0, 3000)
        _, passes = ks_test_2samp(a, b)
        assert passes[0.01]

    def test_output_pairs_shape_and_determinism(self):
        cfg = const_cfg(20, 5, n_out=2, scheme="balanced", seed=3)
        p1 = sample_output_pairs(cfg, 50)
        p2 = sample_output_pairs(cfg, 50)
        assert p1.shape == (50, 2)
        np.testing.assert_array_equal(p1, p2)


class TestJacobianColumn:
    def test_linear_network_exact(self):
        cfg = const_cfg(12, 0, n_in=3, n_out=4, scheme="balanced", seed=61)
        x = np.array([0.3, -0.5, 1.1])
        col = jacobian_column(cfg, x, 2, RngStream(61, 0))
        h = 1e-6
        e = np.zeros(3)
        e[1] = h
        up = forward_full(cfg, x + e, RngStream(61, 0)).z_out
        dn = forward_full(cfg, x - e, RngStream(61, 0)).z_out
        np.testing.assert_allclose(col, (up - dn) / (2.0 * h), rtol=1e-8)

    def test_finite_difference_deep(self):
        cfg = const_cfg(30, 10, n_in=4, n_out=4, scheme="balanced", seed=62)
        x = np.array([0.9, -0.2, 0.4, 1.3])
        h = 1e-6
        for probe in range(5):
            stream = RngStream(62, 100 * probe)
            col = jacobian_column(cfg, x, 1, stream)
            e = np.zeros(4)
            e[0] = h
            up = forward_full(cfg, x + e, stream).z_out
            dn = forward_full(cfg, x - e, stream).z_out
            fd = (up - dn) / (2.0 * h)
            np.testing.assert_allclose(col, fd, rtol=1e-4, atol=1e-10)

    def test_requires_balanced(self):
        cfg = const_cfg(10, 2, n_in=2)
        with pytest.raises(ValidationError):
            jacobian_column(cfg, np.ones(2), 1, RngStream(0, 0))

    def test_coordinate_range(self):
        cfg = const_cfg(10, 2, n_in=2, scheme="balanced")
        for bad in (0, 3):
            with pytest.raises(ValidationError):
                jacobian_column(cfg, np.ones(2), bad, RngStream(0, 0))
