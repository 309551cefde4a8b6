"""Empirical statistics over simulation streams.

Moment summaries with mergeable accumulators, per-layer hypoactivation and
lag covariances, the hypoactivation constant estimate, output-squared
correlation, and Kolmogorov-Smirnov goodness of fit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import NetConfig, Scheme
from .errors import InsufficientDataError, ValidationError
from .simulate import sample_G, sample_output_pairs
from .theory import CSource, HypoConstant, j2_bar, lag_angle, sphere_oracles

Z95 = 1.959963984540054

# Asymptotic KS critical coefficients c(alpha): D_crit = c(alpha) / sqrt(N)
KS_COEFF = {0.05: 1.3580986393225505, 0.01: 1.6276236115189502}


@dataclass
class MomentSummary:
    """Streaming count/mean and central-moment sums (one-pass, mergeable)."""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0
    m3: float = 0.0
    m4: float = 0.0

    @classmethod
    def from_samples(cls, samples) -> "MomentSummary":
        x = np.asarray(samples, dtype=float)
        if x.size == 0:
            return cls()
        mean = float(x.mean())
        dev = x - mean
        return cls(
            count=int(x.size),
            mean=mean,
            m2=float(np.sum(dev**2)),
            m3=float(np.sum(dev**3)),
            m4=float(np.sum(dev**4)),
        )

    def merge(self, other: "MomentSummary") -> "MomentSummary":
        """Combine two summaries; equals the summary of the concatenation."""
        na, nb = self.count, other.count
        if na == 0:
            return MomentSummary(**vars(other))
        if nb == 0:
            return MomentSummary(**vars(self))
        n = na + nb
        delta = other.mean - self.mean
        mean = self.mean + delta * nb / n
        m2 = self.m2 + other.m2 + delta**2 * na * nb / n
        m3 = (
            self.m3
            + other.m3
            + delta**3 * na * nb * (na - nb) / n**2
            + 3.0 * delta * (na * other.m2 - nb * self.m2) / n
        )
        m4 = (
            self.m4
            + other.m4
            + delta**4 * na * nb * (na * na - na * nb + nb * nb) / n**3
            + 6.0 * delta**2 * (na * na * other.m2 + nb * nb * self.m2) / n**2
            + 4.0 * delta * (na * other.m3 - nb * self.m3) / n
        )
        return MomentSummary(count=n, mean=mean, m2=m2, m3=m3, m4=m4)

    @property
    def variance(self) -> float:
        if self.count < 2:
            raise InsufficientDataError("variance needs at least 2 samples")
        return self.m2 / (self.count - 1)

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    @property
    def mean_se(self) -> float:
        return math.sqrt(self.variance / self.count)

    @property
    def ci_half_width(self) -> float:
        """95% normal-approximation half-width for the mean."""
        return Z95 * self.mean_se

    @property
    def variance_se(self) -> float:
        """Delta-method standard error of the sample variance."""
        n = self.count
        if n < 2:
            raise InsufficientDataError("variance_se needs at least 2 samples")
        var = self.variance
        mu4 = self.m4 / n
        return math.sqrt(max(0.0, mu4 - (n - 3) / (n - 1) * var * var) / n)

    @property
    def variance_ci_half_width(self) -> float:
        return Z95 * self.variance_se


def summarize(samples, chunk: int = 1 << 20) -> MomentSummary:
    """One-pass, numerically stable accumulation over a stream of reals."""
    acc = MomentSummary()
    buf: list = []
    size = 0
    if isinstance(samples, np.ndarray):
        acc = MomentSummary.from_samples(samples)
    else:
        for value in samples:
            buf.append(value)
            size += 1
            if size >= chunk:
                acc = acc.merge(MomentSummary.from_samples(buf))
                buf, size = [], 0
        if buf:
            acc = acc.merge(MomentSummary.from_samples(buf))
    if acc.count < 2:
        raise InsufficientDataError("summarize needs at least 2 samples")
    return acc


def ks_test(samples, cdf) -> tuple[float, dict]:
    """One-sample Kolmogorov-Smirnov test against a reference cdf.

    ``samples`` must be sorted; returns the statistic and pass/fail at the
    asymptotic 5% and 1% critical values.
    """
    x = np.asarray(samples, dtype=float)
    if x.size < 8:
        raise InsufficientDataError("ks_test needs at least 8 samples")
    if np.any(np.diff(x) < 0):
        raise ValidationError("ks_test requires sorted input")
    n = x.size
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    d = max(np.max(i / n - f), np.max(f - (i - 1) / n))
    passes = {level: d < coeff / math.sqrt(n) for level, coeff in KS_COEFF.items()}
    return float(d), passes


def ks_test_2samp(a, b) -> tuple[float, dict]:
    """Two-sample KS statistic with asymptotic critical values."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size < 8 or b.size < 8:
        raise InsufficientDataError("ks_test_2samp needs at least 8 samples per side")
    pooled = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, pooled, side="right") / a.size
    cdf_b = np.searchsorted(b, pooled, side="right") / b.size
    d = float(np.max(np.abs(cdf_a - cdf_b)))
    eff = math.sqrt((a.size + b.size) / (a.size * b.size))
    passes = {level: d < coeff * eff for level, coeff in KS_COEFF.items()}
    return d, passes


@dataclass
class LayerStats:
    """Per-layer activation statistics with sphere/theory references."""

    n: int
    d: int
    n_samples: int
    per_layer_mean_act: np.ndarray
    per_layer_var_act: np.ndarray
    per_layer_mean_se: np.ndarray
    lag_cov: dict = field(default_factory=dict)
    lag_cov_se: dict = field(default_factory=dict)
    lag_cov_theory: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)
    pooled_mean_act: float = math.nan
    pooled_mean_se: float = math.nan
    pooled_var_act: float = math.nan
    pooled_var_se: float = math.nan
    sphere_mean: float = 1.0
    sphere_var: float = math.nan
    burn_in: int = 0

    @property
    def h_layers(self) -> np.ndarray:
        """Per-layer hypoactivation estimates (mean_act - 1) / 2."""
        return (self.per_layer_mean_act - 1.0) / 2.0


def _pooled_lag_cov(acts: np.ndarray, k: int, burn_in: int):
    """Pooled lag-k covariance of activation norms over deep layers.

    Standard error comes from the spread of per-sample pooled products.
    """
    d = acts.shape[1]
    cols = np.arange(burn_in, d - k)
    if cols.size == 0:
        return math.nan, math.nan, 0
    a = acts[:, cols]
    b = acts[:, cols + k]
    prod = (a - a.mean(axis=0)) * (b - b.mean(axis=0))
    per_sample = prod.mean(axis=1)
    n_samp = acts.shape[0]
    cov = float(per_sample.mean()) * n_samp / (n_samp - 1)
    se = float(per_sample.std(ddof=1) / math.sqrt(n_samp))
    return cov, se, int(cols.size * n_samp)


def layer_stats_from_acts(
    config: NetConfig,
    acts: np.ndarray,
    lags=(1, 2),
    burn_in_fraction: float = 0.2,
) -> LayerStats:
    n_samples, d = acts.shape
    burn_in = int(d * burn_in_fraction)
    mean_act = acts.mean(axis=0)
    var_act = acts.var(axis=0, ddof=1)
    mean_se = acts.std(axis=0, ddof=1) / math.sqrt(n_samples)
    _, sphere_var, _ = sphere_oracles(config.n, 1)

    deep = acts[:, burn_in:]
    per_sample_mean = deep.mean(axis=1)
    pooled_mean = float(per_sample_mean.mean())
    pooled_mean_se = float(per_sample_mean.std(ddof=1) / math.sqrt(n_samples))
    # variance pooled over deep layers: average of per-layer variances
    layer_vars = deep.var(axis=0, ddof=1)
    pooled_var = float(layer_vars.mean())
    sq_dev = (deep - deep.mean(axis=0)) ** 2
    per_sample_sq = sq_dev.mean(axis=1)
    pooled_var_se = float(per_sample_sq.std(ddof=1) / math.sqrt(n_samples))

    stats = LayerStats(
        n=config.n,
        d=d,
        n_samples=n_samples,
        per_layer_mean_act=mean_act,
        per_layer_var_act=var_act,
        per_layer_mean_se=mean_se,
        pooled_mean_act=pooled_mean,
        pooled_mean_se=pooled_mean_se,
        pooled_var_act=pooled_var,
        pooled_var_se=pooled_var_se,
        sphere_var=sphere_var,
        burn_in=burn_in,
    )
    for k in lags:
        cov, se, count = _pooled_lag_cov(acts, k, burn_in)
        stats.lag_cov[k] = cov
        stats.lag_cov_se[k] = se
        stats.counts[k] = count
        if config.is_constant and config.d >= k + 1:
            theta = lag_angle(config, 1, 1 + k)
            stats.lag_cov_theory[k] = (j2_bar(theta) - j2_bar(math.pi - theta)) / config.n
        else:
            stats.lag_cov_theory[k] = math.nan
    return stats


def conjecture_stats(
    config: NetConfig,
    n_samples: int,
    lags=(1, 2),
    burn_in_fraction: float = 0.2,
    workers: int = 1,
) -> LayerStats:
    """Per-layer and lagged activation statistics from the norm-chain simulator,
    with the uniform-sphere and kernel-covariance reference values attached."""
    if n_samples < 1000:
        raise InsufficientDataError("conjecture_stats needs at least 1000 samples")
    _, acts = sample_G(config, n_samples, workers=workers, return_acts=True)
    return layer_stats_from_acts(config, acts, lags=lags, burn_in_fraction=burn_in_fraction)


def estimate_C(
    alpha: float,
    lam: float,
    n: int,
    d: int,
    n_samples: int,
    seed: int = 0,
    scheme: Scheme | str = Scheme.VANILLA,
    method: str = "profile_sum",
    burn_in_fraction: float = 0.2,
    workers: int = 1,
) -> HypoConstant:
    """Estimate the hypoactivation constant C from the realized layer profile.

    ``profile_sum`` converts the summed per-layer hypoactivation into
    C = (n/d) * sum_l h_l; ``equilibrium`` instead scales the deep-layer
    (post burn-in) pooled hypoactivation by n.
    """
    if Scheme(scheme) == Scheme.BALANCED:
        raise ValidationError("the constant is identically zero for Balanced networks")
    if method not in ("profile_sum", "equilibrium"):
        raise ValidationError(f"unknown method {method!r}")
    config = NetConfig.constant(n=n, d=d, alpha=alpha, lam=lam, scheme=Scheme.VANILLA, seed=seed)
    _, acts = sample_G(config, n_samples, workers=workers, return_acts=True)
    h_per_sample = (acts - 1.0) / 2.0  # per-sample realized hypoactivation
    if method == "profile_sum":
        s = h_per_sample.sum(axis=1) * (n / d)
    else:
        burn_in = int(d * burn_in_fraction)
        s = h_per_sample[:, burn_in:].mean(axis=1) * n
    value = float(s.mean())
    se = float(s.std(ddof=1) / math.sqrt(len(s)))
    return HypoConstant(value=value, source=CSource.ESTIMATED, std_error=se)


@dataclass(frozen=True)
class CorrEstimate:
    value: float
    std_error: float
    n_samples: int


def correlation_with_se(x, y) -> CorrEstimate:
    """Pearson correlation with an influence-function standard error."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size or x.size < 8:
        raise InsufficientDataError("need at least 8 paired samples")
    xs = (x - x.mean()) / x.std()
    ys = (y - y.mean()) / y.std()
    r = float(np.mean(xs * ys))
    psi = xs * ys - 0.5 * r * (xs * xs + ys * ys)
    se = float(psi.std(ddof=1) / math.sqrt(x.size))
    return CorrEstimate(value=r, std_error=se, n_samples=int(x.size))


def output_sq_correlation(config: NetConfig, n_samples: int, workers: int = 1) -> CorrEstimate:
    """Empirical correlation of two squared output coordinates.

    Uses the exact output factorization: one draw of G per network plus two
    independent standard normals for the two coordinates.
    """
    if config.n_out < 2:
        raise ValidationError("output correlation needs n_out >= 2")
    pairs = sample_output_pairs(config, n_samples)
    return correlation_with_se(pairs[:, 0] ** 2, pairs[:, 1] ** 2)
