"""Closed-form quantities for the infinite-depth-and-width log-Gaussian limit.

Everything here is a deterministic function of the network configuration:
the degree-2 arc-cosine kernel, the variance budget beta and mixing weight c,
interlayer covariance totals, hypoactivation totals, the log-Gaussian
prediction for the output norm correction G, and the downstream output-moment
consequences.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .config import INV_SQRT2, NetConfig, Scheme
from .errors import NumericalError, ValidationError

# Empirical hypoactivation constant for alpha = lambda = 1/sqrt(2),
# estimated by Monte Carlo (see estimate.estimate_C for re-estimation).
REFERENCE_HYPO_C = -0.876

# Relative cutoff for terminating the geometric lag sum.
_LAG_SUM_RTOL = 1e-16

# |cos| may exceed 1 by at most this much before we call it a domain error.
_COS_CLAMP_TOL = 1e-9


class CSource(str, enum.Enum):
    PAPER_DEFAULT = "paper_default"
    ESTIMATED = "estimated"


@dataclass(frozen=True)
class HypoConstant:
    """The hypoactivation constant C with provenance and uncertainty."""

    value: float
    source: CSource = CSource.ESTIMATED
    std_error: float = 0.0

    def __post_init__(self) -> None:
        if self.std_error < 0:
            raise ValidationError("std_error must be non-negative")
        if self.source == CSource.PAPER_DEFAULT and self.value != REFERENCE_HYPO_C:
            raise ValidationError(
                f"the default constant is fixed at {REFERENCE_HYPO_C}"
            )

    @classmethod
    def paper_default(cls) -> "HypoConstant":
        """The published constant; valid only for alpha = lambda = 1/sqrt(2)."""
        return cls(value=REFERENCE_HYPO_C, source=CSource.PAPER_DEFAULT)


@dataclass(frozen=True)
class TheoryPrediction:
    """Predicted law of G plus its constituent quantities."""

    mean_G: float
    var_G: float
    beta: float
    c: float  # NaN for non-constant coefficient configs
    h_total: float
    i_total: float
    prefactor_log: float

    def __post_init__(self) -> None:
        if self.var_G < 0:
            raise NumericalError(f"negative predicted variance: {self.var_G}")


def j2_bar(theta):
    """Degree-2 arc-cosine kernel 3 sin(t)cos(t)/pi + (1 - t/pi)(1 + 2 cos^2 t).

    Accepts a scalar or array in [0, pi]; monotone decreasing from 3 to 0.
    """
    t = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(t)):
        raise ValidationError("theta must be finite")
    if np.any(t < 0.0) or np.any(t > np.pi):
        raise ValidationError("theta must lie in [0, pi]")
    s, c = np.sin(t), np.cos(t)
    out = 3.0 * s * c / np.pi + (1.0 - t / np.pi) * (1.0 + 2.0 * c * c)
    return float(out) if np.isscalar(theta) or out.ndim == 0 else out


def _cos_factors(config: NetConfig) -> np.ndarray:
    a = np.asarray(config.alphas)
    l = np.asarray(config.lambdas)
    return a / np.sqrt(a * a + l * l)


def lag_angle(config: NetConfig, ell: int, ell_prime: int) -> float:
    """Angle between the direction vectors of layers ``ell`` < ``ell_prime``.

    The cosine is the product over the intervening layers of
    alpha_i / sqrt(alpha_i^2 + lambda_i^2); for constant coefficients this is
    arccos(alpha^k / (alpha^2 + lambda^2)^(k/2)) with k = ell_prime - ell.
    """
    if not (1 <= ell < ell_prime <= config.d):
        raise IndexError(f"need 1 <= ell < ell_prime <= d, got ({ell}, {ell_prime})")
    cosine = float(np.prod(_cos_factors(config)[ell - 1 : ell_prime - 1]))
    if abs(cosine) > 1.0 + _COS_CLAMP_TOL:
        raise NumericalError(f"cosine product {cosine} outside [-1, 1]")
    return float(np.arccos(np.clip(cosine, -1.0, 1.0)))


def beta_and_c(config: NetConfig):
    """Variance budget beta and mixing weight(s) c.

    Returns ``(beta, c)`` where ``c`` is a scalar for constant-coefficient
    configs, a per-layer array otherwise, and ``None`` when d = 0.
    """
    a = np.asarray(config.alphas)
    l = np.asarray(config.lambdas)
    s2 = a * a + l * l
    beta = 2.0 / config.n + float(np.sum((5.0 * l**4 + 4.0 * a * a * l * l) / s2**2)) / config.n
    if config.d == 0:
        return beta, None
    c = l * l / s2
    if config.is_constant:
        return beta, float(c[0])
    return beta, c


def _lag_diff(theta):
    return j2_bar(theta) - j2_bar(np.pi - theta)


def interlayer_total(config: NetConfig) -> float:
    """Total interlayer covariance: sum over ordered layer pairs of
    (J2bar(theta_k) - J2bar(pi - theta_k)) / n.

    Constant-coefficient configs are summed by lag with pair weight 2(d - k)
    and early termination once terms are negligible; the O(d^2) pairwise path
    is used for layer-dependent coefficients.
    """
    d, n = config.d, config.n
    if d < 2:
        return 0.0
    if config.is_constant:
        cos1 = float(_cos_factors(config)[0])
        total = 0.0
        cos_k = 1.0
        for k in range(1, d):
            cos_k *= cos1
            theta = math.acos(max(-1.0, min(1.0, cos_k)))
            term = 2.0 * (d - k) * _lag_diff(theta) / n
            total += term
            if abs(term) < _LAG_SUM_RTOL * max(abs(total), 1.0):
                break
        return total
    total = 0.0
    for ell in range(1, d):
        for ellp in range(ell + 1, d + 1):
            total += 2.0 * _lag_diff(lag_angle(config, ell, ellp)) / n
    return total


def interlayer_weighted(config: NetConfig) -> float:
    """Interlayer variance contribution with per-layer weights c_l^2.

    Equals c^2 * interlayer_total(config) for constant coefficients.
    """
    d, n = config.d, config.n
    if d < 2:
        return 0.0
    _, c = beta_and_c(config)
    if config.is_constant:
        return c * c * interlayer_total(config)
    total = 0.0
    for ell in range(1, d + 1):
        for ellp in range(1, d + 1):
            if ellp == ell:
                continue
            lo, hi = min(ell, ellp), max(ell, ellp)
            total += c[ell - 1] ** 2 * _lag_diff(lag_angle(config, lo, hi)) / n
    return total


def _is_fully_connected(config: NetConfig) -> bool:
    return all(a == 0.0 for a in config.alphas)


def _check_c_applicable(config: NetConfig, C: HypoConstant) -> None:
    if C.source == CSource.PAPER_DEFAULT:
        if not config.is_constant or config.d == 0:
            raise ValidationError("the default constant requires constant coefficients")
        if not (
            math.isclose(config.alpha, INV_SQRT2, rel_tol=1e-6)
            and math.isclose(config.lam, INV_SQRT2, rel_tol=1e-6)
        ):
            raise ValidationError(
                "the default constant is only valid for alpha = lambda = 1/sqrt(2)"
            )


def hypoactivation_total(config: NetConfig, C: HypoConstant) -> float:
    """Total hypoactivation C * d / n; identically 0 for Balanced networks
    and for fully connected networks (all alphas zero)."""
    if config.scheme == Scheme.BALANCED:
        return 0.0
    if config.d == 0 or _is_fully_connected(config):
        return 0.0
    if not config.is_constant:
        raise ValidationError(
            "layer-dependent hypoactivation needs per-layer estimates; "
            "pass h_layers to predict_G instead"
        )
    _check_c_applicable(config, C)
    return C.value * config.d / config.n


def predict_G(
    config: NetConfig,
    C: HypoConstant | None = None,
    h_layers=None,
) -> TheoryPrediction:
    """Predicted mean and variance of the log-norm correction G.

    Vanilla: mean = -beta/2 + 2 c h_total, var = beta + c^2 I_total.
    Balanced: mean = -beta/2, var = beta.
    Layer-dependent coefficients use per-layer weights; Vanilla layer-dependent
    hypoactivation requires empirical ``h_layers`` (defaults to zero).
    """
    beta, c = beta_and_c(config)
    prefactor_log = config.prefactor_log
    c_scalar = c if isinstance(c, float) else math.nan
    if c is None:
        c_scalar = math.nan

    if config.scheme == Scheme.BALANCED or config.d == 0:
        return TheoryPrediction(
            mean_G=-beta / 2.0,
            var_G=beta,
            beta=beta,
            c=c_scalar,
            h_total=0.0,
            i_total=0.0,
            prefactor_log=prefactor_log,
        )

    i_total = interlayer_total(config)
    if config.is_constant:
        if _is_fully_connected(config):
            h_total = 0.0
            mean_term = 0.0
        else:
            if C is None:
                raise ValidationError("Vanilla prediction with skip connections needs a HypoConstant")
            h_total = hypoactivation_total(config, C)
            mean_term = 2.0 * c * h_total
        var_G = beta + c * c * i_total
    else:
        h = np.zeros(config.d) if h_layers is None else np.asarray(h_layers, dtype=float)
        if h.shape != (config.d,):
            raise ValidationError(f"h_layers must have length d={config.d}")
        h_total = float(np.sum(h))
        _, c_vec = beta_and_c(config)
        mean_term = float(np.sum(2.0 * c_vec * h))
        var_G = beta + interlayer_weighted(config)
    return TheoryPrediction(
        mean_G=-beta / 2.0 + mean_term,
        var_G=var_G,
        beta=beta,
        c=c_scalar,
        h_total=h_total,
        i_total=i_total,
        prefactor_log=prefactor_log,
    )


def corr_sq_from_var(var_g: float) -> float:
    """Correlation of two squared output coordinates, (e^s - 1)/(3 e^s - 1)."""
    if var_g < 0:
        raise ValidationError("variance must be non-negative")
    if var_g > 700.0:
        return 1.0 / 3.0
    return math.expm1(var_g) / (3.0 * math.exp(var_g) - 1.0)


@dataclass(frozen=True)
class OutputStats:
    mean_sq: float
    var_sq: float
    corr_sq: float


def predict_output_stats(
    config: NetConfig,
    pred: TheoryPrediction,
    log_bound: float = 600.0,
) -> OutputStats:
    """Moments of a squared output coordinate at ||x|| = sqrt(n_in).

    All factors are combined in log-space; raises when the depth prefactor
    alone would overflow the requested bound.
    """
    p = pred.prefactor_log
    if abs(p) > log_bound:
        raise NumericalError(
            f"|sum ln(alpha^2+lambda^2)| = {abs(p):.3g} exceeds bound {log_bound}"
        )
    c = 0.0 if math.isnan(pred.c) else pred.c
    if config.scheme == Scheme.BALANCED:
        log_mean = p
        log_var = 2.0 * p + math.log(3.0 * math.exp(pred.beta) - 1.0)
    else:
        log_mean = p + 2.0 * c * pred.h_total + 0.5 * c * c * pred.i_total
        log_var = (
            2.0 * p
            + math.log(3.0 * math.exp(pred.beta + c * c * pred.i_total) - 1.0)
            + 4.0 * c * pred.h_total
            + c * c * pred.i_total
        )
    return OutputStats(
        mean_sq=math.exp(log_mean),
        var_sq=math.exp(log_var),
        corr_sq=corr_sq_from_var(pred.var_G),
    )


def sphere_oracles(n: int, p: int = 1):
    """Exact moments for a uniform unit-sphere direction u in n dimensions.

    Returns (mean of 2||relu(u)||^2, its variance 3/(n+2), and the 2p-th
    marginal moment E[(sqrt(n) u_i)^(2p)]).
    """
    if n < 2:
        raise ValidationError("n must be >= 2")
    if p < 1:
        raise ValidationError("p must be >= 1")
    mean_act = 1.0
    var_act = 3.0 / (n + 2.0)
    # E[Z^(2p)] = (2p-1)!!; log-space beyond p = 10 for overflow safety
    if p <= 10:
        dfac = 1.0
        for j in range(1, 2 * p, 2):
            dfac *= j
        log_dfac = math.log(dfac)
    else:
        log_dfac = math.lgamma(2 * p + 1) - p * math.log(2.0) - math.lgamma(p + 1)
    log_corr = sum(math.log1p(2.0 * j / n) for j in range(1, p))
    return mean_act, var_act, math.exp(log_dfac - log_corr)
