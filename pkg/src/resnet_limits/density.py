"""Predicted and empirical densities of ln ||z_out||^2.

The depth-and-width prediction is the convolution of a log-chi-squared
density with the Gaussian law of G; the infinite-width prediction is the
shifted log-chi-squared closed form. All evaluation happens in log-space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, polygamma

from .config import NetConfig
from .errors import GridTooNarrowError, InsufficientDataError, ValidationError
from .theory import TheoryPrediction

_MASS_TOL = 1e-3
DEFAULT_STEP = 0.01


@dataclass(frozen=True)
class GridSpec:
    x_min: float
    x_max: float
    step: float = DEFAULT_STEP

    def __post_init__(self) -> None:
        if not (self.step > 0 and self.x_max > self.x_min):
            raise ValidationError("grid needs x_max > x_min and step > 0")

    @property
    def xs(self) -> np.ndarray:
        count = int(round((self.x_max - self.x_min) / self.step)) + 1
        return self.x_min + self.step * np.arange(count)


@dataclass(frozen=True)
class DensityGrid:
    """Tabulated probability density on a uniform abscissa grid."""

    x_min: float
    x_max: float
    step: float
    values: np.ndarray

    @property
    def xs(self) -> np.ndarray:
        return self.x_min + self.step * np.arange(len(self.values))

    def integral(self) -> float:
        return float(np.trapezoid(self.values, dx=self.step))

    def mean(self) -> float:
        return float(np.trapezoid(self.values * self.xs, dx=self.step))

    def var(self) -> float:
        m = self.mean()
        return float(np.trapezoid(self.values * (self.xs - m) ** 2, dx=self.step))

    def interpolate(self, x) -> np.ndarray:
        return np.interp(x, self.xs, self.values, left=0.0, right=0.0)


def _finalize(spec: GridSpec, values: np.ndarray, what: str) -> DensityGrid:
    if np.any(~np.isfinite(values)) or np.any(values < 0.0):
        raise GridTooNarrowError(f"{what}: non-finite or negative density values")
    mass = float(np.trapezoid(values, dx=spec.step))
    if mass < 1.0 - _MASS_TOL:
        raise GridTooNarrowError(f"{what}: grid captures only {mass:.6f} of the mass")
    return DensityGrid(spec.x_min, spec.x_max, spec.step, values / mass)


def log_chi2_moments(k: int) -> tuple[float, float]:
    """Mean and variance of ln of a chi-squared variable with k dof."""
    from scipy.special import digamma

    return float(digamma(k / 2.0) + math.log(2.0)), float(polygamma(1, k / 2.0))


def default_grid_for(mean: float, var: float, step: float = DEFAULT_STEP, width: float = 10.0) -> GridSpec:
    sd = math.sqrt(var)
    return GridSpec(mean - width * sd, mean + width * sd, step)


def log_chi2_density(k: int, grid: GridSpec | None = None) -> DensityGrid:
    """Density of ln of a chi-squared variable with ``k`` degrees of freedom."""
    if k < 1:
        raise ValidationError("k must be >= 1")
    if grid is None:
        grid = default_grid_for(*log_chi2_moments(k))
    x = grid.xs
    log_f = 0.5 * k * x - 0.5 * np.exp(x) - 0.5 * k * math.log(2.0) - gammaln(k / 2.0)
    return _finalize(grid, np.exp(log_f), f"log-chi2({k})")


def infinite_width_logout_density(
    n_in: int, n_out: int, grid: GridSpec | None = None
) -> DensityGrid:
    """Infinite-width prediction: the log-chi2(n_out) density shifted by -ln n_in."""
    if n_in < 1 or n_out < 1:
        raise ValidationError("n_in and n_out must be >= 1")
    if grid is None:
        m, v = log_chi2_moments(n_out)
        grid = default_grid_for(m - math.log(n_in), v)
    x = grid.xs
    log_f = (
        0.5 * n_out * x
        - 0.5 * n_in * np.exp(x)
        + 0.5 * n_out * math.log(n_in)
        - 0.5 * n_out * math.log(2.0)
        - gammaln(n_out / 2.0)
    )
    return _finalize(grid, np.exp(log_f), "infinite-width log-output")


def predicted_logout_density(
    config: NetConfig,
    pred: TheoryPrediction,
    norm_x_sq_over_nin: float = 1.0,
    grid: GridSpec | None = None,
) -> DensityGrid:
    """Depth-and-width prediction for the density of ln ||z_out||^2.

    Convolves the log-chi2(n_out) density with the Gaussian law of
    G + ln(||x||^2/n_in) + sum ln(alpha^2+lambda^2), by direct summation.
    """
    if not (pred.var_G > 0):
        raise ValidationError("prediction must have var_G > 0")
    if not (norm_x_sq_over_nin > 0):
        raise ValidationError("norm_x_sq_over_nin must be > 0")
    shift = pred.mean_G + math.log(norm_x_sq_over_nin) + pred.prefactor_log
    sigma = math.sqrt(pred.var_G)
    chi_mean, chi_var = log_chi2_moments(config.n_out)
    if grid is None:
        total_var = pred.var_G + chi_var
        grid = default_grid_for(shift + chi_mean, total_var)
    chi = log_chi2_density(config.n_out)
    # direct-summation convolution: out(x) = h * sum_j chi(y_j) N(x - y_j)
    diff = grid.xs[:, None] - chi.xs[None, :] - shift
    kernel = np.exp(-0.5 * (diff / sigma) ** 2) / (sigma * math.sqrt(2.0 * math.pi))
    values = chi.step * (kernel @ chi.values)
    return _finalize(grid, values, "depth-and-width log-output")


def histogram(samples, grid: GridSpec) -> DensityGrid:
    """Normalized bin counts on the grid (bins centered on grid points)."""
    x = np.asarray(samples, dtype=float)
    if x.size < 100:
        raise InsufficientDataError("histogram needs at least 100 samples")
    centers = grid.xs
    edges = np.concatenate([[centers[0] - grid.step / 2], centers + grid.step / 2])
    counts, _ = np.histogram(x, bins=edges)
    values = counts / (x.size * grid.step)
    return DensityGrid(grid.x_min, grid.x_max, grid.step, values)


def grid_to_csv(grid: DensityGrid, path, header_lines=()) -> None:
    """Two-column CSV (x, density), optionally with '#' header lines."""
    with open(path, "w") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("x,density\n")
        for x, v in zip(grid.xs, grid.values):
            fh.write(f"{x:.17g},{v:.17g}\n")


def grid_from_csv(path) -> DensityGrid:
    xs, vals = [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("x,"):
                continue
            a, b = line.split(",")
            xs.append(float(a))
            vals.append(float(b))
    xs = np.asarray(xs)
    if len(xs) < 2:
        raise ValidationError("grid CSV needs at least two rows")
    step = float(xs[1] - xs[0])
    return DensityGrid(float(xs[0]), float(xs[-1]), step, np.asarray(vals))
