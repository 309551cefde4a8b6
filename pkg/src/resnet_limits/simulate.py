"""Monte Carlo simulators for ReLU ResNets at initialization.

Two routes produce the log-norm correction G:

* ``forward_full`` runs the literal architecture, materializing one weight
  matrix at a time.
* ``forward_chain`` runs the O(n)-per-layer norm-chain reduction (telescoping
  product of norm ratios with the Gaussian matrix identity W x =_d ||x|| g)
  and is the numerically stable primary path.

Randomness is counter-based: sample ``i`` is a pure function of
``(seed, i)``, so results do not depend on worker count or batch size.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import NetConfig, Scheme
from .errors import DegenerateSampleError, ValidationError

_NORM_UNDERFLOW = 1e-300


@dataclass(frozen=True)
class RngStream:
    """One independent random stream, keyed by (seed, stream_id)."""

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        key = (int(self.seed) << 64) | int(self.stream_id)
        return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class ChainSample:
    """One norm-chain draw: G plus the per-layer activation-norm trace."""

    g_value: float
    act_trace: np.ndarray  # 2 ||relu(z_hat^l)||^2 for l = 0..d-1
    log_norm_ratios: np.ndarray  # ln X_l for l = 0..d-1


@dataclass(frozen=True)
class ForwardTrace:
    """Full forward pass: pre-activations, output, and frozen masks."""

    z_layers: list  # d+1 vectors of width n
    z_out: np.ndarray
    sign_masks: list  # d sign vectors (Balanced), else empty
    activation_masks: list  # d boolean vectors: nonlinearity passed its input


def _chain_noise_len(config: NetConfig) -> int:
    return config.n * (1 + config.d)


def forward_chain(config: NetConfig, rng: RngStream) -> ChainSample:
    """Draw one sample of G via the norm-chain recursion."""
    g_vals, acts, ratios = _chain_batch(config, [rng])
    return ChainSample(float(g_vals[0]), acts[0], ratios[0])


def _chain_batch(config: NetConfig, streams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized norm chain over a batch of per-sample streams."""
    n, d = config.n, config.d
    b = len(streams)
    balanced = config.scheme == Scheme.BALANCED
    flat = np.empty((b, _chain_noise_len(config)))
    if balanced:
        sgn = np.empty((b, d, n), dtype=np.int8)
    # per-sample draw order: all Gaussian noise, then (Balanced) sign bits
    for j, stream in enumerate(streams):
        gen = stream.generator()
        flat[j] = gen.standard_normal(flat.shape[1])
        if balanced:
            sgn[j] = 2 * gen.integers(0, 2, size=(d, n), dtype=np.int8) - 1
    z0 = flat[:, :n]
    g = flat[:, n : n * (d + 1)].reshape(b, d, n)

    sq0 = np.einsum("bi,bi->b", z0, z0)
    if np.any(sq0 < _NORM_UNDERFLOW):
        raise DegenerateSampleError("initial norm underflow")
    zhat = z0 / np.sqrt(sq0)[:, None]
    acts = np.empty((b, d))
    ratios = np.empty((b, d))
    scale = math.sqrt(2.0 / n)
    for ell in range(d):
        pre = sgn[:, ell, :].astype(float) * zhat if balanced else zhat
        pre = np.maximum(pre, 0.0)
        phi_sq = np.einsum("bi,bi->b", pre, pre)
        acts[:, ell] = 2.0 * phi_sq
        v = config.alphas[ell] * zhat + (
            config.lambdas[ell] * scale * np.sqrt(phi_sq)
        )[:, None] * g[:, ell, :]
        x_ell = np.einsum("bi,bi->b", v, v)
        if np.any(x_ell < _NORM_UNDERFLOW):
            raise DegenerateSampleError(f"norm underflow at layer {ell}")
        ratios[:, ell] = np.log(x_ell)
        zhat = v / np.sqrt(x_ell)[:, None]
    g_vals = np.log(sq0 / n) + ratios.sum(axis=1) - config.prefactor_log
    return g_vals, acts, ratios


def _default_chunk(config: NetConfig) -> int:
    return max(1, int(32_000_000 // max(1, _chain_noise_len(config))))


def _chain_range(config: NetConfig, start: int, stop: int, want_acts: bool):
    chunk = _default_chunk(config)
    g_parts, act_parts = [], []
    for lo in range(start, stop, chunk):
        hi = min(lo + chunk, stop)
        streams = [RngStream(config.seed, i) for i in range(lo, hi)]
        g_vals, acts, _ = _chain_batch(config, streams)
        g_parts.append(g_vals)
        if want_acts:
            act_parts.append(acts)
    g_all = np.concatenate(g_parts) if g_parts else np.empty(0)
    acts_all = np.concatenate(act_parts) if act_parts else None
    return g_all, acts_all


def sample_G(
    config: NetConfig,
    n_samples: int,
    workers: int = 1,
    start_index: int = 0,
    return_acts: bool = False,
):
    """Draw ``n_samples`` iid values of G.

    Sample ``i`` uses ``RngStream(config.seed, start_index + i)``; the result
    is identical for any worker count.
    """
    if n_samples < 0:
        raise ValidationError("n_samples must be >= 0")
    if n_samples == 0:
        empty = np.empty(0)
        return (empty, np.empty((0, config.d))) if return_acts else empty
    stop = start_index + n_samples
    if workers <= 1 or n_samples < 4 * workers:
        g_all, acts = _chain_range(config, start_index, stop, return_acts)
    else:
        bounds = np.linspace(start_index, stop, workers + 1).astype(int)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [
                pool.submit(_chain_range, config, int(lo), int(hi), return_acts)
                for lo, hi in zip(bounds[:-1], bounds[1:])
                if hi > lo
            ]
            parts = [f.result() for f in futs]
        g_all = np.concatenate([p[0] for p in parts])
        acts = np.concatenate([p[1] for p in parts]) if return_acts else None
    return (g_all, acts) if return_acts else g_all


def _forward_pass(config: NetConfig, x: np.ndarray, rng: RngStream, tangent=None):
    """Forward pass, optionally propagating a frozen-mask tangent vector.

    Draw order per sample: W0, then per hidden layer (sign noise for Balanced,
    then W), then W_out. Only one weight matrix is held in memory at a time.
    """
    n, d = config.n, config.d
    x = np.asarray(x, dtype=float)
    if x.shape != (config.n_in,):
        raise ValidationError(f"x must have length n_in={config.n_in}")
    gen = rng.generator()
    balanced = config.scheme == Scheme.BALANCED

    w0 = gen.standard_normal((n, config.n_in))
    z = w0 @ x / math.sqrt(config.n_in)
    u = w0 @ tangent / math.sqrt(config.n_in) if tangent is not None else None

    z_layers = [z]
    sign_masks: list = []
    activation_masks: list = []
    scale = math.sqrt(2.0 / n)
    for ell in range(d):
        if balanced:
            s = 2.0 * gen.integers(0, 2, size=n).astype(float) - 1.0
            sign_masks.append(s)
        else:
            s = 1.0
        pre = s * z
        if tangent is not None and np.any(pre == 0.0):
            raise DegenerateSampleError(f"exact-zero pre-activation at layer {ell}")
        mask = pre > 0.0
        activation_masks.append(mask)
        w = gen.standard_normal((n, n))
        coef = config.lambdas[ell] * scale
        z = config.alphas[ell] * z + coef * (w @ np.where(mask, pre, 0.0))
        if u is not None:
            u = config.alphas[ell] * u + coef * (w @ np.where(mask, s * u, 0.0))
        sq = float(z @ z)
        if sq < _NORM_UNDERFLOW and np.any(x != 0.0):
            raise DegenerateSampleError(f"norm underflow at layer {ell}")
        z_layers.append(z)
    w_out = gen.standard_normal((config.n_out, n))
    z_out = w_out @ z / math.sqrt(n)
    u_out = w_out @ u / math.sqrt(n) if u is not None else None
    return ForwardTrace(z_layers, z_out, sign_masks, activation_masks), u_out


def forward_full(config: NetConfig, x: np.ndarray, rng: RngStream) -> ForwardTrace:
    """Simulate the literal architecture with fresh iid weights."""
    trace, _ = _forward_pass(config, x, rng)
    return trace


def jacobian_column(
    config: NetConfig, x: np.ndarray, i: int, rng: RngStream, max_retries: int = 8
):
    """Exact partial derivative d z_out / d x_i for a Balanced network.

    The activation masks realized at ``x`` are frozen and the basis vector is
    propagated through the resulting piecewise-linear map. Exact-zero
    pre-activations (a measure-zero event) trigger a redraw from the next
    stream id; the number of rejected draws is tracked in ``.rejections``.
    """
    if config.scheme != Scheme.BALANCED:
        raise ValidationError("jacobian_column requires the Balanced scheme")
    if not (1 <= i <= config.n_in):
        raise ValidationError(f"coordinate index must be in [1, n_in], got {i}")
    e_i = np.zeros(config.n_in)
    e_i[i - 1] = 1.0
    rejections = 0
    stream = rng
    while True:
        try:
            _, col = _forward_pass(config, x, stream, tangent=e_i)
            jacobian_column.rejections = rejections
            return col
        except DegenerateSampleError:
            rejections += 1
            if rejections > max_retries:
                raise
            stream = RngStream(stream.seed, stream.stream_id + 1)


def sample_lnorm_full(
    config: NetConfig, x: np.ndarray, n_samples: int, start_index: int = 0
) -> np.ndarray:
    """ln ||z_out||^2 over iid full-architecture networks at fixed input."""
    out = np.empty(n_samples)
    for j in range(n_samples):
        trace = forward_full(config, x, RngStream(config.seed, start_index + j))
        sq = float(trace.z_out @ trace.z_out)
        if sq < _NORM_UNDERFLOW:
            raise DegenerateSampleError("output norm underflow")
        out[j] = math.log(sq)
    return out


def compose_lnorm_from_chain(
    config: NetConfig, x_norm_sq_over_nin: float, n_samples: int, start_index: int = 0
) -> np.ndarray:
    """ln ||z_out||^2 via the exact distributional factorization:
    ln(||x||^2/n_in) + sum ln(a^2+l^2) + G + ln chi2_{n_out}."""
    g_vals = sample_G(config, n_samples, start_index=start_index)
    gen = RngStream(config.seed ^ 0x9E3779B97F4A7C15, start_index).generator()
    chi = gen.chisquare(config.n_out, size=n_samples)
    return math.log(x_norm_sq_over_nin) + config.prefactor_log + g_vals + np.log(chi)


def sample_output_pairs(
    config: NetConfig, n_samples: int, start_index: int = 0
) -> np.ndarray:
    """Pairs of output coordinates via the exact factorization.

    Returns shape (n_samples, 2): sqrt(pref) * exp(G/2) * (Z1, Z2) at
    ||x|| = sqrt(n_in).
    """
    g_vals = sample_G(config, n_samples, start_index=start_index)
    gen = RngStream(config.seed ^ 0xD1B54A32D192ED03, start_index).generator()
    z = gen.standard_normal((n_samples, 2))
    return np.exp(0.5 * (config.prefactor_log + g_vals))[:, None] * z
