"""Command-line driver.

Subcommands expose predictions, simulation, conjecture verification, density
generation, and parameter sweeps, emitting machine-readable CSV/JSON. Every
output embeds the full experiment spec so it can be regenerated byte for byte.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .config import INV_SQRT2, NetConfig, Scheme
from .density import (
    GridSpec,
    grid_to_csv,
    histogram,
    infinite_width_logout_density,
    predicted_logout_density,
)
from .errors import NumericalError, ResnetLimitsError, ValidationError
from .estimate import (
    conjecture_stats,
    estimate_C,
    output_sq_correlation,
    summarize,
)
from .simulate import sample_G, sample_lnorm_full
from .theory import (
    CSource,
    HypoConstant,
    corr_sq_from_var,
    predict_G,
    predict_output_stats,
)

SCHEMA_LINE = "resnet-limits-schema v1"

COMMANDS = ("predict", "sample-g", "density", "conjecture", "correlation", "estimate-c", "sweep")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything needed to reproduce one CLI invocation byte for byte."""

    command: str
    config: NetConfig
    n_samples: int = 10_000
    workers: int = 1
    output_path: str = "out"
    format: str = "csv"
    extras: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise ValidationError(f"unknown command {self.command!r}")
        if self.format not in ("csv", "json"):
            raise ValidationError(f"format must be csv or json, got {self.format!r}")
        if self.n_samples < 0:
            raise ValidationError("n_samples must be >= 0")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "config": self.config.to_dict(),
            "n_samples": self.n_samples,
            "workers": self.workers,
            "output_path": self.output_path,
            "format": self.format,
            "extras": dict(sorted(self.extras.items())),
        }

    def to_json(self) -> str:
        """Canonical (sorted-key, compact) JSON form used in output headers."""
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        try:
            return cls(
                command=data["command"],
                config=NetConfig.from_dict(data["config"]),
                n_samples=int(data.get("n_samples", 10_000)),
                workers=int(data.get("workers", 1)),
                output_path=str(data.get("output_path", "out")),
                format=str(data.get("format", "csv")),
                extras=dict(data.get("extras", {})),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed experiment spec: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "ExperimentSpec":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"spec is not valid JSON: {exc}") from exc
        return cls.from_dict(data)


def spec_from_file_header(path: str) -> ExperimentSpec:
    """Recover the spec embedded in an output file (CSV header or JSON key)."""
    with open(path) as fh:
        head = fh.read(1 << 20)
    if head.lstrip().startswith("{"):
        data = json.loads(head)
        if data.get("schema") != SCHEMA_LINE:
            raise ValidationError(f"{path}: missing or wrong schema marker")
        return ExperimentSpec.from_dict(data["spec"])
    for line in head.splitlines():
        if line.startswith("# spec: "):
            return ExperimentSpec.from_json(line[len("# spec: ") :])
    raise ValidationError(f"{path}: no embedded spec header found")


def _header_lines(spec: ExperimentSpec) -> list:
    return [
        SCHEMA_LINE,
        f"command: {spec.command}",
        f"version: {__version__}",
        f"spec: {spec.to_json()}",
    ]


def _write_csv(path: str, spec: ExperimentSpec, columns, rows, notes=()) -> None:
    with open(path, "w") as fh:
        for line in _header_lines(spec):
            fh.write(f"# {line}\n")
        for line in notes:
            fh.write(f"# {line}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row) + "\n")


def _write_json(path: str, spec: ExperimentSpec, payload: dict) -> None:
    doc = {"schema": SCHEMA_LINE, "version": __version__, "spec": spec.to_dict()}
    doc.update(payload)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _resolve_constant(spec: ExperimentSpec, config: NetConfig) -> HypoConstant | None:
    """Pick the hypoactivation constant per the spec extras.

    ``c_value`` wins if set; ``c_samples`` triggers re-estimation at the same
    (alpha, lambda, n, d); otherwise the published default is used (valid only
    at alpha = lambda = 1/sqrt(2)). Balanced and fully connected configs need
    no constant.
    """
    if config.scheme == Scheme.BALANCED or config.d == 0:
        return None
    if all(a == 0.0 for a in config.alphas):
        return None
    if spec.extras.get("c_value") is not None:
        return HypoConstant(value=float(spec.extras["c_value"]), source=CSource.ESTIMATED)
    c_samples = int(spec.extras.get("c_samples") or 0)
    if c_samples > 0:
        if not config.is_constant:
            raise ValidationError("c re-estimation needs constant coefficients")
        return estimate_C(
            config.alpha,
            config.lam,
            config.n,
            config.d,
            c_samples,
            seed=int(spec.extras.get("c_seed", config.seed + 1)),
            workers=spec.workers,
        )
    return HypoConstant.paper_default()


def _prediction_payload(config: NetConfig, C: HypoConstant | None) -> dict:
    pred = predict_G(config, C)
    stats = predict_output_stats(config, pred)
    payload = {
        "mean_G": pred.mean_G,
        "var_G": pred.var_G,
        "beta": pred.beta,
        "c": None if math.isnan(pred.c) else pred.c,
        "h_total": pred.h_total,
        "i_total": pred.i_total,
        "prefactor_log": pred.prefactor_log,
        "mean_sq": stats.mean_sq,
        "var_sq": stats.var_sq,
        "corr_sq": stats.corr_sq,
    }
    if C is not None:
        payload["constant"] = {
            "value": C.value,
            "source": C.source.value,
            "std_error": C.std_error,
        }
    return payload


def _run_predict(spec: ExperimentSpec) -> None:
    C = _resolve_constant(spec, spec.config)
    payload = _prediction_payload(spec.config, C)
    if spec.format == "json":
        _write_json(spec.output_path, spec, {"prediction": payload})
    else:
        rows = [(k, v) for k, v in payload.items() if isinstance(v, (int, float)) and v is not None]
        _write_csv(spec.output_path, spec, ("quantity", "value"), rows)


def _run_sample_g(spec: ExperimentSpec) -> None:
    if spec.n_samples < 2:
        raise ValidationError("sample-g needs n_samples >= 2")
    g = sample_G(spec.config, spec.n_samples, workers=spec.workers)
    s = summarize(g)
    summary = {
        "count": s.count,
        "mean": s.mean,
        "variance": s.variance,
        "mean_ci_half_width": s.ci_half_width,
        "variance_ci_half_width": s.variance_ci_half_width,
    }
    note = "summary: " + json.dumps(summary, sort_keys=True, separators=(",", ":"))
    rows = [(i, float(v)) for i, v in enumerate(g)]
    _write_csv(spec.output_path, spec, ("index", "g"), rows, notes=[note])


def _run_density(spec: ExperimentSpec) -> None:
    config = spec.config
    C = _resolve_constant(spec, config)
    pred = predict_G(config, C)
    theory = predicted_logout_density(config, pred)
    grid = GridSpec(theory.x_min, theory.x_max, theory.step)
    infwidth = infinite_width_logout_density(config.n_in, config.n_out, grid)
    x = np.ones(config.n_in)  # ||x||^2 = n_in
    samples = sample_lnorm_full(config, x, spec.n_samples)
    emp = histogram(samples, grid)
    base = spec.output_path
    headers = _header_lines(spec)
    grid_to_csv(theory, f"{base}_theory.csv", headers + ["curve: depth-and-width"])
    grid_to_csv(infwidth, f"{base}_infwidth.csv", headers + ["curve: infinite-width"])
    grid_to_csv(emp, f"{base}_empirical.csv", headers + ["curve: empirical"])


def _run_conjecture(spec: ExperimentSpec) -> None:
    lags = tuple(int(k) for k in spec.extras.get("lags", [1, 2]))
    stats = conjecture_stats(spec.config, spec.n_samples, lags=lags, workers=spec.workers)
    pooled = {
        "pooled_mean_act": stats.pooled_mean_act,
        "pooled_mean_se": stats.pooled_mean_se,
        "pooled_var_act": stats.pooled_var_act,
        "pooled_var_se": stats.pooled_var_se,
        "sphere_mean": stats.sphere_mean,
        "sphere_var": stats.sphere_var,
        "burn_in": stats.burn_in,
        "n_samples": stats.n_samples,
    }
    lag_rows = {
        str(k): {
            "cov": stats.lag_cov[k],
            "se": stats.lag_cov_se[k],
            "theory": stats.lag_cov_theory[k],
            "count": stats.counts[k],
        }
        for k in lags
    }
    notes = [
        "pooled: " + json.dumps(pooled, sort_keys=True, separators=(",", ":")),
        "lags: " + json.dumps(lag_rows, sort_keys=True, separators=(",", ":")),
    ]
    rows = [
        (
            ell,
            float(stats.per_layer_mean_act[ell]),
            float(stats.per_layer_var_act[ell]),
            float(stats.per_layer_mean_se[ell]),
            float(stats.h_layers[ell]),
        )
        for ell in range(spec.config.d)
    ]
    _write_csv(
        spec.output_path,
        spec,
        ("layer", "mean_act", "var_act", "mean_se", "h"),
        rows,
        notes=notes,
    )


def _run_correlation(spec: ExperimentSpec) -> None:
    config = spec.config
    if config.n_out < 2:
        raise ValidationError("correlation needs n_out >= 2")
    ratios = [float(r) for r in spec.extras.get("ratios", [0.1, 0.5, 1.0])]
    if not ratios or any(r <= 0 for r in ratios):
        raise ValidationError("ratios must be positive")
    if not config.is_constant or config.d == 0:
        raise ValidationError("the correlation sweep needs constant coefficients and d >= 1")
    rows = []
    for r in ratios:
        d = max(1, int(round(r * config.n)))
        cfg = NetConfig.constant(
            n_in=config.n_in,
            n_out=config.n_out,
            n=config.n,
            d=d,
            alpha=config.alpha,
            lam=config.lam,
            scheme=config.scheme,
            seed=config.seed,
        )
        pred = predict_G(cfg, None) if cfg.scheme == Scheme.BALANCED else predict_G(
            cfg, HypoConstant(0.0)
        )
        est = output_sq_correlation(cfg, spec.n_samples, workers=spec.workers)
        rows.append((r, d, est.value, est.std_error, corr_sq_from_var(pred.var_G)))
    _write_csv(
        spec.output_path,
        spec,
        ("ratio", "d", "corr_emp", "corr_se", "corr_theory"),
        rows,
    )


def _run_estimate_c(spec: ExperimentSpec) -> None:
    config = spec.config
    if config.scheme == Scheme.BALANCED:
        raise ValidationError("estimate-c requires the Vanilla scheme")
    if not config.is_constant or config.d == 0:
        raise ValidationError("estimate-c needs constant coefficients and d >= 1")
    method = spec.extras.get("method", "profile_sum")
    result = estimate_C(
        config.alpha,
        config.lam,
        config.n,
        config.d,
        spec.n_samples,
        seed=config.seed,
        method=method,
        workers=spec.workers,
    )
    _write_json(
        spec.output_path,
        spec,
        {
            "estimate": {
                "value": result.value,
                "std_error": result.std_error,
                "source": result.source.value,
                "method": method,
            }
        },
    )


_SWEEP_AXES = ("n", "d", "lam2")


def _run_sweep(spec: ExperimentSpec) -> None:
    config = spec.config
    axis = spec.extras.get("axis")
    values = spec.extras.get("values")
    if axis not in _SWEEP_AXES:
        raise ValidationError(f"sweep axis must be one of {_SWEEP_AXES}, got {axis!r}")
    if not values:
        raise ValidationError("sweep needs a non-empty values list")
    if not config.is_constant:
        raise ValidationError("sweep needs constant coefficients")
    fix_ratio = spec.extras.get("fix_ratio")

    if axis == "lam2":
        # hypoactivation-constant sweep over lambda^2 at fixed alpha, n, d
        rows = []
        for v in values:
            lam2 = float(v)
            if lam2 <= 0:
                raise ValidationError("lambda^2 values must be positive")
            result = estimate_C(
                config.alpha,
                math.sqrt(lam2),
                config.n,
                config.d,
                spec.n_samples,
                seed=config.seed,
                workers=spec.workers,
            )
            rows.append((lam2, result.value, result.std_error))
        _write_csv(spec.output_path, spec, ("lam2", "c_hat", "c_se"), rows)
        return

    rows = []
    for v in values:
        v = int(v)
        if axis == "n":
            n = v
            d = int(round(fix_ratio * n)) if fix_ratio is not None else config.d
        else:
            d = v
            n = config.n
        cfg = NetConfig.constant(
            n_in=config.n_in,
            n_out=config.n_out,
            n=n,
            d=d,
            alpha=config.alpha,
            lam=config.lam,
            scheme=config.scheme,
            seed=config.seed + v,
        )
        C = _resolve_constant(dataclasses.replace(spec, config=cfg), cfg)
        pred = predict_G(cfg, C)
        g = sample_G(cfg, spec.n_samples, workers=spec.workers)
        s = summarize(g)
        rows.append(
            (
                n,
                d,
                s.mean,
                s.ci_half_width,
                pred.mean_G,
                s.variance,
                s.variance_ci_half_width,
                pred.var_G,
            )
        )
    _write_csv(
        spec.output_path,
        spec,
        ("n", "d", "mean_emp", "mean_ci", "mean_theory", "var_emp", "var_ci", "var_theory"),
        rows,
    )


_RUNNERS = {
    "predict": _run_predict,
    "sample-g": _run_sample_g,
    "density": _run_density,
    "conjecture": _run_conjecture,
    "correlation": _run_correlation,
    "estimate-c": _run_estimate_c,
    "sweep": _run_sweep,
}


def run(spec: ExperimentSpec) -> int:
    """Execute one experiment spec, writing its artifact files."""
    out_dir = os.path.dirname(os.path.abspath(spec.output_path))
    if not os.path.isdir(out_dir):
        raise ValidationError(f"output directory does not exist: {out_dir}")
    _RUNNERS[spec.command](spec)
    return EXIT_OK


def parse_coefficient(text: str) -> float:
    """Coefficient flag value: a decimal literal or the token 1/sqrt2."""
    if text.strip() in ("1/sqrt2", "1/sqrt(2)"):
        return INV_SQRT2
    try:
        return float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a coefficient: {text!r}") from exc


def _add_common(parser: argparse.ArgumentParser, samples_default: int = 10_000) -> None:
    parser.add_argument("--n", type=int, default=100, help="hidden width")
    parser.add_argument("--d", type=int, default=100, help="hidden depth")
    parser.add_argument("--nin", type=int, default=1, help="input dimension")
    parser.add_argument("--nout", type=int, default=1, help="output dimension")
    parser.add_argument("--alpha", type=parse_coefficient, default=INV_SQRT2, help="skip coefficient (accepts 1/sqrt2)")
    parser.add_argument("--lambda", dest="lam", type=parse_coefficient, default=INV_SQRT2, help="feed-forward coefficient (accepts 1/sqrt2)")
    parser.add_argument("--scheme", choices=[s.value for s in Scheme], default="vanilla")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--samples", type=int, default=samples_default, help="Monte Carlo sample count")
    parser.add_argument("--workers", type=int, default=None, help="parallel workers (default: CPU count)")
    parser.add_argument("--out", default="out", help="output path (or prefix for multi-file commands)")
    parser.add_argument("--format", choices=["csv", "json"], default=None)


def _add_c_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--c-value", type=float, default=None, help="hypoactivation constant to use directly")
    parser.add_argument("--c-samples", type=int, default=0, help="re-estimate the constant from this many chain samples")
    parser.add_argument("--c-seed", type=int, default=None, help="seed for constant re-estimation (default: seed + 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="resnet-limits",
        description="ReLU ResNet initialization statistics: log-Gaussian predictions vs Monte Carlo.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", default=None, help="run an ExperimentSpec JSON file, ignoring other flags")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("predict", help="closed-form predictions for one configuration")
    _add_common(p)
    _add_c_flags(p)

    p = sub.add_parser("sample-g", help="raw Monte Carlo draws of G with a moment summary")
    _add_common(p)

    p = sub.add_parser("density", help="theory, infinite-width, and empirical densities of ln ||z_out||^2")
    _add_common(p)
    _add_c_flags(p)

    p = sub.add_parser("conjecture", help="per-layer activation statistics and lag covariances")
    _add_common(p)
    p.add_argument("--lags", default="1,2", help="comma-separated lag list")

    p = sub.add_parser("correlation", help="output-squared correlation across a d/n grid")
    _add_common(p)
    p.add_argument("--ratios", default="0.1,0.5,1", help="comma-separated d/n values")

    p = sub.add_parser("estimate-c", help="estimate the hypoactivation constant")
    _add_common(p, samples_default=20_000)
    p.add_argument("--method", choices=["profile_sum", "equilibrium"], default="profile_sum")

    p = sub.add_parser("sweep", help="parameter sweep with empirical and predicted G moments")
    _add_common(p)
    _add_c_flags(p)
    p.add_argument("--axis", choices=list(_SWEEP_AXES), required=True)
    p.add_argument("--values", required=True, help="comma-separated axis values")
    p.add_argument("--fix-ratio", type=float, default=None, help="hold d/n fixed while sweeping n")

    return parser


def _split_list(text: str, cast):
    try:
        return [cast(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ValidationError(f"bad list value {text!r}: {exc}") from exc


def spec_from_args(args: argparse.Namespace) -> ExperimentSpec:
    if args.command is None:
        raise ValidationError("no command given (see --help)")
    config = NetConfig.constant(
        n_in=args.nin,
        n_out=args.nout,
        n=args.n,
        d=args.d,
        alpha=args.alpha,
        lam=args.lam,
        scheme=args.scheme,
        seed=args.seed,
    )
    extras: dict = {}
    for name in ("c_value", "c_samples", "c_seed", "method"):
        if getattr(args, name, None):
            extras[name] = getattr(args, name)
    if getattr(args, "lags", None):
        extras["lags"] = _split_list(args.lags, int)
    if getattr(args, "ratios", None):
        extras["ratios"] = _split_list(args.ratios, float)
    if getattr(args, "axis", None):
        extras["axis"] = args.axis
        extras["values"] = _split_list(args.values, float)
        if args.fix_ratio is not None:
            extras["fix_ratio"] = args.fix_ratio
    fmt = args.format or _DEFAULT_FORMAT.get(args.command, "csv")
    return ExperimentSpec(
        command=args.command,
        config=config,
        n_samples=args.samples,
        workers=args.workers or os.cpu_count() or 1,
        output_path=args.out,
        format=fmt,
        extras=extras,
    )


_DEFAULT_FORMAT = {"predict": "json", "estimate-c": "json"}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.config is not None:
            with open(args.config) as fh:
                spec = ExperimentSpec.from_json(fh.read())
        else:
            spec = spec_from_args(args)
        return run(spec)
    except (ValidationError, FileNotFoundError) as exc:
        record = json.dumps({"error": "validation", "message": str(exc)}, sort_keys=True)
        print(f"error: {record}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericalError, ResnetLimitsError) as exc:
        record = json.dumps({"error": "numerical", "message": str(exc)}, sort_keys=True)
        print(f"error: {record}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
