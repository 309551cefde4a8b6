"""Figure renderers for resnet-limits experiment artifacts.

Each figure id maps one or more v1 CSV/JSON inputs to a single image. The
renderers plot exactly what the files contain; any clipping floor applied to
log-scale error bars is annotated on the figure.
"""

from __future__ import annotations

from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .io import SchemaError, read_curve, read_table, require_rows

FIGURE_IDS = (
    "density",
    "mean_var_sweep",
    "output_stats",
    "conjecture_decay",
    "c_sweep",
    "layer_profile",
)

# fixed style so rendering is a pure function of the input files
_STYLE = {
    "figure.figsize": (7.0, 4.5),
    "figure.dpi": 110,
    "font.size": 9,
    "svg.hashsalt": "resnet-limits-plots",
    "axes.grid": True,
    "grid.alpha": 0.3,
}

_CI_FLOORS = {"mean_var_sweep": 1e-3, "conjecture_decay": 2e-5, "output_stats": 0.01}


@dataclass(frozen=True)
class FigureSpec:
    figure_id: str
    input_paths: tuple
    output_path: str

    def __post_init__(self) -> None:
        if self.figure_id not in FIGURE_IDS:
            raise SchemaError(f"unknown figure id {self.figure_id!r}")
        if not self.input_paths:
            raise SchemaError("figure needs at least one input file")
        object.__setattr__(self, "input_paths", tuple(str(p) for p in self.input_paths))


def _save(fig, path: str) -> None:
    fig.savefig(path, metadata={"Date": None} if path.endswith(".svg") else None)
    plt.close(fig)


def _floor_note(ax, floor: float) -> None:
    ax.annotate(
        f"error bars clipped at {floor:g}",
        xy=(0.02, 0.02),
        xycoords="axes fraction",
        fontsize=7,
        color="0.35",
    )


def _config_title(spec: dict) -> str:
    cfg = spec.get("config", {})
    return (
        f"n={cfg.get('n')} d={cfg.get('d')} scheme={cfg.get('scheme')}"
    )


def render_density(spec: FigureSpec):
    """Overlay of empirical, depth-and-width, and infinite-width densities."""
    labels = {
        "empirical": ("empirical", dict(lw=1.0, color="0.3")),
        "depth-and-width": ("depth-and-width theory", dict(lw=1.6, color="tab:blue")),
        "infinite-width": ("infinite-width", dict(lw=1.4, ls="--", color="tab:red")),
    }
    fig, ax = plt.subplots()
    seen = {}
    meta_spec = None
    for path in spec.input_paths:
        xs, ys, table = read_curve(path)
        require_rows(table)
        curve = table.meta.get("curve")
        if curve not in labels:
            raise SchemaError(f"{path}: missing or unknown 'curve' header")
        label, style = labels[curve]
        ax.plot(xs, ys, label=label, **style)
        seen[curve] = True
        meta_spec = table.spec
    missing = set(labels) - set(seen)
    if missing:
        raise SchemaError(f"density figure lacks curves: {sorted(missing)}")
    ax.set_xlabel("ln ||z_out||^2")
    ax.set_ylabel("density")
    ax.set_title(f"log output norm density ({_config_title(meta_spec)})")
    ax.legend()
    return fig


def render_mean_var_sweep(spec: FigureSpec):
    """Empirical vs predicted G moments across the sweep axis, with a
    log-log error-decay panel."""
    table = require_rows(read_table(spec.input_paths[0], expect_command="sweep"))
    n = np.asarray(table.column("n"), dtype=float)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 4.0))
    for stat, color in (("mean", "tab:blue"), ("var", "tab:orange")):
        emp = np.asarray(table.column(f"{stat}_emp"), dtype=float)
        ci = np.asarray(table.column(f"{stat}_ci"), dtype=float)
        theory = np.asarray(table.column(f"{stat}_theory"), dtype=float)
        ax1.errorbar(n, emp, yerr=ci, fmt="o", ms=4, color=color, label=f"{stat} (MC, 95% CI)")
        ax1.plot(n, theory, "-", color=color, alpha=0.7, label=f"{stat} (theory)")
        floor = _CI_FLOORS["mean_var_sweep"]
        err = np.maximum(np.abs(emp - theory), floor)
        ax2.errorbar(n, err, yerr=np.minimum(ci, err - floor / 2), fmt="o-", ms=4, color=color, label=stat)
    ax1.set_xlabel("n")
    ax1.set_ylabel("G moment")
    ax1.legend(fontsize=7)
    ax2.set_xscale("log")
    ax2.set_yscale("log")
    ax2.set_xlabel("n")
    ax2.set_ylabel("|empirical - theory|")
    ax2.legend()
    _floor_note(ax2, _CI_FLOORS["mean_var_sweep"])
    fig.suptitle(f"G moments vs width ({_config_title(table.spec)})")
    return fig


def render_output_stats(spec: FigureSpec):
    """Output-squared correlation against depth-to-width ratio."""
    table = require_rows(read_table(spec.input_paths[0], expect_command="correlation"))
    ratio = np.asarray(table.column("ratio"), dtype=float)
    emp = np.asarray(table.column("corr_emp"), dtype=float)
    se = np.asarray(table.column("corr_se"), dtype=float)
    theory = np.asarray(table.column("corr_theory"), dtype=float)
    floor = _CI_FLOORS["output_stats"]
    fig, ax = plt.subplots()
    shown = np.maximum(emp, floor)
    ax.errorbar(ratio, shown, yerr=np.minimum(4.0 * se, shown - floor / 2), fmt="o", ms=4, label="empirical (4 SE)")
    ax.plot(ratio, theory, "-", label="theory")
    ax.axhline(1.0 / 3.0, ls=":", color="0.4", label="1/3 asymptote")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("d / n")
    ax.set_ylabel("corr[(z1)^2, (z2)^2]")
    ax.legend()
    _floor_note(ax, floor)
    ax.set_title(f"output-squared correlation ({_config_title(table.spec)})")
    return fig


def _conjecture_points(paths):
    points = []
    for path in paths:
        table = require_rows(read_table(path, expect_command="conjecture"))
        pooled = table.meta.get("pooled")
        lags = table.meta.get("lags")
        if not isinstance(pooled, dict) or not isinstance(lags, dict):
            raise SchemaError(f"{path}: missing pooled/lags header records")
        n = table.spec["config"]["n"]
        points.append((n, pooled, lags))
    points.sort(key=lambda t: t[0])
    return points


def render_conjecture_decay(spec: FigureSpec):
    """Deviation of pooled activation statistics from the sphere/kernel
    references, versus width, with a slope -2 guide."""
    points = _conjecture_points(spec.input_paths)
    ns = np.asarray([p[0] for p in points], dtype=float)
    floor = _CI_FLOORS["conjecture_decay"]
    mean_err = np.asarray([abs(p[1]["pooled_mean_act"] - 1.0) for p in points])
    var_err = np.asarray([abs(p[1]["pooled_var_act"] - p[1]["sphere_var"]) for p in points])
    lag1_err = np.asarray([abs(p[2]["1"]["cov"] - p[2]["1"]["theory"]) for p in points])
    fig, ax = plt.subplots()
    for err, label in ((mean_err, "|mean - 1|"), (var_err, "|var - 3/(n+2)|"), (lag1_err, "|lag-1 cov - theory|")):
        ax.plot(ns, np.maximum(err, floor), "o-", ms=4, label=label)
    guide = var_err[0] * (ns / ns[0]) ** -2.0
    ax.plot(ns, np.maximum(guide, floor), "--", color="0.4", label="slope -2 guide")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("absolute deviation")
    ax.legend()
    _floor_note(ax, floor)
    ax.set_title("deep-layer activation statistics vs width")
    return fig


def render_c_sweep(spec: FigureSpec):
    """Hypoactivation constant estimates across lambda^2."""
    table = require_rows(read_table(spec.input_paths[0], expect_command="sweep"))
    lam2 = np.asarray(table.column("lam2"), dtype=float)
    c_hat = np.asarray(table.column("c_hat"), dtype=float)
    c_se = np.asarray(table.column("c_se"), dtype=float)
    fig, ax = plt.subplots()
    ax.errorbar(lam2, c_hat, yerr=1.959963984540054 * c_se, fmt="o-", ms=4)
    ax.set_xlabel("lambda^2")
    ax.set_ylabel("estimated constant")
    ax.set_title(f"hypoactivation constant vs lambda^2 ({_config_title(table.spec)})")
    return fig


def render_layer_profile(spec: FigureSpec):
    """Per-layer doubled activation-norm means with a 2 SE band."""
    table = require_rows(read_table(spec.input_paths[0], expect_command="conjecture"))
    layer = np.asarray(table.column("layer"), dtype=float)
    mean_act = np.asarray(table.column("mean_act"), dtype=float)
    se = np.asarray(table.column("mean_se"), dtype=float)
    fig, ax = plt.subplots()
    ax.plot(layer, mean_act, "-", color="tab:blue", label="mean activation norm")
    ax.fill_between(layer, mean_act - 2 * se, mean_act + 2 * se, alpha=0.3, color="tab:blue", label="2 SE band")
    ax.axhline(1.0, ls=":", color="0.4", label="uniform-sphere value")
    ax.set_xlabel("layer")
    ax.set_ylabel("E[2 ||relu(z_hat)||^2]")
    ax.legend()
    ax.set_title(f"layer activation profile ({_config_title(table.spec)})")
    return fig


_RENDERERS = {
    "density": render_density,
    "mean_var_sweep": render_mean_var_sweep,
    "output_stats": render_output_stats,
    "conjecture_decay": render_conjecture_decay,
    "c_sweep": render_c_sweep,
    "layer_profile": render_layer_profile,
}


def render(spec: FigureSpec) -> str:
    """Render one figure; returns the output path. Deterministic given the
    input files."""
    with plt.rc_context(_STYLE):
        fig = _RENDERERS[spec.figure_id](spec)
        _save(fig, spec.output_path)
    return spec.output_path
