"""
Log-log error plots for comparison reports and sample-size sweeps, and
the coefficient, sample and estimate views of a single run.

The same figures back the dashboard and the `plot` subcommand.
"""
import logging

import numpy as np
import pandas as pd
import plotly.graph_objects as go

from sensing.errors import InvalidInputError
from sensing.utils import atomic_write, read_csv, write_csv

logger = logging.getLogger(__name__)

REPORT_COLUMNS = {
    "function", "sigma", "median_uniform", "ci_lo_uniform", "ci_hi_uniform",
    "median_adaptive", "ci_lo_adaptive", "ci_hi_adaptive",
}
SWEEP_COLUMNS = {"n", "design", "median", "ci_lo", "ci_hi"}
ESTIMATE_COLUMNS = {"x", "f(x)", "uniform", "adaptive"}
COEFFICIENT_COLUMNS = {"j", "k", "beta"}
SAMPLE_COLUMNS = {"design", "x", "y"}
DESIGN_COLORS = {"uniform": "#17a2b8", "adaptive": "#f0ad4e"}


def _series(x, median, lo, hi, name, color=None, dash=None):
    median = np.asarray(median, dtype=float)
    return go.Scatter(
        x=np.asarray(x, dtype=float),
        y=median,
        name=name,
        mode="lines+markers",
        line={"color": color, "dash": dash},
        error_y={
            "type": "data",
            "symmetric": False,
            "array": np.asarray(hi, dtype=float) - median,
            "arrayminus": median - np.asarray(lo, dtype=float),
        },
    )


def _loglog(fig, title, x_title):
    fig.update_layout(
        title=title,
        template="plotly_dark",
        xaxis={"type": "log", "title": x_title},
        yaxis={"type": "log", "title": "median max error"},
        legend_title_text="design",
    )
    return fig


def sweep_figure(df):
    """x = n, one series per design mode."""
    fig = go.Figure()
    for design, rows in df.sort_values("n").groupby("design", sort=True):
        fig.add_trace(_series(
            rows["n"], rows["median"], rows["ci_lo"], rows["ci_hi"],
            name=str(design), color=DESIGN_COLORS.get(str(design)),
        ))
    return _loglog(fig, "Median sup-norm error against sample size", "n")


def report_figure(df):
    """x = sigma, one series per function and design mode."""
    fig = go.Figure()
    for function, rows in df.sort_values("sigma").groupby("function", sort=True):
        for design, dash in (("uniform", "dot"), ("adaptive", None)):
            fig.add_trace(_series(
                rows["sigma"], rows[f"median_{design}"], rows[f"ci_lo_{design}"], rows[f"ci_hi_{design}"],
                name=f"{function} ({design})", color=DESIGN_COLORS[design], dash=dash,
            ))
    return _loglog(fig, "Median sup-norm error against noise level", "sigma")


def estimate_figure(curves, samples=None):
    """f and both arms' estimates; adaptive design points as a rug under the curves."""
    fig = go.Figure()
    fig.add_trace(go.Scatter(x=curves["x"], y=curves["f(x)"], name="f", mode="lines",
                             line={"color": "white", "width": 1}))
    for design in ("uniform", "adaptive"):
        fig.add_trace(go.Scatter(x=curves["x"], y=curves[design], name=design, mode="lines",
                                 line={"color": DESIGN_COLORS[design], "width": 1}))
    if samples is not None and not samples.empty:
        points = samples[samples["design"] == "adaptive"]
        floor = float(np.nanmin(curves[["f(x)", "uniform", "adaptive"]].to_numpy(dtype=float)))
        fig.add_trace(go.Scatter(
            x=points["x"], y=np.full(len(points), floor - 1.0), name="adaptive design", mode="markers",
            marker={"symbol": "line-ns-open", "size": 6, "color": DESIGN_COLORS["adaptive"]},
        ))
    fig.update_layout(title="Estimates on the evaluation grid", template="plotly_dark",
                      xaxis={"title": "x"}, yaxis={"title": "f(x)"}, legend_title_text="curve")
    return fig


def coefficient_figure(df):
    """One row per level j with a stem at x = 2^-j k, scaled by the largest |beta|."""
    fig = go.Figure()
    peak = float(np.abs(df["beta"]).max()) if len(df) else 0.0
    peak = peak or 1.0
    for j, rows in df.groupby("j", sort=True):
        x = np.repeat(rows["k"].to_numpy(dtype=float) / 2.0 ** j, 3)
        y = np.full(len(x), float(j))
        y[1::3] += 0.9 * rows["beta"].to_numpy(dtype=float) / peak
        x[2::3] = y[2::3] = np.nan
        fig.add_trace(go.Scatter(x=x, y=y, mode="lines", name=f"j={j}", showlegend=False,
                                 line={"color": "#17a2b8", "width": 1}))
    fig.update_layout(title="Wavelet coefficients by level", template="plotly_dark",
                      xaxis={"title": "x", "range": [0, 1]}, yaxis={"title": "level j", "dtick": 1})
    return fig


def samples_figure(df):
    fig = go.Figure()
    for design, rows in df.groupby("design", sort=True):
        fig.add_trace(go.Scatter(x=rows["x"], y=rows["y"], name=str(design), mode="markers",
                                 marker={"size": 2, "color": DESIGN_COLORS.get(str(design))}))
    fig.update_layout(title="Noisy observations", template="plotly_dark",
                      xaxis={"title": "x"}, yaxis={"title": "y"}, legend_title_text="design")
    return fig


def figure_from_frame(df):
    columns = set(df.columns)
    if SWEEP_COLUMNS <= columns:
        return sweep_figure(df)
    if REPORT_COLUMNS <= columns:
        return report_figure(df)
    if ESTIMATE_COLUMNS <= columns:
        return estimate_figure(df)
    if COEFFICIENT_COLUMNS <= columns:
        return coefficient_figure(df)
    if SAMPLE_COLUMNS <= columns:
        return samples_figure(df)
    raise InvalidInputError(f"columns {sorted(columns)} match no known table")


def emit_plot(input_path, output_path, fmt="svg"):
    """Render a results CSV as SVG, or pass the table through as CSV."""
    try:
        df = read_csv(input_path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise InvalidInputError(f"Error loading {input_path}: {e}")
    fig = figure_from_frame(df)
    if fmt == "csv":
        write_csv(df, output_path)
    elif fmt == "svg":
        atomic_write(output_path, lambda tmp_path: fig.write_image(tmp_path, format="svg"))
    else:
        raise InvalidInputError(f"unknown plot format {fmt!r}")
    logger.info(f"Wrote {fmt} plot to {output_path}")
    return output_path
