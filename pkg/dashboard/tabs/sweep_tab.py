import os

from dash import dcc, html

from sensing.harness import loglog_slope
from sensing.plots import sweep_figure
from sensing.utils import load_dataframe


def get_sweep_tab_content(experiment, results_folder):
    """Log-log medians against n, with the fitted slope of each design."""
    sweep_df = load_dataframe(os.path.join(results_folder, experiment, "sweep.parquet"))
    if sweep_df.empty:
        return html.Div("No sweep data found for this experiment.")

    slopes = []
    for design, rows in sweep_df.groupby("design"):
        if len(rows) > 1:
            slopes.append(html.Li(f"{design}: slope {loglog_slope(rows['n'], rows['median']):.3f}"))

    return html.Div([
        dcc.Graph(figure=sweep_figure(sweep_df)),
        html.Ul(slopes, style={'color': 'white'}),
    ])
