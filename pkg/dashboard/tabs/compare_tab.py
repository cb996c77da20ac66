import os

import plotly.express as px
from dash import dcc, html
import dash_bootstrap_components as dbc

from sensing.plots import report_figure
from sensing.utils import load_dataframe


def get_compare_tab_content(experiment, results_folder):
    """
    Generates the content for the Comparison tab

    Parameters:
    - experiment (str): The name of the selected experiment.
    - results_folder (str): Folder holding one subfolder per experiment.

    Returns:
    - html.Div: The report table, the median plot and per-run error boxes.
    """
    folder = os.path.join(results_folder, experiment)
    report_df = load_dataframe(os.path.join(folder, "report.parquet"))
    runs_df = load_dataframe(os.path.join(folder, "runs.parquet"))

    if report_df.empty and runs_df.empty:
        return html.Div("No comparison data found for this experiment.")

    children = []
    if not report_df.empty:
        children.append(html.H4("Median max error (95% intervals)", style={'color': 'white'}))
        children.append(dbc.Table.from_dataframe(report_df.round(4), striped=True, bordered=True, hover=True,
                                                 color="dark", size="sm"))
        children.append(dcc.Graph(figure=report_figure(report_df)))

    if not runs_df.empty:
        fig = px.box(
            runs_df,
            x="function",
            y="max_error",
            color="design",
            facet_col="sigma" if runs_df["sigma"].nunique() > 1 else None,
            title="Max error per run",
            template="plotly_dark"
        )
        children.append(dcc.Graph(figure=fig))

    return html.Div(children)
