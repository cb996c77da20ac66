import os

from dash import dcc, html

from sensing.plots import estimate_figure, samples_figure
from sensing.utils import load_dataframe


def get_estimate_tab_content(experiment, results_folder):
    """
    Generates the content for the Estimate tab: the noisy observations of
    both arms, then f against the two estimates with the adaptive design
    marked under the curves.
    """
    folder = os.path.join(results_folder, experiment)
    curves_df = load_dataframe(os.path.join(folder, "curves.parquet"))
    samples_df = load_dataframe(os.path.join(folder, "samples.parquet"))

    if curves_df.empty:
        return html.Div("No estimate data found for this experiment.")

    children = []
    if not samples_df.empty:
        children.append(dcc.Graph(figure=samples_figure(samples_df)))
    children.append(dcc.Graph(figure=estimate_figure(curves_df, samples_df)))
    return html.Div(children)
