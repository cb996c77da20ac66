import os

import plotly.express as px
from dash import dcc, html

from sensing.utils import load_dataframe


def design_positions(design_df):
    """Design points with their location x and the stage that added them."""
    df = design_df.copy()
    df["x"] = df["numerator"] / 2.0 ** df["level"]
    df = df.sort_values(["stage", "x"])
    df["stage_label"] = "stage " + df["stage"].astype(str)
    return df


def get_design_tab_content(experiment, results_folder):
    """
    Generates the content for the Design tab: where each stage put its
    points, and how the noise estimate evolved.
    """
    folder = os.path.join(results_folder, experiment)
    design_df = load_dataframe(os.path.join(folder, "design.parquet"))
    trajectory_df = load_dataframe(os.path.join(folder, "trajectory.parquet"))

    if design_df.empty:
        return html.Div("No design data found for this experiment.")

    df = design_positions(design_df)
    density = px.histogram(
        df,
        x="x",
        color="stage_label",
        nbins=128,
        title="Design points by stage",
        labels={"x": "x", "count": "points"},
        template="plotly_dark"
    )
    children = [dcc.Graph(figure=density)]

    if not trajectory_df.empty:
        children.append(dcc.Graph(figure=px.line(
            trajectory_df,
            x="n",
            y="sigma_hat",
            markers=True,
            log_x=True,
            title="Noise estimate per stage",
            template="plotly_dark"
        )))
    return html.Div(children)
