import logging

from dash import Input, Output, html

from dashboard.tabs.compare_tab import get_compare_tab_content
from dashboard.tabs.design_tab import get_design_tab_content
from dashboard.tabs.estimate_tab import get_estimate_tab_content
from dashboard.tabs.sweep_tab import get_sweep_tab_content
from sensing.utils import list_experiments

logger = logging.getLogger(__name__)

TAB_CONTENT = {
    "compare": get_compare_tab_content,
    "sweep": get_sweep_tab_content,
    "design": get_design_tab_content,
    "estimate": get_estimate_tab_content,
}


def experiment_options(results_folder):
    """Dropdown options for the stored experiments, and the first one as default."""
    try:
        experiments = [{'label': name, 'value': name} for name in list_experiments(results_folder)]
    except OSError as e:
        logger.error(f"Error loading experiments: {e}")
        return [], None
    return experiments, (experiments[0]['value'] if experiments else None)


def render_tab(selected_tab, experiment, results_folder):
    if not experiment:
        return html.Div("Please select an experiment.")
    content = TAB_CONTENT.get(selected_tab)
    if content is None:
        return html.Div("Unknown tab selected.")
    return content(experiment, results_folder)


def register_callbacks(app):
    results_folder = app.my_config["RESULTS_FOLDER"]

    @app.callback(
        [Output("experiment-dropdown", "options"),
         Output("experiment-dropdown", "value")],
        Input("main-tabs", "value")  # Re-scan the store when tabs change
    )
    def update_experiment_dropdown(_):
        return experiment_options(results_folder)

    @app.callback(
        Output("tab-content", "children"),
        [Input("main-tabs", "value"),
         Input("experiment-dropdown", "value")]
    )
    def update_tab_content(selected_tab, experiment):
        return render_tab(selected_tab, experiment, results_folder)
