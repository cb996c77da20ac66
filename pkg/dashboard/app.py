import os
import sys

if __package__ in (None, ""):
    # launched as `python dashboard/app.py`: the repo root holds the packages
    sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import dash  # noqa: E402
import dash_bootstrap_components as dbc  # noqa: E402

from dashboard.callbacks import register_callbacks  # noqa: E402
from dashboard.layout import get_layout  # noqa: E402
from sensing.utils import get_results_folder, setup_logging  # noqa: E402


def create_app(results_folder=None):
    app = dash.Dash(__name__, external_stylesheets=[dbc.themes.DARKLY], suppress_callback_exceptions=True,
                    title="Adaptive Sensing")
    app.layout = get_layout()
    app.my_config = {"RESULTS_FOLDER": results_folder or get_results_folder()}
    register_callbacks(app)
    return app


if __name__ == "__main__":
    setup_logging()
    create_app().run(debug=True, port=8050)
