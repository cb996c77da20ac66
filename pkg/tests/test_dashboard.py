import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

pytest.importorskip("dash")
pytest.importorskip("dash_bootstrap_components")

from dash import dcc, html  # noqa: E402

from dashboard.app import create_app  # noqa: E402
from dashboard.callbacks import experiment_options, render_tab  # noqa: E402
from dashboard.tabs.design_tab import design_positions  # noqa: E402
from sensing.harness import ExperimentConfig, estimate_curves, results_frame, run_replication  # noqa: E402
from sensing.utils import get_experiment_folder, save_dataframe  # noqa: E402


def _graphs(component):
    return [c for c in component.children if isinstance(c, dcc.Graph)]


@pytest.fixture
def store(tmp_path):
    config = ExperimentConfig(n_total=256, j_err=10, replications=1, seed=3)
    result, state = run_replication(config, 0, keep_state=True)
    folder = get_experiment_folder("run-demo", str(tmp_path))
    save_dataframe(results_frame([result]), f"{folder}/runs.parquet")
    save_dataframe(state.design_frame(), f"{folder}/design.parquet")
    save_dataframe(state.trajectory_frame(), f"{folder}/trajectory.parquet")
    sweep = pd.DataFrame({
        "n": [1024, 2048, 1024, 2048],
        "design": ["uniform", "uniform", "adaptive", "adaptive"],
        "reps": [5] * 4,
        "median": [3.0, 2.5, 2.0, 1.5],
        "ci_lo": [2.8, 2.3, 1.8, 1.3],
        "ci_hi": [3.2, 2.7, 2.2, 1.7],
        "p_value": [0.01] * 4,
    })
    save_dataframe(sweep, f"{get_experiment_folder('sweep-demo', str(tmp_path))}/sweep.parquet")
    return str(tmp_path)


def test_create_app(tmp_path):
    app = create_app(str(tmp_path))
    assert app.my_config["RESULTS_FOLDER"] == str(tmp_path)
    assert app.title == "Adaptive Sensing"


def test_experiment_options(store, tmp_path):
    options, default = experiment_options(store)
    assert [o["value"] for o in options] == ["run-demo", "sweep-demo"]
    assert default == "run-demo"
    assert experiment_options(str(tmp_path / "absent")) == ([], None)


def test_render_tab_without_experiment(store):
    assert render_tab("compare", None, store).children == "Please select an experiment."
    assert render_tab("nope", "run-demo", store).children == "Unknown tab selected."


def test_tab_contents(store):
    assert len(_graphs(render_tab("compare", "run-demo", store))) == 1
    assert len(_graphs(render_tab("design", "run-demo", store))) == 2
    assert len(_graphs(render_tab("sweep", "sweep-demo", store))) == 1
    missing = render_tab("sweep", "run-demo", store)
    assert isinstance(missing, html.Div) and missing.children == "No sweep data found for this experiment."
    assert render_tab("design", "sweep-demo", store).children == "No design data found for this experiment."


def test_design_positions():
    df = design_positions(pd.DataFrame({"stage": [1, 0, 0], "numerator": [3, 1, 0], "level": [3, 1, 2]}))
    np.testing.assert_allclose(df["x"], [0.0, 0.5, 0.375])
    assert list(df["stage_label"]) == ["stage 0", "stage 0", "stage 1"]


def test_app_runs_as_a_script(tmp_path):
    script = Path(__file__).resolve().parent.parent / "dashboard" / "app.py"
    env = {k: v for k, v in os.environ.items() if k != "PYTHONPATH"}
    code = f"import runpy; app = runpy.run_path({str(script)!r})['create_app']({str(tmp_path)!r}); print(app.title)"
    done = subprocess.run([sys.executable, "-c", code], cwd=tmp_path, env=env, capture_output=True, text=True)
    assert done.returncode == 0, done.stderr
    assert done.stdout.strip() == "Adaptive Sensing"


def test_estimate_tab(store):
    config = ExperimentConfig(n_total=256, j_err=10, replications=1, seed=3)
    curves, samples = estimate_curves(config, level=9)
    folder = get_experiment_folder("estimate-demo", store)
    save_dataframe(curves, f"{folder}/curves.parquet")
    save_dataframe(samples, f"{folder}/samples.parquet")
    graphs = _graphs(render_tab("estimate", "estimate-demo", store))
    assert [g.figure.layout.title.text for g in graphs] == ["Noisy observations", "Estimates on the evaluation grid"]
    assert graphs[1].figure.data[-1].name == "adaptive design"
    assert render_tab("estimate", "run-demo", store).children == "No estimate data found for this experiment."
