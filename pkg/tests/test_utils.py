import json
import os

import pandas as pd
import pytest

from sensing.utils import (
    atomic_write,
    get_config,
    get_experiment_folder,
    get_results_folder,
    list_experiments,
    load_dataframe,
    read_csv,
    save_dataframe,
    write_csv,
    write_text,
)


def test_project_config_holds_defaults():
    config = get_config()
    assert config["Results_Folder"] == "Sensing_Results"
    assert config["Replications"] == 250
    assert os.path.isabs(get_results_folder())
    assert get_results_folder().endswith("Sensing_Results")


def test_get_config_from_path(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"Results_Folder": "elsewhere"}))
    config = get_config(str(path))
    assert get_results_folder(config).endswith("elsewhere")
    assert get_results_folder({"Results_Folder": str(tmp_path)}) == str(tmp_path)
    with pytest.raises(ValueError):
        get_results_folder({})
    path.write_text("[1, 2]")
    with pytest.raises(ValueError):
        get_config(str(path))


def test_experiment_folders(tmp_path):
    assert list_experiments(str(tmp_path / "absent")) == []
    folder = get_experiment_folder("b-run", str(tmp_path))
    get_experiment_folder("a-run", str(tmp_path))
    (tmp_path / "stray.txt").write_text("x")
    assert os.path.isdir(folder)
    assert list_experiments(str(tmp_path)) == ["a-run", "b-run"]


def test_atomic_write_leaves_no_partial_file(tmp_path):
    target = tmp_path / "out.txt"
    write_text("kept\n", str(target))

    def failing(tmp):
        with open(tmp, "w") as f:
            f.write("partial")
        raise RuntimeError("boom")

    with pytest.raises(RuntimeError):
        atomic_write(str(target), failing)
    assert target.read_text() == "kept\n"
    assert os.listdir(tmp_path) == ["out.txt"]


def test_csv_with_header_comment(tmp_path):
    df = pd.DataFrame({"n": [1, 2], "median": [0.5, 0.25]})
    path = tmp_path / "table.csv"
    write_csv(df, str(path), "a note")
    assert path.read_text().splitlines()[0] == "# a note"
    pd.testing.assert_frame_equal(read_csv(str(path)), df)


def test_parquet_store(tmp_path):
    path = tmp_path / "nested" / "runs.parquet"
    df = pd.DataFrame({"rep": [0, 1], "max_error": [1.5, 2.5]})
    save_dataframe(df, str(path))
    pd.testing.assert_frame_equal(load_dataframe(str(path)), df)
    assert load_dataframe(str(tmp_path / "missing.parquet")).empty
    assert list(load_dataframe(str(tmp_path / "missing.parquet"), columns=["rep"]).columns) == ["rep"]
