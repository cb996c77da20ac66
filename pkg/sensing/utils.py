import json
import logging
import os
import tempfile

import pandas as pd

logger = logging.getLogger(__name__)

CONFIG_FILE = "config.json"


def get_config(config_path=None):
    """
    Load and return the configuration from config.json,
    which is located in the parent folder of the sensing package.
    """
    if config_path is None:
        base_dir = os.path.dirname(os.path.abspath(__file__))
        config_path = os.path.join(base_dir, "..", CONFIG_FILE)
    with open(config_path, "r") as f:
        config = json.load(f)
    if not isinstance(config, dict):
        raise ValueError(f"{config_path} must hold a JSON object")
    return config


def get_results_folder(config=None):
    """
    Return the results folder path from the configuration.
    Relative paths are taken relative to the repository root.
    """
    config = get_config() if config is None else config
    folder_path = config.get("Results_Folder")
    if not folder_path:
        raise ValueError("Results_Folder not found in config.json")
    if not os.path.isabs(folder_path):
        base_dir = os.path.dirname(os.path.abspath(__file__))
        folder_path = os.path.normpath(os.path.join(base_dir, "..", folder_path))
    return folder_path


def get_experiment_folder(name, results_folder=None):
    """Return the store folder of one experiment (created on demand)."""
    results_folder = get_results_folder() if results_folder is None else results_folder
    folder = os.path.join(results_folder, name)
    os.makedirs(folder, exist_ok=True)
    return folder


def list_experiments(results_folder):
    """Names of the experiments present in the results store, sorted."""
    if not os.path.isdir(results_folder):
        return []
    return sorted(
        entry for entry in os.listdir(results_folder)
        if os.path.isdir(os.path.join(results_folder, entry))
    )


def atomic_write(file_path, write):
    """
    Write a file atomically.

    `write` receives the path of a temporary file in the target directory;
    once it returns the temporary file replaces `file_path`.
    """
    directory = os.path.dirname(os.path.abspath(file_path))
    os.makedirs(directory, exist_ok=True)
    suffix = os.path.splitext(file_path)[1]
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=suffix)
    os.close(fd)
    try:
        write(tmp_path)
        os.replace(tmp_path, file_path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def write_text(text, file_path):
    """Atomically write a text file."""
    def _write(tmp_path):
        with open(tmp_path, "w", newline="") as f:
            f.write(text)
    atomic_write(file_path, _write)


def write_csv(df, file_path, header_comment=None):
    """Atomically write a DataFrame as CSV, optionally behind a `# ...` comment line."""
    text = df.to_csv(index=False, lineterminator="\n")
    if header_comment:
        text = f"# {header_comment}\n" + text
    write_text(text, file_path)


def read_csv(file_path):
    """Read a CSV written by write_csv (comment lines skipped)."""
    return pd.read_csv(file_path, comment="#")


def load_dataframe(file_path, columns=None):
    """Load a Parquet file into a Pandas DataFrame, returning an empty DataFrame if not found."""
    if os.path.exists(file_path):
        try:
            return pd.read_parquet(file_path)
        except Exception as e:
            logger.error(f"Error loading {file_path}: {e}")
    return pd.DataFrame(columns=columns) if columns else pd.DataFrame()


def save_dataframe(df, file_path):
    """Atomically save a Pandas DataFrame to a Parquet file."""
    atomic_write(file_path, lambda tmp_path: df.to_parquet(tmp_path, index=False))


def setup_logging(verbose=False):
    """Configure the root logger with a single stream handler."""
    level = logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        force=True,
    )
