"""
Command-line front end.

    python Adaptive_Sensing.py run --function doppler --sigma 1 --n 16384
    python Adaptive_Sensing.py compare --reps 50 --jobs 8 --out table.csv
    python Adaptive_Sensing.py sweep --out sweep.csv
    python Adaptive_Sensing.py dump-estimate --function bumps --level 12 --out curves.csv --samples samples.csv
    python Adaptive_Sensing.py plot sweep.csv --out sweep.svg
"""
import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from sensing import harness
from sensing.errors import ConfigError, InvalidInputError, ScheduleInfeasibleError, SensingError
from sensing.harness import DesignMode, ExperimentConfig
from sensing.plots import emit_plot
from sensing.test_functions import FiniteExpansion, FunctionName, get_test_function
from sensing.utils import (
    get_config,
    get_experiment_folder,
    get_results_folder,
    save_dataframe,
    setup_logging,
    write_csv,
)

logger = logging.getLogger(__name__)

COMMANDS = (
    "run", "compare", "sweep", "dump-design", "dump-function", "dump-coefficients", "dump-estimate", "plot",
)
EXIT_OK, EXIT_FAILURE, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 1, 2, 3

BUILTIN_DEFAULTS = {
    "function": "doppler",
    "sigma": "1",
    "n": "16384",
    "design": "adaptive",
    "reps": 250,
    "seed": 0,
    "kappa": 1.0,
    "lambda": 0.5,
    "tau": 0.5,
    "n0": 64,
    "j0": 5,
    "vanishing_moments": 8,
    "jerr": 17,
    "jobs": 1,
    "format": "svg",
    "level": 12,
}
VALUE_TYPES = {
    "function": str, "sigma": str, "n": str, "design": str, "reps": int, "seed": int,
    "kappa": float, "lambda": float, "tau": float, "n0": int, "j0": int,
    "vanishing_moments": int, "jerr": int, "jobs": int, "format": str, "level": int,
}
# config.json names of the project defaults
CONFIG_FILE_KEYS = {
    "Kappa": "kappa",
    "Lambda": "lambda",
    "Tau": "tau",
    "N0": "n0",
    "J0": "j0",
    "Vanishing_Moments": "vanishing_moments",
    "J_Err": "jerr",
    "Replications": "reps",
    "Jobs": "jobs",
    "Seed": "seed",
}
COMPARE_SIGMAS = "0.5,1,2"
COMPARE_N = "16384"
SWEEP_NS = "1024,2048,4096,8192,16384"


@dataclass(frozen=True)
class CliConfig:
    command: str
    values: dict = field(default_factory=dict)
    out: str = None
    input: str = None
    samples: str = None
    name: str = None
    store: bool = True
    known_sigma: bool = False

    @property
    def functions(self):
        return [FunctionName.parse(f).value for f in _split(self.values["function"])]

    @property
    def sigmas(self):
        return [_number(s, float, "sigma") for s in _split(self.values["sigma"])]

    @property
    def ns(self):
        return [_number(n, int, "n") for n in _split(self.values["n"])]

    def experiment(self, function=None, sigma=None, n=None):
        v = self.values
        try:
            return ExperimentConfig(
                function=function or self.functions[0],
                sigma=self.sigmas[0] if sigma is None else sigma,
                n_total=self.ns[0] if n is None else n,
                design=DesignMode(v["design"]),
                replications=v["reps"],
                seed=v["seed"],
                j_err=v["jerr"],
                kappa=v["kappa"],
                lam=v["lambda"],
                tau=v["tau"],
                n0=v["n0"],
                j0=v["j0"],
                vanishing_moments=v["vanishing_moments"],
                known_sigma=self.known_sigma,
            )
        except ValueError as e:
            raise ConfigError(str(e))


def _split(text):
    return [part.strip() for part in str(text).split(",") if part.strip()]


def _number(text, kind, name):
    try:
        return kind(text)
    except ValueError:
        raise ConfigError(f"invalid {name} value {text!r}")


def _coerce(key, value):
    kind = VALUE_TYPES.get(key)
    if kind is None:
        raise ConfigError(f"unknown configuration key {key!r}")
    if kind is str:
        return str(value)
    return _number(value, kind, key)


def _normalise_key(key):
    key = CONFIG_FILE_KEYS.get(key, key)
    return key.strip().lstrip("-").replace("-", "_").lower()


def load_config_file(path):
    """A JSON object, or `key = value` lines with # comments."""
    try:
        with open(path, "r") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"Error loading {path}: {e}")
    if text.lstrip().startswith("{"):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Error loading {path}: {e}")
    else:
        raw = {}
        for number, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{number}: expected `key = value`")
            key, value = line.split("=", 1)
            raw[key.strip()] = value.strip()
    return {_normalise_key(k): _coerce(_normalise_key(k), v) for k, v in raw.items()}


def _project_defaults():
    try:
        config = get_config()
    except (OSError, ValueError) as e:
        logger.warning(f"Error loading config.json: {e}; using built-in defaults")
        return {}
    return {CONFIG_FILE_KEYS[k]: _coerce(CONFIG_FILE_KEYS[k], v) for k, v in config.items() if k in CONFIG_FILE_KEYS}


def resolve_values(args, environ=None):
    """built-in <- config.json <- --config <- flags; AWS_SEED when no seed was set explicitly."""
    environ = os.environ if environ is None else environ
    values = dict(BUILTIN_DEFAULTS)
    values.update(_project_defaults())
    explicit = load_config_file(args.config) if args.config else {}
    for key in VALUE_TYPES:
        flag = getattr(args, key, None)
        if flag is not None:
            explicit[key] = _coerce(key, flag)
    if "seed" not in explicit and environ.get("AWS_SEED"):
        explicit["seed"] = _number(environ["AWS_SEED"], int, "AWS_SEED")
    values.update(explicit)
    if args.command == "compare":
        if "sigma" not in explicit:
            values["sigma"] = COMPARE_SIGMAS
        if "function" not in explicit:
            values["function"] = ",".join(f.value for f in FunctionName)
        if "n" not in explicit:
            values["n"] = COMPARE_N
    elif args.command == "sweep" and "n" not in explicit:
        values["n"] = SWEEP_NS
    return values


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--function", help="test function (comma list for compare)")
    common.add_argument("--sigma", help="noise sd (comma list for compare)")
    common.add_argument("--n", help="sample budget (comma list for sweep)")
    common.add_argument("--design", choices=[m.value for m in DesignMode])
    common.add_argument("--reps", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--kappa", type=float)
    common.add_argument("--lambda", dest="lambda", type=float)
    common.add_argument("--tau", type=float)
    common.add_argument("--n0", type=int)
    common.add_argument("--j0", type=int)
    common.add_argument("--vanishing-moments", dest="vanishing_moments", type=int)
    common.add_argument("--jerr", type=int)
    common.add_argument("--jobs", type=int)
    common.add_argument("--out")
    common.add_argument("--format", choices=["csv", "svg"])
    common.add_argument("--level", type=int, help="grid level for dump-function, dump-coefficients and dump-estimate")
    common.add_argument("--samples", help="dump-estimate: also write the noisy observations here")
    common.add_argument("--known-sigma", action="store_true", help="threshold with the true sigma")
    common.add_argument("--config", help="JSON or `key = value` file overriding config.json")
    common.add_argument("--print-config", action="store_true")
    common.add_argument("--name", help="experiment name in the results store")
    common.add_argument("--no-store", action="store_true", help="do not write the parquet results store")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="Adaptive_Sensing.py", description="Spatially-adaptive sensing experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        p = sub.add_parser(command, parents=[common])
        if command == "plot":
            p.add_argument("input", help="report, sweep, estimate, coefficient or sample CSV")
    return parser


def _emit_table(df, out, header_comment=None):
    if out:
        write_csv(df, out, header_comment)
        logger.info(f"Wrote {len(df)} rows to {out}")
    else:
        if header_comment:
            sys.stdout.write(f"# {header_comment}\n")
        sys.stdout.write(df.to_csv(index=False, lineterminator="\n"))


def _store(cli, default_name, frames):
    if not cli.store:
        return None
    folder = get_experiment_folder(cli.name or default_name, get_results_folder())
    for file_name, df in frames.items():
        save_dataframe(df, os.path.join(folder, file_name))
    logger.info(f"Stored {', '.join(sorted(frames))} in {folder}")
    return folder


def cmd_run(cli):
    if len(cli.functions) != 1 or len(cli.sigmas) != 1 or len(cli.ns) != 1:
        raise ConfigError("run takes a single --function, --sigma and --n")
    config = cli.experiment()
    jobs = cli.values["jobs"]
    frames = {}
    if config.design is DesignMode.ADAPTIVE and cli.store:
        first, state = harness.run_replication(config, 0, keep_state=True)
        results = [first] + harness.replicate(config, jobs, reps=range(1, config.replications))
        frames["trajectory.parquet"] = state.trajectory_frame()
        frames["design.parquet"] = state.design_frame()
    else:
        results = harness.replicate(config, jobs)
    df = harness.results_frame(results)
    _emit_table(df[harness.RESULT_COLUMNS], cli.out)
    frames["runs.parquet"] = df
    _store(cli, f"run-{config.function}-{config.design.value}-sigma{config.sigma:g}-n{config.n_total}", frames)
    median = float(np.median(df["max_error"]))
    logger.info(f"Median max error over {len(df)} runs: {median:.4f}")
    return EXIT_OK


def cmd_compare(cli):
    if len(cli.ns) != 1:
        raise ConfigError("compare takes a single --n")
    config = cli.experiment(function=cli.functions[0], sigma=cli.sigmas[0])
    report, results = harness.compare(cli.functions, cli.sigmas, config, cli.values["jobs"])
    df = report.to_frame()
    _emit_table(df, cli.out, report.note)
    _store(cli, f"compare-n{config.n_total}-seed{config.seed}", {
        "report.parquet": df,
        "runs.parquet": harness.results_frame(results),
    })
    return EXIT_OK


def cmd_sweep(cli):
    if len(cli.functions) != 1 or len(cli.sigmas) != 1:
        raise ConfigError("sweep takes a single --function and --sigma")
    ns = cli.ns
    config = cli.experiment(n=max(ns))
    df, results = harness.sweep(ns, config, cli.values["jobs"])
    _emit_table(df, cli.out)
    _store(cli, f"sweep-{config.function}-sigma{config.sigma:g}-seed{config.seed}", {
        "sweep.parquet": df,
        "runs.parquet": harness.results_frame(results),
    })
    for design, rows in df.groupby("design"):
        logger.info(f"{design}: log-log slope {harness.loglog_slope(rows['n'], rows['median']):.3f}")
    return EXIT_OK


def cmd_dump_design(cli):
    config = replace(cli.experiment(), design=DesignMode.ADAPTIVE)
    _, state = harness.run_replication(config, 0, keep_state=True)
    _emit_table(state.design.to_frame(), cli.out)
    _store(cli, f"design-{config.function}-sigma{config.sigma:g}-n{config.n_total}", {
        "design.parquet": state.design_frame(),
        "trajectory.parquet": state.trajectory_frame(),
    })
    return EXIT_OK


def cmd_dump_function(cli):
    level = cli.values["level"]
    if not 0 <= level <= 24:
        raise ConfigError(f"level must be in [0, 24], got {level}")
    fn = get_test_function(cli.functions[0])
    x = np.arange(2 ** level) / 2 ** level
    _emit_table(pd.DataFrame({"x": x, "f(x)": fn(x)}), cli.out)
    return EXIT_OK


def _grid_level(cli, config):
    level = cli.values["level"]
    if not config.j0 < level <= 24:
        raise ConfigError(f"level must be in ({config.j0}, 24], got {level}")
    return level


def cmd_dump_coefficients(cli):
    config = cli.experiment()
    level = _grid_level(cli, config)
    expansion = FiniteExpansion.from_function(get_test_function(config.function), config.spec, level)
    _emit_table(expansion.to_frame(), cli.out)
    return EXIT_OK


def cmd_dump_estimate(cli):
    config = cli.experiment()
    curves, samples = harness.estimate_curves(config, level=_grid_level(cli, config))
    _emit_table(curves, cli.out)
    if cli.samples:
        write_csv(samples, cli.samples)
        logger.info(f"Wrote {len(samples)} observations to {cli.samples}")
    _store(cli, f"estimate-{config.function}-sigma{config.sigma:g}-n{config.n_total}-seed{config.seed}", {
        "curves.parquet": curves,
        "samples.parquet": samples,
    })
    return EXIT_OK


def cmd_plot(cli):
    fmt = cli.values["format"]
    out = cli.out or os.path.splitext(cli.input)[0] + f".{fmt}"
    emit_plot(cli.input, out, fmt)
    return EXIT_OK


HANDLERS = {
    "run": cmd_run,
    "compare": cmd_compare,
    "sweep": cmd_sweep,
    "dump-design": cmd_dump_design,
    "dump-function": cmd_dump_function,
    "dump-coefficients": cmd_dump_coefficients,
    "dump-estimate": cmd_dump_estimate,
    "plot": cmd_plot,
}


def parse_cli(argv, environ=None):
    """argv -> (CliConfig, parsed args). Usage errors raise SystemExit(2)."""
    args = build_parser().parse_args(argv)
    values = resolve_values(args, environ)
    cli = CliConfig(
        command=args.command,
        values=values,
        out=args.out,
        input=getattr(args, "input", None),
        samples=args.samples,
        name=args.name,
        store=not args.no_store,
        known_sigma=args.known_sigma,
    )
    return cli, args


def run_command(argv=None, environ=None):
    """Entry point; returns the process exit code."""
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cli, args = parse_cli(argv, environ)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_CONFIG
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG

    setup_logging(args.verbose)
    if args.print_config:
        print(json.dumps({"command": cli.command, **cli.values, "known_sigma": cli.known_sigma}, indent=2, sort_keys=True))
        return EXIT_OK
    try:
        return HANDLERS[cli.command](cli)
    except ScheduleInfeasibleError as e:
        logger.error(f"Infeasible schedule: {e}")
        return EXIT_INFEASIBLE
    except (ConfigError, InvalidInputError) as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except SensingError as e:
        logger.error(f"An error occurred: {e}")
        return EXIT_FAILURE


def main():
    sys.exit(run_command())
