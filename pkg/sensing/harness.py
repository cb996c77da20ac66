"""
Experiment engine: noisy oracles, uniform and adaptive runs, sup-norm error,
seeded replication and the uniform-vs-adaptive comparison.
"""
import logging
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from enum import Enum

import numpy as np
import pandas as pd

from sensing.adaptive_sensing import SensingConfig, StageSchedule, run
from sensing.design import KEY_LEVEL
from sensing.errors import ConfigError
from sensing.estimator import EstimatorConfig, apply_threshold, estimate_practical, j_max, reconstruct
from sensing.stats import mann_whitney_u, median_ci
from sensing.test_functions import get_test_function, sample_grid
from sensing.wavelet_basis import daubechies

logger = logging.getLogger(__name__)

REPORT_NOTE = "arms use independent noise streams"
RESULT_COLUMNS = ["function", "sigma", "design", "rep", "max_error", "sigma_hat", "seconds"]


class DesignMode(Enum):
    UNIFORM = "uniform"
    ADAPTIVE = "adaptive"


ARM_STREAMS = {DesignMode.UNIFORM: 0, DesignMode.ADAPTIVE: 1}


@dataclass(frozen=True)
class ExperimentConfig:
    function: str = "doppler"
    sigma: float = 1.0
    n_total: int = 2 ** 14
    design: DesignMode = DesignMode.ADAPTIVE
    replications: int = 250
    seed: int = 0
    j_err: int = 17
    kappa: float = 1.0
    lam: float = 0.5
    tau: float = 0.5
    n0: int = 64
    j0: int = 5
    vanishing_moments: int = 8
    known_sigma: bool = False

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigError(f"replications must be >= 1, got {self.replications}")
        if self.sigma < 0:
            raise ConfigError(f"sigma must be >= 0, got {self.sigma}")
        if self.n_total < 2:
            raise ConfigError(f"n must be >= 2, got {self.n_total}")
        if self.j_err <= j_max(self.n_total, self.j0):
            raise ConfigError(
                f"error grid level {self.j_err} must exceed j_max(n)={j_max(self.n_total, self.j0)}"
            )

    @property
    def spec(self):
        return daubechies(self.vanishing_moments, self.j0)

    @property
    def estimator(self):
        return EstimatorConfig(kappa=self.kappa, sigma=self.sigma if self.known_sigma else None)

    @property
    def sensing(self):
        return SensingConfig(self.spec, self.estimator, self.lam, self.j_err)

    @property
    def schedule(self):
        return StageSchedule.from_n0(self.n0, self.tau)

    def arm(self, design):
        return replace(self, design=DesignMode(design))

    def to_dict(self):
        values = asdict(self)
        values["design"] = self.design.value
        return values


@dataclass(frozen=True)
class RunResult:
    function: str
    sigma: float
    design: str
    rep: int
    max_error: float
    sigma_hat: float
    seconds: float
    n: int
    finest_level: int


class NoisyOracle:
    """
    Y = f(x) + N(0, sigma^2). Each draw comes from a Philox counter keyed by
    the oracle's stream and set to (point, query count), so a point sees the
    same noise whichever design reaches it and repeated queries stay independent.
    """

    def __init__(self, fn, sigma, stream):
        if sigma < 0:
            raise ConfigError(f"sigma must be >= 0, got {sigma}")
        self.fn = fn
        self.sigma = sigma
        self.key = np.random.SeedSequence(stream).generate_state(2, np.uint64)
        self.queries = Counter()

    def noise(self, key, count=0):
        """The standard normal draw for the count-th query of a point key."""
        bits = np.random.Philox(key=self.key, counter=[int(key), int(count), 0, 0])
        return np.random.Generator(bits).standard_normal()

    def __call__(self, keys):
        keys = np.asarray(keys, dtype=np.int64)
        values = self.fn(keys.astype(float) / 2.0 ** KEY_LEVEL)
        if self.sigma == 0:
            return values
        draws = np.empty(len(keys))
        for position, key in enumerate(keys.tolist()):
            draws[position] = self.noise(key, self.queries[key])
            self.queries[key] += 1
        return values + self.sigma * draws

    def observe(self, point):
        return float(self(np.array([point.key]))[0])


def noisy_oracle(fn, sigma, stream):
    return NoisyOracle(fn, sigma, stream)


def replication_stream(seed, rep, design):
    """Noise stream entropy for one (master seed, replication, arm) triple."""
    return int(seed), int(rep), ARM_STREAMS[DesignMode(design)]


def max_error(f_hat, fn):
    """max over the grid 2^-j Z ∩ [0, 1) of |f_hat - f|, j = log2(len(f_hat))."""
    f_hat = np.asarray(f_hat, dtype=float)
    level = len(f_hat).bit_length() - 1
    if len(f_hat) != 2 ** level:
        raise ConfigError(f"estimate has {len(f_hat)} values, not a power of two")
    return float(np.max(np.abs(f_hat - sample_grid(fn, level))))


def estimate_on_grid(state, level):
    """f̂ on the level-`level` grid from the final design, thresholded with the run's σ̂."""
    config = state.config
    coeffs = estimate_practical(state.design, state.observations, config.spec, config.estimator, level)
    return reconstruct(apply_threshold(coeffs, config.estimator, sigma=state.sigma_hat), config.spec, level)


def _finish(state, fn, sigma, design, rep, started, j_err):
    f_hat = estimate_on_grid(state, j_err)
    return RunResult(
        function=fn.label,
        sigma=sigma,
        design=design.value,
        rep=rep,
        max_error=max_error(f_hat, fn),
        sigma_hat=state.sigma_hat,
        seconds=time.perf_counter() - started,
        n=len(state.design),
        finest_level=state.design.finest_level,
    )


def run_arm(fn, sigma, n, stream, config, design):
    """The final sensing state of one arm: a single stage of n points, or the adaptive schedule."""
    design = DesignMode(design)
    schedule = StageSchedule.from_n0(n, config.tau) if design is DesignMode.UNIFORM else config.schedule
    return run(noisy_oracle(fn, sigma, stream), schedule, config.sensing, n)


def run_uniform_baseline(fn, sigma, n, stream, config=None, rep=0):
    """Uniform design of n points, practical estimator, σ̂ as in the sensing loop."""
    config = ExperimentConfig(n_total=n) if config is None else config
    started = time.perf_counter()
    state = run_arm(fn, sigma, n, stream, config, DesignMode.UNIFORM)
    return _finish(state, fn, sigma, DesignMode.UNIFORM, rep, started, config.j_err)


def run_adaptive(fn, sigma, n_total, stream, config=None, rep=0, keep_state=False):
    config = ExperimentConfig(n_total=n_total) if config is None else config
    started = time.perf_counter()
    state = run_arm(fn, sigma, n_total, stream, config, DesignMode.ADAPTIVE)
    result = _finish(state, fn, sigma, DesignMode.ADAPTIVE, rep, started, config.j_err)
    return (result, state) if keep_state else result


def run_replication(config, rep, keep_state=False):
    """One seeded run of the configured arm."""
    fn = get_test_function(config.function)
    stream = replication_stream(config.seed, rep, config.design)
    if config.design is DesignMode.UNIFORM:
        if keep_state:
            raise ConfigError("design snapshots are recorded for adaptive runs only")
        return run_uniform_baseline(fn, config.sigma, config.n_total, stream, config, rep)
    return run_adaptive(fn, config.sigma, config.n_total, stream, config, rep, keep_state)


def estimate_curves(config, rep=0, level=None):
    """
    One replication of both arms, seen on the level-`level` grid (default
    j_err). Returns (curves, samples): curves has columns x, f(x), uniform,
    adaptive; samples has design, x, y, one row per observed point.
    """
    level = config.j_err if level is None else level
    if level <= config.j0:
        raise ConfigError(f"curve level {level} must exceed j0={config.j0}")
    fn = get_test_function(config.function)
    curves = pd.DataFrame({"x": np.arange(2 ** level) / 2 ** level, "f(x)": sample_grid(fn, level)})
    samples = []
    for design in DesignMode:
        stream = replication_stream(config.seed, rep, design)
        state = run_arm(fn, config.sigma, config.n_total, stream, config, design)
        curves[design.value] = estimate_on_grid(state, level)
        keys = state.design.keys
        samples.append(pd.DataFrame({
            "design": design.value,
            "x": keys.astype(float) / 2.0 ** KEY_LEVEL,
            "y": state.observations.values_at(keys),
        }))
    logger.info(f"Estimated {config.function} curves on the level-{level} grid, rep {rep}")
    return curves, pd.concat(samples, ignore_index=True)


def _run_task(args):
    return run_replication(*args)


def replicate(config, jobs=1, reps=None):
    """Replications of one arm (all of them unless `reps` is given), ordered by replication id."""
    reps = range(config.replications) if reps is None else reps
    tasks = [(config, rep) for rep in reps]
    logger.info(
        f"Processing {len(tasks)} {config.design.value} runs: "
        f"{config.function}, sigma={config.sigma}, n={config.n_total}"
    )
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_task, tasks))
    else:
        results = [_run_task(task) for task in tasks]
    return sorted(results, key=lambda r: r.rep)


def results_frame(results):
    """Results table: function,sigma,design,rep,max_error,sigma_hat,seconds (+ n, finest_level)."""
    df = pd.DataFrame([asdict(r) for r in results])
    if df.empty:
        return pd.DataFrame(columns=RESULT_COLUMNS + ["n", "finest_level"])
    return df


def _summary(errors):
    ci = median_ci(errors)
    return ci.median, ci.lo, ci.hi


@dataclass(frozen=True)
class ComparisonReport:
    rows: tuple
    note: str = REPORT_NOTE

    def to_frame(self):
        columns = [
            "function", "sigma", "n", "reps",
            "median_uniform", "ci_lo_uniform", "ci_hi_uniform",
            "median_adaptive", "ci_lo_adaptive", "ci_hi_adaptive", "p_value",
        ]
        return pd.DataFrame(list(self.rows), columns=columns)


def compare_arms(config, jobs=1):
    """Both arms of one (function, sigma) cell. Returns (report row, run results)."""
    uniform = replicate(config.arm(DesignMode.UNIFORM), jobs)
    adaptive = replicate(config.arm(DesignMode.ADAPTIVE), jobs)
    u_errors = [r.max_error for r in uniform]
    a_errors = [r.max_error for r in adaptive]
    row = (
        config.function, config.sigma, config.n_total, config.replications,
        *_summary(u_errors), *_summary(a_errors),
        mann_whitney_u(u_errors, a_errors).p_value,
    )
    return row, uniform + adaptive


def compare(functions, sigmas, config, jobs=1):
    """Uniform vs adaptive for every function x sigma. Returns (ComparisonReport, results)."""
    rows, results = [], []
    for name in functions:
        for sigma in sigmas:
            row, runs = compare_arms(replace(config, function=name, sigma=sigma), jobs)
            rows.append(row)
            results.extend(runs)
    return ComparisonReport(tuple(rows)), results


def sweep(ns, config, jobs=1):
    """
    Median errors of both arms over sample sizes. One row per (n, design),
    n ascending; p_value compares the two arms at that n.
    """
    rows, results = [], []
    for n in sorted(ns):
        row, runs = compare_arms(replace(config, n_total=n), jobs)
        p_value = row[-1]
        rows.append((n, DesignMode.UNIFORM.value, config.replications, *row[4:7], p_value))
        rows.append((n, DesignMode.ADAPTIVE.value, config.replications, *row[7:10], p_value))
        results.extend(runs)
    df = pd.DataFrame(rows, columns=["n", "design", "reps", "median", "ci_lo", "ci_hi", "p_value"])
    return df, results


def loglog_slope(ns, medians):
    """Least-squares slope of log(median) against log(n)."""
    ns = np.asarray(ns, dtype=float)
    medians = np.asarray(medians, dtype=float)
    if len(ns) < 2 or len(ns) != len(medians):
        raise ConfigError("slope needs at least two (n, median) pairs")
    return float(np.polyfit(np.log(ns), np.log(medians), 1)[0])
