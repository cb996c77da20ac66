"""
Staged adaptive selection of design points.

Each stage ranks the surviving wavelet coefficients, turns them into a
piecewise-constant target density on the cells I_l = 2^-P [l, l + 1), and
adds whole dyadic grids to the cell with the largest target-to-effective
density ratio until the stage budget is spent.
"""
import heapq
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from sensing.design import (
    KEY_LEVEL,
    DyadicPoint,
    Design,
    Observations,
    effective_density,
    key_levels,
    uniform_design,
)
from sensing.errors import DesignInvariantError, InvalidInputError, ScheduleInfeasibleError
from sensing.estimator import (
    EstimatorConfig,
    apply_threshold,
    estimate_practical,
    j_max,
    localized_sigma,
)
from sensing.wavelet_basis import daubechies, support_cover

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StageSchedule:
    """n_0 = 2^j, n_m = floor(2^{j + tau m})."""
    j: int
    tau: float

    def __post_init__(self):
        if self.j < 0:
            raise InvalidInputError(f"schedule needs j >= 0, got {self.j}")
        if not self.tau > 0:
            raise InvalidInputError(f"schedule needs tau > 0, got {self.tau}")

    @classmethod
    def from_n0(cls, n0, tau):
        if n0 < 1 or n0 & (n0 - 1):
            raise InvalidInputError(f"n0={n0} is not a power of two")
        return cls(n0.bit_length() - 1, tau)

    @property
    def n0(self):
        return 2 ** self.j

    def size(self, m):
        return math.floor(2.0 ** (self.j + self.tau * m))

    def stage_sizes(self, n_total):
        """n_1, n_2, ... up to the budget, the last one clipped at n_total."""
        if n_total < self.n0:
            raise InvalidInputError(f"budget {n_total} is below n0={self.n0}")
        sizes = []
        m = 1
        while (sizes[-1] if sizes else self.n0) < n_total:
            sizes.append(min(self.size(m), n_total))
            m += 1
        return sizes

    def ratios(self, n_total):
        sizes = [self.n0] + self.stage_sizes(n_total)
        return [b / a for a, b in zip(sizes, sizes[1:])]

    def validate(self, n_total, j0):
        """
        Check that stage sizes strictly increase and every stage can afford
        its mandatory grid. Raises ScheduleInfeasibleError otherwise.
        """
        previous_n = self.n0
        present = self.j
        for m, n_m in enumerate(self.stage_sizes(n_total), start=1):
            if n_m <= previous_n:
                raise ScheduleInfeasibleError(f"stage {m}: n_m={n_m} does not exceed n_(m-1)={previous_n}")
            level = j_max(n_m, j0)
            mandatory = 2 ** level - 2 ** min(present, level)
            if mandatory > n_m - previous_n:
                raise ScheduleInfeasibleError(
                    f"stage {m}: level-{level} grid needs {mandatory} points, "
                    f"budget is {n_m - previous_n}"
                )
            previous_n = n_m
            present = max(present, level)
        return True


@dataclass(frozen=True)
class TargetDensity:
    partition_level: int
    raw: np.ndarray
    normalizer: float
    lam: float

    @property
    def values(self):
        return self.normalizer * self.raw

    def integral(self):
        return float(np.sum(self.values) / 2 ** self.partition_level)


@dataclass(frozen=True)
class SensingConfig:
    spec: object = field(default_factory=daubechies)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    lam: float = 0.5
    estimate_level: int = 17

    def __post_init__(self):
        if not self.lam > 0:
            raise InvalidInputError(f"lambda must be positive, got {self.lam}")


@dataclass(frozen=True)
class Batch:
    """One greedy insertion: grid level `level` in cell `cell` (None for the mandatory grid)."""
    cell: Optional[int]
    level: int
    keys: tuple
    complete: bool


@dataclass(frozen=True)
class StageRecord:
    stage: int
    n: int
    j_max: int
    sigma_hat: float
    surviving: int
    min_ratio: float = float("nan")
    floor: float = float("nan")
    new_keys: tuple = ()


@dataclass
class SensingState:
    design: Design
    observations: Observations
    schedule: StageSchedule
    config: SensingConfig
    n_total: int
    stage: int = 0
    coefficients: Optional[object] = None
    sigma_hat: float = float("nan")
    records: list = field(default_factory=list)

    def trajectory_frame(self):
        return pd.DataFrame(
            [(r.stage, r.n, r.j_max, r.sigma_hat, r.surviving, r.min_ratio, r.floor) for r in self.records],
            columns=["stage", "n", "j_max", "sigma_hat", "surviving", "min_ratio", "floor"],
        )

    def design_frame(self):
        """Points added at each stage: columns stage, numerator, level."""
        frames = []
        for r in self.records:
            keys = np.asarray(r.new_keys, dtype=np.int64)
            levels = key_levels(keys)
            frames.append(pd.DataFrame({
                "stage": r.stage,
                "numerator": [int(k) >> (KEY_LEVEL - int(i)) for k, i in zip(keys, levels)],
                "level": levels.astype(int),
            }))
        if not frames:
            return pd.DataFrame(columns=["stage", "numerator", "level"])
        return pd.concat(frames, ignore_index=True)


def rank_magnitudes(values):
    """Rank 1 for the largest |value|, ties by ascending index. Returns ranks indexed by position."""
    order = np.argsort(-np.abs(np.asarray(values, dtype=float)), kind="stable")
    ranks = np.empty(len(order), dtype=np.int64)
    ranks[order] = np.arange(1, len(order) + 1)
    return ranks


def rank_coefficients(coeffs, j):
    """r_j over the thresholded coefficients of level j, indexed by k."""
    return rank_magnitudes(coeffs.thresholded()[j - coeffs.coarsest_level])


def target_density(coeffs, partition_level, lam, spec):
    """
    raw_l = max({lam} ∪ {2^j / (r_j(k) J^2) : I_l ⊆ S_{j,k}, β̂ᵀ_{j,k} != 0}) over
    j0 <= j < J = coeffs.j_max, normalised so the density integrates to 1.
    """
    if not lam > 0:
        raise InvalidInputError(f"lambda must be positive, got {lam}")
    cells = 2 ** partition_level
    raw = np.full(cells, float(lam))
    top = coeffs.j_max
    thresholded = coeffs.thresholded()
    for j in range(coeffs.coarsest_level, min(top, coeffs.top_level)):
        if j >= partition_level:
            raise InvalidInputError(f"partition level {partition_level} must exceed coefficient level {j}")
        beta = thresholded[j - coeffs.coarsest_level]
        nonzero = np.flatnonzero(beta != 0)
        if not len(nonzero):
            continue
        ranks = rank_coefficients(coeffs, j)
        shift = partition_level - j
        for k in nonzero:
            value = 2.0 ** j / (ranks[k] * top ** 2)
            for piece in support_cover(j, int(k), spec):
                lo, hi = piece.lo << shift, piece.hi << shift
                np.maximum(raw[lo:hi], value, out=raw[lo:hi])
    normalizer = 1.0 / (np.sum(raw) / cells)
    return TargetDensity(partition_level, raw, normalizer, float(lam))


def discrepancy(raw, cell_levels):
    """Per-cell raw_l / 2^{c_l}: p_l / q_l up to the common factor A n."""
    return np.ldexp(raw, -np.asarray(cell_levels, dtype=np.int64))


def refine_design(design, raw, partition_level, n_target, max_level=None):
    """
    Greedy max-discrepancy refinement.

    Adds the missing points of the 2^-P grid, then repeatedly fills the next
    grid level in the cell maximising raw_l / 2^{c_l} (ties: smallest l)
    until the design has n_target points. Cells already at `max_level` are
    refined only once every cell has reached it. Mutates `design`; returns
    the batches in insertion order.
    """
    P = partition_level

    def priority(l):
        saturated = max_level is not None and levels[l] >= max_level
        return saturated, -math.ldexp(float(raw[l]), -int(levels[l])), l

    shift = KEY_LEVEL - P
    grid = np.arange(2 ** P, dtype=np.int64) << shift
    mandatory = [int(k) for k in grid if not design.contains_key(k)]
    if len(design) + len(mandatory) > n_target:
        raise ScheduleInfeasibleError(
            f"level-{P} grid needs {len(mandatory)} new points, only {n_target - len(design)} remain in the stage"
        )
    design.add_keys(mandatory)
    batches = [Batch(None, P, tuple(mandatory), True)]

    levels = design.cell_levels(P)
    heap = [priority(l) for l in range(2 ** P)]
    heapq.heapify(heap)
    while len(design) < n_target:
        *_, l = heapq.heappop(heap)
        level = int(levels[l]) + 1
        missing = design.grid_missing(l, level, P)
        taken = missing[: n_target - len(design)]
        design.add_keys(taken)
        complete = len(taken) == len(missing)
        batches.append(Batch(l, level, tuple(taken), complete))
        if complete:
            levels[l] = design.cell_level(l, P, known_full=level)
        heapq.heappush(heap, priority(l))
    return batches


def check_stage(design, batches, partition_level, n_target):
    """
    Halving and budget checks for one stage's batches.

    Starting from the cell levels before the greedy ran, every batch in
    cell l must hold points of level c_l + 1 only, no more than the
    2^{c_l - P} such a grid adds, and a complete batch raises c_l by
    exactly one. Only the stage's last batch may be partial. The design
    must end at those cell levels with n_target points. Raises
    DesignInvariantError.
    """
    P = partition_level
    if len(design) != n_target:
        raise DesignInvariantError(f"design holds {len(design)} points, the stage budget is {n_target}")
    added = {int(k) for b in batches if b.cell is not None for k in b.keys}
    start = Design()
    start.add_keys(k for k in design.keys.tolist() if k not in added)
    levels = start.cell_levels(P)
    for position, batch in enumerate(batches):
        if batch.cell is None:
            continue
        expected = int(levels[batch.cell]) + 1
        if batch.level != expected:
            raise DesignInvariantError(f"cell {batch.cell}: batch at level {batch.level}, cell was at {expected - 1}")
        keys = np.asarray(batch.keys, dtype=np.int64)
        if len(keys) > 2 ** (batch.level - 1 - P) or (len(keys) and (key_levels(keys) != batch.level).any()):
            raise DesignInvariantError(f"cell {batch.cell}: batch does not hold a level-{batch.level} grid")
        if batch.complete:
            levels[batch.cell] = batch.level
        elif position != len(batches) - 1:
            raise DesignInvariantError(f"cell {batch.cell}: partial batch before the end of the stage")
    final = design.cell_levels(P)
    if (final != levels).any():
        l = int(np.flatnonzero(final != levels)[0])
        raise DesignInvariantError(f"cell {l} is at level {final[l]}, its batches account for {levels[l]}")
    return True


def discrepancy_floor(ratios):
    """
    Lower bound on min_l q_l / p_l for stage ratios in [1 + 2C, D].

    The greedy guarantees C / D - eps, where eps covers the one halving step
    that can leave a cell short of its share: a cell is refined a whole
    grid level at a time, so its effective density lags the target by at
    most a factor 2. Taking eps = C / (2D) gives C / (2D), which the
    invariant never undercuts.
    """
    if not ratios:
        return 0.0
    c = (min(ratios) - 1) / 2
    d = max(ratios)
    return c / d / 2


def _observe(state, oracle, keys):
    keys = np.sort(np.asarray(keys, dtype=np.int64))
    if len(keys):
        state.observations.record(keys, oracle(keys))
    return keys


def _stage_estimate(state):
    config = state.config
    n = len(state.design)
    level = min(max(state.design.finest_level, j_max(n, config.spec.j0)), config.estimate_level)
    coeffs = estimate_practical(state.design, state.observations, config.spec, config.estimator, level)
    sigma = config.estimator.sigma
    if sigma is None:
        sigma = localized_sigma(state.design, state.observations, config.spec, config.estimator, level)
    state.coefficients = apply_threshold(coeffs, config.estimator, sigma=sigma)
    state.sigma_hat = sigma
    return state.coefficients


def _stage_batches(state, m, target=None):
    sizes = state.schedule.stage_sizes(state.n_total)
    if not 1 <= m <= len(sizes):
        raise InvalidInputError(f"stage {m} is outside the schedule (1..{len(sizes)})")
    n_m = sizes[m - 1]
    P = j_max(n_m, state.config.spec.j0)
    if target is None:
        target = target_density(state.coefficients, P, state.config.lam, state.config.spec)
    batches = refine_design(state.design, target.raw, P, n_m, max_level=state.config.estimate_level)
    check_stage(state.design, batches, P, n_m)
    return batches


def select_stage_points(state, m, target=None):
    """
    Grow the design from n_(m-1) to n_m points. Returns the new points in
    insertion order.
    """
    return [DyadicPoint.from_key(k) for b in _stage_batches(state, m, target) for k in b.keys]


def run(oracle, schedule, config=None, n_total=None):
    """
    The sensing loop. `oracle` maps an ascending array of point keys to
    observations. Returns the final state with one StageRecord per stage.
    """
    config = SensingConfig() if config is None else config
    n_total = schedule.n0 if n_total is None else n_total
    spec = config.spec
    schedule.validate(n_total, spec.j0)
    design = uniform_design(schedule.n0)
    state = SensingState(design, Observations(), schedule, config, n_total)
    keys = _observe(state, oracle, design.keys)
    coeffs = _stage_estimate(state)
    state.records.append(StageRecord(
        0, len(design), coeffs.j_max, state.sigma_hat, coeffs.surviving_count(), new_keys=tuple(keys),
    ))
    logger.debug(f"Stage 0: n={len(design)}, sigma_hat={state.sigma_hat:.4f}")

    ratios = schedule.ratios(n_total)
    floor = discrepancy_floor(ratios)
    for m, n_m in enumerate(schedule.stage_sizes(n_total), start=1):
        P = j_max(n_m, spec.j0)
        target = target_density(state.coefficients, P, config.lam, spec)
        points = select_stage_points(state, m, target)
        keys = _observe(state, oracle, [p.key for p in points])
        state.stage = m

        q = effective_density(state.design, P)
        min_ratio = float(np.min(q.values / target.values))
        if min_ratio < floor:
            logger.warning(f"Stage {m}: min q/p = {min_ratio:.4f} is below the discrepancy floor {floor:.4f}")

        coeffs = _stage_estimate(state)
        state.records.append(StageRecord(
            m, len(state.design), P, state.sigma_hat, coeffs.surviving_count(),
            min_ratio, floor, tuple(keys),
        ))
        logger.debug(
            f"Stage {m}: n={len(state.design)}, j_max={P}, sigma_hat={state.sigma_hat:.4f}, "
            f"surviving={coeffs.surviving_count()}"
        )
    if len(state.design) != n_total or len(state.observations) != n_total:
        raise DesignInvariantError(
            f"run ended with {len(state.design)} points and {len(state.observations)} observations, budget {n_total}"
        )
    return state
