"""
Wavelet-threshold estimation of f under an arbitrary dyadic design.
"""
import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Optional

import numpy as np
import pandas as pd

from sensing.design import KEY_LEVEL, UNDEFINED_LEVEL
from sensing.errors import (
    EstimationUnavailableError,
    InconsistentDesignError,
    InvalidInputError,
    UndefinedResolutionError,
)
from sensing.wavelet_basis import CoefficientPyramid, fwt_forward, fwt_inverse

logger = logging.getLogger(__name__)

MAD_NORMALIZER = 0.6745


class EstimatorMode(Enum):
    THEORETICAL = "theoretical"
    PRACTICAL = "practical"


def j_max(n, j0):
    """j_max(n) = max(j0 + 1, floor(log2(n / ln n))); j0 + 1 below two points."""
    if n < 2:
        return j0 + 1
    return max(j0 + 1, math.floor(math.log2(n / math.log(n))))


@dataclass(frozen=True)
class EstimatorConfig:
    kappa: float = 1.0
    sigma: Optional[float] = None  # None: estimate from the data
    mode: EstimatorMode = EstimatorMode.PRACTICAL
    j_max_rule: Callable = j_max

    def __post_init__(self):
        if self.kappa < 0:
            raise InvalidInputError(f"kappa must be non-negative, got {self.kappa}")
        if self.sigma is not None and self.sigma < 0:
            raise InvalidInputError(f"sigma must be non-negative, got {self.sigma}")


@dataclass(frozen=True)
class CoefficientSet:
    """
    Estimated coefficients with their resolution indices.

    beta_hat[d], i_n[d] and surviving[d] hold level coarsest_level + d.
    i_n uses UNDEFINED_LEVEL (-1) where no grid is available.
    """
    alpha_hat: np.ndarray
    beta_hat: tuple
    i_n: tuple
    surviving: tuple
    n: int
    coarsest_level: int
    j_max: int
    mode: EstimatorMode
    sigma_used: Optional[float] = None

    @property
    def top_level(self):
        return self.coarsest_level + len(self.beta_hat)

    @property
    def levels(self):
        return range(self.coarsest_level, self.top_level)

    def beta(self, j):
        return self.beta_hat[j - self.coarsest_level]

    def resolution(self, j):
        return self.i_n[j - self.coarsest_level]

    def survivors(self, j):
        return self.surviving[j - self.coarsest_level]

    def thresholded(self):
        """β̂ᵀ per level: β̂ where surviving, else 0."""
        return tuple(np.where(s, b, 0.0) for b, s in zip(self.beta_hat, self.surviving))

    def surviving_count(self):
        return int(sum(int(s.sum()) for s in self.surviving))

    def scaled(self, factor):
        return replace(
            self,
            alpha_hat=factor * self.alpha_hat,
            beta_hat=tuple(factor * b for b in self.beta_hat),
        )

    def to_frame(self):
        """Coefficient dump with columns j,k,i_n,beta_hat,surviving."""
        frames = []
        for j in self.levels:
            i_n = self.resolution(j)
            frames.append(pd.DataFrame({
                "j": j,
                "k": np.arange(len(i_n)),
                "i_n": pd.Series(i_n, dtype="Int64").mask(i_n < 0),
                "beta_hat": self.beta(j),
                "surviving": self.survivors(j),
            }))
        if not frames:
            return pd.DataFrame(columns=["j", "k", "i_n", "beta_hat", "surviving"])
        return pd.concat(frames, ignore_index=True)


def threshold_scale(j, k, i_n, n, sigma):
    """e_n(j, k) = sigma * 2^{-i_n/2} * sqrt(2 ln n)."""
    if i_n is None or i_n < 0:
        raise UndefinedResolutionError(f"i_n({j}, {k}) is undefined; the coefficient must be zeroed")
    if n < 2:
        raise InvalidInputError(f"threshold needs n >= 2, got {n}")
    return sigma * 2.0 ** (-i_n / 2) * math.sqrt(2.0 * math.log(n))


def _grid_keys(level):
    return np.arange(2 ** level, dtype=np.int64) << (KEY_LEVEL - level)


def _design_values(design, observations):
    return observations.values_at(design.keys)


def _present_grid(design, values, level):
    """Level-`level` scaling vector from observations at grid points, zero where absent."""
    grid = _grid_keys(level)
    keys = design.keys
    positions = np.minimum(np.searchsorted(keys, grid), len(keys) - 1)
    present = keys[positions] == grid
    return np.where(present, 2.0 ** (-level / 2) * values[positions], 0.0)


def _nearest_left_grid(design, values, level):
    positions = design.nearest_left_index(_grid_keys(level))
    return 2.0 ** (-level / 2) * values[positions]


def estimate_theoretical(design, observations, spec, config=EstimatorConfig(), top_level=None):
    """
    Estimates of alpha_{j0,k} and beta_{j,k}, j0 <= j < j_max(n), each from
    the finest grid i_n(j, k) the design holds on its support.

    `top_level` extends the estimated levels past j_max(n); coefficients with
    no grid finer than their level keep i_n undefined and beta 0.
    """
    n = len(design)
    j0 = spec.j0
    top = config.j_max_rule(n, j0) if top_level is None else top_level
    if top <= j0:
        raise InvalidInputError(f"top level {top} must exceed the coarsest level {j0}")
    values = _design_values(design, observations)
    i_n = [design.embedded_levels(j, spec) for j in range(j0, top)]
    alpha_levels = i_n[0] if i_n else design.embedded_levels(j0, spec)
    if (alpha_levels < 0).any():
        k = int(np.flatnonzero(alpha_levels < 0)[0])
        raise InconsistentDesignError(f"no grid finer than level {j0} covers the support of phi_{j0},{k}")

    needed = {int(i) for i in np.unique(alpha_levels)}
    for levels in i_n:
        needed.update(int(i) for i in np.unique(levels[levels >= 0]))
    # one transform per distinct grid level; coefficients read off by i_n
    pyramids = {level: fwt_forward(_present_grid(design, values, level), spec) for level in sorted(needed)}

    alpha = np.empty(2 ** j0)
    for level in np.unique(alpha_levels):
        mask = alpha_levels == level
        alpha[mask] = pyramids[int(level)].scaling[mask]
    betas = []
    for j, levels in zip(range(j0, top), i_n):
        beta = np.zeros(2 ** j)
        for level in np.unique(levels[levels >= 0]):
            mask = levels == level
            beta[mask] = pyramids[int(level)].detail(j)[mask]
        betas.append(beta)
    logger.debug(f"Theoretical estimate: n={n}, levels {j0}..{top - 1}, grids {sorted(pyramids)}")
    return CoefficientSet(
        alpha_hat=alpha,
        beta_hat=tuple(betas),
        i_n=tuple(i_n),
        surviving=tuple(np.zeros(2 ** j, dtype=bool) for j in range(j0, top)),
        n=n,
        coarsest_level=j0,
        j_max=config.j_max_rule(n, j0),
        mode=EstimatorMode.THEORETICAL,
    )


def estimate_practical(design, observations, spec, config=EstimatorConfig(), target_level=None):
    """
    alpha_{i,k} = 2^{-i/2} Y(nearest design point left of 2^-i k), transformed
    down to j0. Every level below i is estimated; i_n is kept for thresholding.

    Points finer than i never reach the estimate, so i_n is capped at i.
    """
    n = len(design)
    if target_level is None:
        target_level = max(design.finest_level, config.j_max_rule(n, spec.j0))
    if target_level <= spec.j0:
        raise InvalidInputError(f"target level {target_level} must exceed the coarsest level {spec.j0}")
    values = _design_values(design, observations)
    pyramid = fwt_forward(_nearest_left_grid(design, values, target_level), spec)
    i_n = tuple(
        np.minimum(design.embedded_levels(j, spec), target_level) for j in range(spec.j0, target_level)
    )
    return CoefficientSet(
        alpha_hat=pyramid.scaling,
        beta_hat=pyramid.details,
        i_n=i_n,
        surviving=tuple(np.zeros(len(r), dtype=bool) for r in i_n),
        n=n,
        coarsest_level=spec.j0,
        j_max=config.j_max_rule(n, spec.j0),
        mode=EstimatorMode.PRACTICAL,
    )


def estimate(design, observations, spec, config=EstimatorConfig(), target_level=None):
    if config.mode is EstimatorMode.THEORETICAL:
        return estimate_theoretical(design, observations, spec, config)
    return estimate_practical(design, observations, spec, config, target_level)


def estimate_sigma(coeffs):
    """median{2^{i_n/2} |β̂| : j >= j_max - 1, i_n defined} / 0.6745."""
    candidates = []
    for j in coeffs.levels:
        if j < coeffs.j_max - 1:
            continue
        i_n = coeffs.resolution(j)
        defined = i_n >= 0
        candidates.append(np.exp2(i_n[defined] / 2) * np.abs(coeffs.beta(j)[defined]))
    candidates = np.concatenate(candidates) if candidates else np.empty(0)
    if not len(candidates):
        raise EstimationUnavailableError(
            f"no coefficient at level >= {coeffs.j_max - 1} has a defined resolution"
        )
    return float(np.median(candidates) / MAD_NORMALIZER)


def localized_sigma(design, observations, spec, config=EstimatorConfig(), top_level=None):
    """
    estimate_sigma over coefficients read from the grid i_n(j, k) itself, so
    each one carries noise sigma 2^{-i_n/2} exactly. On a design mixing grid
    levels the nearest-left coefficients of the coarse cells are smoothed and
    pull the median down.
    """
    if top_level is None:
        top_level = max(design.finest_level, config.j_max_rule(len(design), spec.j0))
    return estimate_sigma(estimate_theoretical(design, observations, spec, config, top_level))


def apply_threshold(coeffs, config=EstimatorConfig(), sigma=None):
    """
    Hard threshold: β̂ survives iff i_n is defined and |β̂| >= kappa * e_n(j, k).
    sigma defaults to config.sigma, then to estimate_sigma(coeffs).
    """
    if sigma is None:
        sigma = config.sigma if config.sigma is not None else estimate_sigma(coeffs)
    if coeffs.n < 2:
        raise InvalidInputError(f"threshold needs n >= 2, got {coeffs.n}")
    scale = sigma * math.sqrt(2.0 * math.log(coeffs.n))
    surviving = []
    for beta, i_n in zip(coeffs.beta_hat, coeffs.i_n):
        defined = i_n >= 0
        e_n = scale * np.exp2(-np.where(defined, i_n, 0) / 2)
        surviving.append(defined & (np.abs(beta) >= config.kappa * e_n))
    return replace(coeffs, surviving=tuple(surviving), sigma_used=float(sigma))


def thresholded_pyramid(coeffs, output_level):
    details = list(coeffs.thresholded())
    if output_level < coeffs.top_level:
        dropped = details[output_level - coeffs.coarsest_level:]
        if any(np.any(d != 0) for d in dropped):
            raise InvalidInputError(
                f"output level {output_level} is below retained detail level {coeffs.top_level - 1}"
            )
        details = details[:output_level - coeffs.coarsest_level]
    for j in range(coeffs.top_level, output_level):
        details.append(np.zeros(2 ** j))
    return CoefficientPyramid(
        scaling=np.asarray(coeffs.alpha_hat, dtype=float),
        details=tuple(details),
        top_level=output_level,
    )


def reconstruct(coeffs, spec, output_level):
    """f̂(2^-i k) = 2^{i/2} α̂ᵀ_{i,k}, the thresholded pyramid zero-padded to level i."""
    if output_level <= coeffs.coarsest_level:
        raise InvalidInputError(f"output level {output_level} must exceed {coeffs.coarsest_level}")
    if coeffs.coarsest_level != spec.j0:
        raise InvalidInputError(
            f"coefficients start at level {coeffs.coarsest_level}, spec coarsest level is {spec.j0}"
        )
    return 2.0 ** (output_level / 2) * fwt_inverse(thresholded_pyramid(coeffs, output_level), spec)


def fit(design, observations, spec, config=EstimatorConfig(), target_level=None):
    """Estimate in the configured mode and apply the hard threshold."""
    return apply_threshold(estimate(design, observations, spec, config, target_level), config)
