"""
Donoho-Johnstone test signals scaled to sd 7, and seminorm / detectability
checkers for finite wavelet expansions.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from sensing.errors import InvalidInputError
from sensing.wavelet_basis import CoefficientPyramid, fwt_forward, support_cover

logger = logging.getLogger(__name__)

TARGET_SD = 7.0
SD_LEVEL = 17

# Knot locations and heights as distributed with WaveLab's MakeSignal.
KNOTS = np.array([0.10, 0.13, 0.15, 0.23, 0.25, 0.40, 0.44, 0.65, 0.76, 0.78, 0.81])
BLOCK_HEIGHTS = np.array([4, -5, 3, -4, 5, -4.2, 2.1, 4.3, -3.1, 2.1, -4.2])
BUMP_HEIGHTS = np.array([4, 5, 3, 4, 5, 4.2, 2.1, 4.3, 3.1, 5.1, 4.2])
BUMP_WIDTHS = np.array([0.005, 0.005, 0.006, 0.01, 0.01, 0.03, 0.01, 0.01, 0.005, 0.008, 0.005])


class FunctionName(Enum):
    BLOCKS = "blocks"
    BUMPS = "bumps"
    HEAVISINE = "heavisine"
    DOPPLER = "doppler"

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            choices = ", ".join(m.value for m in cls)
            raise InvalidInputError(f"unknown test function {name!r} (choose from {choices})")


def _blocks(x):
    return np.sum((1 + np.sign(x[:, None] - KNOTS)) * BLOCK_HEIGHTS / 2, axis=1)


def _bumps(x):
    return np.sum(BUMP_HEIGHTS / (1 + np.abs((x[:, None] - KNOTS) / BUMP_WIDTHS)) ** 4, axis=1)


def _heavisine(x):
    return 4 * np.sin(4 * np.pi * x) - np.sign(x - 0.3) - np.sign(0.72 - x)


def _doppler(x):
    return np.sqrt(x * (1 - x)) * np.sin(2 * np.pi * 1.05 / (x + 0.05))


_FORMULAS = {
    FunctionName.BLOCKS: _blocks,
    FunctionName.BUMPS: _bumps,
    FunctionName.HEAVISINE: _heavisine,
    FunctionName.DOPPLER: _doppler,
}


def raw_signal(name, x):
    """The unscaled closed form on [0, 1]."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any((x < 0) | (x > 1)) or np.any(np.isnan(x)):
        raise InvalidInputError("test functions are defined on [0, 1] only")
    return _FORMULAS[FunctionName.parse(name)](x)


@lru_cache(maxsize=None)
def scale_factor(name):
    """c with population sd of c * f on the level-17 grid equal to 7."""
    name = FunctionName.parse(name)
    grid = np.arange(2 ** SD_LEVEL) / 2 ** SD_LEVEL
    return TARGET_SD / float(np.std(raw_signal(name, grid)))


@dataclass(frozen=True)
class TestFunction:
    name: FunctionName
    scale: float

    def __call__(self, x):
        return evaluate(self, x)

    @property
    def label(self):
        return self.name.value


def get_test_function(name):
    name = FunctionName.parse(name)
    return TestFunction(name, scale_factor(name))


def evaluate(fn, x):
    """f(x) for a scalar or array x in [0, 1]."""
    values = fn.scale * raw_signal(fn.name, x)
    return float(values[0]) if np.ndim(x) == 0 else values


@lru_cache(maxsize=16)
def _grid_samples(name, scale, level):
    samples = scale * raw_signal(name, np.arange(2 ** level) / 2 ** level)
    samples.setflags(write=False)
    return samples


def sample_grid(fn, level):
    """f(2^-level k), k = 0..2^level - 1 (cached, read-only)."""
    return _grid_samples(fn.name, float(fn.scale), level)


@dataclass(frozen=True)
class FiniteExpansion:
    """Coefficients alpha_{j0,.} and beta_{j,.} for j0 <= j < depth."""
    alpha: np.ndarray
    details: tuple
    spec: object

    @property
    def coarsest_level(self):
        return self.spec.j0

    @property
    def depth(self):
        return self.coarsest_level + len(self.details)

    def beta(self, j):
        return self.details[j - self.coarsest_level]

    @classmethod
    def from_pyramid(cls, pyramid, spec):
        if pyramid.coarsest_level != spec.j0:
            raise InvalidInputError(f"pyramid starts at level {pyramid.coarsest_level}, expected {spec.j0}")
        return cls(np.asarray(pyramid.scaling, dtype=float), tuple(pyramid.details), spec)

    @classmethod
    def from_function(cls, fn, spec, depth):
        """Coefficients of a test signal from its level-`depth` samples."""
        samples = sample_grid(fn, depth) * 2.0 ** (-depth / 2)
        return cls.from_pyramid(fwt_forward(samples, spec), spec)

    def to_pyramid(self):
        return CoefficientPyramid(self.alpha, self.details, self.depth)

    def to_frame(self):
        """Detail coefficients with columns j, k, x = 2^-j k, beta."""
        frames = [
            pd.DataFrame({"j": j, "k": np.arange(2 ** j), "x": np.arange(2 ** j) / 2 ** j, "beta": self.beta(j)})
            for j in range(self.coarsest_level, self.depth)
        ]
        if not frames:
            return pd.DataFrame(columns=["j", "k", "x", "beta"])
        return pd.concat(frames, ignore_index=True)


def besov_seminorm(expansion, r, p):
    """max over levels of 2^{j(r + 1/2 - 1/p)} ||coefficients at level j||_p."""
    if not r > 0:
        raise InvalidInputError(f"r must be positive, got {r}")
    if p < 1:
        raise InvalidInputError(f"p must be in [1, inf], got {p}")
    if math.isinf(p):
        return holder_seminorm(expansion, r)
    j0 = expansion.coarsest_level
    exponent = r + 0.5 - 1.0 / p
    terms = [2.0 ** (j0 * exponent) * np.sum(np.abs(expansion.alpha) ** p) ** (1.0 / p)]
    for offset, beta in enumerate(expansion.details):
        terms.append(2.0 ** ((j0 + offset) * exponent) * np.sum(np.abs(beta) ** p) ** (1.0 / p))
    return float(max(terms))


def _interval(interval):
    if interval is None:
        return 0.0, 1.0
    start, end = interval
    if not 0 <= start < end <= 1:
        raise InvalidInputError(f"interval {interval} is not a sub-interval of [0, 1]")
    return float(start), float(end)


def _inside(j, k, spec, start, end):
    return all(start <= piece.start and piece.end <= end for piece in support_cover(j, k, spec))


def _meets(j, k, spec, start, end):
    return any(piece.start < end and start < piece.end for piece in support_cover(j, k, spec))


def holder_seminorm(expansion, s, interval=None):
    """
    max over levels of 2^{j(s + 1/2)} max{|coefficient_{j,k}| : S_{j,k} ⊆ I},
    the alpha term included. I is [start, end), default [0, 1).
    """
    if not s > 0:
        raise InvalidInputError(f"s must be positive, got {s}")
    start, end = _interval(interval)
    spec = expansion.spec
    j0 = expansion.coarsest_level
    best = 0.0
    levels = [(j0, expansion.alpha)] + [(j0 + d, b) for d, b in enumerate(expansion.details)]
    for j, values in levels:
        inside = [k for k in range(2 ** j) if _inside(j, k, spec, start, end)]
        if inside:
            best = max(best, 2.0 ** (j * (s + 0.5)) * float(np.max(np.abs(values[inside]))))
    return best


@dataclass(frozen=True)
class DetectabilityResult:
    detectable: bool
    violation: Optional[Tuple[int, int]]
    depth: int

    def __bool__(self):
        return self.detectable


def _contains_cover(outer, inner):
    return all(any(o.contains(piece) for o in outer) for piece in inner)


def _parents(j, k, parent_level, spec):
    """k' at parent_level whose wrapped support contains that of (j, k)."""
    size = 2 ** parent_level
    ratio = 2 ** (j - parent_level)
    centre = k // ratio
    L = spec.half_support
    inner = support_cover(j, k, spec)
    candidates = sorted({(centre + offset) % size for offset in range(-L, L + 1)})
    return [c for c in candidates if _contains_cover(support_cover(parent_level, c, spec), inner)]


def check_detectable(expansion, s, t, interval=None):
    """
    Parent condition: for j >= ceil(j0 / t) and S_{j,k} meeting I, some
    floor(t j) <= j' < j and S_{j',k'} ⊇ S_{j,k} with
    |β_{j',k'}| >= (j'/j) 2^{(j-j')(s+1/2)} |β_{j,k}|.

    Only levels inside the expansion are checked.
    """
    if not 0 < t < 1:
        raise InvalidInputError(f"t must be in (0, 1), got {t}")
    start, end = _interval(interval)
    spec = expansion.spec
    j0 = expansion.coarsest_level
    first = math.ceil(j0 / t)
    for j in range(max(first, j0 + 1), expansion.depth):
        beta = expansion.beta(j)
        lowest = max(math.floor(t * j), j0)
        for k in np.flatnonzero(beta):
            k = int(k)
            if not _meets(j, k, spec, start, end):
                continue
            magnitude = abs(beta[k])
            found = False
            for parent_level in range(lowest, j):
                bound = (parent_level / j) * 2.0 ** ((j - parent_level) * (s + 0.5)) * magnitude
                parent_beta = expansion.beta(parent_level)
                if any(abs(parent_beta[c]) >= bound for c in _parents(j, k, parent_level, spec)):
                    found = True
                    break
            if not found:
                logger.debug(f"Parent condition fails at ({j}, {k})")
                return DetectabilityResult(False, (j, k), expansion.depth)
    return DetectabilityResult(True, None, expansion.depth)
