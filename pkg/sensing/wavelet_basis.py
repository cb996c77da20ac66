"""
Orthonormal compactly-supported wavelet analysis and synthesis on dyadic
grids of [0, 1).

The transform is periodized. Filters are aligned so that the basis functions
phi_{j,k} and psi_{j,k} live on S_{j,k} = 2^-j [k - L + 1, k + L) (wrapped
modulo 1 near the boundary), which keeps the index of a coefficient tied to
its location on [0, 1).
"""
import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np
import pywt

from sensing.errors import InvalidInputError

logger = logging.getLogger(__name__)

FILTER_TOLERANCE = 1e-12


class BoundaryMode(Enum):
    PERIODIZED = "periodized"
    # boundary-adapted filters on the interval; a spec can name it, the transforms refuse it
    INTERVAL = "interval"


@dataclass(frozen=True)
class DyadicInterval:
    """The half-open interval [lo * 2^-level, hi * 2^-level)."""
    lo: int
    hi: int
    level: int

    @property
    def start(self):
        return self.lo / 2 ** self.level

    @property
    def end(self):
        return self.hi / 2 ** self.level

    @property
    def width(self):
        return (self.hi - self.lo) / 2 ** self.level

    def at_level(self, level):
        """Endpoints as numerators at a finer level."""
        if level < self.level:
            raise InvalidInputError(f"cannot express level-{self.level} interval at level {level}")
        shift = level - self.level
        return self.lo << shift, self.hi << shift

    def contains(self, other):
        level = max(self.level, other.level)
        lo, hi = self.at_level(level)
        olo, ohi = other.at_level(level)
        return lo <= olo and ohi <= hi

    def intersects(self, other):
        level = max(self.level, other.level)
        lo, hi = self.at_level(level)
        olo, ohi = other.at_level(level)
        return lo < ohi and olo < hi

    def __str__(self):
        return f"[{self.lo}/2^{self.level}, {self.hi}/2^{self.level})"


@dataclass(frozen=True)
class WaveletSpec:
    low_pass_filter: tuple
    vanishing_moments: int
    half_support: int
    coarsest_level: int
    boundary_mode: BoundaryMode = BoundaryMode.PERIODIZED

    def __post_init__(self):
        if self.vanishing_moments < 1 or self.half_support < 1 or self.coarsest_level < 0:
            raise InvalidInputError(
                f"need N >= 1, L >= 1, j0 >= 0 (got N={self.vanishing_moments}, "
                f"L={self.half_support}, j0={self.coarsest_level})"
            )
        h = np.asarray(self.low_pass_filter, dtype=float)
        if h.ndim != 1 or len(h) != 2 * self.half_support:
            raise InvalidInputError(f"filter must have 2L = {2 * self.half_support} taps, got {len(h)}")
        if abs(h.sum() - np.sqrt(2.0)) > FILTER_TOLERANCE:
            raise InvalidInputError(f"filter taps sum to {h.sum()!r}, expected sqrt(2)")
        for m in range(self.half_support):
            inner = float(np.dot(h[: len(h) - 2 * m], h[2 * m:]))
            expected = 1.0 if m == 0 else 0.0
            if abs(inner - expected) > FILTER_TOLERANCE:
                raise InvalidInputError(f"filter is not orthonormal at shift {2 * m}: {inner!r}")

    @property
    def h(self):
        return np.asarray(self.low_pass_filter, dtype=float)

    @property
    def g(self):
        h = self.h
        signs = np.where(np.arange(len(h)) % 2 == 0, 1.0, -1.0)
        return signs * h[::-1]

    @property
    def j0(self):
        return self.coarsest_level


def daubechies(vanishing_moments=8, coarsest_level=5):
    """
    Daubechies wavelet spec with N vanishing moments (filter length 2N).
    Defaults are N = 8, j0 = 5.
    """
    try:
        taps = pywt.Wavelet(f"db{vanishing_moments}").rec_lo
    except ValueError as e:
        raise InvalidInputError(f"no Daubechies filter with N={vanishing_moments}: {e}")
    return WaveletSpec(
        low_pass_filter=tuple(float(t) for t in taps),
        vanishing_moments=vanishing_moments,
        half_support=vanishing_moments,
        coarsest_level=coarsest_level,
    )


def haar(coarsest_level=0):
    return daubechies(1, coarsest_level)


def load_filter_table(path, coarsest_level=5):
    """
    Read a filter-table file: header line `N L [boundary]`, then one tap per line.
    """
    with open(path, "r") as f:
        lines = [line.strip() for line in f if line.strip() and not line.lstrip().startswith("#")]
    if not lines:
        raise InvalidInputError(f"{path} is empty")
    try:
        header = lines[0].split()
        n_moments, half_support = (int(v) for v in header[:2])
        boundary = BoundaryMode(header[2]) if len(header) > 2 else BoundaryMode.PERIODIZED
        taps = tuple(float(v) for v in lines[1:])
    except ValueError as e:
        raise InvalidInputError(f"Error reading filter table {path}: {e}")
    logger.debug(f"Loaded {len(taps)} {boundary.value} filter taps from {path}")
    return WaveletSpec(taps, n_moments, half_support, coarsest_level, boundary)


@dataclass(frozen=True)
class CoefficientPyramid:
    scaling: np.ndarray
    details: tuple
    top_level: int

    def __post_init__(self):
        j0 = self.coarsest_level
        if j0 < 0:
            raise InvalidInputError(f"pyramid has {len(self.details)} detail levels above level {self.top_level}")
        if len(self.scaling) != 2 ** j0:
            raise InvalidInputError(f"scaling vector has length {len(self.scaling)}, expected {2 ** j0}")
        for offset, d in enumerate(self.details):
            if len(d) != 2 ** (j0 + offset):
                raise InvalidInputError(f"detail level {j0 + offset} has length {len(d)}")

    @property
    def coarsest_level(self):
        return self.top_level - len(self.details)

    def detail(self, j):
        return self.details[j - self.coarsest_level]

    def energy(self):
        return float(np.sum(self.scaling ** 2) + sum(np.sum(d ** 2) for d in self.details))


@lru_cache(maxsize=None)
def _filter_index(fine_length, half_support):
    # row k holds the fine indices 2k + n - (L - 1), n = 0..2L-1, wrapped
    k = np.arange(fine_length // 2)[:, None]
    n = np.arange(2 * half_support)[None, :]
    index = (2 * k + n - (half_support - 1)) % fine_length
    index.setflags(write=False)
    return index


def _analysis_step(x, h, g, half_support):
    windows = x[_filter_index(len(x), half_support)]
    return windows @ h, windows @ g


def _synthesis_step(a, d, h, g, half_support):
    fine_length = 2 * len(a)
    index = _filter_index(fine_length, half_support)
    weights = a[:, None] * h[None, :] + d[:, None] * g[None, :]
    return np.bincount(index.ravel(), weights=weights.ravel(), minlength=fine_length)


def _require_periodized(spec):
    if spec.boundary_mode is not BoundaryMode.PERIODIZED:
        raise InvalidInputError(
            f"{spec.boundary_mode.value} boundary filters are not supported by the transform; use periodized"
        )


def dyadic_level(length):
    """log2(length) for a power of two, else invalid-input."""
    if length < 1 or length & (length - 1):
        raise InvalidInputError(f"length {length} is not a power of two")
    return length.bit_length() - 1


def fwt_forward(values, spec):
    """
    Forward transform of 2^i samples at level i down to the coarsest level.

    Returns the pyramid (alpha at j0, beta at j0..i-1).
    """
    _require_periodized(spec)
    values = np.asarray(values, dtype=float)
    if values.ndim != 1:
        raise InvalidInputError("values must be a vector")
    top_level = dyadic_level(len(values))
    if top_level <= spec.j0:
        raise InvalidInputError(f"level {top_level} must exceed the coarsest level {spec.j0}")
    h, g, half_support = spec.h, spec.g, spec.half_support
    a = values
    details = []
    for _ in range(top_level - spec.j0):
        a, d = _analysis_step(a, h, g, half_support)
        details.append(d)
    details.reverse()
    return CoefficientPyramid(scaling=a, details=tuple(details), top_level=top_level)


def fwt_inverse(pyramid, spec):
    """Exact inverse of fwt_forward."""
    _require_periodized(spec)
    if pyramid.coarsest_level != spec.j0:
        raise InvalidInputError(
            f"pyramid starts at level {pyramid.coarsest_level}, spec coarsest level is {spec.j0}"
        )
    h, g, half_support = spec.h, spec.g, spec.half_support
    a = np.asarray(pyramid.scaling, dtype=float)
    for d in pyramid.details:
        a = _synthesis_step(a, np.asarray(d, dtype=float), h, g, half_support)
    return a


def support(j, k, spec):
    """S_{j,k} = 2^-j [k - L + 1, k + L) clipped to [0, 1)."""
    if not 0 <= k < 2 ** j:
        raise InvalidInputError(f"k={k} out of range for level {j}")
    L = spec.half_support
    return DyadicInterval(max(k - L + 1, 0), min(k + L, 2 ** j), j)


def support_cover(j, k, spec):
    """
    Support of the periodized phi_{j,k} / psi_{j,k}: S_{j,k} before clipping,
    wrapped modulo 1, as one or two disjoint intervals sorted by start.
    """
    if not 0 <= k < 2 ** j:
        raise InvalidInputError(f"k={k} out of range for level {j}")
    size = 2 ** j
    L = spec.half_support
    lo, hi = k - L + 1, k + L
    if hi - lo >= size:
        return (DyadicInterval(0, size, j),)
    if lo < 0:
        return (DyadicInterval(0, hi, j), DyadicInterval(lo + size, size, j))
    if hi > size:
        return (DyadicInterval(0, hi - size, j), DyadicInterval(lo, size, j))
    return (DyadicInterval(lo, hi, j),)


def support_cover_arrays(j, spec):
    """
    Vectorised support_cover for every k at level j.

    Returns (lo1, hi1, lo2, hi2) numerator arrays at level j; the second
    piece is empty (lo2 == hi2) when the support does not wrap.
    """
    size = 2 ** j
    L = spec.half_support
    k = np.arange(size, dtype=np.int64)
    lo, hi = k - L + 1, k + L
    if 2 * L - 1 >= size:
        full = np.full(size, size, dtype=np.int64)
        zero = np.zeros(size, dtype=np.int64)
        return zero, full, zero, zero.copy()
    lo1 = np.clip(lo, 0, size)
    hi1 = np.clip(hi, 0, size)
    lo2 = np.where(lo < 0, lo + size, 0)
    hi2 = np.where(lo < 0, size, np.where(hi > size, hi - size, 0))
    return lo1, hi1, lo2, hi2
