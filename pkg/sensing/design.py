"""
Exact dyadic designs.

Every coordinate is a dyadic rational k * 2^-i held as integers. Internally
points are keyed by their numerator at the fixed level KEY_LEVEL, so grid
membership, ordering and range counts are integer operations.
"""
import logging
from dataclasses import dataclass
from functools import total_ordering

import numpy as np
import pandas as pd

from sensing.errors import InconsistentDesignError, InvalidInputError
from sensing.wavelet_basis import support_cover, support_cover_arrays

logger = logging.getLogger(__name__)

KEY_LEVEL = 60
UNDEFINED = None
UNDEFINED_LEVEL = -1


def _canonical(index, level):
    if index == 0:
        return 0, 0
    trailing = (index & -index).bit_length() - 1
    shift = min(trailing, level)
    return index >> shift, level - shift


@total_ordering
@dataclass(frozen=True)
class DyadicPoint:
    """The dyadic rational index * 2^-level in [0, 1), in canonical form."""
    index: int
    level: int

    def __post_init__(self):
        if self.level < 0 or self.level > KEY_LEVEL:
            raise InvalidInputError(f"level {self.level} outside [0, {KEY_LEVEL}]")
        if not 0 <= self.index < 2 ** self.level:
            raise InvalidInputError(f"{self.index} * 2^-{self.level} is outside [0, 1)")
        if (self.index, self.level) != _canonical(self.index, self.level):
            raise InvalidInputError(f"{self.index} * 2^-{self.level} is not in canonical form")

    @classmethod
    def of(cls, index, level):
        """Build a point from any (numerator, level) pair."""
        if level < 0 or not 0 <= index < 2 ** level:
            raise InvalidInputError(f"{index} * 2^-{level} is outside [0, 1)")
        return cls(*_canonical(index, level))

    @classmethod
    def from_key(cls, key):
        return cls.of(int(key), KEY_LEVEL)

    @property
    def key(self):
        return self.index << (KEY_LEVEL - self.level)

    def __lt__(self, other):
        if not isinstance(other, DyadicPoint):
            return NotImplemented
        return self.key < other.key

    def __float__(self):
        return self.index / 2 ** self.level

    def __repr__(self):
        return f"DyadicPoint({self.index}/2^{self.level})"


def key_levels(keys):
    """Canonical levels of an array of keys."""
    keys = np.asarray(keys, dtype=np.int64)
    lowbit = keys & -keys
    levels = np.zeros(len(keys), dtype=np.int64)
    nonzero = lowbit > 0
    levels[nonzero] = KEY_LEVEL - np.log2(lowbit[nonzero].astype(float)).astype(np.int64)
    return levels


def refinement_cap(n):
    """i_max with 2^{i_max} = n^2 (floored for n not a power of two)."""
    return max((n * n).bit_length() - 1, 0)


class Design:
    """
    A growing set of distinct dyadic design points.

    Sorted key arrays and per-level indexes are rebuilt lazily after
    mutation; membership and single-cell queries go through a hash set.
    """

    def __init__(self, points=()):
        self._members = set()
        self._invalidate()
        for point in points:
            self.add(point)

    def _invalidate(self):
        self._sorted = None
        self._levels = None
        self._upto = None

    def __len__(self):
        return len(self._members)

    @property
    def size(self):
        return len(self._members)

    def __contains__(self, point):
        return point.key in self._members

    def contains_key(self, key):
        return int(key) in self._members

    def add(self, point):
        """Add one point; returns False if it was already present."""
        key = point.key
        if key in self._members:
            return False
        self._members.add(key)
        self._invalidate()
        return True

    def add_keys(self, keys):
        """Add points given by key; returns how many were new."""
        before = len(self._members)
        self._members.update(int(k) for k in keys)
        added = len(self._members) - before
        if added:
            self._invalidate()
        return added

    @property
    def keys(self):
        if self._sorted is None:
            keys = np.fromiter(self._members, dtype=np.int64, count=len(self._members))
            keys.sort()
            keys.setflags(write=False)
            self._sorted = keys
        return self._sorted

    @property
    def levels(self):
        if self._levels is None:
            self._levels = key_levels(self.keys)
        return self._levels

    @property
    def finest_level(self):
        return int(self.levels.max()) if len(self) else 0

    def points(self):
        return [DyadicPoint.from_key(k) for k in self.keys]

    def _keys_upto(self, level):
        # sorted keys of the points whose canonical level is <= level
        if self._upto is None:
            keys, levels = self.keys, self.levels
            self._upto = [keys[levels <= i] for i in range(self.finest_level + 1)]
        return self._upto[min(level, len(self._upto) - 1)]

    def count_upto(self, level, lo_keys, hi_keys):
        """Points of level <= `level` in each key range [lo, hi)."""
        arr = self._keys_upto(level)
        return np.searchsorted(arr, hi_keys, side="left") - np.searchsorted(arr, lo_keys, side="left")

    def grid_missing(self, cell, level, partition_level):
        """Keys of 2^-level Z inside cell I_cell (width 2^-partition_level) not yet in the design."""
        if level < partition_level:
            raise InvalidInputError(f"grid level {level} is coarser than the partition level {partition_level}")
        if not 0 <= cell < 2 ** partition_level:
            raise InvalidInputError(f"cell {cell} out of range at level {partition_level}")
        if level > KEY_LEVEL:
            raise InvalidInputError(f"grid level {level} exceeds {KEY_LEVEL}")
        span = 1 << (level - partition_level)
        shift = KEY_LEVEL - level
        return [
            m << shift for m in range(cell * span, (cell + 1) * span)
            if (m << shift) not in self._members
        ]

    def insert_grid(self, cell, level, partition_level):
        """Make 2^-level Z ∩ I_cell part of the design; returns the number of points added."""
        return self.add_keys(self.grid_missing(cell, level, partition_level))

    def _grid_complete(self, cell, level, partition_level):
        span = 1 << (level - partition_level)
        shift = KEY_LEVEL - level
        return all((m << shift) in self._members for m in range(cell * span, (cell + 1) * span))

    def cell_level(self, cell, partition_level, known_full=None):
        """
        Largest i >= partition_level with 2^-i Z ∩ I_cell inside the design,
        or UNDEFINED if the cell's left endpoint is missing.
        """
        level = partition_level if known_full is None else known_full + 1
        if known_full is None and not self._grid_complete(cell, level, partition_level):
            return UNDEFINED
        if known_full is None:
            level += 1
        while level <= KEY_LEVEL and self._grid_complete(cell, level, partition_level):
            level += 1
        return level - 1

    def cell_levels(self, partition_level):
        """Vectorised cell_level for every cell; UNDEFINED_LEVEL where undefined."""
        cells = 2 ** partition_level
        shift = KEY_LEVEL - partition_level
        bounds = np.arange(cells + 1, dtype=np.int64) << shift
        result = np.full(cells, UNDEFINED_LEVEL, dtype=np.int64)
        if not len(self):
            return result
        alive = np.ones(cells, dtype=bool)
        for level in range(partition_level, max(partition_level, self.finest_level) + 1):
            counts = self.count_upto(level, bounds[:-1], bounds[1:])
            alive &= counts == (1 << (level - partition_level))
            result[alive] = level
            if not alive.any():
                break
        return result

    def embedded_levels(self, j, spec):
        """
        i_n(j, k) for every k at level j: the largest i in (j, i_max] with
        2^-i Z ∩ S_{j,k} inside the design, UNDEFINED_LEVEL if none.
        """
        size = 2 ** j
        result = np.full(size, UNDEFINED_LEVEL, dtype=np.int64)
        top = min(self.finest_level, refinement_cap(len(self)), KEY_LEVEL)
        if j + 1 > top:
            return result
        lo1, hi1, lo2, hi2 = support_cover_arrays(j, spec)
        shift = KEY_LEVEL - j
        lo1, hi1, lo2, hi2 = lo1 << shift, hi1 << shift, lo2 << shift, hi2 << shift
        widths = ((hi1 - lo1) + (hi2 - lo2)) >> shift
        alive = np.arange(size)
        for level in range(j + 1, top + 1):
            counts = (self.count_upto(level, lo1[alive], hi1[alive])
                      + self.count_upto(level, lo2[alive], hi2[alive]))
            full = counts == widths[alive] << (level - j)
            result[alive[full]] = level
            alive = alive[full]
            if not len(alive):
                break
        return result

    def nearest_left_index(self, query_keys):
        """Positions in `keys` of the largest design point <= each query."""
        positions = np.searchsorted(self.keys, query_keys, side="right") - 1
        if len(positions) and positions.min() < 0:
            raise InvalidInputError("design has no point at or left of the query (0 must be a design point)")
        return positions

    def to_frame(self):
        keys = self.keys
        levels = self.levels
        numerators = [int(k) >> (KEY_LEVEL - int(i)) for k, i in zip(keys, levels)]
        return pd.DataFrame({"numerator": numerators, "level": levels.astype(int)})

    @classmethod
    def from_frame(cls, df):
        return cls(DyadicPoint.of(int(m), int(i)) for m, i in zip(df["numerator"], df["level"]))


@dataclass(frozen=True)
class EffectiveDensity:
    partition_level: int
    values: np.ndarray
    levels: np.ndarray
    n: int

    def integral(self):
        return float(np.sum(self.values) / 2 ** self.partition_level)


def uniform_design(n0):
    """The design {(i - 1)/n0 : 1 <= i <= n0} for n0 a power of two."""
    if n0 < 1 or n0 & (n0 - 1):
        raise InvalidInputError(f"n0={n0} is not a power of two")
    level = n0.bit_length() - 1
    design = Design()
    design.add_keys(np.arange(n0, dtype=np.int64) << (KEY_LEVEL - level))
    return design


def insert_grid(design, cell, level, partition_level):
    return design.insert_grid(cell, level, partition_level)


def effective_density(design, partition_level):
    """q_l = 2^{cell_level(l)} / n per cell at the partition level (0 where undefined)."""
    if not len(design):
        raise InvalidInputError("effective density of an empty design")
    levels = design.cell_levels(partition_level)
    n = len(design)
    values = np.where(levels >= 0, np.exp2(np.maximum(levels, 0).astype(float)) / n, 0.0)
    return EffectiveDensity(partition_level, values, levels, n)


def finest_embedded_level(design, j, k, spec):
    """i_n(j, k), or UNDEFINED when no level i > j has its grid on S_{j,k} in the design."""
    cover = support_cover(j, k, spec)
    top = min(design.finest_level, refinement_cap(len(design)), KEY_LEVEL)
    found = UNDEFINED
    for level in range(j + 1, top + 1):
        for piece in cover:
            lo, hi = piece.at_level(KEY_LEVEL)
            expected = (piece.hi - piece.lo) << (level - j)
            if int(design.count_upto(level, np.array([lo]), np.array([hi]))[0]) != expected:
                return found
        found = level
    return found


def nearest_left(design, x):
    """Largest design point <= x."""
    position = design.nearest_left_index(np.array([x.key], dtype=np.int64))[0]
    return DyadicPoint.from_key(design.keys[position])


class Observations:
    """Observed values keyed by design point."""

    def __init__(self):
        self._values = {}

    def __len__(self):
        return len(self._values)

    def __contains__(self, point):
        return point.key in self._values

    def __getitem__(self, point):
        return self._values[point.key]

    def record(self, keys, values):
        for key, value in zip(keys, values):
            self._values[int(key)] = float(value)

    def values_at(self, keys):
        """Observations at the given keys, inconsistent-design if any is missing."""
        try:
            return np.array([self._values[int(k)] for k in keys], dtype=float)
        except KeyError as e:
            point = DyadicPoint.from_key(e.args[0])
            raise InconsistentDesignError(f"no observation at design point {point}")

    def scaled(self, factor):
        other = Observations()
        other._values = {k: factor * v for k, v in self._values.items()}
        return other

    @classmethod
    def from_function(cls, design, fn):
        """Noise-free observations of a callable on [0, 1) at every design point."""
        obs = cls()
        keys = design.keys
        obs.record(keys, fn(keys.astype(float) / 2.0 ** KEY_LEVEL))
        return obs
