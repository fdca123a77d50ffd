"""Time grids and the Boolean algebra of grid-aligned elementary sets.

A grid splits a rational window [start, end) into ``base**level`` equal cells.
The default base is 2, so refinement is dyadic; base 3 exists for ternary
constructions (iterated majority, middle-thirds calibration) and a composite
base covers odd-width lab windows.  All endpoint arithmetic is exact via
``fractions.Fraction``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

Rational = Union[int, str, Fraction, float]


class GridMismatchError(ValueError):
    """Raised when two objects live on different grids."""


def as_fraction(x: Rational) -> Fraction:
    """Exact conversion; floats are taken at their binary value, never rounded."""
    return Fraction(x)


@dataclass(frozen=True)
class TimeGrid:
    """Equal-cell grid on the half-open window [interval_start, interval_end)."""

    interval_start: Fraction
    interval_end: Fraction
    level: int
    base: int = 2

    def __post_init__(self) -> None:
        object.__setattr__(self, "interval_start", as_fraction(self.interval_start))
        object.__setattr__(self, "interval_end", as_fraction(self.interval_end))
        if self.interval_start >= self.interval_end:
            raise ValueError("interval_start must be strictly below interval_end")
        if self.level < 0:
            raise ValueError("level must be nonnegative")
        if self.base < 2:
            raise ValueError("base must be at least 2")

    @property
    def n_cells(self) -> int:
        return self.base**self.level

    @property
    def cell_length(self) -> Fraction:
        return (self.interval_end - self.interval_start) / self.n_cells

    def boundary(self, i: int) -> Fraction:
        """Time of boundary i, for i in 0..n_cells."""
        if not 0 <= i <= self.n_cells:
            raise ValueError(f"boundary index {i} out of range 0..{self.n_cells}")
        return self.interval_start + self.cell_length * i

    def cell_interval(self, i: int) -> tuple[Fraction, Fraction]:
        if not 0 <= i < self.n_cells:
            raise ValueError(f"cell index {i} out of range 0..{self.n_cells - 1}")
        return self.boundary(i), self.boundary(i + 1)

    def boundary_index(self, t: Rational) -> int:
        """Index of the grid point at time t; raises if t is not a grid point."""
        t = as_fraction(t)
        ratio = (t - self.interval_start) / self.cell_length
        if ratio.denominator != 1 or not 0 <= ratio <= self.n_cells:
            raise ValueError(f"{t} is not a grid point of {self}")
        return int(ratio)

    def cell_of_time(self, t: Rational) -> int:
        t = as_fraction(t)
        if not self.interval_start <= t < self.interval_end:
            raise ValueError(f"{t} outside window [{self.interval_start}, {self.interval_end})")
        return int((t - self.interval_start) / self.cell_length)

    def refine(self, k: int = 1) -> "TimeGrid":
        """Same window, base**k more cells; cell boundaries are preserved."""
        if k < 0:
            raise ValueError("refinement count must be nonnegative")
        return TimeGrid(self.interval_start, self.interval_end, self.level + k, self.base)

    def cells_meeting_open_interval(self, lo: Rational, hi: Rational) -> range:
        """Cell indices whose half-open cell [a, b) meets the open interval (lo, hi)."""
        lo, hi = as_fraction(lo), as_fraction(hi)
        lo = max(lo, self.interval_start)
        hi = min(hi, self.interval_end)
        if hi <= lo:
            return range(0)
        h = self.cell_length
        # need b > lo, i.e. i + 1 > (lo - start)/h; floor works in both parity cases
        q = (lo - self.interval_start) / h
        start = int(q)
        # need a < hi, i.e. i < (hi - start)/h
        r = (hi - self.interval_start) / h
        stop = int(r) if r.denominator == 1 else int(r) + 1
        return range(max(start, 0), min(stop, self.n_cells))

    def __repr__(self) -> str:  # compact, grids appear in many error messages
        return (
            f"TimeGrid([{self.interval_start}, {self.interval_end}), "
            f"level={self.level}, base={self.base})"
        )


def require_same_grid(a: TimeGrid, b: TimeGrid) -> None:
    if a != b:
        raise GridMismatchError(f"grid mismatch: {a} vs {b}")


def _canonical_ranges(ranges: Iterable[tuple[int, int]], n_cells: int) -> tuple[tuple[int, int], ...]:
    cleaned = []
    for lo, hi in ranges:
        if lo < 0 or hi > n_cells:
            raise ValueError(f"range [{lo}, {hi}) outside 0..{n_cells}")
        if lo < hi:
            cleaned.append((int(lo), int(hi)))
    cleaned.sort()
    merged: list[list[int]] = []
    for lo, hi in cleaned:
        if merged and lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return tuple((lo, hi) for lo, hi in merged)


@dataclass(frozen=True)
class ElementarySet:
    """Finite union of grid cells, stored as disjoint sorted index ranges [lo, hi)."""

    grid: TimeGrid
    ranges: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "ranges", _canonical_ranges(self.ranges, self.grid.n_cells))

    # -- constructors -------------------------------------------------------
    @classmethod
    def empty(cls, grid: TimeGrid) -> "ElementarySet":
        return cls(grid, ())

    @classmethod
    def full(cls, grid: TimeGrid) -> "ElementarySet":
        return cls(grid, ((0, grid.n_cells),))

    @classmethod
    def from_cells(cls, grid: TimeGrid, cells: Iterable[int]) -> "ElementarySet":
        return cls(grid, tuple((c, c + 1) for c in sorted(set(int(c) for c in cells))))

    @classmethod
    def parse(cls, grid: TimeGrid, text: str) -> "ElementarySet":
        """Parse "0:2,5:6" style cell-range lists; "" is the empty set."""
        text = text.strip()
        if not text:
            return cls.empty(grid)
        ranges = []
        for part in text.split(","):
            part = part.strip()
            if ":" in part:
                lo, hi = part.split(":")
                ranges.append((int(lo), int(hi)))
            else:
                c = int(part)
                ranges.append((c, c + 1))
        return cls(grid, tuple(ranges))

    # -- queries ------------------------------------------------------------
    @property
    def cell_count(self) -> int:
        return sum(hi - lo for lo, hi in self.ranges)

    @property
    def is_empty(self) -> bool:
        return not self.ranges

    def cells(self) -> tuple[int, ...]:
        return tuple(c for lo, hi in self.ranges for c in range(lo, hi))

    def contains_cell(self, i: int) -> bool:
        return any(lo <= i < hi for lo, hi in self.ranges)

    def mask(self) -> int:
        """Bitmask with bit i set iff cell i belongs to the set."""
        m = 0
        for lo, hi in self.ranges:
            m |= ((1 << (hi - lo)) - 1) << lo
        return m

    def measure(self) -> Fraction:
        return self.grid.cell_length * self.cell_count

    def as_time_intervals(self) -> tuple[tuple[Fraction, Fraction], ...]:
        return tuple((self.grid.boundary(lo), self.grid.boundary(hi)) for lo, hi in self.ranges)

    def format_ranges(self) -> str:
        return ",".join(f"{lo}:{hi}" for lo, hi in self.ranges)

    # -- Boolean algebra ----------------------------------------------------
    def union(self, other: "ElementarySet") -> "ElementarySet":
        require_same_grid(self.grid, other.grid)
        return ElementarySet(self.grid, self.ranges + other.ranges)

    def intersection(self, other: "ElementarySet") -> "ElementarySet":
        require_same_grid(self.grid, other.grid)
        out = []
        i = j = 0
        a, b = self.ranges, other.ranges
        while i < len(a) and j < len(b):
            lo = max(a[i][0], b[j][0])
            hi = min(a[i][1], b[j][1])
            if lo < hi:
                out.append((lo, hi))
            if a[i][1] <= b[j][1]:
                i += 1
            else:
                j += 1
        return ElementarySet(self.grid, tuple(out))

    def complement(self) -> "ElementarySet":
        out = []
        prev = 0
        for lo, hi in self.ranges:
            if prev < lo:
                out.append((prev, lo))
            prev = hi
        if prev < self.grid.n_cells:
            out.append((prev, self.grid.n_cells))
        return ElementarySet(self.grid, tuple(out))

    def difference(self, other: "ElementarySet") -> "ElementarySet":
        return self.intersection(other.complement())

    def __or__(self, other: "ElementarySet") -> "ElementarySet":
        return self.union(other)

    def __and__(self, other: "ElementarySet") -> "ElementarySet":
        return self.intersection(other)

    def __invert__(self) -> "ElementarySet":
        return self.complement()

    def __le__(self, other: "ElementarySet") -> bool:
        return self.intersection(other) == self

    def __repr__(self) -> str:
        body = self.format_ranges() or "empty"
        return f"ElementarySet({body})"


def set_union(a: ElementarySet, b: ElementarySet) -> ElementarySet:
    return a.union(b)


def set_intersection(a: ElementarySet, b: ElementarySet) -> ElementarySet:
    return a.intersection(b)


def set_complement(a: ElementarySet) -> ElementarySet:
    return a.complement()


def left_of(grid: TimeGrid, boundary: int) -> ElementarySet:
    """Cells strictly before grid boundary index `boundary`."""
    if not 0 <= boundary <= grid.n_cells:
        raise ValueError(f"boundary index {boundary} out of range")
    return ElementarySet(grid, ((0, boundary),) if boundary > 0 else ())


def right_of(grid: TimeGrid, boundary: int) -> ElementarySet:
    """Cells at or after grid boundary index `boundary`."""
    if not 0 <= boundary <= grid.n_cells:
        raise ValueError(f"boundary index {boundary} out of range")
    n = grid.n_cells
    return ElementarySet(grid, ((boundary, n),) if boundary < n else ())
