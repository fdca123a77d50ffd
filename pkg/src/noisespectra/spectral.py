"""Spectral measures of noise functionals on finite grids.

The spectral measure of f puts, on every finite cell set S, the summed
squared chaos coefficients whose index has point support S.  Masses are
stored unnormalized, so the total is the squared norm of f; the empty-set
atom is the squared mean.  Conditional expectations become restriction
(multiplication by the indicator of the subsets of a region), adjacent
independent windows multiply, and the one-cell sets carry the first chaos.

Gaussian sources keep two side channels: multiplicity entries (indices whose
total degree on some cell is >= 2, aggregated by support but excluded from
the plain entries and from cardinality reports) and a truncation residual.

Beyond the dense cap a measure can be model-backed instead: a family-supplied
object that samples sets exactly and answers restricted-mass queries.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Protocol

import numpy as np

from .chaos import HERMITE, ChaosCoefficients, index_has_multiplicity, index_support
from .functionals import (
    BackendError,
    BrownianProgram,
    FamilyRef,
    NoiseFunctional,
    joined_grid,
)
from .grid import ElementarySet, GridMismatchError, TimeGrid
from .transform import decompose
from .walsh import DENSE_CELL_CAP


@dataclass(frozen=True)
class SpectralSet:
    """A finite set of grid cells, the support of one spectral atom."""

    grid: TimeGrid
    cells: tuple[int, ...]

    def __post_init__(self) -> None:
        cells = tuple(sorted(set(int(c) for c in self.cells)))
        if cells and not 0 <= cells[0] <= cells[-1] < self.grid.n_cells:
            raise ValueError(f"cells {cells} outside grid with {self.grid.n_cells} cells")
        object.__setattr__(self, "cells", cells)

    @property
    def cardinality(self) -> int:
        return len(self.cells)

    def as_ranges(self) -> tuple[tuple[int, int], ...]:
        """Merged consecutive cell runs, each as a half-open index range."""
        out: list[list[int]] = []
        for c in self.cells:
            if out and c == out[-1][1]:
                out[-1][1] = c + 1
            else:
                out.append([c, c + 1])
        return tuple((lo, hi) for lo, hi in out)


class SpectralModel(Protocol):
    """Exact sampler-and-query backend for measures beyond the dense cap."""

    total_mass: float
    empty_mass: float

    def singleton_mass(self) -> float: ...

    def cardinality_profile(self) -> dict[int, float]: ...

    def subset_mass(self, cells: frozenset[int]) -> float: ...

    def prefix_mass(self, boundary: int) -> float: ...

    def sample(self, k: int, seed: int) -> list[tuple[int, ...]]: ...


@dataclass(eq=False)
class SpectralMeasure:
    grid: TimeGrid
    entries: dict[tuple[int, ...], float] | None
    multiplicity_entries: dict[tuple[int, ...], float] = field(default_factory=dict)
    residual: float = 0.0
    model: SpectralModel | None = None
    _masks: np.ndarray | None = field(default=None, repr=False)
    _masses: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if (self.entries is None) == (self.model is None):
            raise ValueError("exactly one of entries/model must be present")
        if self.entries is not None:
            self.entries = {k: v for k, v in self.entries.items() if v != 0.0}
            self.multiplicity_entries = {
                k: v for k, v in self.multiplicity_entries.items() if v != 0.0
            }

    # -- totals ---------------------------------------------------------------
    @property
    def is_dense(self) -> bool:
        return self.entries is not None

    @property
    def multiplicity_mass(self) -> float:
        if self.is_dense:
            return float(sum(self.multiplicity_entries.values()))
        return getattr(self.model, "multiplicity_mass", 0.0)

    @property
    def total_mass(self) -> float:
        if self.is_dense:
            return float(sum(self.entries.values())) + self.multiplicity_mass + self.residual
        return self.model.total_mass

    @property
    def empty_atom(self) -> float:
        if self.is_dense:
            return float(self.entries.get((), 0.0))
        return self.model.empty_mass

    def mass(self, cells: Iterable[int]) -> float:
        """Mass of one set, multiplicity entries included."""
        key = tuple(sorted(set(int(c) for c in cells)))
        self._require_dense("pointwise mass")
        return float(self.entries.get(key, 0.0) + self.multiplicity_entries.get(key, 0.0))

    def support(self) -> set[tuple[int, ...]]:
        self._require_dense("support enumeration")
        return set(self.entries) | set(self.multiplicity_entries)

    def _require_dense(self, what: str) -> None:
        if not self.is_dense:
            raise BackendError(f"{what} needs a dense measure; this one is sampler-backed")

    def _cached_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if self._masks is None:
            if self.grid.n_cells > 63:
                raise OverflowError("bitmask cache limited to 63 cells")
            keys = sorted(self.entries, key=lambda t: (len(t), t))
            masks = np.zeros(len(keys), dtype=np.uint64)
            masses = np.zeros(len(keys))
            for i, key in enumerate(keys):
                m = 0
                for c in key:
                    m |= 1 << c
                masks[i] = m
                masses[i] = self.entries[key]
            object.__setattr__(self, "_masks", masks)
            object.__setattr__(self, "_masses", masses)
        return self._masks, self._masses

    def sorted_items(self) -> list[tuple[tuple[int, ...], float]]:
        self._require_dense("enumeration")
        return sorted(self.entries.items(), key=lambda kv: (len(kv[0]), kv[0]))


# ---------------------------------------------------------------------------
# construction


def spectral_measure_of(f: NoiseFunctional, tol: float | None = None) -> SpectralMeasure:
    """Spectral measure of f; dense when representable, model-backed otherwise."""
    if isinstance(f.backend, FamilyRef) and f.grid.n_cells > DENSE_CELL_CAP:
        from . import families

        model = families.family_model(f.grid, f.backend)
        if model is None:
            raise BackendError(
                f"family {f.backend.name!r} has no exact spectral model at "
                f"{f.grid.n_cells} cells and is too large to materialize"
            )
        return SpectralMeasure(f.grid, None, model=model)
    coeffs = decompose(f, tol)
    return measure_from_coefficients(coeffs)


def measure_from_coefficients(coeffs: ChaosCoefficients) -> SpectralMeasure:
    plain: dict[tuple[int, ...], float] = {}
    mult: dict[tuple[int, ...], float] = {}
    for ix, c in coeffs.entries.items():
        if c == 0.0:
            continue
        target = mult if index_has_multiplicity(ix) else plain
        s = index_support(ix)
        target[s] = target.get(s, 0.0) + c * c
    return SpectralMeasure(coeffs.grid, plain, mult, residual=coeffs.residual)


# ---------------------------------------------------------------------------
# queries


def mass_of_subsets_of(mu: SpectralMeasure, region: ElementarySet) -> float:
    """mu{C : C inside the region}; equals the squared norm of the projection."""
    if mu.grid != region.grid:
        raise GridMismatchError("measure and region live on different grids")
    if not mu.is_dense:
        if hasattr(mu.model, "subset_mass"):
            return mu.model.subset_mass(frozenset(region.cells()))
        raise BackendError("sampler-backed measure lacks a subset-mass rule")
    if mu.grid.n_cells <= 63:
        masks, masses = mu._cached_arrays()
        inside = (masks & ~np.uint64(region.mask())) == 0
        total = float(masses[inside].sum())
    else:
        cells = set(region.cells())
        total = float(
            sum(v for k, v in mu.entries.items() if set(k) <= cells)
        )
    total += sum(v for k, v in mu.multiplicity_entries.items() if set(k) <= set(region.cells()))
    return total


def mass_meeting_interval(mu: SpectralMeasure, lo, hi) -> float:
    """mu{C : C touches the open time interval (lo, hi)}, multiplicity included."""
    touched = set(mu.grid.cells_meeting_open_interval(lo, hi))
    mu._require_dense("interval mass")
    total = sum(v for k, v in mu.entries.items() if touched.intersection(k))
    total += sum(v for k, v in mu.multiplicity_entries.items() if touched.intersection(k))
    return float(total)


def restrict(mu: SpectralMeasure, region: ElementarySet) -> SpectralMeasure:
    """Measure of the projected functional: keep sets inside the region."""
    if mu.grid != region.grid:
        raise GridMismatchError("measure and region live on different grids")
    mu._require_dense("restriction")
    cells = set(region.cells())
    kept = {k: v for k, v in mu.entries.items() if set(k) <= cells}
    kept_mult = {k: v for k, v in mu.multiplicity_entries.items() if set(k) <= cells}
    return SpectralMeasure(mu.grid, kept, kept_mult, residual=0.0)


def product(
    left: SpectralMeasure, right: SpectralMeasure, grid: TimeGrid | None = None
) -> SpectralMeasure:
    """Product measure on two adjacent windows of equal cell length.

    Sets split uniquely across the windows; masses multiply.  Defined for
    dense inputs without truncation residual.
    """
    left._require_dense("product")
    right._require_dense("product")
    if left.residual or right.residual:
        raise BackendError("product is defined for residual-free measures")
    if left.multiplicity_entries or right.multiplicity_entries:
        raise BackendError("product is defined for multiplicity-free measures")
    target = joined_grid(left.grid, right.grid)
    if grid is not None:
        if (
            grid.interval_start != target.interval_start
            or grid.interval_end != target.interval_end
            or grid.n_cells != target.n_cells
        ):
            raise GridMismatchError("override grid must carry the same cells")
        target = grid
    offset = left.grid.n_cells
    out: dict[tuple[int, ...], float] = {}
    for ka, va in left.entries.items():
        for kb, vb in right.entries.items():
            out[ka + tuple(c + offset for c in kb)] = va * vb
    return SpectralMeasure(target, out)


def is_absolutely_continuous(mu_g: SpectralMeasure, mu_f: SpectralMeasure) -> bool:
    """support(mu_g) inside support(mu_f); needs dense representations."""
    for mu in (mu_g, mu_f):
        mu._require_dense("absolute continuity")
    if mu_g.grid != mu_f.grid:
        raise GridMismatchError("measures live on different grids")
    return mu_g.support() <= mu_f.support()


def n_point_marginal(mu: SpectralMeasure, n: int) -> SpectralMeasure:
    """The part of the measure on sets of exactly n cells (multiplicity-free)."""
    if n < 0:
        raise ValueError("marginal order must be nonnegative")
    if mu.is_dense:
        kept = {k: v for k, v in mu.entries.items() if len(k) == n}
        return SpectralMeasure(mu.grid, kept)
    profile = mu.model.cardinality_profile()
    raise BackendError(
        f"sampler-backed measures expose cardinality totals only; "
        f"order {n} carries mass {profile.get(n, 0.0)}"
    )


def singleton_mass(mu: SpectralMeasure) -> float:
    """Total mass on one-cell sets: the squared norm of the first chaos part."""
    if mu.is_dense:
        return float(sum(v for k, v in mu.entries.items() if len(k) == 1))
    return mu.model.singleton_mass()


def cardinality_profile(mu: SpectralMeasure) -> dict[int, float]:
    """Mass per set size; multiplicity mass is excluded and reported apart."""
    if mu.is_dense:
        out: dict[int, float] = {}
        for k, v in mu.entries.items():
            out[len(k)] = out.get(len(k), 0.0) + v
        return dict(sorted(out.items()))
    return dict(sorted(mu.model.cardinality_profile().items()))


# ---------------------------------------------------------------------------
# sampling


def sample_sets(source, k: int, seed: int) -> list[SpectralSet]:
    """Draw k spectral sets with probability proportional to their mass.

    `source` is a measure or a functional.  Dense measures use inverse CDF
    over the (cardinality, cells)-sorted atoms; model-backed measures draw
    through the family's exact sampler.
    """
    mu = source if isinstance(source, SpectralMeasure) else spectral_measure_of(source)
    if k < 0:
        raise ValueError("sample count must be nonnegative")
    if not mu.is_dense:
        return [SpectralSet(mu.grid, cells) for cells in mu.model.sample(k, seed)]
    if mu.residual > 1e-9 * max(mu.total_mass, 1e-300):
        raise BackendError("cannot sample a measure with unresolved truncation residual")
    atoms = sorted(mu.entries.items(), key=lambda kv: (len(kv[0]), kv[0]))
    atoms += sorted(mu.multiplicity_entries.items(), key=lambda kv: (len(kv[0]), kv[0]))
    masses = np.array([v for _, v in atoms])
    cdf = np.cumsum(masses)
    if cdf[-1] <= 0:
        raise ValueError("measure has no mass to sample")
    from ._rng import worker_generator

    rng = worker_generator(seed, 0)
    picks = np.searchsorted(cdf, rng.uniform(0.0, cdf[-1], size=k), side="right")
    picks = np.minimum(picks, len(atoms) - 1)
    return [SpectralSet(mu.grid, atoms[int(i)][0]) for i in picks]
