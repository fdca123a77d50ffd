"""Chaos transforms: decomposition, reconstruction, and projections.

The Rademacher side is the fast Walsh-Hadamard transform with coefficients
normalized as expectations against characters, so Parseval holds with no
extra factor.  The Gaussian side is per-cell Hermite projection with a
degree cap; truncation is reported, never silent.

Conditional expectations onto an elementary set A act on coefficients by
keeping exactly the indices supported inside A.  The value-domain route
(averaging over the cells outside A) is exposed as
:func:`conditional_expectation_by_averaging` and must agree; the pair is the
package's standing dual-route check.
"""
from __future__ import annotations

import math

import numpy as np

from .chaos import (
    WALSH,
    ChaosCoefficients,
    index_cardinality,
    index_has_multiplicity,
    index_support,
)
from .functionals import (
    BrownianProgram,
    FamilyRef,
    ItoTerm,
    MapTerm,
    NoiseFunctional,
    RademacherTable,
    _factor_moments,
    evaluate_table,
    hermite_decompose,
)
from .grid import ElementarySet, TimeGrid, require_same_grid
from .kernels import SimplexKernel
from .walsh import (
    DENSE_CELL_CAP,
    cells_of_mask,
    character_coefficients,
    popcount,
    subset_of,
    values_from_coefficients,
)


def decompose(f: NoiseFunctional, tol: float | None = None) -> ChaosCoefficients:
    """Chaos coefficients of f; exact for dense backends, capped for Gaussian."""
    b = f.backend
    if isinstance(b, ChaosCoefficients):
        return b
    if isinstance(b, BrownianProgram):
        return hermite_decompose(f.grid, b, tol=tol)
    if isinstance(b, FamilyRef):
        from . import families

        return decompose(families.materialize(f.grid, b), tol)
    dense = character_coefficients(b.values)
    if tol is not None:
        dense[np.abs(dense) <= tol] = 0.0
    entries = {
        cells_of_mask(int(m)): float(dense[m]) for m in np.nonzero(dense)[0]
    }
    return ChaosCoefficients(f.grid, entries, WALSH)


def reconstruct(c: ChaosCoefficients) -> NoiseFunctional:
    """Functional with the given expansion; a value table on the Walsh side."""
    if c.kind == WALSH:
        n = c.grid.n_cells
        if n > DENSE_CELL_CAP:
            raise ValueError(f"dense reconstruction capped at {DENSE_CELL_CAP} cells")
        dense = np.zeros(1 << n)
        for ix, coeff in c.entries.items():
            m = 0
            for cell in ix:
                m |= 1 << cell
            dense[m] = coeff
        return NoiseFunctional.from_table(c.grid, values_from_coefficients(dense))
    return NoiseFunctional.from_chaos(c)


def conditional_expectation(f: NoiseFunctional, region: ElementarySet) -> NoiseFunctional:
    """Projection onto the functionals measurable inside `region`.

    Keeps exactly the chaos indices whose support lies in the region; equals
    the probabilistic conditional expectation given the cells of the region.
    The output backend matches the input (table in, table out; chaos in,
    chaos out; Brownian programs are masked term by term).
    """
    require_same_grid(f.grid, region.grid)
    b = f.backend
    if isinstance(b, RademacherTable):
        dense = character_coefficients(b.values)
        masks = np.arange(dense.shape[0], dtype=np.uint64)
        keep = subset_of(masks, region.mask())
        dense[~keep] = 0.0
        return NoiseFunctional.from_table(f.grid, values_from_coefficients(dense))
    if isinstance(b, ChaosCoefficients):
        cells = set(region.cells())
        kept = b.filtered(lambda ix: set(index_support(ix)) <= cells)
        return NoiseFunctional.from_chaos(kept)
    if isinstance(b, BrownianProgram):
        return NoiseFunctional(f.grid, _program_projection(f.grid, b, region))
    from . import families

    return conditional_expectation(families.materialize(f.grid, b), region)


def _program_projection(
    grid: TimeGrid, p: BrownianProgram, region: ElementarySet
) -> BrownianProgram:
    inside = np.zeros(grid.n_cells)
    for c in region.cells():
        inside[c] = 1.0
    out: list = []
    for term in p.terms:
        if isinstance(term, ItoTerm):
            k = term.kernel
            if k.factors is not None:
                masked = SimplexKernel(
                    k.order,
                    k.n_cells,
                    factors=tuple(v * inside for v in k.factors),
                    channels=k.channels,
                )
            elif k.order == 1:
                masked = SimplexKernel(
                    1, k.n_cells, dense=k.dense * inside, channels=k.channels
                )
            else:
                masked = SimplexKernel(
                    2,
                    k.n_cells,
                    dense=k.dense * np.outer(inside, inside),
                    channels=k.channels,
                )
            out.append(ItoTerm(term.weight, masked))
        else:
            weight = term.weight
            kept = []
            scale = math.sqrt(float(grid.cell_length))
            for fac in term.factors:
                if inside[fac.cell]:
                    kept.append(fac)
                else:
                    weight *= _factor_moments(fac, scale)[0]
            if weight != 0.0:
                out.append(MapTerm(weight, tuple(kept)))
    return BrownianProgram(tuple(out), p.degree_cap, p.channels)


def conditional_expectation_by_averaging(
    f: NoiseFunctional, region: ElementarySet
) -> NoiseFunctional:
    """Value-domain oracle: average the value table over cells outside the region.

    Independent of the transform route; used to cross-check
    :func:`conditional_expectation` on dense functionals.
    """
    require_same_grid(f.grid, region.grid)
    n = f.grid.n_cells
    table = evaluate_table(f)
    cube = table.reshape((2,) * n)  # axis a corresponds to cell n - 1 - a
    outside_axes = tuple(n - 1 - i for i in range(n) if not region.contains_cell(i))
    if outside_axes:
        cube = cube.mean(axis=outside_axes, keepdims=True)
        cube = np.broadcast_to(cube, (2,) * n)
    return NoiseFunctional.from_table(f.grid, cube.reshape(1 << n))


def level_projection(f: NoiseFunctional, order: int) -> NoiseFunctional:
    """The part of f on multiplicity-free spectral sets of exactly `order` cells.

    Hermite indices putting total degree >= 2 on some cell belong to no pure
    order here; their mass is the separately reported multiplicity mass.
    """
    if order < 0:
        raise ValueError("chaos order must be nonnegative")
    b = f.backend
    if isinstance(b, RademacherTable):
        dense = character_coefficients(b.values)
        masks = np.arange(dense.shape[0], dtype=np.uint64)
        dense[popcount(masks) != order] = 0.0
        return NoiseFunctional.from_table(f.grid, values_from_coefficients(dense))
    if isinstance(b, ChaosCoefficients):
        kept = b.filtered(
            lambda ix: index_cardinality(ix) == order and not index_has_multiplicity(ix)
        )
        return NoiseFunctional.from_chaos(kept)
    if isinstance(b, BrownianProgram):
        if all(isinstance(t, ItoTerm) for t in b.terms):
            kept_terms = tuple(t for t in b.terms if t.kernel.order == order)
            if order == 0:
                kept_terms = ()
            return NoiseFunctional(f.grid, BrownianProgram(kept_terms, b.degree_cap, b.channels))
        coeffs = hermite_decompose(f.grid, b)
        kept = coeffs.filtered(lambda ix: index_cardinality(ix) == order)
        return NoiseFunctional.from_chaos(kept)
    from . import families

    return level_projection(families.materialize(f.grid, b), order)


def chaos_order_masses(f: NoiseFunctional) -> dict[int, float]:
    """Squared-norm mass per multiplicity-free chaos order (distinct-cell count)."""
    c = decompose(f)
    out: dict[int, float] = {}
    for ix, coeff in c.entries.items():
        if index_has_multiplicity(ix):
            continue
        k = index_cardinality(ix)
        out[k] = out.get(k, 0.0) + coeff * coeff
    return dict(sorted(out.items()))
