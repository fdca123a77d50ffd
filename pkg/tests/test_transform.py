"""Transform layer: decomposition roundtrips and the projection algebra.

The conditional expectation has two independent routes on dense functionals,
coefficient masking and direct value averaging; they must agree to transform
precision on arbitrary inputs.
"""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from noisespectra import (
    ElementarySet,
    ItoTerm,
    NoiseFunctional,
    SimplexKernel,
    TimeGrid,
    chaos_order_masses,
    conditional_expectation,
    conditional_expectation_by_averaging,
    decompose,
    level_projection,
    random_functional,
    reconstruct,
)
from noisespectra.functionals import evaluate_table, inner_product, norm_sq

GRID = TimeGrid(0, 1, 3)
N = GRID.n_cells


def region_of(mask):
    return ElementarySet.from_cells(GRID, [c for c in range(N) if mask >> c & 1])


def test_decompose_reconstruct_roundtrip(rng):
    f = random_functional(GRID, rng)
    back = reconstruct(decompose(f))
    assert_allclose(evaluate_table(back), evaluate_table(f), atol=1e-12)


def test_decompose_threshold_drops_small_entries(rng):
    f = NoiseFunctional.from_walsh_entries(GRID, {(0,): 1.0, (1,): 1e-15})
    kept = decompose(NoiseFunctional.from_table(GRID, evaluate_table(f)), tol=1e-12)
    assert set(kept.entries) == {(0,)}


@settings(max_examples=30)
@given(st.integers(0, 255), st.integers(0, 2**31 - 1))
def test_projection_routes_agree(mask, seed):
    f = random_functional(GRID, np.random.default_rng(seed))
    region = region_of(mask)
    a = evaluate_table(conditional_expectation(f, region))
    b = evaluate_table(conditional_expectation_by_averaging(f, region))
    assert_allclose(a, b, atol=1e-12)


@settings(max_examples=30)
@given(st.integers(0, 255), st.integers(0, 255), st.integers(0, 2**31 - 1))
def test_projections_compose_by_intersection(mask_a, mask_b, seed):
    f = random_functional(GRID, np.random.default_rng(seed))
    a, b = region_of(mask_a), region_of(mask_b)
    lhs = conditional_expectation(conditional_expectation(f, a), b)
    rhs = conditional_expectation(f, a & b)
    assert_allclose(evaluate_table(lhs), evaluate_table(rhs), atol=1e-12)


def test_projection_extremes(rng):
    f = random_functional(GRID, rng)
    assert_allclose(
        evaluate_table(conditional_expectation(f, ElementarySet.full(GRID))),
        evaluate_table(f),
        atol=1e-12,
    )
    const = conditional_expectation(f, ElementarySet.empty(GRID))
    assert_allclose(evaluate_table(const), np.full(1 << N, f.expectation_value), atol=1e-12)


def test_projection_is_idempotent_and_contractive(rng):
    f = random_functional(GRID, rng)
    region = region_of(0b1011001)
    p = conditional_expectation(f, region)
    again = conditional_expectation(p, region)
    assert_allclose(evaluate_table(again), evaluate_table(p), atol=1e-12)
    assert norm_sq(p) <= norm_sq(f) + 1e-12


def test_projection_preserves_backend_kind(rng):
    f = random_functional(GRID, rng)
    region = region_of(0b111)
    assert conditional_expectation(f, region).kind == "table"
    fc = NoiseFunctional.from_chaos(decompose(f))
    assert conditional_expectation(fc, region).kind == "chaos"
    # chaos route is pure coefficient masking, asserted bit-exact
    pc = conditional_expectation(fc, region)
    for ix, c in pc.backend.entries.items():
        assert c == fc.backend.entries[ix]


def test_program_projection_masks_kernels():
    grid = TimeGrid(0, 1, 2)
    f = NoiseFunctional.from_program(
        grid, [ItoTerm(1.0, SimplexKernel.constant(1, grid.n_cells))]
    )
    region = ElementarySet.from_cells(grid, [0, 2])
    p = conditional_expectation(f, region)
    # projecting I_1(1) onto a region leaves the integral over that region
    assert_allclose(norm_sq(p), region.cell_count / grid.n_cells, rtol=1e-12)
    q = conditional_expectation(p, ElementarySet.from_cells(grid, [2, 3]))
    assert_allclose(norm_sq(q), 1 / grid.n_cells, rtol=1e-12)


def test_level_projections_are_orthogonal_and_complete(rng):
    f = random_functional(GRID, rng)
    parts = [level_projection(f, k) for k in range(N + 1)]
    total = np.sum([evaluate_table(p) for p in parts], axis=0)
    assert_allclose(total, evaluate_table(f), atol=1e-11)
    for i in range(3):
        for j in range(i + 1, 4):
            assert abs(inner_product(parts[i], parts[j])) < 1e-12


def test_chaos_order_masses_sum_to_norm(rng):
    f = random_functional(GRID, rng)
    masses = chaos_order_masses(f)
    assert set(masses) <= set(range(N + 1))
    assert_allclose(sum(masses.values()), norm_sq(f), rtol=1e-12)
    for k, m in masses.items():
        assert_allclose(m, norm_sq(level_projection(f, k)), rtol=1e-10, atol=1e-13)


def test_level_projection_on_ito_programs():
    grid = TimeGrid(0, 1, 3)
    n = grid.n_cells
    f = NoiseFunctional.from_program(
        grid,
        [
            ItoTerm(1.0, SimplexKernel.constant(1, n)),
            ItoTerm(2.0, SimplexKernel.constant(2, n)),
        ],
    )
    only1 = level_projection(f, 1)
    assert_allclose(norm_sq(only1), 1.0, rtol=1e-12)
    only2 = level_projection(f, 2)
    assert_allclose(norm_sq(only2), 4.0 * math.comb(n, 2) / n**2, rtol=1e-12)
    assert level_projection(f, 3).backend.terms == ()


def test_level_projection_rejects_negative_order(rng):
    with pytest.raises(ValueError):
        level_projection(random_functional(GRID, rng), -1)
