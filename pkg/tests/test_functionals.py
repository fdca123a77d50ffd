import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from noisespectra import (
    BackendError,
    ItoTerm,
    MapFactor,
    MapTerm,
    NoiseFunctional,
    SimplexKernel,
    TimeGrid,
    inner_product,
    inner_product_mc,
    joined_grid,
    multiply,
    random_functional,
    shift,
    tensor_product,
)
from noisespectra.functionals import (
    evaluate_table,
    expectation,
    hermite_decompose,
    norm_sq,
    to_table,
)
from noisespectra.walsh import sign_table

GRID = TimeGrid(0, 1, 3)


def test_table_and_chaos_representations_agree(rng):
    f = random_functional(GRID, rng)
    from noisespectra import decompose

    g = NoiseFunctional.from_chaos(decompose(f))
    table = sign_table(GRID.n_cells)
    for pos in range(0, 256, 37):
        assert_allclose(g.evaluate(table[pos]), f.evaluate(table[pos]), rtol=1e-12)
    assert_allclose(expectation(g), expectation(f), rtol=1e-12)
    assert_allclose(norm_sq(g), norm_sq(f), rtol=1e-12)
    assert_allclose(evaluate_table(g), evaluate_table(f), atol=1e-12)


def test_from_walsh_entries_evaluation():
    f = NoiseFunctional.from_walsh_entries(GRID, {(): 2.0, (0, 2): -1.0})
    omega = np.ones(8)
    assert f.evaluate(omega) == 1.0  # 2 - 1
    omega[0] = -1
    assert f.evaluate(omega) == 3.0  # 2 + 1
    assert f.expectation_value == 2.0
    assert f.norm_sq == 5.0


def test_inner_product_dual_routes(rng):
    """Sparse coefficient dot against the value-table average."""
    from noisespectra import decompose

    f = random_functional(GRID, rng)
    g = random_functional(GRID, rng)
    by_table = inner_product(f, g)
    fc = NoiseFunctional.from_chaos(decompose(f))
    gc = NoiseFunctional.from_chaos(decompose(g))
    assert_allclose(inner_product(fc, gc), by_table, rtol=1e-11)
    assert_allclose(inner_product(fc, g), by_table, rtol=1e-11)  # mixed backends


def test_inner_product_rejects_mixed_hermite_walsh():
    from noisespectra.chaos import ChaosCoefficients, HERMITE

    f = NoiseFunctional.from_walsh_entries(GRID, {(0,): 1.0})
    h = NoiseFunctional.from_chaos(
        ChaosCoefficients(GRID, {((0, 0, 1),): 1.0}, kind=HERMITE)
    )
    with pytest.raises(BackendError):
        inner_product(f, h)


def test_shift_cyclic_routes_agree(rng):
    from noisespectra import decompose

    f = random_functional(GRID, rng)
    fc = NoiseFunctional.from_chaos(decompose(f))
    for k in (1, 3, -2):
        a = evaluate_table(shift(f, k))
        b = evaluate_table(shift(fc, k, mode="cyclic"))
        assert_allclose(a, b, atol=1e-11)
        assert_allclose(norm_sq(shift(f, k)), norm_sq(f), rtol=1e-12)


def test_shift_truncate_drops_outgoing_mass():
    f = NoiseFunctional.from_walsh_entries(GRID, {(0,): 1.0, (7,): 2.0, (3, 4): 1.0})
    moved = shift(f, 1, mode="truncate")
    assert moved.backend.entries == {(1,): 1.0, (4, 5): 1.0}  # cell 7 left the window
    # table route agrees
    ft = to_table(f)
    assert_allclose(
        evaluate_table(shift(ft, 1, mode="truncate")), evaluate_table(moved), atol=1e-12
    )


def test_multiply_is_pointwise(rng):
    f = random_functional(GRID, rng)
    g = random_functional(GRID, rng)
    assert_allclose(evaluate_table(multiply(f, g)), evaluate_table(f) * evaluate_table(g))


def test_joined_grid_shapes():
    from fractions import Fraction

    dy = joined_grid(TimeGrid(0, Fraction(1, 2), 2), TimeGrid(Fraction(1, 2), 1, 2))
    assert dy == TimeGrid(0, 1, 3)
    odd = joined_grid(
        TimeGrid(0, Fraction(5, 10), 1, base=5), TimeGrid(Fraction(5, 10), 1, 1, base=5)
    )
    assert odd.n_cells == 10
    from noisespectra import GridMismatchError

    with pytest.raises(GridMismatchError):
        joined_grid(TimeGrid(0, 1, 2), TimeGrid(2, 3, 2))


def test_tensor_product_values(rng):
    wl = TimeGrid(0, 0.5, 2)
    wr = TimeGrid(0.5, 1, 2)
    f = random_functional(wl, rng)
    g = random_functional(wr, rng)
    fg = tensor_product(f, g)
    table = sign_table(8)
    for pos in (0, 17, 100, 255):
        om = table[pos]
        assert_allclose(
            fg.evaluate(om), f.evaluate(om[:4]) * g.evaluate(om[4:]), rtol=1e-12
        )


# ---------------------------------------------------------------------------
# Brownian programs


def unit_i1(grid, weight=1.0):
    return NoiseFunctional.from_program(
        grid, [ItoTerm(weight, SimplexKernel.constant(1, grid.n_cells))]
    )


def test_ito_program_moments():
    grid = TimeGrid(0, 1, 4)
    f = unit_i1(grid)
    assert expectation(f) == 0.0
    assert_allclose(norm_sq(f), 1.0, rtol=1e-12)  # Ito isometry, discrete
    two = NoiseFunctional.from_program(
        grid, [ItoTerm(1.0, SimplexKernel.constant(2, grid.n_cells))]
    )
    n = grid.n_cells
    assert_allclose(norm_sq(two), math.comb(n, 2) / n**2, rtol=1e-12)


def test_ito_inner_product_exact():
    grid = TimeGrid(0, 1, 3)
    n = grid.n_cells
    rng = np.random.default_rng(2)
    a, b = rng.standard_normal(n), rng.standard_normal(n)
    fa = NoiseFunctional.from_program(grid, [ItoTerm(1.0, SimplexKernel.separable([a]))])
    fb = NoiseFunctional.from_program(grid, [ItoTerm(1.0, SimplexKernel.separable([b]))])
    assert_allclose(inner_product(fa, fb), np.dot(a, b) / n, rtol=1e-12)
    # different orders are orthogonal
    i2 = NoiseFunctional.from_program(grid, [ItoTerm(1.0, SimplexKernel.constant(2, n))])
    assert inner_product(fa, i2) == 0.0


def test_map_term_moments_match_closed_form():
    grid = TimeGrid(0, 1, 2)
    a = 0.7
    f = NoiseFunctional.from_program(
        grid, [MapTerm(1.0, (MapFactor(0, 0, "exp", (a,)),))], degree_cap=10
    )
    h = float(grid.cell_length)
    assert_allclose(expectation(f), math.exp(a * a * h / 2), rtol=1e-10)
    assert_allclose(norm_sq(f), math.exp(2 * a * a * h), rtol=1e-10)


def test_hermite_decompose_i1_coefficients():
    grid = TimeGrid(0, 1, 2)
    n = grid.n_cells
    vec = np.array([1.0, -2.0, 0.5, 3.0])
    f = NoiseFunctional.from_program(grid, [ItoTerm(1.0, SimplexKernel.separable([vec]))])
    coeffs = hermite_decompose(grid, f.backend)
    scale = math.sqrt(1.0 / n)
    for c in range(n):
        assert_allclose(coeffs.coefficient(((c, 0, 1),)), vec[c] * scale, rtol=1e-12)
    assert_allclose(coeffs.norm_sq, norm_sq(f), rtol=1e-12)


def test_mc_inner_product_reproducible_and_consistent():
    grid = TimeGrid(0, 1, 4)
    f = unit_i1(grid)
    a = inner_product_mc(f, f, samples=4000, seed=9, workers=2)
    b = inner_product_mc(f, f, samples=4000, seed=9, workers=2)
    assert a == b  # bit-identical, not merely close
    exact = inner_product(f, f)
    assert abs(a.value - exact) < 4 * a.stderr
    with pytest.raises(BackendError):
        inner_product_mc(f, random_functional(grid, np.random.default_rng(0)), 100, 0)
