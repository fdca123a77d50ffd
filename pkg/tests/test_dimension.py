"""Box-counting dimension estimates on the refinement families."""
import numpy as np
import pytest
from numpy.testing import assert_allclose

from noisespectra import (
    NoiseFunctional,
    SpectralSet,
    TimeGrid,
    box_count,
    builtin_families,
    estimate_dimension,
    family_by_name,
)
from noisespectra.families import calibration_measure


def test_box_count_exact():
    grid = TimeGrid(0, 1, 4)
    s = SpectralSet(grid, (0, 1, 2, 3))  # leftmost quarter of [0, 1)
    assert box_count(s, 0) == 1
    assert box_count(s, 1) == 1  # sits inside the first half
    assert box_count(s, 2) == 1
    assert box_count(s, 3) == 2
    assert box_count(s, 4) == 4
    assert box_count(SpectralSet(grid, ()), 3) == 0
    with pytest.raises(ValueError):
        box_count(s, 5)


def test_box_count_cantor_is_power_of_two():
    # the middle-thirds support meets exactly 2**j base-3 boxes at level j
    for depth in (3, 4):
        mu = calibration_measure("cantor-thirds", depth)
        cells = max(mu.entries, key=len)
        s = SpectralSet(mu.grid, cells)
        for j in range(depth + 1):
            assert box_count(s, j) == 2 ** min(j, depth)


def test_family_registry():
    names = [f.name for f in builtin_families()]
    assert "parity" in names and "cantor-calibration" in names
    fam = family_by_name("parity")
    f = fam.make(5)
    assert isinstance(f, NoiseFunctional)
    with pytest.raises(ValueError):
        family_by_name("nonesuch")


def test_parity_slope_is_one():
    est = estimate_dimension("parity", [6, 7], samples=8, seed=0)
    assert_allclose(est.slope, 1.0, atol=1e-12)
    assert_allclose(est.r_squared, 1.0, atol=1e-12)
    assert not est.clamped
    assert est.empty_fraction == 0.0


def test_single_coordinate_slope_is_zero():
    est = estimate_dimension("single-coordinate", [6, 7], samples=64, seed=1)
    assert_allclose(est.slope, 0.0, atol=1e-12)
    assert est.empty_fraction == 0.0  # the measure has no empty atom


def test_cantor_slope_near_log2_over_log3():
    est = estimate_dimension("cantor-calibration", [7], samples=1, seed=0)
    assert abs(est.slope - np.log(2) / np.log(3)) < 0.05
    # deterministic family: repeated runs agree exactly
    again = estimate_dimension("cantor-calibration", [7], samples=1, seed=99)
    assert est.slope == again.slope


def test_tribes_sees_empty_draws():
    est = estimate_dimension("tribes", [5], samples=400, seed=3)
    # the weight on the constant part shows up as empty draws
    assert 0.0 < est.empty_fraction < 1.0


def test_estimate_validation():
    with pytest.raises(ValueError):
        estimate_dimension("parity", [3], samples=4, seed=0)
    with pytest.raises(ValueError):
        estimate_dimension("parity", [6], samples=0, seed=0)


def test_scale_points_are_auditable():
    est = estimate_dimension("parity", [6], samples=4, seed=5)
    assert [p.box_level for p in est.points] == [2, 3, 4]
    for p in est.points:
        assert p.level == 6
        assert p.samples == 4
        # parity's support is the full window: counts are exact powers of two
        assert_allclose(p.mean_log2_count, p.box_level, atol=1e-12)
        assert p.stderr == 0.0


def test_reproducible_across_calls():
    a = estimate_dimension("white-noise-i2", [5, 6], samples=50, seed=11)
    b = estimate_dimension("white-noise-i2", [5, 6], samples=50, seed=11)
    assert a.slope == b.slope
    assert a.empty_fraction == b.empty_fraction
