"""Box-counting dimension of sampled spectral sets across refinement families.

The estimator draws sets from a family's spectral measure at one or more
resolutions, counts covering boxes over a mid-range of scales (the two finest
and two coarsest are degenerate and excluded), and fits a least-squares slope
of mean log2 count against log2 inverse scale.  Box counts are exact integer
arithmetic on cell indices; all randomness sits in the sampling.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .spectral import SpectralMeasure, SpectralSet, sample_sets
from .functionals import NoiseFunctional


def box_count(s: SpectralSet, j: int) -> int:
    """Number of scale base**-j boxes meeting the set; 0 for the empty set."""
    level = s.grid.level
    if not 0 <= j <= level:
        raise ValueError(f"box level {j} outside 0..{level}")
    if not s.cells:
        return 0
    width = s.grid.base ** (level - j)
    return len({c // width for c in s.cells})


@dataclass(frozen=True)
class RefinementFamily:
    """A named generator: level -> functional (or a deterministic measure)."""

    name: str
    make: Callable[[int], object]
    metadata: dict = field(default_factory=dict)


def builtin_families() -> list[RefinementFamily]:
    from . import families as fam

    def functional(name):
        return lambda level: NoiseFunctional.from_family(name, level)

    out = [
        RefinementFamily("single-coordinate", functional("single-coordinate"),
                         {"expected_slope": 0.0}),
        RefinementFamily("parity", functional("parity"), {"expected_slope": 1.0}),
        RefinementFamily("coordinate-sum", functional("coordinate-sum"),
                         {"expected_slope": 0.0}),
        RefinementFamily("white-noise-i1", functional("white-noise-i1"),
                         {"expected_slope": 0.0}),
        RefinementFamily("white-noise-i2", functional("white-noise-i2"),
                         {"expected_slope": 0.0}),
        RefinementFamily(
            "majority3-iterated",
            functional("majority3-iterated"),
            {"grid_base": 3, "note": "level = ternary tree depth, 3**level cells; "
                                     "report scales in base-3 boxes"},
        ),
        RefinementFamily(
            "tribes",
            functional("tribes"),
            {"note": "trailing cells beyond whole blocks are ignored and carry no mass"},
        ),
        RefinementFamily(
            "cantor-calibration",
            lambda level: fam.calibration_measure("cantor-thirds", level),
            {"expected_slope": float(np.log(2) / np.log(3)), "deterministic": True},
        ),
    ]
    return out


def family_by_name(name: str) -> RefinementFamily:
    for f in builtin_families():
        if f.name == name:
            return f
    known = ", ".join(f.name for f in builtin_families())
    raise ValueError(f"unknown family {name!r}; known: {known}")


@dataclass(frozen=True)
class ScalePoint:
    level: int
    box_level: int
    log2_inv_scale: float
    mean_log2_count: float
    stderr: float
    samples: int


@dataclass(frozen=True)
class DimensionEstimate:
    slope: float
    intercept: float
    r_squared: float
    points: tuple[ScalePoint, ...]
    samples_per_level: int
    seed: int
    clamped: bool
    empty_fraction: float


def estimate_dimension(
    family, levels: Sequence[int], samples: int, seed: int
) -> DimensionEstimate:
    """Fit log2 box count against log2 inverse scale over sampled sets.

    Every (level, mid-range scale) pair contributes one regression point, so
    the per-scale data stays auditable in the result.  Empty sets carry no
    boxes and are dropped from the averages; a corpus of only empty sets is
    an error.
    """
    if isinstance(family, str):
        family = family_by_name(family)
    if samples < 1:
        raise ValueError("need at least one sample")
    points: list[ScalePoint] = []
    empties = 0
    drawn = 0
    for offset, level in enumerate(levels):
        if level < 4:
            raise ValueError("levels below 4 leave no mid-range scales")
        source = family.make(level)
        sets = _sampled_sets(source, samples, seed + 1000 * offset)
        drawn += len(sets)
        nonempty = [s for s in sets if s.cells]
        empties += len(sets) - len(nonempty)
        if not nonempty:
            continue
        base = nonempty[0].grid.base
        # identical draws are frequent (deterministic families); count once
        unique: dict[tuple[int, ...], int] = {}
        for s in nonempty:
            unique[s.cells] = unique.get(s.cells, 0) + 1
        weights = np.array(list(unique.values()), dtype=np.float64)
        for j in range(2, level - 1):
            logs = np.array(
                [np.log2(box_count(SpectralSet(nonempty[0].grid, cells), j))
                 for cells in unique]
            )
            mean = float(np.average(logs, weights=weights))
            var = float(np.average((logs - mean) ** 2, weights=weights))
            points.append(
                ScalePoint(
                    level=level,
                    box_level=j,
                    log2_inv_scale=float(j * np.log2(base)),
                    mean_log2_count=mean,
                    stderr=float(np.sqrt(var / weights.sum())),
                    samples=int(weights.sum()),
                )
            )
    if not points:
        raise ValueError("all sampled spectral sets were empty; no boxes to count")
    if len({p.log2_inv_scale for p in points}) < 2:
        raise ValueError("need at least two distinct scales; request deeper levels")
    x = np.array([p.log2_inv_scale for p in points])
    y = np.array([p.mean_log2_count for p in points])
    slope, intercept = np.polyfit(x, y, 1)
    fitted = slope * x + intercept
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    clamped = not 0.0 <= slope <= 1.0
    slope = float(min(max(slope, 0.0), 1.0))
    return DimensionEstimate(
        slope=slope,
        intercept=float(intercept),
        r_squared=r_squared,
        points=tuple(points),
        samples_per_level=samples,
        seed=seed,
        clamped=clamped,
        empty_fraction=empties / drawn if drawn else 0.0,
    )


def _sampled_sets(source, samples: int, seed: int) -> list[SpectralSet]:
    if isinstance(source, (NoiseFunctional, SpectralMeasure)):
        return sample_sets(source, samples, seed)
    raise TypeError("family generator must yield a functional or a measure")
