"""Noise functionals over a time grid, in four interchangeable backends.

* RademacherTable: a value for every sign pattern of the cells (2**n floats).
* ChaosCoefficients: sparse Walsh or Hermite expansion, used directly.
* BrownianProgram: sum of multiple-Ito-integral terms and products of
  per-cell pointwise maps of Gaussian increments, with a Hermite degree cap.
* FamilyRef: a named generator at a resolution, materialized or queried
  through the family registry on demand.

Value-domain operations (evaluate, inner products, tensor products) live
here; transform-domain operations live in :mod:`noisespectra.transform`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, NamedTuple, Union

import numpy as np

from .chaos import (
    HERMITE,
    WALSH,
    ChaosCoefficients,
    hermite_index,
    index_support,
    shift_index,
    walsh_index,
)
from .grid import GridMismatchError, TimeGrid, require_same_grid
from .hermite import hermite_values, pair_mean, project_scalar_map
from .kernels import SimplexKernel, iterated_sum
from .walsh import (
    DENSE_CELL_CAP,
    character_coefficients,
    omega_index,
    values_from_coefficients,
)


class BackendError(ValueError):
    """Operation not available for this backend combination."""


class MCEstimate(NamedTuple):
    value: float
    stderr: float
    samples: int


# ---------------------------------------------------------------------------
# pointwise map registry for Brownian programs


def _poly(params):
    coeffs = np.asarray(params, dtype=np.float64)

    def fn(x):
        return np.polynomial.polynomial.polyval(x, coeffs)

    return fn


# path block size for streaming Monte Carlo loops
_MC_CHUNK = 8192

MAP_REGISTRY = {
    "poly": _poly,
    "sin": lambda params: (lambda x: np.sin((params[0] if params else 1.0) * x)),
    "cos": lambda params: (lambda x: np.cos((params[0] if params else 1.0) * x)),
    "exp": lambda params: (lambda x: np.exp((params[0] if params else 1.0) * x)),
    "abs": lambda params: np.abs,
    "sign": lambda params: np.sign,
    "tanh": lambda params: (lambda x: np.tanh((params[0] if params else 1.0) * x)),
}


@dataclass(frozen=True)
class MapFactor:
    """One pointwise map of the increment at a (cell, channel)."""

    cell: int
    channel: int
    fn: str
    params: tuple = ()

    def __post_init__(self) -> None:
        if self.fn not in MAP_REGISTRY:
            raise ValueError(f"unknown map {self.fn!r}; known: {sorted(MAP_REGISTRY)}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))

    def callable(self):
        return MAP_REGISTRY[self.fn](self.params)


@dataclass(frozen=True, eq=False)
class MapTerm:
    """weight * product of maps at distinct (cell, channel) slots."""

    weight: float
    factors: tuple[MapFactor, ...]

    def __post_init__(self) -> None:
        keys = [(f.cell, f.channel) for f in self.factors]
        if len(set(keys)) != len(keys):
            raise ValueError("map factors must sit at distinct (cell, channel) slots")
        object.__setattr__(
            self, "factors", tuple(sorted(self.factors, key=lambda f: (f.cell, f.channel)))
        )


@dataclass(frozen=True, eq=False)
class ItoTerm:
    """weight * iterated sum of a simplex kernel against increments."""

    weight: float
    kernel: SimplexKernel


ProgramTerm = Union[MapTerm, ItoTerm]


@dataclass(frozen=True, eq=False)
class BrownianProgram:
    terms: tuple[ProgramTerm, ...]
    degree_cap: int = 4
    channels: int = 1

    def __post_init__(self) -> None:
        if self.degree_cap < 1:
            raise ValueError("degree cap must be >= 1")


@dataclass(frozen=True)
class FamilyRef:
    """Named generator plus parameters at a fixed resolution."""

    name: str
    level: int
    params: tuple[tuple[str, object], ...] = ()

    def params_dict(self) -> dict:
        return dict(self.params)


@dataclass(frozen=True, eq=False)
class RademacherTable:
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


Backend = Union[RademacherTable, ChaosCoefficients, BrownianProgram, FamilyRef]


@dataclass(frozen=True, eq=False)
class NoiseFunctional:
    grid: TimeGrid
    backend: Backend

    def __post_init__(self) -> None:
        n = self.grid.n_cells
        if isinstance(self.backend, RademacherTable):
            if n > DENSE_CELL_CAP:
                raise ValueError(f"table backend capped at {DENSE_CELL_CAP} cells, got {n}")
            if self.backend.values.shape != (1 << n,):
                raise ValueError(
                    f"table length {self.backend.values.shape} does not match 2**{n}"
                )
        if isinstance(self.backend, ChaosCoefficients) and self.backend.grid != self.grid:
            raise GridMismatchError("chaos coefficients carry a different grid")

    # -- constructors --------------------------------------------------------
    @classmethod
    def from_table(cls, grid: TimeGrid, values) -> "NoiseFunctional":
        return cls(grid, RademacherTable(np.asarray(values)))

    @classmethod
    def from_chaos(cls, coefficients: ChaosCoefficients) -> "NoiseFunctional":
        return cls(coefficients.grid, coefficients)

    @classmethod
    def from_walsh_entries(cls, grid: TimeGrid, entries: dict) -> "NoiseFunctional":
        fixed = {walsh_index(ix): float(c) for ix, c in entries.items()}
        return cls(grid, ChaosCoefficients(grid, fixed, WALSH))

    @classmethod
    def from_program(
        cls, grid: TimeGrid, terms: Iterable[ProgramTerm], degree_cap: int = 4, channels: int = 1
    ) -> "NoiseFunctional":
        return cls(grid, BrownianProgram(tuple(terms), degree_cap, channels))

    @classmethod
    def from_family(cls, name: str, level: int, **params) -> "NoiseFunctional":
        from . import families

        return families.make_functional(name, level, **params)

    # -- conveniences ----------------------------------------------------------
    @property
    def kind(self) -> str:
        return backend_kind(self)

    def evaluate(self, omega) -> float:
        return evaluate(self, omega)

    @property
    def expectation_value(self) -> float:
        return expectation(self)

    @property
    def norm_sq(self) -> float:
        return norm_sq(self)


def backend_kind(f: NoiseFunctional) -> str:
    if isinstance(f.backend, RademacherTable):
        return "table"
    if isinstance(f.backend, ChaosCoefficients):
        return "chaos"
    if isinstance(f.backend, BrownianProgram):
        return "brownian"
    return "family"


def cell_lengths(grid: TimeGrid) -> np.ndarray:
    return np.full(grid.n_cells, float(grid.cell_length))


# ---------------------------------------------------------------------------
# evaluation


def evaluate(f: NoiseFunctional, omega) -> float:
    """Value at one sample point: a sign pattern or an increment vector."""
    b = f.backend
    if isinstance(b, RademacherTable):
        return float(b.values[omega_index(omega)])
    if isinstance(b, ChaosCoefficients):
        if b.kind == WALSH:
            om = np.asarray(omega, dtype=np.float64)
            if om.shape != (f.grid.n_cells,) or not np.all(np.abs(om) == 1.0):
                raise ValueError("omega must be a +-1 vector, one sign per cell")
            total = 0.0
            for ix, c in b.entries.items():
                total += c * float(np.prod(om[list(ix)])) if ix else c
            return float(total)
        return float(_evaluate_hermite_chaos(f.grid, b, np.asarray(omega, dtype=np.float64)))
    if isinstance(b, BrownianProgram):
        inc = np.asarray(omega, dtype=np.float64)
        if inc.ndim == 1:
            inc = inc[None, :, None]
        elif inc.ndim == 2:
            inc = inc[None, :, :]
        return float(program_values(f.grid, b, inc)[0])
    from . import families

    return families.evaluate_family(f.grid, b, omega)


def _evaluate_hermite_chaos(grid: TimeGrid, b: ChaosCoefficients, inc: np.ndarray) -> float:
    if inc.ndim == 1:
        inc = inc[:, None]
    scale = math.sqrt(float(grid.cell_length))
    z = inc / scale
    max_deg = max((d for ix in b.entries for _, _, d in ix), default=0)
    total = 0.0
    for ix, c in b.entries.items():
        prod = c
        for cell, ch, d in ix:
            prod *= hermite_values(np.array([z[cell, ch]]), max_deg)[d, 0]
        total += prod
    return total


def evaluate_table(f: NoiseFunctional) -> np.ndarray:
    """Full value table (materializes chaos and family backends)."""
    b = f.backend
    if isinstance(b, RademacherTable):
        return b.values
    if isinstance(b, ChaosCoefficients):
        if b.kind != WALSH:
            raise BackendError("Hermite expansions have no Rademacher value table")
        return values_from_coefficients(_dense_walsh_vector(f.grid, b))
    if isinstance(b, FamilyRef):
        from . import families

        return evaluate_table(families.materialize(f.grid, b))
    raise BackendError("Brownian programs have no Rademacher value table")


def _dense_walsh_vector(grid: TimeGrid, b: ChaosCoefficients) -> np.ndarray:
    n = grid.n_cells
    if n > DENSE_CELL_CAP:
        raise ValueError(f"dense expansion capped at {DENSE_CELL_CAP} cells, got {n}")
    dense = np.zeros(1 << n)
    for ix, c in b.entries.items():
        m = 0
        for cell in ix:
            m |= 1 << cell
        dense[m] = c
    return dense


def to_table(f: NoiseFunctional) -> NoiseFunctional:
    if isinstance(f.backend, RademacherTable):
        return f
    return NoiseFunctional.from_table(f.grid, evaluate_table(f))


# ---------------------------------------------------------------------------
# moments


def expectation(f: NoiseFunctional) -> float:
    b = f.backend
    if isinstance(b, RademacherTable):
        return float(np.mean(b.values))
    if isinstance(b, ChaosCoefficients):
        return b.expectation
    if isinstance(b, BrownianProgram):
        return program_mean(f.grid, b)
    from . import families

    return families.family_mean(f.grid, b)


def norm_sq(f: NoiseFunctional) -> float:
    b = f.backend
    if isinstance(b, RademacherTable):
        return float(np.mean(b.values**2))
    if isinstance(b, ChaosCoefficients):
        return b.norm_sq
    if isinstance(b, BrownianProgram):
        return program_norm_sq(f.grid, b)
    from . import families

    return families.family_norm_sq(f.grid, b)


def inner_product(f: NoiseFunctional, g: NoiseFunctional) -> float:
    """Exact inner product; raises BackendError when no exact route exists."""
    require_same_grid(f.grid, g.grid)
    fb, gb = f.backend, g.backend
    f_kind, g_kind = backend_kind(f), backend_kind(g)

    if "family" in (f_kind, g_kind):
        from . import families

        if f_kind == "family":
            f = families.materialize(f.grid, fb)
        if g_kind == "family":
            g = families.materialize(g.grid, gb)
        return inner_product(f, g)

    walsh_side = {"table", "chaos"}
    if f_kind in walsh_side and g_kind in walsh_side:
        f_is_hermite = f_kind == "chaos" and fb.kind == HERMITE
        g_is_hermite = g_kind == "chaos" and gb.kind == HERMITE
        if f_is_hermite != g_is_hermite:
            raise BackendError("cannot pair a Hermite expansion with a Rademacher backend")
        if f_is_hermite:
            return _sparse_dot(fb, gb)
        if f_kind == "table" or g_kind == "table":
            return float(np.mean(evaluate_table(f) * evaluate_table(g)))
        return _sparse_dot(fb, gb)

    # at least one Brownian side
    if f_kind == "brownian" and g_kind == "brownian":
        return program_inner(f.grid, fb, gb)
    if f_kind == "brownian" and g_kind == "chaos" and gb.kind == HERMITE:
        need = _max_degree(gb)
        return _sparse_dot(hermite_decompose(f.grid, fb, max(fb.degree_cap, need)), gb)
    if g_kind == "brownian" and f_kind == "chaos" and fb.kind == HERMITE:
        return inner_product(g, f)
    raise BackendError(f"no exact inner product between {f_kind} and {g_kind} backends")


def _sparse_dot(a: ChaosCoefficients, b: ChaosCoefficients) -> float:
    small, large = (a.entries, b.entries) if len(a.entries) <= len(b.entries) else (
        b.entries,
        a.entries,
    )
    return float(sum(c * large.get(ix, 0.0) for ix, c in small.items()))


def _max_degree(c: ChaosCoefficients) -> int:
    if c.kind == WALSH:
        return 1
    return max((d for ix in c.entries for _, _, d in ix), default=1)


def inner_product_mc(
    f: NoiseFunctional,
    g: NoiseFunctional,
    samples: int,
    seed: int,
    workers: int = 1,
) -> MCEstimate:
    """Monte Carlo inner product over Gaussian increments, with standard error.

    Bit-reproducible for a fixed (seed, workers) pair: each worker owns a
    Philox substream and a fixed contiguous chunk of the sample budget.
    """
    require_same_grid(f.grid, g.grid)
    for h in (f, g):
        if backend_kind(h) not in ("brownian", "chaos") or (
            backend_kind(h) == "chaos" and h.backend.kind != HERMITE
        ):
            raise BackendError("MC inner products pair Brownian programs or Hermite expansions")
    from ._rng import chunk_bounds, worker_generator

    d = max(getattr(f.backend, "channels", 1), getattr(g.backend, "channels", 1))
    scale = math.sqrt(float(f.grid.cell_length))
    n = f.grid.n_cells
    total = 0.0
    total_sq = 0.0
    for w, (lo, hi) in enumerate(chunk_bounds(samples, workers)):
        rng = worker_generator(seed, w)
        # fixed sub-chunk size bounds memory; one sequential stream per worker,
        # so the split does not change the drawn values
        for start in range(lo, hi, _MC_CHUNK):
            rows = min(_MC_CHUNK, hi - start)
            inc = rng.standard_normal((rows, n, d)) * scale
            vals = _values_on_increments(f, inc) * _values_on_increments(g, inc)
            total += float(vals.sum())
            total_sq += float((vals * vals).sum())
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0)
    return MCEstimate(mean, math.sqrt(var / samples), samples)


def _values_on_increments(f: NoiseFunctional, inc: np.ndarray) -> np.ndarray:
    if isinstance(f.backend, BrownianProgram):
        return program_values(f.grid, f.backend, inc)
    b = f.backend
    if not isinstance(b, ChaosCoefficients):
        raise BackendError(
            "increment evaluation needs a Brownian program or a chaos expansion"
        )
    scale = math.sqrt(float(f.grid.cell_length))
    z = inc / scale
    max_deg = _max_degree(b)
    out = np.zeros(inc.shape[0])
    basis_cache: dict[tuple[int, int], np.ndarray] = {}
    for ix, c in b.entries.items():
        if b.kind == WALSH:
            # distinct-cell monomials in the z's mirror the character algebra
            ix = tuple((cell, 0, 1) for cell in ix)
        prod = np.full(inc.shape[0], c)
        for cell, ch, dgr in ix:
            key = (cell, ch)
            if key not in basis_cache:
                basis_cache[key] = hermite_values(z[:, cell, ch], max_deg)
            prod = prod * basis_cache[key][dgr]
        out += prod
    return out


# ---------------------------------------------------------------------------
# Brownian program internals


def program_values(grid: TimeGrid, p: BrownianProgram, inc: np.ndarray) -> np.ndarray:
    """Evaluate on a batch of increment tables of shape (k, n, d)."""
    if inc.ndim == 2:
        inc = inc[:, :, None]
    out = np.zeros(inc.shape[0])
    for term in p.terms:
        if isinstance(term, ItoTerm):
            out += term.weight * iterated_sum(term.kernel, inc)
        else:
            vals = np.full(inc.shape[0], term.weight)
            for fac in term.factors:
                vals = vals * fac.callable()(inc[:, fac.cell, fac.channel])
            out += vals
    return out


def _factor_moments(fac: MapFactor, scale: float) -> tuple[float, float]:
    """(E[m], E[increment * m]) for one map factor."""
    coeffs, _ = project_scalar_map(fac.callable(), scale, 1)
    return float(coeffs[0]), scale * float(coeffs[1])


def program_mean(grid: TimeGrid, p: BrownianProgram) -> float:
    scale = math.sqrt(float(grid.cell_length))
    total = 0.0
    for term in p.terms:
        if isinstance(term, ItoTerm):
            continue  # iterated sums of centered increments have mean zero
        prod = term.weight
        for fac in term.factors:
            prod *= _factor_moments(fac, scale)[0]
        total += prod
    return total


def _term_inner(grid: TimeGrid, a: ProgramTerm, b: ProgramTerm) -> float:
    scale = math.sqrt(float(grid.cell_length))
    h = cell_lengths(grid)
    if isinstance(a, ItoTerm) and isinstance(b, ItoTerm):
        return a.weight * b.weight * a.kernel.cross_norm(b.kernel, h)
    if isinstance(a, MapTerm) and isinstance(b, MapTerm):
        slots_a = {(f.cell, f.channel): f for f in a.factors}
        slots_b = {(f.cell, f.channel): f for f in b.factors}
        prod = a.weight * b.weight
        for key in set(slots_a) | set(slots_b):
            if key in slots_a and key in slots_b:
                prod *= pair_mean(
                    slots_a[key].callable(), slots_b[key].callable(), scale
                )
            elif key in slots_a:
                prod *= _factor_moments(slots_a[key], scale)[0]
            else:
                prod *= _factor_moments(slots_b[key], scale)[0]
        return prod
    ito, mp = (a, b) if isinstance(a, ItoTerm) else (b, a)
    return _ito_map_inner(grid, ito, mp, scale)


def _ito_map_inner(grid: TimeGrid, ito: ItoTerm, mp: MapTerm, scale: float) -> float:
    """E[I_r(k) * prod maps]: only tuples inside the map's slots survive."""
    kern = ito.kernel
    by_cell = {(f.cell, f.channel): f for f in mp.factors}
    means = {key: _factor_moments(f, scale) for key, f in by_cell.items()}
    cells = sorted({f.cell for f in mp.factors})
    total = 0.0
    for tup in combinations(cells, kern.order):
        keys = [(c, kern.channels[s]) for s, c in enumerate(tup)]
        if any(k not in by_cell for k in keys):
            continue
        prod = kern.value(tup)
        if prod == 0.0:
            continue
        for key in keys:
            prod *= means[key][1]
        for key in by_cell:
            if key not in keys:
                prod *= means[key][0]
        total += prod
    return ito.weight * mp.weight * total


def program_inner(grid: TimeGrid, p: BrownianProgram, q: BrownianProgram) -> float:
    return float(
        sum(_term_inner(grid, a, b) for a in p.terms for b in q.terms)
    )


def program_norm_sq(grid: TimeGrid, p: BrownianProgram) -> float:
    return program_inner(grid, p, p)


def hermite_decompose(
    grid: TimeGrid, p: BrownianProgram, degree_cap: int | None = None, tol: float | None = None
) -> ChaosCoefficients:
    """Exact Hermite coefficients up to the degree cap, residual in `residual`."""
    cap = degree_cap if degree_cap is not None else p.degree_cap
    scale = math.sqrt(float(grid.cell_length))
    entries: dict = {}

    def add(ix, c):
        if c != 0.0:
            entries[ix] = entries.get(ix, 0.0) + c

    for term in p.terms:
        if isinstance(term, ItoTerm):
            root_h = scale**term.kernel.order
            for cells, v in term.kernel.iterate_entries():
                ix = hermite_index(
                    (c, term.kernel.channels[s], 1) for s, c in enumerate(cells)
                )
                add(ix, term.weight * v * root_h)
        else:
            coeff_lists = []
            for fac in term.factors:
                coeffs, _ = project_scalar_map(fac.callable(), scale, cap)
                coeff_lists.append((fac, coeffs))
            _tensor_accumulate(add, term.weight, coeff_lists)

    exact = program_norm_sq(grid, p)
    captured = float(sum(c * c for c in entries.values()))
    residual = max(exact - captured, 0.0)
    out = ChaosCoefficients(grid, entries, HERMITE, p.channels, residual)
    if tol is not None and residual > tol:
        import warnings

        warnings.warn(
            f"degree cap {cap} leaves residual squared norm {residual:.3e} > {tol:.1e}",
            stacklevel=2,
        )
    return out


def _tensor_accumulate(add, weight: float, coeff_lists) -> None:
    """Expand a product of per-slot Hermite series into flat entries."""

    def rec(i: int, ix: tuple, c: float) -> None:
        if c == 0.0:
            return
        if i == len(coeff_lists):
            add(hermite_index(ix), c)
            return
        fac, coeffs = coeff_lists[i]
        for d, cd in enumerate(coeffs):
            rec(i + 1, ix + ((fac.cell, fac.channel, d),) if d else ix, c * cd)

    rec(0, (), weight)


# ---------------------------------------------------------------------------
# shift and products


def shift(f: NoiseFunctional, k: int, mode: str = "cyclic") -> NoiseFunctional:
    """Translate by k cells; cyclic wraps, truncate drops mass leaving the window."""
    if mode not in ("cyclic", "truncate"):
        raise ValueError("shift mode must be 'cyclic' or 'truncate'")
    b = f.backend
    n = f.grid.n_cells
    if isinstance(b, RademacherTable):
        if mode == "cyclic":
            positions = np.arange(1 << n, dtype=np.uint64)
            kk = k % n
            mask = np.uint64((1 << n) - 1)
            rotated = ((positions << np.uint64(kk)) | (positions >> np.uint64(n - kk))) & mask
            out = np.empty_like(b.values)
            out[rotated] = b.values  # pattern at cells moves forward by k
            return NoiseFunctional.from_table(f.grid, out)
        coeffs = character_coefficients(b.values)
        shifted = _shift_dense(coeffs, k, n)
        return NoiseFunctional.from_table(f.grid, values_from_coefficients(shifted))
    if isinstance(b, ChaosCoefficients):
        moved: dict = {}
        for ix, c in b.entries.items():
            if mode == "truncate":
                support = index_support(ix)
                if any(not 0 <= cell + k < n for cell in support):
                    continue
            moved[shift_index(ix, k, n, mode == "cyclic")] = c
        return NoiseFunctional.from_chaos(
            ChaosCoefficients(f.grid, moved, b.kind, b.channels, b.residual)
        )
    raise BackendError(f"shift is defined for table and chaos backends, not {backend_kind(f)}")


def _shift_dense(coeffs: np.ndarray, k: int, n: int) -> np.ndarray:
    out = np.zeros_like(coeffs)
    masks = np.arange(coeffs.shape[0], dtype=np.uint64)
    limit = np.uint64((1 << n) - 1)
    if k >= 0:
        valid = ((masks << np.uint64(k)) & ~limit) == 0
        target = (masks[valid] << np.uint64(k)) & limit
    else:
        kk = np.uint64(-k)
        valid = (masks & np.uint64((1 << (-k)) - 1)) == 0
        target = masks[valid] >> kk
    out[target] = coeffs[valid]
    return out


def multiply(f: NoiseFunctional, g: NoiseFunctional) -> NoiseFunctional:
    """Pointwise product on a shared grid (value-table route)."""
    require_same_grid(f.grid, g.grid)
    return NoiseFunctional.from_table(f.grid, evaluate_table(f) * evaluate_table(g))


def joined_grid(left: TimeGrid, right: TimeGrid) -> TimeGrid:
    """Grid covering two adjacent equal-cell-length windows."""
    if left.interval_end != right.interval_start:
        raise GridMismatchError("windows are not adjacent")
    if left.cell_length != right.cell_length:
        raise GridMismatchError("adjacent windows must share the cell length")
    if left.base == right.base == 2 and left.level == right.level:
        return TimeGrid(left.interval_start, right.interval_end, left.level + 1, 2)
    n = left.n_cells + right.n_cells
    return TimeGrid(left.interval_start, right.interval_end, 1, n)


def tensor_product(f: NoiseFunctional, g: NoiseFunctional) -> NoiseFunctional:
    """Product functional on the joined window; f on the left, g on the right."""
    grid = joined_grid(f.grid, g.grid)
    left = evaluate_table(f)
    right = evaluate_table(g)
    return NoiseFunctional.from_table(grid, np.outer(right, left).ravel())


def random_functional(grid: TimeGrid, rng: np.random.Generator) -> NoiseFunctional:
    """Standard normal value table; the generic dense test subject."""
    return NoiseFunctional.from_table(grid, rng.standard_normal(1 << grid.n_cells))
