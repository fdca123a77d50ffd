"""Named functional families and exact spectral models for composition trees.

A balanced tree of sign combiners (majority, tribes blocks, parity) stays
analyzable far beyond the dense table cap.  The device: expand each combiner
in the orthonormal basis biased to its input distribution, phi(y) =
(y - mu) / sigma.  Squared coefficients then give, layer by layer, the exact
fraction of fluctuation mass on each child subset, and the tree's spectral
measure factors into a top-down branching process.  That yields closed-form
singleton masses, cardinality profiles, restricted masses for arbitrary cell
regions, and an exact set sampler, all without touching a 2^n table.

Small instances still materialize to tables, so every closed form here can be
cross-checked against the dense transform in tests.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._rng import worker_generator
from .functionals import BackendError, FamilyRef, ItoTerm, NoiseFunctional
from .grid import TimeGrid
from .kernels import SimplexKernel
from .walsh import DENSE_CELL_CAP, popcount, sign_table

DENSE_FANIN_CAP = 15


# ---------------------------------------------------------------------------
# one combiner layer in the biased basis


@dataclass(eq=False)
class TreeLayer:
    """Spectral data of one combiner reading m i.i.d. inputs of bias mu_in.

    q[t] is the fraction of output fluctuation mass on child subsets of size
    t; mask_w (when the combiner was expanded densely) refines this to a
    probability per subset bitmask, bit i standing for child i.
    """

    fanin: int
    mu_in: float
    mu_out: float
    sigma_sq: float
    q: np.ndarray
    mask_w: np.ndarray | None = None

    def subset_value(self, child_vals: np.ndarray) -> float:
        """E over subsets T of the product of child_vals inside T.

        With child_vals[i] the normalized mass child i keeps inside a region,
        this is the fraction of this node's fluctuation mass inside it.
        """
        v = np.asarray(child_vals, dtype=np.float64)
        if self.mask_w is not None:
            prods = np.ones(1)
            for i in range(self.fanin):
                prods = np.concatenate([prods, prods * v[i]])
            return float(self.mask_w @ prods)
        # symmetric layer: subsets of equal size share mass, so only the
        # elementary symmetric functions of the child values enter
        m = self.fanin
        e = np.zeros(m + 1)
        e[0] = 1.0
        for vi in v:
            e[1:] = e[1:] + vi * e[:-1]
        binoms = np.array([math.comb(m, t) for t in range(m + 1)], dtype=np.float64)
        return float(np.sum(self.q[1:] * e[1:] / binoms[1:]))

    def prefix_coeffs(self, full: int) -> tuple[float, float]:
        """(alpha, beta) with prefix mass = alpha + beta * partial-child mass.

        `full` counts the children lying entirely inside the prefix; the
        child at position `full`, if any, is the partial one.
        """
        m = self.fanin
        if self.mask_w is not None:
            inside = np.uint64((1 << full) - 1)
            masks = np.arange(self.mask_w.shape[0], dtype=np.uint64)
            sub = (masks & ~inside) == 0
            alpha = float(self.mask_w[sub].sum())
            if full < m:
                withp = (masks & ~(inside | np.uint64(1 << full))) == 0
                beta = float(self.mask_w[withp & ~sub].sum())
            else:
                beta = 0.0
            return alpha, beta
        alpha = beta = 0.0
        for t in range(1, m + 1):
            w_t = self.q[t] / math.comb(m, t)
            if w_t == 0.0:
                continue
            if t <= full:
                alpha += w_t * math.comb(full, t)
            if full < m and t - 1 <= full:
                beta += w_t * math.comb(full, t - 1)
        return alpha, beta

    def sample_children(self, rng: np.random.Generator) -> np.ndarray:
        if self.mask_w is not None:
            mask = int(rng.choice(self.mask_w.shape[0], p=self.mask_w))
            return np.array([i for i in range(self.fanin) if mask >> i & 1])
        t = int(rng.choice(self.fanin + 1, p=self.q))
        return rng.choice(self.fanin, size=t, replace=False)


def _dense_layer(table: np.ndarray, mu_in: float) -> TreeLayer:
    """Biased transform of an explicit +-1 table over 2^m sign patterns.

    Table positions follow the usual bit convention, bit i = 0 meaning input
    i equals +1.  Contracting the 2x2 matrix [[p+, p-], [sigma/2, -sigma/2]]
    along every axis turns values into coefficients on phi-products.
    """
    m = int(round(math.log2(table.shape[0])))
    if table.shape[0] != 1 << m or m > DENSE_FANIN_CAP:
        raise ValueError("dense combiner tables capped at 2**15 entries")
    sigma_sq_in = 1.0 - mu_in * mu_in
    if sigma_sq_in <= 0.0:
        raise ValueError("combiner inputs are almost surely constant")
    sigma = math.sqrt(sigma_sq_in)
    p_plus = (1.0 + mu_in) / 2.0
    p_minus = (1.0 - mu_in) / 2.0
    mat = np.array([[p_plus, p_minus], [sigma / 2.0, -sigma / 2.0]])
    coeff = np.asarray(table, dtype=np.float64).reshape((2,) * m)
    for axis in range(m):
        coeff = np.tensordot(mat, coeff, axes=([1], [axis]))
        coeff = np.moveaxis(coeff, 0, axis)
    coeff = coeff.reshape(-1)
    sq = coeff * coeff
    mu_out = float(coeff[0])
    fluct = float(sq.sum() - sq[0])
    if fluct <= 0.0:
        raise ValueError("combiner output is almost surely constant")
    mask_w = sq / fluct
    mask_w[0] = 0.0
    sizes = popcount(np.arange(1 << m, dtype=np.uint64))
    q = np.zeros(m + 1)
    np.add.at(q, sizes, mask_w)
    return TreeLayer(m, mu_in, mu_out, fluct, q, mask_w=mask_w)


def _sized_layer(kind: str, m: int, mu_in: float) -> TreeLayer:
    """Closed-form layer for the symmetric combiners and/or/parity.

    Per-size masses are assembled in log space; for fanin in the hundreds the
    individual squared coefficients underflow long before the sums do.
    """
    sigma_sq_in = 1.0 - mu_in * mu_in
    if sigma_sq_in <= 0.0:
        raise ValueError("combiner inputs are almost surely constant")
    log_sigma = 0.5 * math.log(sigma_sq_in)
    t = np.arange(m + 1, dtype=np.float64)
    log_binom = np.array(
        [math.lgamma(m + 1) - math.lgamma(k + 1) - math.lgamma(m - k + 1) for k in range(m + 1)]
    )
    if kind == "parity":
        mu_out = mu_in**m
        if mu_in == 0.0:
            q = np.zeros(m + 1)
            q[m] = 1.0
        else:
            logs = 2.0 * (t * log_sigma + (m - t) * math.log(abs(mu_in)))
            logs[0] = -np.inf
            peak = logs[1:].max()
            q = np.exp(logs - peak)
            q[0] = 0.0
            q /= q.sum()
    elif kind in ("and", "or"):
        # and: all inputs +1; or: any input +1.  delta is the rare-side
        # probability doubled, kept separate so sigma_sq stays accurate.
        base = math.log1p(mu_in) if kind == "and" else math.log1p(-mu_in)
        delta = 2.0 * math.exp(m * base - m * math.log(2.0))
        if delta == 0.0:
            raise ValueError("combiner output is almost surely constant")
        mu_out = delta - 1.0 if kind == "and" else 1.0 - delta
        logs = log_binom + 2.0 * ((1 - m) * math.log(2.0) + t * log_sigma + (m - t) * base)
        logs[0] = -np.inf
        peak = logs[1:].max()
        q = np.exp(logs - peak)
        q[0] = 0.0
        q /= q.sum()
    else:
        raise ValueError(f"unknown symmetric combiner {kind!r}")
    fluct = (1.0 - mu_out) * (1.0 + mu_out)
    if kind in ("and", "or"):
        fluct = delta * (2.0 - delta)
    if fluct <= 0.0:
        raise ValueError("combiner output is almost surely constant")
    return TreeLayer(m, mu_in, float(mu_out), float(fluct), q)


def majority_table(m: int) -> np.ndarray:
    """+-1 table of the majority of m inputs (m odd), bit i = 0 meaning +1."""
    if m % 2 == 0:
        raise ValueError("majority needs an odd fanin")
    masks = np.arange(1 << m, dtype=np.uint64)
    plus = m - popcount(masks)
    return np.where(2 * plus > m, 1.0, -1.0)


def build_layers(specs: list[tuple[str, int]]) -> list[TreeLayer]:
    """Layer stats for combiner specs listed root first; leaves are unbiased."""
    layers: list[TreeLayer] = []
    mu = 0.0
    for kind, m in reversed(specs):
        if kind == "majority":
            layer = _dense_layer(majority_table(m), mu)
        else:
            layer = _sized_layer(kind, m, mu)
        layers.append(layer)
        mu = layer.mu_out
    layers.reverse()
    return layers


# ---------------------------------------------------------------------------
# the tree as a spectral measure


@dataclass(eq=False)
class TreeModel:
    """Exact spectral measure of a balanced combiner tree over grid cells.

    Leaf j of the tree reads cell j; cells past leaf_count (block padding)
    never enter any spectral set.  Total mass is 1 since values are +-1.
    """

    grid: TimeGrid
    layers: list[TreeLayer]
    metadata: dict = field(default_factory=dict)

    multiplicity_mass: float = 0.0
    total_mass: float = 1.0

    def __post_init__(self) -> None:
        self.leaf_count = 1
        for layer in self.layers:
            self.leaf_count *= layer.fanin
        if self.leaf_count > self.grid.n_cells:
            raise ValueError("tree has more leaves than the grid has cells")
        self.empty_mass = self.layers[0].mu_out ** 2
        self.fluctuation_mass = self.layers[0].sigma_sq

    # spans[d] = number of leaves under one node of layer d
    def _span(self, depth: int) -> int:
        s = 1
        for layer in self.layers[depth:]:
            s *= layer.fanin
        return s

    def singleton_mass(self) -> float:
        frac = 1.0
        for layer in self.layers:
            frac *= float(layer.q[1])
        return self.fluctuation_mass * frac

    def cardinality_profile(self) -> dict[int, float]:
        """Unnormalized mass per set size, the empty atom included at 0."""
        poly = np.array([0.0, 1.0])
        for layer in reversed(self.layers):
            acc = np.zeros(1)
            power = np.ones(1)
            for t in range(1, layer.fanin + 1):
                power = np.convolve(power, poly)
                if layer.q[t] != 0.0:
                    acc = _poly_add(acc, layer.q[t] * power)
            poly = acc
        out = {0: self.empty_mass}
        for k in range(1, poly.shape[0]):
            if poly[k] != 0.0:
                out[k] = self.fluctuation_mass * float(poly[k])
        return out

    def subset_mass(self, cells: frozenset[int]) -> float:
        """Mass of sets contained in `cells`; the empty set always is."""
        inside = np.array(sorted(c for c in cells if c < self.leaf_count), dtype=np.int64)

        def node_value(depth: int, lo: int) -> float:
            span = self._span(depth)
            count = int(
                np.searchsorted(inside, lo + span, side="left")
                - np.searchsorted(inside, lo, side="left")
            )
            if count == span:
                return 1.0
            if count == 0:
                return 0.0
            layer = self.layers[depth]
            child_span = span // layer.fanin
            vals = np.array(
                [node_value(depth + 1, lo + i * child_span) for i in range(layer.fanin)]
            )
            return layer.subset_value(vals)

        return self.empty_mass + self.fluctuation_mass * node_value(0, 0)

    def prefix_mass(self, boundary: int) -> float:
        """Mass of sets inside the first `boundary` cells, in depth many steps."""
        b = min(boundary, self.leaf_count)
        if b <= 0:
            return self.empty_mass
        if b == self.leaf_count:
            return self.empty_mass + self.fluctuation_mass

        def node_value(depth: int, cut: int) -> float:
            # normalized mass of this node's sets left of a strictly interior cut
            layer = self.layers[depth]
            child_span = self._span(depth) // layer.fanin
            full, rem = divmod(cut, child_span)
            alpha, beta = layer.prefix_coeffs(full)
            if rem == 0:
                return alpha
            return alpha + beta * node_value(depth + 1, rem)

        return self.empty_mass + self.fluctuation_mass * node_value(0, b)

    def sample(self, k: int, seed: int) -> list[tuple[int, ...]]:
        rng = worker_generator(seed, 0)
        draws: list[tuple[int, ...]] = []
        for _ in range(k):
            if rng.uniform() < self.empty_mass / self.total_mass:
                draws.append(())
                continue
            cells: list[int] = []
            stack = [(0, 0)]
            while stack:
                depth, lo = stack.pop()
                if depth == len(self.layers):
                    cells.append(lo)
                    continue
                layer = self.layers[depth]
                child_span = self._span(depth) // layer.fanin
                for i in layer.sample_children(rng):
                    stack.append((depth + 1, lo + int(i) * child_span))
            draws.append(tuple(sorted(cells)))
        return draws


def _poly_add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[0] < b.shape[0]:
        a, b = b, a
    out = a.copy()
    out[: b.shape[0]] += b
    return out


# ---------------------------------------------------------------------------
# named families


def tribes_shape(level: int) -> tuple[int, int, int]:
    """(width, blocks, ignored) for the tribes function on 2**level cells.

    Width grows like level minus its log so block failure odds track 1/blocks;
    cells left over after whole blocks are ignored and carry no mass.
    """
    n = 1 << level
    width = max(1, level - math.ceil(math.log2(level)) if level > 1 else 1)
    blocks = n // width
    return width, blocks, n - width * blocks


def _tree_specs(grid: TimeGrid, ref: FamilyRef) -> list[tuple[str, int]]:
    if ref.name == "majority3-iterated":
        return [("majority", 3)] * ref.level
    if ref.name == "tribes":
        width, blocks, _ = tribes_shape(ref.level)
        return [("or", blocks), ("and", width)]
    raise BackendError(f"family {ref.name!r} is not tree-structured")


def family_model(grid: TimeGrid, ref: FamilyRef) -> TreeModel | None:
    try:
        specs = _tree_specs(grid, ref)
    except BackendError:
        return None
    meta: dict = {}
    if ref.name == "tribes":
        width, blocks, ignored = tribes_shape(ref.level)
        meta = {"width": width, "blocks": blocks, "ignored_cells": ignored}
    return TreeModel(grid, build_layers(specs), metadata=meta)


def _family_grid(name: str, level: int, base: int | None = None) -> TimeGrid:
    if base is None:
        base = 3 if name == "majority3-iterated" else 2
    return TimeGrid(0, 1, level, base)


def make_functional(name: str, level: int, **params) -> NoiseFunctional:
    if level < 0:
        raise ValueError("level must be nonnegative")
    if name == "single-coordinate":
        cell = int(params.pop("cell", 0))
        grid = _family_grid(name, level, params.pop("base", None))
        _no_extra(name, params)
        return NoiseFunctional.from_walsh_entries(grid, {(cell,): 1.0})
    if name == "parity":
        grid = _family_grid(name, level, params.pop("base", None))
        _no_extra(name, params)
        return NoiseFunctional.from_walsh_entries(grid, {tuple(range(grid.n_cells)): 1.0})
    if name == "coordinate-sum":
        grid = _family_grid(name, level, params.pop("base", None))
        _no_extra(name, params)
        c = 1.0 / math.sqrt(grid.n_cells)
        return NoiseFunctional.from_walsh_entries(grid, {(i,): c for i in range(grid.n_cells)})
    if name == "majority3-iterated":
        if level < 1:
            raise ValueError("iterated majority needs level >= 1")
        grid = _family_grid(name, level)
        _no_extra(name, params)
        return NoiseFunctional(grid, FamilyRef(name, level))
    if name == "tribes":
        if level < 1:
            raise ValueError("tribes needs level >= 1")
        grid = _family_grid(name, level)
        _no_extra(name, params)
        return NoiseFunctional(grid, FamilyRef(name, level))
    if name in ("white-noise-i1", "white-noise-i2"):
        grid = _family_grid(name, level, params.pop("base", None))
        _no_extra(name, params)
        order = 1 if name.endswith("i1") else 2
        kernel = SimplexKernel.constant(order, grid.n_cells, 1.0)
        return NoiseFunctional.from_program(grid, [ItoTerm(1.0, kernel)], degree_cap=order)
    raise ValueError(f"unknown family {name!r}; known: {', '.join(family_names())}")


def _no_extra(name: str, params: dict) -> None:
    if params:
        raise ValueError(f"family {name!r} got unexpected parameters {sorted(params)}")


def family_names() -> list[str]:
    return [
        "single-coordinate",
        "parity",
        "coordinate-sum",
        "majority3-iterated",
        "tribes",
        "white-noise-i1",
        "white-noise-i2",
    ]


def evaluate_family(grid: TimeGrid, ref: FamilyRef, omega) -> float:
    om = np.asarray(omega, dtype=np.float64)
    if om.shape != (grid.n_cells,) or not np.all(np.abs(om) == 1.0):
        raise ValueError("omega must be a +-1 vector, one sign per cell")
    return float(_evaluate_rows(grid, ref, om[None, :])[0])


def _evaluate_rows(grid: TimeGrid, ref: FamilyRef, rows: np.ndarray) -> np.ndarray:
    if ref.name == "majority3-iterated":
        v = rows
        for _ in range(ref.level):
            v = np.where(v.reshape(v.shape[0], -1, 3).sum(axis=2) > 0, 1.0, -1.0)
        return v[:, 0]
    if ref.name == "tribes":
        width, blocks, _ = tribes_shape(ref.level)
        used = rows[:, : width * blocks].reshape(rows.shape[0], blocks, width)
        block_true = (used == 1.0).all(axis=2)
        return np.where(block_true.any(axis=1), 1.0, -1.0)
    raise BackendError(f"family {ref.name!r} has no pointwise evaluator")


def materialize(grid: TimeGrid, ref: FamilyRef) -> NoiseFunctional:
    """Dense value table of a family instance; only below the dense cap."""
    n = grid.n_cells
    if n > DENSE_CELL_CAP:
        raise BackendError(
            f"family {ref.name!r} at {n} cells exceeds the dense cap; "
            "use its spectral model instead"
        )
    values = _evaluate_rows(grid, ref, sign_table(n).astype(np.float64))
    return NoiseFunctional.from_table(grid, values)


def family_mean(grid: TimeGrid, ref: FamilyRef) -> float:
    model = family_model(grid, ref)
    if model is None:
        raise BackendError(f"family {ref.name!r} has no closed-form mean")
    return model.layers[0].mu_out


def family_norm_sq(grid: TimeGrid, ref: FamilyRef) -> float:
    # all tree families take values in {-1, +1}
    if family_model(grid, ref) is None:
        raise BackendError(f"family {ref.name!r} has no closed-form norm")
    return 1.0


# ---------------------------------------------------------------------------
# deterministic calibration measures for the dimension estimator


def calibration_measure(name: str, level: int):
    """One-atom measures with known scaling: a point, the whole window, and
    the middle-thirds construction at its natural base-3 resolution."""
    from .spectral import SpectralMeasure

    grid = TimeGrid(0, 1, level, 3)
    if name == "point":
        cells: tuple[int, ...] = (0,)
    elif name == "full-interval":
        cells = tuple(range(grid.n_cells))
    elif name == "cantor-thirds":
        idx = [0]
        for _ in range(level):
            idx = [3 * c for c in idx] + [3 * c + 2 for c in idx]
        cells = tuple(sorted(idx))
    else:
        raise ValueError(f"unknown calibration set {name!r}")
    return SpectralMeasure(grid, {cells: 1.0})


def calibration_names() -> list[str]:
    return ["point", "full-interval", "cantor-thirds"]
