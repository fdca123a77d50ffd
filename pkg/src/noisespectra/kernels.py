"""Kernels on the discrete ordered simplex {i_1 < ... < i_r} of grid cells.

A kernel of order r assigns a weight to every strictly increasing r-tuple of
cells, one channel tag per slot.  Separable kernels store one factor vector
per slot, so the iterated sums and the isometry norm run in O(r n) via
exclusive prefix sums; constant kernels are the all-ones separable case.
Dense kernels are kept for orders 1 and 2 (vector / strictly upper matrix).
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb
from typing import Iterator

import numpy as np

MAX_ENUMERATED_TUPLES = 2_000_000


@dataclass(frozen=True, eq=False)
class SimplexKernel:
    order: int
    n_cells: int
    factors: tuple[np.ndarray, ...] | None = None  # separable: one length-n vector per slot
    dense: np.ndarray | None = None  # order 1: (n,); order 2: strictly upper (n, n)
    channels: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.order < 1:
            raise ValueError("kernel order must be >= 1")
        if not self.channels:
            object.__setattr__(self, "channels", (0,) * self.order)
        if len(self.channels) != self.order:
            raise ValueError("one channel tag per kernel slot required")
        if (self.factors is None) == (self.dense is None):
            raise ValueError("exactly one of factors/dense must be given")
        if self.factors is not None:
            if len(self.factors) != self.order:
                raise ValueError("one factor vector per slot required")
            fac = tuple(np.asarray(v, dtype=np.float64) for v in self.factors)
            if any(v.shape != (self.n_cells,) for v in fac):
                raise ValueError("factor vectors must have length n_cells")
            object.__setattr__(self, "factors", fac)
        else:
            d = np.asarray(self.dense, dtype=np.float64)
            if self.order == 1 and d.shape != (self.n_cells,):
                raise ValueError("order-1 dense kernel must be a length-n vector")
            if self.order == 2:
                if d.shape != (self.n_cells, self.n_cells):
                    raise ValueError("order-2 dense kernel must be an (n, n) matrix")
                d = np.triu(d, k=1)  # only the strict upper triangle is the kernel
            if self.order > 2:
                raise ValueError("dense kernels support orders 1 and 2 only")
            object.__setattr__(self, "dense", d)

    # -- constructors --------------------------------------------------------
    @classmethod
    def constant(
        cls, order: int, n_cells: int, value: float = 1.0, channels: tuple[int, ...] = ()
    ) -> "SimplexKernel":
        vecs = [np.ones(n_cells) for _ in range(order)]
        vecs[0] = np.full(n_cells, float(value))
        return cls(order, n_cells, factors=tuple(vecs), channels=channels)

    @classmethod
    def separable(cls, vectors, channels: tuple[int, ...] = ()) -> "SimplexKernel":
        vecs = tuple(np.asarray(v, dtype=np.float64) for v in vectors)
        return cls(len(vecs), vecs[0].shape[0], factors=vecs, channels=channels)

    # -- values ---------------------------------------------------------------
    def value(self, cells: tuple[int, ...]) -> float:
        if len(cells) != self.order or any(a >= b for a, b in zip(cells, cells[1:])):
            raise ValueError(f"{cells} is not an increasing {self.order}-tuple")
        if self.factors is not None:
            return float(np.prod([v[c] for v, c in zip(self.factors, cells)]))
        if self.order == 1:
            return float(self.dense[cells[0]])
        return float(self.dense[cells[0], cells[1]])

    def tuple_count(self) -> int:
        return comb(self.n_cells, self.order)

    def iterate_entries(self) -> Iterator[tuple[tuple[int, ...], float]]:
        """All (tuple, weight) pairs with nonzero weight; guarded by size."""
        if self.tuple_count() > MAX_ENUMERATED_TUPLES:
            raise ValueError(
                f"kernel has {self.tuple_count()} tuples, above the enumeration "
                f"cap of {MAX_ENUMERATED_TUPLES}"
            )
        for cells in combinations(range(self.n_cells), self.order):
            v = self.value(cells)
            if v != 0.0:
                yield cells, v

    # -- exact quadratic forms -------------------------------------------------
    def isometry_norm_sq(self, cell_lengths: np.ndarray) -> float:
        """sum over the simplex of kernel**2 times the product of cell lengths."""
        h = np.asarray(cell_lengths, dtype=np.float64)
        if self.factors is not None:
            return _ordered_product_sum([v * v for v in self.factors], h)
        if self.order == 1:
            return float(np.sum(self.dense**2 * h))
        return float(np.einsum("ij,i,j->", self.dense**2, h, h))

    def cross_norm(self, other: "SimplexKernel", cell_lengths: np.ndarray) -> float:
        """sum over the simplex of k_a * k_b * product of cell lengths.

        Zero when orders or any slot channel differ (independent factors).
        """
        if self.order != other.order or self.channels != other.channels:
            return 0.0
        h = np.asarray(cell_lengths, dtype=np.float64)
        if self.factors is not None and other.factors is not None:
            return _ordered_product_sum(
                [a * b for a, b in zip(self.factors, other.factors)], h
            )
        return sum(
            va * other.value(cells) * float(np.prod(h[list(cells)]))
            for cells, va in self.iterate_entries()
        )


def _ordered_product_sum(slot_vectors: list[np.ndarray], weights: np.ndarray) -> float:
    """sum over i_1 < ... < i_r of prod_s slot_vectors[s][i_s] * weights[i_s]."""
    acc = np.ones_like(weights)
    for vec in slot_vectors:
        term = vec * weights * acc
        acc = np.concatenate(([0.0], np.cumsum(term)[:-1]))  # exclusive prefix sum
    # after the last slot, acc[j] sums tuples with final index < j; total is full sum
    return float(np.sum(term))


def iterated_sum(kernel: SimplexKernel, increments: np.ndarray) -> np.ndarray:
    """Batched iterated sum over the ordered simplex.

    increments has shape (k, n, d); the result has shape (k,).  Slot s reads
    channel kernel.channels[s].
    """
    inc = np.asarray(increments, dtype=np.float64)
    if inc.ndim == 2:
        inc = inc[:, :, None]
    k_paths, n, _ = inc.shape
    if n != kernel.n_cells:
        raise ValueError("increment table and kernel disagree on cell count")
    if kernel.factors is not None:
        acc = np.ones((k_paths, n))
        for slot, vec in enumerate(kernel.factors):
            term = inc[:, :, kernel.channels[slot]] * vec[None, :] * acc
            csum = np.cumsum(term, axis=1)
            acc = np.concatenate((np.zeros((k_paths, 1)), csum[:, :-1]), axis=1)
        return term.sum(axis=1)
    if kernel.order == 1:
        return inc[:, :, kernel.channels[0]] @ kernel.dense
    x = inc[:, :, kernel.channels[0]]
    y = inc[:, :, kernel.channels[1]]
    return np.einsum("ki,ij,kj->k", x, kernel.dense, y)
