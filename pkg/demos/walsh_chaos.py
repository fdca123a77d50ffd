"""Characters on a 4-cell window and the chaos decomposition of a table.

Every function of the 4 cell signs is a unique combination of the 16
characters chi_S.  The script decomposes a random table, checks Parseval,
and reconstructs the table from its coefficients.
"""
import numpy as np

from noisespectra import NoiseFunctional, TimeGrid, inner_product
from noisespectra.functionals import evaluate_table, random_functional
from noisespectra.transform import decompose, reconstruct


def main() -> None:
    grid = TimeGrid(0, 1, 2)
    rng = np.random.default_rng(7)
    f = random_functional(grid, rng)
    print(f"window {grid}, {grid.n_cells} cells, table of {1 << grid.n_cells} values")

    coeffs = decompose(f)
    print(f"{len(coeffs.entries)} character coefficients")
    for ix, c in coeffs.sorted_items()[:6]:
        print(f"  chi_{set(ix) if ix else '{}'}  {c:+.6f}")
    print("  ...")

    norm_sq = inner_product(f, f)
    parseval = sum(c * c for c in coeffs.entries.values())
    print(f"Parseval: ||f||^2 = {norm_sq!r}, sum of squares = {parseval!r}")

    back = reconstruct(coeffs)
    err = np.abs(evaluate_table(back) - evaluate_table(f)).max()
    print(f"reconstruction max error {err:.3e}")


if __name__ == "__main__":
    main()
