"""Monte Carlo checks of the discrete white-noise integrals.

Streams Brownian increments at level 8, confirms the isometry for the
first two iterated integrals, then reads off the 1-point spectral density
of I_1(1) and the endpoint mass profile around t = 1/2.
"""
from fractions import Fraction

from noisespectra import (
    NoiseFunctional,
    SimplexKernel,
    TimeGrid,
    endpoint_mass_profile,
    isometry_check,
    npoint_density_estimate,
    orthogonality_check,
)


def main() -> None:
    grid = TimeGrid(0, 1, 8)
    n = grid.n_cells
    paths = 40_000
    k1 = SimplexKernel.constant(1, n)
    k2 = SimplexKernel.constant(2, n)

    for name, check in (
        ("I_1 isometry", isometry_check(grid, k1, paths, seed=1)),
        ("I_2 isometry", isometry_check(grid, k2, paths, seed=2)),
        ("I_1 vs I_2 orthogonality", orthogonality_check(grid, k1, k2, paths, seed=3)),
    ):
        e = check.estimate
        print(f"{name}: exact {check.target:.6f}, "
              f"mc {e.value:.6f} +- {e.stderr:.6f}, z {check.z:+.2f}")

    f = NoiseFunctional.from_family("white-noise-i1", 8)
    est = npoint_density_estimate(f, 1, paths, seed=4)
    print(f"1-point density of I_1(1): mean {est.mean_density:.4f} "
          f"+- {est.mean_density_stderr:.4f} (flat profile, exact value 1)")

    eps = [Fraction(1, 2**j) for j in (3, 4, 5, 6)]
    profile = endpoint_mass_profile(f, Fraction(1, 2), eps)
    print("mass of sets meeting (1/2 - eps, 1/2 + eps):")
    for e, m in zip(eps, profile):
        print(f"  eps {str(e):>5}: mass {float(m)!r} (2*eps = {float(2 * e)})")


if __name__ == "__main__":
    main()
