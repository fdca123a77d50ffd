"""Command-line surface: file-based, reproducible pipelines over the library.

Exit codes: 0 success, 2 validation or usage error, 3 ran-but-failed a
numerical tolerance.  Every command that writes files also writes
`<first output>.manifest.json` recording the argument vector, seeds,
versions, input digests, and wall time.  Outputs are atomic.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from fractions import Fraction

import numpy as np

from ._rng import default_workers
from .functionals import BackendError, NoiseFunctional, random_functional
from .grid import ElementarySet, GridMismatchError, TimeGrid, left_of, right_of
from .serialize import (
    FormatError,
    finish_manifest,
    functional_from_data,
    functional_to_data,
    grid_to_data,
    kernel_from_data,
    measure_to_data,
    read_json,
    start_manifest,
    write_csv,
    write_json,
)
from .spectral import (
    cardinality_profile,
    mass_of_subsets_of,
    product,
    restrict,
    sample_sets,
    singleton_mass,
    spectral_measure_of,
)
from .structure import classify, interior_cut_distances
from .transform import conditional_expectation, decompose
from .walsh import DENSE_CELL_CAP

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_TOLERANCE = 3

USAGE_ERRORS = (FormatError, GridMismatchError, BackendError, ValueError, OSError)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noisespectra",
        description="spectral measures of noise functionals on finite grids",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text, **kwargs):
        p = sub.add_parser(name, help=help_text, **kwargs)
        p.add_argument("--threads", type=int, default=None,
                       help="worker count (default: NOISESPECTRA_THREADS or 1)")
        return p

    p = add("decompose", "chaos coefficients of a functional")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tol", type=float, default=None)

    p = add("project", "conditional expectation onto an elementary set")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--set", dest="region", required=True,
                   help='cell ranges like "0:2,5:6"; "" is the empty set')
    p.add_argument("--out", required=True)

    p = add("spectrum", "spectral measure of a functional")
    _add_source(p)
    p.add_argument("--out", required=True)

    p = add("sample", "draw spectral sets")
    _add_source(p)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = add("factor-check", "is a functional an exact product across a cut")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--cut", required=True, help="grid point, e.g. 0.5 or 1/2")
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--out", default=None)

    p = add("cuts", "per-boundary cut distances")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)

    p = add("classify", "cross-resolution spectral summaries of a family")
    p.add_argument("--family", required=True)
    p.add_argument("--levels", required=True, help='range "1..6" or list "1,2,3"')
    p.add_argument("--out", required=True)

    p = add("ito", "Monte Carlo isometry check of an iterated integral")
    p.add_argument("--kernel", required=True, help="kernel JSON file")
    p.add_argument("--level", type=int, required=True)
    p.add_argument("--paths", type=int, default=100000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gate", type=float, default=5.0,
                   help="max |z| between MC moment and exact target")
    p.add_argument("--out", default=None)

    p = add("npoint", "n-point spectral density table by MC Hermite projection")
    _add_source(p)
    p.add_argument("--order", type=int, required=True, choices=(1, 2))
    p.add_argument("--paths", type=int, default=100000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = add("dim", "box-counting dimension of sampled spectral sets")
    p.add_argument("--family", required=True)
    p.add_argument("--levels", required=True)
    p.add_argument("--samples", type=int, default=20000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = add("calibrate", "gate the dimension estimator on deterministic sets")
    p.add_argument("--depth", type=int, default=8)
    p.add_argument("--samples", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)

    p = add("selftest", "exact-identity suite end to end")
    p.add_argument("--level", type=int, default=10,
                   help="cell count for the dense corpus (capped at 12)")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--tol", type=float, default=1e-10)

    return parser


def _add_source(p: argparse.ArgumentParser) -> None:
    p.add_argument("--in", dest="infile", default=None)
    p.add_argument("--family", default=None)
    p.add_argument("--level", type=int, default=None)


def _load_source(args) -> NoiseFunctional:
    if args.infile and args.family:
        raise FormatError("give either --in or --family, not both")
    if args.infile:
        return functional_from_data(read_json(args.infile))
    if args.family:
        if args.level is None:
            raise FormatError("--family needs --level")
        return NoiseFunctional.from_family(args.family, args.level)
    raise FormatError("a source is required: --in FILE or --family NAME --level K")


def _workers(args) -> int:
    return args.threads if args.threads is not None else default_workers()


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else EXIT_OK
    handler = {
        "decompose": cmd_decompose,
        "project": cmd_project,
        "spectrum": cmd_spectrum,
        "sample": cmd_sample,
        "factor-check": cmd_factor_check,
        "cuts": cmd_cuts,
        "classify": cmd_classify,
        "ito": cmd_ito,
        "npoint": cmd_npoint,
        "dim": cmd_dim,
        "calibrate": cmd_calibrate,
        "selftest": cmd_selftest,
    }[args.command]
    try:
        return handler(args)
    except USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


# ---------------------------------------------------------------------------
# commands


def cmd_decompose(args) -> int:
    manifest, t0 = start_manifest("decompose", _argv(), None)
    f = functional_from_data(read_json(args.infile))
    coeffs = decompose(f, args.tol)
    out = functional_to_data(NoiseFunctional.from_chaos(coeffs))
    write_json(args.out, out)
    finish_manifest(manifest, t0, [args.infile], [args.out])
    print(f"{len(coeffs.entries)} entries, residual {coeffs.residual!r}")
    return EXIT_OK


def cmd_project(args) -> int:
    manifest, t0 = start_manifest("project", _argv(), None)
    f = functional_from_data(read_json(args.infile))
    region = ElementarySet.parse(f.grid, args.region)
    g = conditional_expectation(f, region)
    write_json(args.out, functional_to_data(g))
    finish_manifest(manifest, t0, [args.infile], [args.out])
    print(f"projected onto {region.cell_count} cells")
    return EXIT_OK


def cmd_spectrum(args) -> int:
    manifest, t0 = start_manifest("spectrum", _argv(), None)
    f = _load_source(args)
    mu = spectral_measure_of(f)
    if mu.is_dense:
        data = measure_to_data(mu)
    else:
        profile = cardinality_profile(mu)
        data = {
            "schema_version": "1",
            "grid": grid_to_data(mu.grid),
            "kind": "profile",
            "total_mass": mu.total_mass,
            "empty_mass": mu.empty_atom,
            "singleton_mass": singleton_mass(mu),
            "cardinality_profile": {str(k): v for k, v in profile.items()},
        }
    write_json(args.out, data)
    finish_manifest(manifest, t0, [args.infile] if args.infile else [], [args.out])
    print(f"total mass {mu.total_mass!r}")
    return EXIT_OK


def cmd_sample(args) -> int:
    manifest, t0 = start_manifest("sample", _argv(), args.seed)
    f = _load_source(args)
    sets = sample_sets(f, args.samples, args.seed)
    rows = [
        (i, s.cardinality, " ".join(str(c) for c in s.cells))
        for i, s in enumerate(sets)
    ]
    write_csv(args.out, ["index", "cardinality", "cells"], rows)
    finish_manifest(manifest, t0, [args.infile] if args.infile else [], [args.out])
    print(f"wrote {len(sets)} sets")
    return EXIT_OK


def cmd_factor_check(args) -> int:
    manifest, t0 = start_manifest("factor-check", _argv(), None)
    f = functional_from_data(read_json(args.infile))
    cut = f.grid.boundary_index(Fraction(args.cut))
    n = f.grid.n_cells
    if n > DENSE_CELL_CAP:
        raise FormatError("factor-check needs a dense-representable functional")
    from .functionals import evaluate_table

    values = evaluate_table(f)
    verdict: dict = {"cut": args.cut, "cut_index": cut}
    if cut == 0 or cut == n:
        verdict["exact_product"] = True
        verdict["second_singular_value"] = 0.0
    else:
        mat = values.reshape(1 << (n - cut), 1 << cut)
        s = np.linalg.svd(mat, compute_uv=False)
        second = float(s[1]) if s.shape[0] > 1 else 0.0
        verdict["second_singular_value"] = second
        verdict["exact_product"] = second <= args.tol * max(float(s[0]), 1.0)
    if 0 < cut < n:
        # for an exact product the straddling mass is the product of the
        # factor variances, so it vanishes only when a factor is constant
        mu = spectral_measure_of(f)
        straddle = mu.total_mass - mass_of_subsets_of(mu, left_of(f.grid, cut)) \
            - mass_of_subsets_of(mu, right_of(f.grid, cut)) + mu.empty_atom
        verdict["straddling_mass"] = float(straddle)
    print(f"exact-product: {'true' if verdict['exact_product'] else 'false'}")
    if args.out:
        write_json(args.out, {"schema_version": "1", **verdict})
        finish_manifest(manifest, t0, [args.infile], [args.out])
    return EXIT_OK


def cmd_cuts(args) -> int:
    manifest, t0 = start_manifest("cuts", _argv(), None)
    f = functional_from_data(read_json(args.infile))
    distances = interior_cut_distances(f)
    rows = []
    for b, d in enumerate(distances, start=1):
        t = f.grid.boundary(b)
        rows.append((b, str(t), float(t), float(d)))
    write_csv(args.out, ["boundary_index", "time_exact", "time", "distance"], rows)
    finish_manifest(manifest, t0, [args.infile], [args.out])
    print(f"max cut distance {float(distances.max()) if len(distances) else 0.0!r}")
    return EXIT_OK


def cmd_classify(args) -> int:
    manifest, t0 = start_manifest("classify", _argv(), None)
    levels = _parse_levels(args.levels)
    report = classify(args.family, levels)
    data = {
        "schema_version": "1",
        "family": report.family,
        "records": [
            {
                "level": r.level,
                "n_cells": r.n_cells,
                "total_mass": r.total_mass,
                "empty_mass": r.empty_mass,
                "singleton_mass": r.singleton_mass,
                "cardinality_profile": {str(k): v for k, v in r.cardinality_profile.items()},
                "max_cut_distance": r.max_cut_distance,
            }
            for r in report.records
        ],
        "singleton_fractions": list(report.singleton_fractions),
        "low_cardinality_fractions": list(report.low_cardinality_fractions),
        "verdicts": list(report.verdicts),
    }
    write_json(args.out, data)
    finish_manifest(manifest, t0, [], [args.out])
    for v in report.verdicts:
        print(v)
    return EXIT_OK


def cmd_ito(args) -> int:
    manifest, t0 = start_manifest("ito", _argv(), args.seed)
    grid = TimeGrid(0, 1, args.level)
    kernel = kernel_from_data(read_json(args.kernel), grid.n_cells)
    from .whitenoise import isometry_check

    check = isometry_check(grid, kernel, args.paths, args.seed, _workers(args))
    data = {
        "schema_version": "1",
        "grid": grid_to_data(grid),
        "order": kernel.order,
        "paths": args.paths,
        "seed": args.seed,
        "exact_second_moment": check.target,
        "mc_second_moment": check.estimate.value,
        "stderr": check.estimate.stderr,
        "z": check.z,
    }
    if args.out:
        write_json(args.out, data)
        finish_manifest(manifest, t0, [args.kernel], [args.out])
    print(
        f"exact {check.target!r}  mc {check.estimate.value!r} "
        f"+- {check.estimate.stderr!r}  z {check.z:.3f}"
    )
    if abs(check.z) > args.gate:
        print(f"tolerance failure: |z| > {args.gate}", file=sys.stderr)
        return EXIT_TOLERANCE
    return EXIT_OK


def cmd_npoint(args) -> int:
    manifest, t0 = start_manifest("npoint", _argv(), args.seed)
    f = _load_source(args)
    from .whitenoise import npoint_density_estimate

    est = npoint_density_estimate(f, args.order, args.paths, args.seed, _workers(args))
    rows = []
    if args.order == 1:
        for i in range(f.grid.n_cells):
            rows.append((i, float(est.coefficients[i]), float(est.densities[i])))
        header = ["cell", "coeff", "density"]
    else:
        n = f.grid.n_cells
        for i in range(n):
            for j in range(i + 1, n):
                rows.append((i, j, float(est.coefficients[i, j]), float(est.densities[i, j])))
        header = ["cell_i", "cell_j", "coeff", "density"]
    write_csv(args.out, header, rows)
    finish_manifest(manifest, t0, [args.infile] if args.infile else [], [args.out])
    print(f"mean density {est.mean_density!r} +- {est.mean_density_stderr!r}")
    return EXIT_OK


def cmd_dim(args) -> int:
    manifest, t0 = start_manifest("dim", _argv(), args.seed)
    from .dimension import estimate_dimension

    est = estimate_dimension(args.family, _parse_levels(args.levels), args.samples, args.seed)
    rows = [
        (p.level, p.box_level, p.log2_inv_scale, p.mean_log2_count, p.stderr, p.samples)
        for p in est.points
    ]
    write_csv(
        args.out,
        ["level", "box_level", "log2_inv_scale", "mean_log2_count", "stderr", "samples"],
        rows,
    )
    finish_manifest(manifest, t0, [], [args.out])
    print(f"slope {est.slope!r}  r2 {est.r_squared:.6f}  empty_fraction {est.empty_fraction!r}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    manifest, t0 = start_manifest("calibrate", _argv(), args.seed)
    from . import families
    from .dimension import RefinementFamily, estimate_dimension

    gates = {
        "point": (0.0, 0.02),
        "full-interval": (1.0, 0.02),
        "cantor-thirds": (math.log(2) / math.log(3), 0.05),
    }
    results = {}
    failed = []
    for name, (target, tol) in gates.items():
        fam = RefinementFamily(name, lambda level, nm=name: families.calibration_measure(nm, level))
        est = estimate_dimension(fam, [args.depth], args.samples, args.seed)
        results[name] = {"slope": est.slope, "target": target, "tolerance": tol,
                         "r_squared": est.r_squared}
        ok = abs(est.slope - target) <= tol
        results[name]["pass"] = ok
        if not ok:
            failed.append(name)
        print(f"{name}: slope {est.slope!r} target {target!r} "
              f"{'PASS' if ok else 'FAIL'}")
    if args.out:
        write_json(args.out, {"schema_version": "1", "depth": args.depth, "results": results})
        finish_manifest(manifest, t0, [], [args.out])
    if failed:
        print(f"tolerance failure: {', '.join(failed)}", file=sys.stderr)
        return EXIT_TOLERANCE
    return EXIT_OK


def cmd_selftest(args) -> int:
    n = min(max(args.level, 2), 12)
    grid = TimeGrid(0, 1, 1, base=n)
    rng = np.random.default_rng(args.seed)
    checks: list[tuple[str, float]] = []

    worst_28 = worst_alg = worst_restrict = 0.0
    for _ in range(25):
        f = random_functional(grid, rng)
        mu = spectral_measure_of(f)
        for _ in range(8):
            cells = rng.integers(0, 2, size=n).astype(bool)
            region = ElementarySet.from_cells(grid, np.flatnonzero(cells))
            proj = conditional_expectation(f, region)
            worst_28 = max(worst_28, abs(mass_of_subsets_of(mu, region) - proj.norm_sq))
            other = ElementarySet.from_cells(
                grid, np.flatnonzero(rng.integers(0, 2, size=n).astype(bool))
            )
            lhs = conditional_expectation(proj, other)
            rhs = conditional_expectation(f, region & other)
            worst_alg = max(
                worst_alg,
                float(np.max(np.abs(lhs.backend.values - rhs.backend.values))),
            )
            mr = restrict(mu, region)
            mp = spectral_measure_of(proj)
            keys = set(mr.entries) | set(mp.entries)
            worst_restrict = max(
                worst_restrict,
                max((abs(mr.entries.get(k, 0.0) - mp.entries.get(k, 0.0)) for k in keys),
                    default=0.0),
            )
    checks.append(("projection-norm-vs-subset-mass", worst_28))
    checks.append(("projection-composition", worst_alg))
    checks.append(("restriction-vs-projected-measure", worst_restrict))

    # adjacent windows of equal cell length covering [0, 1)
    half = n // 2
    wl = TimeGrid(0, Fraction(half, n), 1, base=half)
    wr = TimeGrid(Fraction(half, n), 1, 1, base=n - half)
    worst_prod = 0.0
    for _ in range(20):
        a = random_functional(wl, rng)
        b = random_functional(wr, rng)
        from .functionals import tensor_product

        fg = tensor_product(a, b)
        mu_fg = spectral_measure_of(fg)
        mu_prod = product(spectral_measure_of(a), spectral_measure_of(b), grid=fg.grid)
        keys = set(mu_fg.entries) | set(mu_prod.entries)
        worst_prod = max(
            worst_prod,
            max((abs(mu_fg.entries.get(k, 0.0) - mu_prod.entries.get(k, 0.0)) for k in keys),
                default=0.0),
        )
    checks.append(("window-factorization", worst_prod))

    from .chaos import add_coefficients
    from .structure import additive_integral_of

    worst_add = 0.0
    for _ in range(20):
        f = random_functional(grid, rng)
        fam = additive_integral_of(f)
        pts = sorted(rng.choice(n + 1, size=3, replace=True).tolist())
        r, s, t = (grid.boundary(p) for p in pts)
        lhs = add_coefficients(fam.member(r, s).backend, fam.member(s, t).backend)
        rhs = fam.member(r, t).backend
        keys = set(lhs.entries) | set(rhs.entries)
        worst_add = max(
            worst_add,
            max((abs(lhs.entries.get(k, 0.0) - rhs.entries.get(k, 0.0))
                 for k in keys), default=0.0),
        )
    checks.append(("additive-integral-concatenation", worst_add))

    failed = False
    for name, err in checks:
        ok = err <= args.tol
        failed = failed or not ok
        print(f"{name}: max error {err!r} {'PASS' if ok else 'FAIL'}")
    if failed:
        print(f"tolerance failure above {args.tol}", file=sys.stderr)
        return EXIT_TOLERANCE
    return EXIT_OK


# ---------------------------------------------------------------------------
# helpers


def _argv() -> list[str]:
    return sys.argv[1:] if sys.argv else []


def _parse_levels(text: str) -> list[int]:
    text = text.strip()
    try:
        if ".." in text:
            lo, hi = text.split("..")
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ValueError
            return list(range(lo, hi + 1))
        return [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise FormatError(f'bad level spec {text!r}; use "1..6" or "1,2,3"') from None


if __name__ == "__main__":
    sys.exit(main())
