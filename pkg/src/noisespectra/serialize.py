"""JSON and CSV codecs plus run manifests for the command-line pipelines.

Every document carries schema_version "1".  Grids serialize their endpoints
as exact fraction strings; chaos entries are listed sorted by (cardinality,
index) so output files are canonical; floats pass through the JSON encoder,
which round-trips doubles exactly.  All file writes are atomic (temp file in
the target directory, then rename).
"""
from __future__ import annotations

import hashlib
import json
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .chaos import HERMITE, WALSH, ChaosCoefficients, hermite_index, walsh_index
from .functionals import (
    BrownianProgram,
    FamilyRef,
    ItoTerm,
    MapFactor,
    MapTerm,
    NoiseFunctional,
    RademacherTable,
)
from .grid import ElementarySet, TimeGrid
from .kernels import SimplexKernel
from .spectral import SpectralMeasure

SCHEMA_VERSION = "1"


class FormatError(ValueError):
    """Malformed or unsupported on-disk data."""


# ---------------------------------------------------------------------------
# grid


def grid_to_data(grid: TimeGrid) -> dict:
    data = {
        "start": str(grid.interval_start),
        "end": str(grid.interval_end),
        "level": grid.level,
    }
    if grid.base != 2:
        data["base"] = grid.base
    return data


def grid_from_data(data: dict) -> TimeGrid:
    try:
        return TimeGrid(
            Fraction(data["start"]),
            Fraction(data["end"]),
            int(data["level"]),
            int(data.get("base", 2)),
        )
    except (KeyError, ValueError, ZeroDivisionError) as exc:
        raise FormatError(f"bad grid record: {exc}") from exc


# ---------------------------------------------------------------------------
# kernels


def kernel_to_data(k: SimplexKernel) -> dict:
    data: dict = {"order": k.order, "n_cells": k.n_cells}
    if any(ch != 0 for ch in k.channels):
        data["channels"] = list(k.channels)
    if k.factors is not None:
        data["factors"] = [v.tolist() for v in k.factors]
    else:
        data["dense"] = k.dense.tolist()
    return data


def kernel_from_data(data: dict, n_cells: int | None = None) -> SimplexKernel:
    try:
        order = int(data["order"])
        n = int(data.get("n_cells", n_cells if n_cells is not None else 0))
        if n <= 0:
            raise FormatError("kernel needs n_cells (or a grid to supply it)")
        channels = tuple(int(c) for c in data.get("channels", ()))
        if "constant" in data:
            return SimplexKernel.constant(order, n, float(data["constant"]), channels)
        if "factors" in data:
            return SimplexKernel(
                order, n,
                factors=tuple(np.asarray(v, dtype=np.float64) for v in data["factors"]),
                channels=channels,
            )
        if "dense" in data:
            return SimplexKernel(order, n, dense=np.asarray(data["dense"]), channels=channels)
    except FormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad kernel record: {exc}") from exc
    raise FormatError("kernel record needs one of constant/factors/dense")


# ---------------------------------------------------------------------------
# functionals


def functional_to_data(f: NoiseFunctional) -> dict:
    data: dict = {"schema_version": SCHEMA_VERSION, "grid": grid_to_data(f.grid)}
    b = f.backend
    if isinstance(b, RademacherTable):
        data["kind"] = "table"
        data["values"] = b.values.tolist()
    elif isinstance(b, ChaosCoefficients):
        data["kind"] = "walsh-chaos" if b.kind == WALSH else "hermite-chaos"
        entries = []
        for ix, c in b.sorted_items():
            if b.kind == WALSH:
                entries.append({"cells": list(ix), "coeff": c})
            else:
                entries.append({"terms": [list(t) for t in ix], "coeff": c})
        data["entries"] = entries
        if b.residual:
            data["residual"] = b.residual
        if b.channels != 1:
            data["channels"] = b.channels
    elif isinstance(b, BrownianProgram):
        data["kind"] = "program"
        data["degree_cap"] = b.degree_cap
        if b.channels != 1:
            data["channels"] = b.channels
        terms = []
        for t in b.terms:
            if isinstance(t, ItoTerm):
                terms.append({"type": "ito", "weight": t.weight,
                              "kernel": kernel_to_data(t.kernel)})
            else:
                terms.append({
                    "type": "map",
                    "weight": t.weight,
                    "factors": [
                        {"cell": fa.cell, "channel": fa.channel,
                         "fn": fa.fn, "params": list(fa.params)}
                        for fa in t.factors
                    ],
                })
        data["terms"] = terms
    elif isinstance(b, FamilyRef):
        data["kind"] = "family"
        data["name"] = b.name
        data["level"] = b.level
        if b.params:
            data["params"] = b.params_dict()
    else:
        raise FormatError(f"cannot serialize backend {type(b).__name__}")
    return data


def functional_from_data(data: dict) -> NoiseFunctional:
    _check_version(data)
    grid = grid_from_data(_get(data, "grid"))
    kind = _get(data, "kind")
    try:
        if kind == "table":
            return NoiseFunctional.from_table(grid, np.asarray(_get(data, "values")))
        if kind in ("walsh-chaos", "hermite-chaos"):
            entries: dict = {}
            for row in _get(data, "entries"):
                if kind == "walsh-chaos":
                    ix = walsh_index(tuple(row["cells"]))
                else:
                    ix = hermite_index(tuple(tuple(t) for t in row["terms"]))
                entries[ix] = float(row["coeff"])
            coeffs = ChaosCoefficients(
                grid, entries,
                WALSH if kind == "walsh-chaos" else HERMITE,
                channels=int(data.get("channels", 1)),
                residual=float(data.get("residual", 0.0)),
            )
            return NoiseFunctional.from_chaos(coeffs)
        if kind == "program":
            terms: list = []
            for row in _get(data, "terms"):
                if row.get("type") == "ito":
                    terms.append(ItoTerm(float(row["weight"]),
                                         kernel_from_data(row["kernel"], grid.n_cells)))
                elif row.get("type") == "map":
                    factors = tuple(
                        MapFactor(int(fa["cell"]), int(fa.get("channel", 0)),
                                  str(fa["fn"]), tuple(fa.get("params", ())))
                        for fa in row["factors"]
                    )
                    terms.append(MapTerm(float(row["weight"]), factors))
                else:
                    raise FormatError(f"unknown program term type {row.get('type')!r}")
            return NoiseFunctional.from_program(
                grid, terms,
                degree_cap=int(data.get("degree_cap", 4)),
                channels=int(data.get("channels", 1)),
            )
        if kind == "family":
            params = data.get("params", {})
            f = NoiseFunctional.from_family(_get(data, "name"), int(_get(data, "level")),
                                            **params)
            if f.grid != grid:
                raise FormatError("family regenerated on a different grid than recorded")
            return f
    except FormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad functional record: {exc}") from exc
    raise FormatError(f"unknown functional kind {kind!r}")


# ---------------------------------------------------------------------------
# measures and sets


def measure_to_data(mu: SpectralMeasure) -> dict:
    if not mu.is_dense:
        raise FormatError("sampler-backed measures have no dense serialization")
    data: dict = {
        "schema_version": SCHEMA_VERSION,
        "grid": grid_to_data(mu.grid),
        "entries": [
            {"cells": list(k), "mass": v} for k, v in mu.sorted_items()
        ],
    }
    if mu.multiplicity_entries:
        data["multiplicity_entries"] = [
            {"cells": list(k), "mass": v}
            for k, v in sorted(mu.multiplicity_entries.items(), key=lambda kv: (len(kv[0]), kv[0]))
        ]
    if mu.residual:
        data["residual"] = mu.residual
    return data


def measure_from_data(data: dict) -> SpectralMeasure:
    _check_version(data)
    grid = grid_from_data(_get(data, "grid"))
    try:
        entries = {tuple(r["cells"]): float(r["mass"]) for r in _get(data, "entries")}
        mult = {
            tuple(r["cells"]): float(r["mass"])
            for r in data.get("multiplicity_entries", ())
        }
        return SpectralMeasure(grid, entries, mult, residual=float(data.get("residual", 0.0)))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad measure record: {exc}") from exc


def elementary_set_to_data(s: ElementarySet) -> dict:
    return {"grid": grid_to_data(s.grid), "ranges": [list(r) for r in s.ranges]}


# ---------------------------------------------------------------------------
# files


def read_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(
            f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    except OSError as exc:
        raise FormatError(f"{path}: {exc.strerror or exc}") from exc


def _atomic_write(path: str, payload: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: str, data: dict) -> None:
    _atomic_write(path, json.dumps(data, indent=2, sort_keys=False) + "\n")


def write_csv(path: str, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_csv_cell(x) for x in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def _csv_cell(x) -> str:
    # np.float64 subclasses float but reprs as np.float64(...); unwrap first
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def sha256_of(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


# ---------------------------------------------------------------------------
# run manifests


@dataclass
class RunManifest:
    command: str
    argv: list[str]
    seed: int | None
    versions: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)
    wall_time_s: float = 0.0

    def to_data(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "argv": self.argv,
            "seed": self.seed,
            "versions": self.versions,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "wall_time_s": self.wall_time_s,
        }


def current_versions() -> dict:
    from . import __version__

    return {
        "package": __version__,
        "numpy": np.__version__,
        "python": ".".join(str(v) for v in sys.version_info[:3]),
    }


def start_manifest(command: str, argv: list[str], seed: int | None) -> tuple[RunManifest, float]:
    return RunManifest(command, list(argv), seed, versions=current_versions()), time.monotonic()


def finish_manifest(
    manifest: RunManifest, started: float, inputs: list[str], outputs: list[str]
) -> None:
    """Write `<first output>.manifest.json` next to the outputs."""
    manifest.inputs = {p: sha256_of(p) for p in inputs if p and os.path.exists(p)}
    manifest.outputs = list(outputs)
    manifest.wall_time_s = time.monotonic() - started
    if outputs:
        write_json(outputs[0] + ".manifest.json", manifest.to_data())


# ---------------------------------------------------------------------------
# shared helpers


def _get(data: dict, key: str):
    try:
        return data[key]
    except KeyError as exc:
        raise FormatError(f"missing field {key!r}") from exc


def _check_version(data: dict) -> None:
    v = data.get("schema_version")
    if v is not None and v != SCHEMA_VERSION:
        raise FormatError(f"unsupported schema_version {v!r} (supported: {SCHEMA_VERSION})")
