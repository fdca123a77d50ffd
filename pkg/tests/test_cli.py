"""End-to-end command runs through main(); exit codes 0, 2, 3 and manifests."""
import json

import numpy as np
import pytest

from noisespectra import (
    NoiseFunctional,
    TimeGrid,
    functional_from_data,
    functional_to_data,
    read_json,
    tensor_product,
    write_json,
)
from noisespectra.cli import _parse_levels, main
from noisespectra.serialize import FormatError, sha256_of


def run(*argv):
    return main(list(argv))


def dump_functional(path, f):
    write_json(str(path), functional_to_data(f))
    return str(path)


@pytest.fixture
def chi01(tmp_path):
    grid = TimeGrid(0, 1, 2)
    f = NoiseFunctional.from_walsh_entries(grid, {(0,): 0.6, (0, 1): 0.8})
    return dump_functional(tmp_path / "f.json", f)


def test_selftest_passes(capsys):
    assert run("selftest", "--level", "4") == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 5
    assert "FAIL" not in out


def test_decompose_writes_chaos_and_manifest(chi01, tmp_path, capsys):
    out = tmp_path / "coeffs.json"
    assert run("decompose", "--in", chi01, "--out", str(out)) == 0
    doc = read_json(str(out))
    assert doc["kind"] == "walsh-chaos"
    assert {tuple(e["cells"]) for e in doc["entries"]} == {(0,), (0, 1)}
    manifest = read_json(str(out) + ".manifest.json")
    assert manifest["command"] == "decompose"
    assert manifest["inputs"] == {chi01: sha256_of(chi01)}
    assert manifest["outputs"] == [str(out)]
    assert "2 entries" in capsys.readouterr().out


def test_project_empty_set_kills_centered_functional(chi01, tmp_path):
    out = tmp_path / "proj.json"
    assert run("project", "--in", chi01, "--set", "", "--out", str(out)) == 0
    g = functional_from_data(read_json(str(out)))
    # centered input, so conditioning on nothing leaves the zero functional
    assert dict(g.backend.sorted_items()) == {}


def test_project_first_cell(chi01, tmp_path):
    out = tmp_path / "proj.json"
    assert run("project", "--in", chi01, "--set", "0:1", "--out", str(out)) == 0
    g = functional_from_data(read_json(str(out)))
    assert dict(g.backend.sorted_items()) == {(0,): 0.6}


def test_spectrum_dense(chi01, tmp_path):
    out = tmp_path / "mu.json"
    assert run("spectrum", "--in", chi01, "--out", str(out)) == 0
    doc = read_json(str(out))
    masses = {tuple(e["cells"]): e["mass"] for e in doc["entries"]}
    assert masses == {(0,): 0.36, (0, 1): 0.6400000000000001}


def test_spectrum_model_profile(tmp_path):
    out = tmp_path / "mu.json"
    assert run("spectrum", "--family", "tribes", "--level", "5", "--out", str(out)) == 0
    doc = read_json(str(out))
    assert doc["kind"] == "profile"
    total = sum(doc["cardinality_profile"].values())
    assert abs(total - doc["total_mass"]) < 1e-12


def test_sample_csv(chi01, tmp_path):
    out = tmp_path / "sets.csv"
    assert run("sample", "--in", chi01, "--samples", "40", "--seed", "3",
               "--out", str(out)) == 0
    lines = open(str(out)).read().splitlines()
    assert lines[0] == "index,cardinality,cells"
    assert len(lines) == 41
    manifest = read_json(str(out) + ".manifest.json")
    assert manifest["seed"] == 3


def test_factor_check_verdicts(tmp_path, rng, capsys):
    from fractions import Fraction

    half = Fraction(1, 2)
    g = NoiseFunctional.from_table(TimeGrid(0, half, 1), rng.standard_normal(4))
    h = NoiseFunctional.from_table(TimeGrid(half, 1, 1), rng.standard_normal(4))
    prod = dump_functional(tmp_path / "prod.json", tensor_product(g, h))
    verdict_path = tmp_path / "verdict.json"
    assert run("factor-check", "--in", prod, "--cut", "1/2",
               "--out", str(verdict_path)) == 0
    assert "exact-product: true" in capsys.readouterr().out
    doc = read_json(str(verdict_path))
    assert doc["exact_product"] is True
    # for a product the straddle is exactly the product of factor variances
    want = g.backend.values.var() * h.backend.values.var()
    assert abs(doc["straddling_mass"] - want) < 1e-12

    grid2 = TimeGrid(0, 1, 2)
    # a sum of characters from the two sides has rank 2 across the cut
    f = NoiseFunctional.from_walsh_entries(grid2, {(1,): 1.0, (2,): 1.0})
    bad = dump_functional(tmp_path / "bad.json", f)
    assert run("factor-check", "--in", bad, "--cut", "1/2") == 0
    assert "exact-product: false" in capsys.readouterr().out


def test_cuts_csv(chi01, tmp_path):
    out = tmp_path / "cuts.csv"
    assert run("cuts", "--in", chi01, "--out", str(out)) == 0
    lines = open(str(out)).read().splitlines()
    assert lines[0] == "boundary_index,time_exact,time,distance"
    assert len(lines) == 4  # three interior boundaries on four cells
    # chi_{0,1} straddles boundaries 1 and does not straddle 2, 3
    rows = {int(l.split(",")[0]): float(l.split(",")[3]) for l in lines[1:]}
    assert rows[1] > 0.5
    assert rows[3] == 0.0


def test_classify_run(tmp_path, capsys):
    out = tmp_path / "report.json"
    assert run("classify", "--family", "majority3-iterated", "--levels", "1..2",
               "--out", str(out)) == 0
    doc = read_json(str(out))
    assert [r["level"] for r in doc["records"]] == [1, 2]
    assert doc["singleton_fractions"] == [0.75, 0.5625]
    assert capsys.readouterr().out.strip() != ""


def test_ito_gate(tmp_path, capsys):
    kpath = tmp_path / "k.json"
    write_json(str(kpath), {"order": 1, "constant": 1.0})
    assert run("ito", "--kernel", str(kpath), "--level", "4", "--paths", "20000",
               "--seed", "2") == 0
    assert run("ito", "--kernel", str(kpath), "--level", "4", "--paths", "20000",
               "--seed", "2", "--gate", "1e-6") == 3
    err = capsys.readouterr().err
    assert "tolerance failure" in err


def test_npoint_order1(tmp_path):
    out = tmp_path / "density.csv"
    assert run("npoint", "--family", "white-noise-i1", "--level", "3",
               "--order", "1", "--paths", "20000", "--seed", "1",
               "--out", str(out)) == 0
    lines = open(str(out)).read().splitlines()
    assert lines[0] == "cell,coeff,density"
    densities = [float(l.split(",")[2]) for l in lines[1:]]
    assert len(densities) == 8
    assert abs(np.mean(densities) - 1.0) < 0.1


def test_dim_and_calibrate(tmp_path, capsys):
    out = tmp_path / "dim.csv"
    assert run("dim", "--family", "parity", "--levels", "5,6", "--samples", "4",
               "--seed", "0", "--out", str(out)) == 0
    assert "slope 1.0" in capsys.readouterr().out

    report = tmp_path / "cal.json"
    assert run("calibrate", "--depth", "5", "--samples", "8", "--seed", "0",
               "--out", str(report)) == 0
    doc = read_json(str(report))
    assert all(r["pass"] for r in doc["results"].values())
    assert set(doc["results"]) == {"point", "full-interval", "cantor-thirds"}


def test_usage_errors_exit_2(tmp_path, capsys):
    assert run("decompose", "--in", str(tmp_path / "missing.json"),
               "--out", str(tmp_path / "o.json")) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run("decompose", "--in", str(bad), "--out", str(tmp_path / "o.json")) == 2
    assert run("spectrum", "--family", "nonesuch", "--level", "3",
               "--out", str(tmp_path / "o.json")) == 2
    assert run("spectrum", "--family", "parity", "--out", str(tmp_path / "o.json")) == 2
    assert run("dim", "--family", "parity", "--levels", "2..x", "--samples", "4",
               "--seed", "0", "--out", str(tmp_path / "o.csv")) == 2
    err = capsys.readouterr().err
    assert err.count("error:") == 5


def test_bad_set_spec_exits_2(chi01, tmp_path):
    assert run("project", "--in", chi01, "--set", "0:99",
               "--out", str(tmp_path / "o.json")) == 2


def test_argparse_level_errors(capsys):
    assert run("nonesuch") == 2
    assert run() == 2
    capsys.readouterr()


def test_parse_levels():
    assert _parse_levels("1..4") == [1, 2, 3, 4]
    assert _parse_levels("2,5,7") == [2, 5, 7]
    with pytest.raises(FormatError):
        _parse_levels("4..1")
    with pytest.raises(FormatError):
        _parse_levels("a,b")
