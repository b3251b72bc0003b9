"""Command-line interface: parsing, outputs, exit codes, determinism."""

import numpy as np
import pytest

from ballorbits import cli
from ballorbits.errors import ConfigError


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


# ---------------------------------------------------------------------------
# parsers
# ---------------------------------------------------------------------------

def test_parse_complex():
    assert cli.parse_complex("0.5,0") == 0.5
    assert cli.parse_complex("1/3,-1/2") == complex(1 / 3, -1 / 2)
    assert cli.parse_complex("2") == 2.0
    with pytest.raises(ConfigError):
        cli.parse_complex("1,2,3")


def test_parse_point():
    p = cli.parse_point("0.5,0;0,0.25")
    assert p.shape == (2,)
    assert p[1] == 0.25j


def test_inline_mapspec():
    f = cli.parse_mapspec("blaschke:a=1/3")
    assert f.kind == "blaschke"
    assert f.boundary_fixed[0][1] == pytest.approx(3.0)
    g = cli.parse_mapspec("hyperbolic:lam=3,zeta=1")
    assert g.q == 1
    with pytest.raises(ConfigError):
        cli.parse_mapspec("wibble:x=1")
    # complex values keep their re,im comma inside an item list
    m = cli.parse_mapspec("mobius:a=0.3,-0.2,theta=0.5")
    assert m.params[0][0] == pytest.approx(0.3 - 0.2j)
    bl = cli.parse_mapspec("blaschke:factors=0,0;0.5,0")
    assert bl.params[0] == (0.0, 0.5)


def test_specfile_warped(tmp_path):
    spec = tmp_path / "warped.map"
    spec.write_text(
        "[map]\n"
        "kind = warped_product\n"
        "q = 2\n"
        "c = 0.5,0\n"
        "\n"
        "[map.phi]\n"
        "kind = ball_automorphism\n"
        "subtype = hyperbolic\n"
        "zeta = 1\n"
        "lam = 3\n")
    f = cli.parse_mapspec(str(spec))
    assert f.kind == "warped_product"
    assert f.q == 2
    z = np.array([0.2 + 0j, 0.1j])
    out = cli.cat.evaluate(f, z)
    assert out[1] == pytest.approx(0.05j)


def test_specfile_conjugate(tmp_path):
    spec = tmp_path / "conj.map"
    spec.write_text(
        "[map]\n"
        "kind = conjugate\n"
        "\n"
        "[map.inner]\n"
        "kind = blaschke\n"
        "factors = 0,0 0.3333333333333333,0\n"
        "\n"
        "[map.conjugator]\n"
        "kind = ball_automorphism\n"
        "subtype = hyperbolic\n"
        "zeta = 1\n"
        "lam = 1.2214027581601699\n")
    f = cli.parse_mapspec(str(spec))
    assert f.kind == "conjugate"


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def test_geometry_dist(capsys):
    code, out, _ = run(capsys, "geometry", "dist", "0,0", "0.5,0")
    assert code == 0
    assert out.strip() == "1.09861228866811"


def test_geometry_horo(capsys):
    code, out, _ = run(capsys, "geometry", "horo", "0.5,0", "--zeta", "1,0")
    assert code == 0
    assert out.strip() == "-1.09861228866811"


def test_geometry_koranyi(capsys):
    code, out, _ = run(capsys, "geometry", "koranyi", "0.3,0",
                       "--zeta", "1,0", "--M", "2")
    assert code == 0
    assert out.startswith("inside margin=")


def test_geometry_bad_input_exit_2(capsys):
    code, _, err = run(capsys, "geometry", "dist", "0,0", "nonsense")
    assert code == 2
    assert "error" in err


def test_dilation_blaschke(capsys):
    code, out, _ = run(capsys, "dilation", "blaschke:a=1/3", "--zeta", "1")
    assert code == 0
    lam = float(out.splitlines()[0].split("=")[1])
    assert lam == pytest.approx(3.0, abs=1e-4)


def test_dilation_out_of_scope_exit_2(capsys):
    code, _, err = run(capsys, "dilation", "parabolic:t=1,zeta=1",
                       "--zeta", "1")
    assert code == 2
    assert "dilation" in err


def test_orbit_csv_and_determinism(tmp_path, capsys):
    out_a = tmp_path / "a.csv"
    out_b = tmp_path / "b.csv"
    for path in (out_a, out_b):
        code, out, _ = run(capsys, "--seed", "7", "orbit", "blaschke:a=1/3",
                           "--zeta", "1", "--lambda", "3", "--kmax", "15",
                           "--out", str(path))
        assert code == 0
        assert "sigma_hat=" in out
    assert out_a.read_bytes() == out_b.read_bytes()
    header = out_a.read_text().splitlines()[0]
    assert header == "j,re_z1,im_z1,horofunction,step_to_next,dist_to_zeta"


def test_validate_premodel_cli(tmp_path, capsys):
    spec = tmp_path / "wp.map"
    spec.write_text(
        "[map]\nkind = warped_product\nq = 2\nc = 0.5,0\n\n"
        "[map.phi]\nkind = ball_automorphism\nsubtype = hyperbolic\n"
        "zeta = 1\nlam = 3\n")
    pm = tmp_path / "pm.ini"
    pm.write_text(
        "[premodel]\nbase_dim = 1\nell = embed_first\nrepelling = 1\n"
        "lam = 3\n")
    code, out, _ = run(capsys, "validate-premodel", str(spec), str(pm),
                       "--zeta", "1,0;0,0", "--lambda", "3")
    assert code == 0
    assert out.count("PASS") == 4
    pm_bad = tmp_path / "pm_bad.ini"
    pm_bad.write_text(
        "[premodel]\nbase_dim = 1\nell = embed_first\nrepelling = 1\n"
        "lam = 3.3\n")
    code_bad, out_bad, _ = run(capsys, "validate-premodel", str(spec),
                               str(pm_bad), "--zeta", "1,0;0,0",
                               "--lambda", "3")
    assert code_bad == 1
    assert "CHECK base_dilation FAIL" in out_bad


def test_missing_file_exit_2(capsys):
    code, _, err = run(capsys, "dilation", "/no/such/file.map", "--zeta", "1")
    assert code == 2


def test_orbit_svg_emission(tmp_path, capsys):
    svg = tmp_path / "trace.svg"
    code, _, _ = run(capsys, "orbit", "blaschke:a=1/3", "--zeta", "1",
                     "--lambda", "3", "--kmax", "10",
                     "--out", str(tmp_path / "o.csv"), "--svg", str(svg))
    assert code == 0
    text = svg.read_text()
    assert text.startswith("<svg") and "circle" in text


def test_orbit_wrong_lambda_exit_3(capsys):
    # no chain can match a step tail of log(2) for this map
    code, _, err = run(capsys, "orbit", "blaschke:a=1/3", "--zeta", "1",
                       "--lambda", "2", "--kmax", "10")
    assert code == 3
    assert "numerical failure" in err


def test_compare_from_csv_files(tmp_path, capsys):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    for path, kmax in ((a, 15), (b, 12)):
        code, _, _ = run(capsys, "orbit", "blaschke:a=1/3", "--zeta", "1",
                         "--lambda", "3", "--kmax", str(kmax),
                         "--out", str(path))
        assert code == 0
    code, out, _ = run(capsys, "compare", "--csv-a", str(a),
                       "--csv-b", str(b), "--zeta", "1")
    assert code == 0
    assert "plateau=True" in out
    assert "alpha=" in out
