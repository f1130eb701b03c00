import json
import subprocess
import sys

import numpy as np
import pytest

from sinesiegel.cli import main
from sinesiegel.render import WindowTooSmall, render_siegel


@pytest.fixture(scope="module")
def small_render():
    return render_siegel("golden", resolution=256, iters=600, orbit_points=20_000)


def test_render_window_guard():
    with pytest.raises(WindowTooSmall):
        render_siegel("golden", window=(-1.0, 1.0, -1.0, 1.0))


def test_render_rational_warning():
    r = render_siegel("0.25", resolution=256, iters=200, orbit_points=1000)
    assert r.non_irrational_warning


def test_render_structure(small_render, tmp_path):
    r = small_render
    assert r.component.any()
    assert r.component[128, 128]           # origin inside
    assert r.symmetry_defect_px <= 1
    assert r.boundary_hits["pi/2"] <= 4
    assert r.boundary_hits["-pi/2"] <= 4
    r.save_ppm(tmp_path / "s.ppm")
    data = (tmp_path / "s.ppm").read_bytes()
    assert data.startswith(b"P6\n256 256\n255\n")
    assert len(data) == len(b"P6\n256 256\n255\n") + 3 * 256 * 256


def test_render_orbit_on_boundary(small_render):
    # the critical orbit hugs the classified boundary at pixel scale
    assert small_render.orbit_hausdorff_px <= 8


def test_cli_classify(capsys):
    assert main(["classify", "--theta", "golden", "--depth", "12"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["class"] == "BoundedType"
    assert payload["quotients"] == [1] * 12


def test_cli_interlacing(capsys):
    assert main(["interlacing", "--theta", "silver", "--depth", "12"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["all_pass"]


def test_cli_covering_demo(tmp_path, capsys):
    csv_path = tmp_path / "cov.csv"
    assert main(["covering-demo", "--n", "8", "--trials", "40",
                 "--seed", "3", "--csv", str(csv_path)]) == 0
    lines = csv_path.read_text().strip().splitlines()
    assert len(lines) == 41
    assert all(line.split(",")[4] == "True" for line in lines[1:])


def test_cli_bad_theta_exit_code():
    assert main(["classify", "--theta", "2.5"]) == 2


def test_cli_entrypoint_subprocess():
    out = subprocess.run([sys.executable, "-m", "sinesiegel.cli", "classify",
                          "--theta", "silver", "--depth", "10"],
                         capture_output=True, text=True)
    assert out.returncode == 0
    assert json.loads(out.stdout)["class"] == "BoundedType"
