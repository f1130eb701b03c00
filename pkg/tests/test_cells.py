import math

import numpy as np
import pytest

from sinesiegel.arithmetic import GOLDEN, quotients_value
from sinesiegel.cells import (ArcTooLarge, CellMismatch, build_cells,
                              build_extension, build_layers,
                              dilatation_report, first_usable_level)
from sinesiegel.circlemaps import RigidRotation, critical_preimages

ALPHA = math.sqrt(5) - 2


def test_cells_counts_and_gate():
    f = RigidRotation(GOLDEN)
    assert first_usable_level(f) == 4
    ann = build_cells(f, 4)
    assert ann.n_cells == 8                  # q_5 of the golden mean
    with pytest.raises(ArcTooLarge):
        build_cells(f, 3)                    # depth d(x_l, x_r)/2 exceeds 1


def test_cell_sides_commensurable(golden_g, golden_table6):
    ann = build_cells(golden_g, 4, table=golden_table6)
    comm = ann.side_commensurability()
    assert comm.max() < 20.0
    assert np.all(ann.depths < 1.0)
    assert np.all(ann.depths > 0.0)


def test_cell_containment_two_levels(golden_g, golden_table6):
    coarse = build_cells(golden_g, 3, table=golden_table6)
    fine = build_cells(golden_g, 5, table=golden_table6)
    # every level n+2 cell sits in a level n cell with smaller sides
    fine_arcs = fine.arc_lengths()
    coarse_arcs = coarse.arc_lengths()
    host = coarse.locate(fine.angles)
    ratio = fine_arcs / coarse_arcs[host]
    assert ratio.max() < 1.0
    depth_ratio = fine.depths / coarse.depths[coarse.locate(fine.angles)]
    assert depth_ratio.max() < 1.0


def test_identity_extension(rng):
    f = RigidRotation(GOLDEN)
    H = build_extension(f, 6, alpha=GOLDEN)
    z = 0.85 * np.exp(2j * np.pi * rng.random(500))
    assert np.max(np.abs(H.eval(z) - z)) < 1e-12
    rows = dilatation_report(H)
    for r in rows:
        assert abs(r.max_dilatation - 1.0) < 1e-3
        assert r.degenerate == 0


def test_extension_vertex_values(golden_extension, golden_table6):
    H = golden_extension
    alpha = H.alpha
    for i in (0, 1, 5, 21, 88):
        x = golden_table6.x(i)
        target = np.exp(-2j * np.pi * alpha * i)
        got = H.eval(np.exp(2j * np.pi * x))
        assert abs(got - target) < 1e-9


def test_extension_boundary_equivariance(golden_g, golden_extension, golden_table6):
    H = golden_extension
    alpha = H.alpha
    rot = np.exp(2j * np.pi * alpha)
    idx = np.arange(1, golden_table6.returns[golden_extension.max_level + 1])
    x = golden_table6.angles(idx)
    hx = H.eval(np.exp(2j * np.pi * x))
    gx = golden_g.angle_image(x)
    hgx = H.eval(np.exp(2j * np.pi * gx))
    assert np.max(np.abs(hgx - rot * hx)) < 1e-8


def test_extension_center_and_injectivity(golden_extension, rng):
    H = golden_extension
    assert H.eval(0j) == 0j
    z = (0.05 + 0.93 * rng.random(3000)) * np.exp(2j * np.pi * rng.random(3000))
    w = H.eval(z)
    assert np.abs(w).max() <= 1.0 + 1e-9
    # injectivity on the sample: closest pair of images stays separated
    order = np.argsort(w.real)
    ws = w[order]
    gaps = np.abs(np.diff(ws))
    assert np.min(gaps[gaps > 0]) > 0


def test_extension_orientation(golden_extension, rng):
    from sinesiegel.cells import _beltrami_at
    H = golden_extension
    z = (0.9 + 0.07 * rng.random(2000)) * np.exp(2j * np.pi * rng.random(2000))
    mu, jac = _beltrami_at(H, z, np.full(z.shape, 1e-7))
    ok = jac > 0
    assert ok.mean() > 0.999


def test_monotone_refinement(golden_g, golden_table6):
    H5 = build_extension(golden_g, 5, table=golden_table6)
    H6 = build_extension(golden_g, 6, table=golden_table6)
    # points inside the level-5 annuli keep their images when level 6 appears
    phi = np.linspace(0.03, 0.97, 40)
    r5 = H5.source.inner_radius_profile(5, phi)
    z = (r5 * 0.995) * np.exp(2j * np.pi * phi)
    assert np.max(np.abs(H5.eval(z) - H6.eval(z))) < 1e-3


def test_cell_mismatch_wrong_alpha(golden_g, golden_table6):
    with pytest.raises(CellMismatch):
        build_extension(golden_g, 5, alpha=0.3141592653589793,
                        table=golden_table6)


def test_bounded_type_flat_dilatation(golden_extension):
    rows = dilatation_report(golden_extension)
    levels = np.array([r.level for r in rows], dtype=float)
    ks = np.array([r.max_dilatation for r in rows])
    slope = np.polyfit(levels, ks, 1)[0]
    assert abs(slope) < 0.05
    assert all(r.a_next2 == 4 for r in rows)


def test_dilatation_sweep_monotone_in_quotient():
    from sinesiegel.model import ConformalModel
    spikes = {}
    for a6 in (5, 50, 500):
        qts = [1, 1, 1, 1, 1, a6] + [1] * 14
        theta = quotients_value(qts) / 2
        model = ConformalModel.build(theta, lock_return_budget=100_000,
                                     rho_iters=100_000)
        H = build_extension(model.doubled_circle_map(), 5)
        rows = dilatation_report(H)
        spikes[a6] = max(r.max_dilatation for r in rows)
    assert spikes[5] < spikes[50] < spikes[500]
    law = {a6: 1.0 + math.log(a6) ** 2 for a6 in spikes}
    assert (law[5] < law[50] < law[500])
