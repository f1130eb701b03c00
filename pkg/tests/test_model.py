import math

import numpy as np
import pytest

from sinesiegel.arithmetic import GOLDEN, double_mod1
from sinesiegel.circlemaps import TabulatedCircleMap, rotation_number
from sinesiegel.model import (ComponentMismatch, DomainD, FitDiverged,
                              OriginPole, boundary_point, fit_exterior_map,
                              sine_preimage_roundness,
                              solve_rotation_parameter, trace_domain_D)


def test_trace_anchors_and_symmetry():
    D = trace_domain_D(1024)
    assert D.boundary[0] == pytest.approx(math.pi / 2, abs=1e-12)
    assert D.boundary[512] == pytest.approx(-math.pi / 2, abs=1e-12)
    assert np.max(np.abs(np.abs(np.sin(D.boundary)) - 1.0)) < 1e-10
    # symmetric under z -> -z: samples at s and s + 1/2 are antipodal
    assert np.max(np.abs(D.boundary + np.roll(D.boundary, -512))) < 1e-10


def test_trace_is_starlike_simple():
    D = trace_domain_D(2048)
    ang = np.unwrap(np.angle(D.boundary))
    assert np.all(np.diff(ang) > 0) or np.all(np.diff(ang) < 0)


def test_trace_arclength_self_convergence():
    l1 = trace_domain_D(1024).arc_length()
    l2 = trace_domain_D(2048).arc_length()
    assert abs(l1 - l2) < 1e-4


def test_trace_resolution_guard():
    with pytest.raises(ValueError):
        trace_domain_D(100)
    with pytest.raises(ValueError):
        trace_domain_D(1001)


def test_fit_recovers_disk():
    M = 1024
    s = np.arange(M) / M
    circle = (math.pi / 2) * np.exp(2j * np.pi * s)
    D = DomainD(boundary=circle, critical_markers=(0, M // 2),
                exact_sine_trace=False)
    psi = fit_exterior_map(D, degree=64, tol=1e-6)
    assert psi.leading == pytest.approx(math.pi / 2, abs=1e-10)
    # canonical Laurent data: psi is (pi/2)w, every other mode below 1e-12
    w = np.exp(2j * np.pi * np.arange(4096) / 4096)
    modes = np.fft.fft(psi(w)) / 4096
    modes[1] -= math.pi / 2
    assert np.max(np.abs(modes)) < 1e-12
    assert np.max(np.abs(psi(2.0 * w) - math.pi * w)) < 1e-12


def test_fit_rejects_reversed_orientation():
    M = 512
    s = np.arange(M) / M
    circle = (math.pi / 2) * np.exp(-2j * np.pi * s)
    D = DomainD(boundary=circle, critical_markers=(0, M // 2),
                exact_sine_trace=False)
    with pytest.raises(FitDiverged):
        fit_exterior_map(D, degree=64)


def test_fit_quality(golden_model):
    psi = golden_model.psi
    assert psi.fit_residual < 1e-6
    assert psi.circle_deviation < 1e-8
    assert psi.degree <= 64
    w1 = complex(psi(np.array([1.0 + 0j]))[0])
    assert abs(w1 - math.pi / 2) < psi.fit_residual + 1e-12


def test_eval_G_normalization_and_symmetries(golden_model, rng):
    model = golden_model
    assert model.eval_G(1.0 + 0j, rotated=False) == 1.0 + 0j
    z = np.exp(2j * np.pi * rng.random(1000))
    G = model.eval_G(z)
    assert np.max(np.abs(np.abs(G) - 1.0)) < 1e-8
    assert np.max(np.abs(model.eval_G(-z) + G)) < 1e-9
    # symmetry about the circle: G(1/conj(z))* = G(z) off the circle
    zz = (1.15 + 0.3 * rng.random(200)) * np.exp(2j * np.pi * rng.random(200))
    lhs = 1.0 / np.conj(model.eval_G(1.0 / np.conj(zz)))
    assert np.max(np.abs(lhs - model.eval_G(zz))) < 1e-7


def test_eval_G_origin_pole(golden_model):
    with pytest.raises(OriginPole):
        golden_model.eval_G(0j)
    with pytest.raises(OriginPole):
        golden_model.eval_g(0j)


def test_ring_continuity(golden_model, rng):
    # direct evaluation just inside vs the circle-reflection formula
    tau = 2 * np.pi * rng.random(4000)
    for r in (1.0 + 1e-4, 1.0 - 1e-4):
        z = r * np.exp(1j * tau)
        direct = np.sin(golden_model.psi(z)) * np.exp(2j * np.pi * golden_model.t)
        refl = 1.0 / np.conj(
            np.sin(golden_model.psi(1.0 / np.conj(z)))) * np.exp(2j * np.pi * golden_model.t)
        assert np.max(np.abs(direct - refl)) < 1e-8


def test_eval_g_branch_independent(golden_model, rng):
    z = (0.5 + 2.0 * rng.random(500)) * np.exp(2j * np.pi * rng.random(500))
    w = np.sqrt(z)
    g1 = golden_model.eval_G(w, rotated=False) ** 2 * np.exp(4j * np.pi * golden_model.t)
    g2 = golden_model.eval_G(-w, rotated=False) ** 2 * np.exp(4j * np.pi * golden_model.t)
    assert np.max(np.abs(g1 - g2)) < 1e-10
    assert np.max(np.abs(golden_model.eval_g(z) - g1)) < 1e-12
    one = complex(golden_model.eval_g(1.0 + 0j))
    expect = complex(golden_model.eval_G(1.0 + 0j)) ** 2
    assert one == pytest.approx(expect, abs=1e-12)


def test_rho_monotone_in_t(golden_model):
    disp = golden_model._g_disp
    rhos = []
    for t in np.linspace(0.1, 0.9, 9):
        rho, _ = rotation_number(TabulatedCircleMap(disp + t), 4000)
        rhos.append(rho)
    assert all(b >= a - 1e-9 for a, b in zip(rhos, rhos[1:]))


def test_t_solver_reconverges(golden_model):
    model = golden_model
    disp = model._g_disp

    def measured(t):
        return rotation_number(TabulatedCircleMap(disp + t), 200_000)[0]

    theta0 = measured(model.t)
    t_rec, diag = solve_rotation_parameter(model, theta0, 1e-10)
    assert abs(t_rec - model.t) < 1e-10
    assert diag["t_bracket"] <= 1e-10


def test_t_solver_degenerate_tolerance(golden_model):
    t, diag = solve_rotation_parameter(golden_model, GOLDEN, 1.5)
    assert t == 0.5
    assert "degenerate" in diag["t_warning"]


def test_rotation_locked_to_double(golden_model):
    g = golden_model.doubled_circle_map(exact=False)
    rho, _ = rotation_number(g, 400_000)
    assert abs(rho - double_mod1(GOLDEN)) < 5e-6
    assert golden_model.diagnostics.get("lock_signs_ok", True)


def test_critical_point_is_cubic(golden_model):
    # angular derivative of g on the circle vanishes at 1 and nowhere else
    g = golden_model.doubled_circle_map()
    h = 1e-3 / (2 * math.pi)
    d_near = (g.lift(h) - g.lift(-h)) / (2 * h)
    assert d_near < 1e-2               # cubic flat: slope ~ 3c (2 pi h)^2
    xs = np.linspace(0.05, 0.95, 400)
    slopes = (g.lift(xs + 1e-4) - g.lift(xs - 1e-4)) / 2e-4
    assert slopes.min() > 0.01         # no other near-critical dip


def test_boundary_point_parametrization():
    s = np.array([0.0, 0.25, 0.5, 0.75])
    b = boundary_point(s)
    assert b[0] == pytest.approx(math.pi / 2)
    assert b[2] == pytest.approx(-math.pi / 2)
    assert np.max(np.abs(np.sin(b) - np.exp(2j * np.pi * s))) < 1e-12


def test_roundness_conformal_regime():
    # away from the critical values the branch is conformal: the witness
    # ratio is M times a distortion factor close to 1
    res = sine_preimage_roundness(0.3j, 0.01, 2.0)
    assert res.tau / 2.0 < 1.5
    assert res.tau == pytest.approx(2.0, rel=0.25)
    assert res.components >= 1


def test_roundness_at_critical_value():
    res = sine_preimage_roundness(1.0 + 0j, 0.01, 2.0)
    assert np.isfinite(res.tau)
    assert res.tau >= 1.0


def test_roundness_precondition():
    with pytest.raises(ValueError):
        sine_preimage_roundness(1.5 + 0j, 0.5, 2.0)
    with pytest.raises(ValueError):
        sine_preimage_roundness(0.1 + 0j, 0.01, 0.5)


def test_model_roundtrip_serialization(golden_model):
    from sinesiegel.model import ConformalModel
    payload = golden_model.to_dict()
    clone = ConformalModel.from_dict(payload)
    assert clone.t == golden_model.t
    z = np.exp(2j * np.pi * np.linspace(0.05, 0.95, 50))
    assert np.allclose(clone.eval_G(z), golden_model.eval_G(z), atol=1e-12)
