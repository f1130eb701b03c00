import math

import numpy as np
import pytest

from sinesiegel.escape import (AllBelowThreshold, AngleOrder,
                               area_decay_experiment, david_condition_fit,
                               first_entry, hyperbolic_nbhd,
                               iterate_first_entry, mu_magnitude,
                               nu_magnitude, sqrt_area_pullback_check,
                               z_set_enclosure)
from sinesiegel.gridfield import GridField, SphereAtlas


def test_atlas_total_area():
    atlas = SphereAtlas(1024)
    assert abs(atlas.total_area() - math.pi) / math.pi < 0.01


def test_gridfield_roundtrip(tmp_path):
    g = GridField.empty((-2.0, 2.0, -1.0, 1.0), 64, chart=1)
    g.values = np.arange(64 * 64, dtype=float).reshape(64, 64)
    path = tmp_path / "field.bin"
    g.save(path)
    back = GridField.load(path)
    assert back.chart == 1 and back.box == g.box
    assert np.array_equal(back.values, g.values)
    g.to_ppm(tmp_path / "field.ppm")
    head = (tmp_path / "field.ppm").read_bytes()[:2]
    assert head == b"P6"


def test_first_entry_one_step(golden_model, golden_layers, rng):
    # search a point whose image lands straight in the disk
    cand = (1.0 + 0.3 * rng.random(500)) * np.exp(2j * np.pi * rng.random(500))
    img = golden_model.eval_g(cand)
    pick = np.nonzero((np.abs(img) < 1.0) & (np.abs(cand) > 1.0))[0][0]
    info = first_entry(golden_model, complex(cand[pick]), layers=golden_layers)
    assert info.k == 1
    assert abs(info.landing) < 1.0
    assert info.landing_level != "nonescaping"


def test_first_entry_rejects_circle(golden_model):
    with pytest.raises(ValueError):
        first_entry(golden_model, np.exp(0.7j))


def test_escape_fraction_stable(golden_model):
    def fraction(res):
        xs = np.linspace(-3, 3, res, endpoint=False) + 3.0 / res
        Z = (xs[None, :] + 1j * xs[:, None]).ravel()
        Z = Z[np.abs(Z) > 1.0]
        k, _ = iterate_first_entry(golden_model, Z, 300)
        return (k > 0).mean()

    f1, f2 = fraction(192), fraction(384)
    assert f2 > 0
    assert abs(f1 - f2) / f2 < 0.02


def test_area_decay(golden_model, golden_layers, golden_table6):
    decay = area_decay_experiment(golden_model, range(2, 6), resolution=512,
                                  max_iter=400, layers=golden_layers,
                                  table=golden_table6)
    areas = [decay.areas[n] for n in decay.fitted_levels]
    assert all(a > b for a, b in zip(areas, areas[1:]))
    assert 0 < decay.delta_fit < 1
    assert decay.recursion_ok


def test_nu_mu_identities(golden_model, golden_extension, rng):
    H = golden_extension
    # inside the disk mu is the direct finite-difference field
    z_in = 0.9 * np.exp(2j * np.pi * rng.random(20))
    vals = nu_magnitude(golden_model, H, z_in)
    assert np.all((0 <= vals) & (vals < 1))
    # grand-orbit invariance outside
    base = 1.02 * np.exp(2j * np.pi * rng.random(50))
    done = 0
    for z in base:
        gz = golden_model.eval_g(complex(z))
        if abs(gz) > 1.0 and done < 5:
            a = nu_magnitude(golden_model, H, complex(z))
            b = nu_magnitude(golden_model, H, complex(gz))
            assert abs(a - b) < 1e-6
            done += 1
    assert done == 5
    # mu(z) = nu(z^2) and mu even
    z = (0.8 + 0.4 * rng.random(20)) * np.exp(2j * np.pi * rng.random(20))
    mu = mu_magnitude(golden_model, H, z)
    assert np.max(np.abs(mu - nu_magnitude(golden_model, H, z * z))) < 1e-12
    assert np.max(np.abs(mu - mu_magnitude(golden_model, H, -z))) < 1e-12


def test_nu_nonescaping_zero(golden_model, golden_extension):
    # a point that overflows toward infinity carries nu = 0
    val = nu_magnitude(golden_model, golden_extension, 40.0 + 40.0j, max_iter=50)
    assert val == 0.0


def _radial_field(area_of_eps, res=1024):
    g = GridField.empty((-1.0, 1.0, -1.0, 1.0), res)
    s = np.abs(g.centers())
    A = np.pi * s ** 2 / (1.0 + s ** 2)
    g.values = area_of_eps(A)
    return g


def test_david_fit_exponential_oracle():
    # area{|mu| > 1-eps} = e^{-2/eps}: invert the radial area profile
    def law(A):
        with np.errstate(divide="ignore"):
            eps = -2.0 / np.log(np.clip(A, 1e-300, 0.999))
        return np.clip(1.0 - eps, 0.0, 1.0 - 1e-15)

    field = _radial_field(law)
    eps = np.exp(np.linspace(math.log(0.25), math.log(0.5), 8))
    fit = david_condition_fit(field, eps)
    assert fit.passed
    assert fit.alpha_fit == pytest.approx(2.0, rel=0.05)


def test_david_fit_power_law_fails():
    field = _radial_field(lambda A: np.clip(1.0 - A, 0.0, 1.0 - 1e-15))
    eps = np.exp(np.linspace(math.log(0.02), math.log(0.5), 12))
    fit = david_condition_fit(field, eps)
    assert not fit.passed


def test_david_fit_vacuous():
    g = GridField.empty((-1.0, 1.0, -1.0, 1.0), 128)
    with pytest.raises(AllBelowThreshold):
        david_condition_fit(g, np.linspace(0.1, 0.5, 6))


def test_hyperbolic_nbhd_orthogonal_closed_form():
    h = hyperbolic_nbhd(0.0, 0.02, math.pi / 2)
    g = GridField.empty((0.75, 1.25, -0.25, 0.25), 3001)
    quad = float(np.sum(h.outer_lobe_contains(g.centers())) * g.pixel_area)
    assert abs(quad - h.outer_lobe_area()) < 1e-4
    # orthogonal case is its own inversion partner
    assert abs(h.inner_center - h.outer_center) < 1e-9
    assert h.inner_radius == pytest.approx(h.outer_radius, abs=1e-9)


def test_hyperbolic_nbhd_monotone_in_angle():
    g = GridField.empty((0.8, 1.2, -0.2, 0.2), 1001)
    z = g.centers()
    wide = hyperbolic_nbhd(0.0, 0.02, math.pi / 6).outer_lobe_contains(z)
    thin = hyperbolic_nbhd(0.0, 0.02, math.pi / 2.2).outer_lobe_contains(z)
    assert np.all(thin <= wide)


def test_z_enclosure_decay(golden_table6):
    areas = []
    for n in (2, 4):
        r = z_set_enclosure(golden_table6, n, alpha=math.pi / 4, beta=math.pi / 6)
        areas.append(r.area_sum_spherical)
        assert r.area_union_pixel <= r.area_sum_spherical * 1.001
    assert areas[1] < areas[0]


def test_z_enclosure_angle_order(golden_table6):
    with pytest.raises(AngleOrder):
        z_set_enclosure(golden_table6, 2, alpha=math.pi / 6, beta=math.pi / 4)


def test_sqrt_pullback_disk_and_empty():
    E = GridField.empty((-1.05, 1.05, -1.05, 1.05), 512)
    E.values = (np.abs(E.centers()) < 1.0).astype(float)
    ratio = sqrt_area_pullback_check(E)
    assert ratio == pytest.approx(math.sqrt(math.pi / 2), rel=0.01)
    empty = GridField.empty((-1.0, 1.0, -1.0, 1.0), 64)
    assert sqrt_area_pullback_check(empty) == 0.0


def test_sqrt_pullback_uniform_bound(rng):
    atlas = SphereAtlas(512)
    ratios = []
    for _ in range(25):
        E = GridField.empty((-1.5, 1.5, -1.5, 1.5), 256)
        c = 1.5 * (rng.random(3) * 2 - 1) + 1.5j * (rng.random(3) * 2 - 1)
        r = 0.05 + 0.3 * rng.random(3)
        z = E.centers()
        mask = np.zeros(z.shape, dtype=bool)
        for ck, rk in zip(c, r):
            mask |= np.abs(z - ck) < rk
        E.values = mask.astype(float)
        ratios.append(sqrt_area_pullback_check(E, atlas))
    assert max(ratios) < 3.0
