import math

import numpy as np
import pytest

from sinesiegel.arithmetic import GOLDEN
from sinesiegel.circlemaps import (LemmaViolation, NonMonotoneLift, OrbitTable,
                                   RigidRotation, TabulatedCircleMap,
                                   cell_partition, circle_dist,
                                   critical_preimages, dynamical_partition,
                                   partition_lemmas_check, real_bounds_report,
                                   rotation_number)

ALPHA = math.sqrt(5) - 2  # doubled golden mean, quotients all 4


def test_rotation_number_rigid():
    rho, err = rotation_number(RigidRotation(0.25), 1000)
    assert abs(rho - 0.25) <= err == 1e-3
    rho, err = rotation_number(RigidRotation(GOLDEN), 100_000)
    assert abs(rho - GOLDEN) <= 1e-5


def test_rotation_number_requires_iters():
    with pytest.raises(ValueError):
        rotation_number(RigidRotation(0.3), 50)


def test_nonmonotone_lift_rejected():
    disp = 0.3 + 0.4 * np.sin(2 * np.pi * np.arange(64) / 64)
    with pytest.raises(NonMonotoneLift):
        TabulatedCircleMap(disp)


def test_tabulated_map_matches_rigid():
    disp = np.full(4096, 0.3)
    f = TabulatedCircleMap(disp)
    rho, _ = rotation_number(f, 5000)
    assert abs(rho - 0.3) < 1e-12
    assert abs(f.invert_angle(0.05) - 0.75) < 1e-9


def test_orbit_table_rigid_exact():
    f = RigidRotation(GOLDEN)
    table = critical_preimages(f, 3)
    assert table.returns == [1, 1, 2, 3, 5]
    for i in range(-7, 8):
        assert circle_dist(table.x(i), (-i * GOLDEN) % 1.0) < 1e-12
    assert table.x(0) == 0.0
    assert table.chain_defect < 1e-12


def test_orbit_table_level0():
    table = critical_preimages(RigidRotation(GOLDEN), 0)
    assert table.x(0) == 0.0
    assert table.max_index == 2


def test_partition_counts_golden():
    f = RigidRotation(GOLDEN)
    table = critical_preimages(f, 4)
    part = dynamical_partition(f, 2, table=table)
    assert len(part.arcs) == 2 + 3            # q_2 + q_3
    assert part.total_length() == pytest.approx(1.0, abs=1e-12)
    cells = cell_partition(f, 3, table=table)
    assert len(cells.arcs) == 5               # q_4
    labels = {(a.family_level, a.family_i) for a in part.arcs}
    assert len(labels) == len(part.arcs)


def test_partition_lemmas_rigid():
    f = RigidRotation(GOLDEN)
    rep = partition_lemmas_check(f, 2)
    assert rep.cell_vs_dynamical_ok and rep.persistence_ok and rep.containment_ok
    assert 0 < rep.delta_emp < 1
    # golden has a_{n+2} = 1, so some arcs must persist under the index rule
    assert rep.persistence_rule_cases > 0


def test_partition_lemmas_corrupted_table():
    f = RigidRotation(GOLDEN)
    table = critical_preimages(f, 4)
    bad = table._angles.copy()
    bad[table.max_index] += 1e-3              # x_1 perturbed
    corrupt = OrbitTable(level=table.level, returns=table.returns,
                         _angles=bad, max_index=table.max_index,
                         chain_defect=1e-3)
    with pytest.raises(LemmaViolation):
        partition_lemmas_check(f, 2, table=corrupt)


def test_real_bounds_rigid_closed_form():
    f = RigidRotation(ALPHA)
    rows = real_bounds_report(f, [3], table=critical_preimages(f, 4))
    q = [1, 4, 17, 72, 305]

    def dist(k):
        return min((k * ALPHA) % 1.0, 1.0 - (k * ALPHA) % 1.0)

    # assertion 1 ratio from exact rotation arithmetic
    x_qn = (-q[3] * ALPHA) % 1.0
    x_mq = (q[4] * ALPHA) % 1.0
    expected = circle_dist(x_qn, x_mq) / circle_dist(x_mq, 0.0)
    assert rows[0].ratio_inner_return == pytest.approx(expected, rel=1e-9)
    assert not rows[0].pre_asymptotic


def test_real_bounds_pre_asymptotic_flag():
    f = RigidRotation(ALPHA)
    rows = real_bounds_report(f, [0], table=critical_preimages(f, 1))
    assert rows[0].pre_asymptotic


def test_model_rotation_number_doubles(golden_model):
    from sinesiegel.arithmetic import double_mod1
    g = golden_model.doubled_circle_map(exact=False)
    rho, err = rotation_number(g, 100_000)
    assert abs(rho - double_mod1(GOLDEN)) < 2e-5


def test_model_orbit_residuals(golden_g, golden_table6):
    table = golden_table6
    assert table.chain_defect < 1e-10
    rng = np.random.default_rng(5)
    for i in rng.choice(np.arange(1, table.max_index), 4, replace=False):
        x = table.x(int(i))
        for _ in range(int(i)):
            x = golden_g.angle_image(x)
        assert circle_dist(x, 0.0) < 1e-8


def test_model_partition_lemmas(golden_g, golden_table6):
    rep = partition_lemmas_check(golden_g, 3, table=golden_table6)
    assert rep.cell_vs_dynamical_ok and rep.persistence_ok and rep.containment_ok


def test_adjacent_arc_comparability(golden_g, golden_table6):
    part = dynamical_partition(golden_g, 4, table=golden_table6)
    lens = [a.length for a in part.arcs]
    ratios = [max(lens[k] / lens[(k + 1) % len(lens)],
                  lens[(k + 1) % len(lens)] / lens[k])
              for k in range(len(lens))]
    assert max(ratios) < 20.0
