import math
from itertools import combinations

import numpy as np
import pytest

from sinesiegel.covering import (CoveringFamily, DiskPair, NotDisjoint,
                                 area_ratio_check, best_disjoint_subfamily,
                                 covering_check, random_family,
                                 reduce_to_maximal)


def brute_force_best(family):
    best, best_idx = -1.0, ()
    n = len(family.pairs)
    for m in range(1, 2 ** n):
        idx = [i for i in range(n) if m >> i & 1]
        ok = all(abs(family.pairs[a].center - family.pairs[b].center)
                 > family.pairs[a].radius + family.pairs[b].radius + 1e-12
                 for a, b in combinations(idx, 2))
        if ok:
            area = sum(math.pi * family.pairs[i].radius ** 2 for i in idx)
            if area > best:
                best, best_idx = area, tuple(idx)
    return best_idx, best


def test_single_pair():
    fam = CoveringFamily((DiskPair(0j, 1.0, 2.0),), 2.0)
    sel = best_disjoint_subfamily(fam)
    assert sel.indices == (0,)
    chk = covering_check(fam, sel)
    assert chk.passed and chk.L == 25.0


def test_two_disjoint():
    fam = CoveringFamily((DiskPair(0j, 1.0, 2.0), DiskPair(5 + 0j, 1.0, 2.0)), 2.0)
    assert best_disjoint_subfamily(fam).indices == (0, 1)


def test_three_chain():
    fam = CoveringFamily((DiskPair(0j, 1.0, 2.0), DiskPair(1.5 + 0j, 1.0, 2.0),
                          DiskPair(3 + 0j, 1.0, 2.0)), 2.0)
    sel = best_disjoint_subfamily(fam)
    assert sel.indices == (0, 2)
    assert sel.exact
    bidx, barea = brute_force_best(fam)
    assert sel.union_area == pytest.approx(barea)


def test_exact_matches_enumeration(rng):
    for trial in range(200):
        n = int(rng.integers(2, 11))
        fam = random_family(rng, n, [1.5, 2.0, 4.0][trial % 3])
        sel = best_disjoint_subfamily(fam)
        assert sel.exact
        _, barea = brute_force_best(fam)
        assert sel.union_area == pytest.approx(barea, abs=1e-9)


def test_covering_corpus(rng):
    for trial in range(300):
        n = int(rng.integers(1, 13))
        fam = random_family(rng, n, [1.5, 2.0, 4.0][trial % 3])
        sel = best_disjoint_subfamily(fam)
        chk = covering_check(fam, sel)
        assert chk.passed, f"trial {trial}"
        assert chk.radius_bound_ok


def test_greedy_flagged(rng):
    fam = random_family(rng, 25, 2.0)
    sel = best_disjoint_subfamily(fam)
    assert not sel.exact
    covering_check(fam, sel)   # must not raise; pass/fail recorded


def test_not_disjoint_rejected():
    fam = CoveringFamily((DiskPair(0j, 1.0, 2.0), DiskPair(1.0 + 0j, 1.0, 2.0)), 2.0)
    with pytest.raises(NotDisjoint):
        covering_check(fam, (0, 1))


def test_reduce_to_maximal():
    fam = CoveringFamily((DiskPair(0j, 1.0, 2.0), DiskPair(0.1 + 0j, 0.2, 2.0),
                          DiskPair(4 + 0j, 1.0, 2.0)), 2.0)
    reduced, kept = reduce_to_maximal(fam)
    assert kept == [0, 2]
    assert len(reduced) == 2


def test_area_ratio_identity():
    pairs = tuple(DiskPair(c, 0.2, 2.0, v_radius=0.4, u_radius=0.4)
                  for c in (1.3 + 0j, 1.5j))
    fam = CoveringFamily(pairs, 2.0)
    res = area_ratio_check(fam)
    assert res.ratio == pytest.approx(1.0, abs=1e-12)


def test_area_ratio_single_pair_spherical_correction():
    fam = CoveringFamily((DiskPair(1.5 + 0j, 0.2, 2.0),), 2.0)
    res = area_ratio_check(fam, resolution=1024)
    assert abs(res.ratio - 0.25) / 0.25 < 0.05


def test_area_ratio_corpus_stability(rng):
    def min_ratio(seed):
        r = np.random.default_rng(seed)
        vals = []
        for _ in range(60):
            fam = random_family(r, int(r.integers(1, 8)), 2.0,
                                annulus=(1.05, 2.0), r_range=(0.02, 0.12))
            vals.append(area_ratio_check(fam, resolution=256).ratio)
        return min(vals)

    a, b = min_ratio(1), min_ratio(2)
    assert a > 0 and b > 0
    assert abs(a - b) / max(a, b) < 0.2
