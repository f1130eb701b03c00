"""Executable covering lemma: disjoint-subfamily selection maximizing covered
area, the L = 8K + 9 covering check, and the spherical-area ratio experiment.

Test instances use round disks (the worst case of the lemma): each pair keeps
an inner disk B_{r_i}(x_i) = V_i inside U_i = B_{K r_i}(x_i).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .gridfield import GridField

DISJOINT_MARGIN = 1e-12
EXACT_LIMIT = 20


class NotDisjoint(ValueError):
    pass


@dataclass(frozen=True)
class DiskPair:
    """Nested pair V = B_r(x) inside U = B_{K r}(x) with roundness K."""

    center: complex
    radius: float
    K: float
    v_radius: float | None = None
    u_radius: float | None = None

    def __post_init__(self):
        if self.radius <= 0 or self.K <= 1:
            raise ValueError("need radius > 0 and K > 1")
        object.__setattr__(self, "v_radius", self.v_radius or self.radius)
        object.__setattr__(self, "u_radius", self.u_radius or self.K * self.radius)
        if not (self.radius <= self.v_radius <= self.u_radius
                <= self.K * self.radius + 1e-15):
            raise ValueError("containment B_r in V in U in B_{Kr} violated")


@dataclass(frozen=True)
class CoveringFamily:
    pairs: tuple[DiskPair, ...]
    K: float

    def __post_init__(self):
        if not self.pairs:
            raise ValueError("family must be non-empty")
        if any(abs(p.K - self.K) > 1e-12 for p in self.pairs):
            raise ValueError("all pairs must share the family roundness K")

    def __len__(self):
        return len(self.pairs)


def reduce_to_maximal(family: CoveringFamily) -> tuple[CoveringFamily, list[int]]:
    """Drop inner disks contained in another inner disk; returns kept indices."""
    pairs = family.pairs
    kept = []
    for i, p in enumerate(pairs):
        contained = False
        for j, q in enumerate(pairs):
            if i == j:
                continue
            d = abs(p.center - q.center)
            if d + p.radius <= q.radius + DISJOINT_MARGIN and (
                    q.radius > p.radius or (q.radius == p.radius and j < i)):
                contained = True
                break
        if not contained:
            kept.append(i)
    reduced = CoveringFamily(tuple(pairs[i] for i in kept), family.K)
    return reduced, kept


def _disjoint(p: DiskPair, q: DiskPair) -> bool:
    return abs(p.center - q.center) > p.radius + q.radius + DISJOINT_MARGIN


@dataclass(frozen=True)
class SubfamilySelection:
    indices: tuple[int, ...]
    union_area: float          # Euclidean area of the disjoint inner disks
    exact: bool                # exact maximizer vs greedy heuristic


def best_disjoint_subfamily(family: CoveringFamily) -> SubfamilySelection:
    """Disjoint subfamily of inner disks maximizing the union's Euclidean area.

    Disjoint disks have union area sum(pi r^2), so this is a maximum-weight
    independent set on the intersection graph: solved exactly by
    branch-and-bound up to EXACT_LIMIT pairs, greedily (flagged) beyond.
    """
    pairs = family.pairs
    n = len(pairs)
    weight = [math.pi * p.radius ** 2 for p in pairs]
    adj = [[_disjoint(pairs[i], pairs[j]) for j in range(n)] for i in range(n)]

    if n > EXACT_LIMIT:
        order = sorted(range(n), key=lambda i: -pairs[i].radius)
        chosen: list[int] = []
        for i in order:
            if all(adj[i][j] for j in chosen):
                chosen.append(i)
        total = sum(weight[i] for i in chosen)
        return SubfamilySelection(tuple(sorted(chosen)), total, exact=False)

    order = sorted(range(n), key=lambda i: -weight[i])
    suffix = [0.0] * (n + 1)
    for k in range(n - 1, -1, -1):
        suffix[k] = suffix[k + 1] + weight[order[k]]
    best_set: list[int] = []
    best_total = -1.0

    def recurse(k, chosen, total):
        nonlocal best_set, best_total
        if total > best_total:
            best_total, best_set = total, list(chosen)
        if k == n or total + suffix[k] <= best_total:
            return
        i = order[k]
        if all(adj[i][j] for j in chosen):
            chosen.append(i)
            recurse(k + 1, chosen, total + weight[i])
            chosen.pop()
        recurse(k + 1, chosen, total)

    recurse(0, [], 0.0)
    return SubfamilySelection(tuple(sorted(best_set)), best_total, exact=True)


@dataclass(frozen=True)
class CoveringCheckResult:
    passed: bool
    L: float
    witness: int | None            # first index whose U escapes the L-disks
    assigned: tuple[int, ...]      # chosen j in sigma0 per family index
    radius_bound_ok: bool          # r_i <= 8 max_{j in Theta} r_j on all i


def covering_check(family: CoveringFamily, selection) -> CoveringCheckResult:
    """Check union(U_i) inside union of B_{L r_j}(x_j), L = 8K + 9.

    The proof's pairing assigns each i to an intersecting j in sigma0 with
    maximal radius; disk containment |x_i - x_j| + K r_i <= L r_j is checked
    in plain arithmetic with a safety margin, falling back to any covering j.
    """
    sigma0 = tuple(selection.indices if hasattr(selection, "indices") else selection)
    pairs = family.pairs
    for a, b in combinations(sigma0, 2):
        if not _disjoint(pairs[a], pairs[b]):
            raise NotDisjoint(f"selected disks {a} and {b} intersect")
    L = 8.0 * family.K + 9.0
    assigned = []
    witness = None
    radius_ok = True
    for i, p in enumerate(pairs):
        if i in sigma0:
            assigned.append(i)
            continue
        theta = [j for j in sigma0
                 if abs(p.center - pairs[j].center) <= p.radius + pairs[j].radius
                 + DISJOINT_MARGIN]
        if theta:
            r_max = max(pairs[j].radius for j in theta)
            if p.radius > 8.0 * r_max + DISJOINT_MARGIN:
                radius_ok = False
            j = max(theta, key=lambda j: pairs[j].radius)
        else:
            j = None
        cover = None
        candidates = ([j] if j is not None else []) + [k for k in sigma0 if k != j]
        for k in candidates:
            if (abs(p.center - pairs[k].center) + p.u_radius
                    <= L * pairs[k].radius + 1e-9):
                cover = k
                break
        if cover is None:
            witness = i if witness is None else witness
            assigned.append(-1)
        else:
            assigned.append(cover)
    return CoveringCheckResult(passed=witness is None, L=L, witness=witness,
                               assigned=tuple(assigned),
                               radius_bound_ok=radius_ok)


# --- spherical area ratio --------------------------------------------------------


def union_area_spherical(centers, radii, resolution: int = 512) -> float:
    """Spherical area of a union of disks by pixel quadrature."""
    centers = np.asarray(centers, dtype=complex)
    radii = np.asarray(radii, dtype=float)
    x0 = float((centers.real - radii).min())
    x1 = float((centers.real + radii).max())
    y0 = float((centers.imag - radii).min())
    y1 = float((centers.imag + radii).max())
    side = max(x1 - x0, y1 - y0)
    cx, cy = (x0 + x1) / 2, (y0 + y1) / 2
    g = GridField.empty((cx - side / 2, cx + side / 2,
                         cy - side / 2, cy + side / 2), resolution)
    z = g.centers()
    mask = np.zeros(z.shape, dtype=bool)
    for c, r in zip(centers, radii):
        mask |= np.abs(z - c) < r
    return float(np.sum(g.weights()[mask]))


@dataclass(frozen=True)
class AreaRatioResult:
    ratio: float
    v_area: float
    u_area: float


def area_ratio_check(family: CoveringFamily, resolution: int = 512) -> AreaRatioResult:
    """area(union V_i) / area(union U_i) in spherical measure."""
    centers = [p.center for p in family.pairs]
    v = union_area_spherical(centers, [p.v_radius for p in family.pairs], resolution)
    u = union_area_spherical(centers, [p.u_radius for p in family.pairs], resolution)
    return AreaRatioResult(ratio=v / u if u > 0 else float("nan"),
                           v_area=v, u_area=u)


def random_family(rng: np.random.Generator, n: int, K: float,
                  box: float = 2.0, r_range=(0.02, 0.3),
                  annulus: tuple[float, float] | None = None) -> CoveringFamily:
    """Random disk family for corpus runs; with ``annulus`` the centers are
    drawn with 1 < |x| < R_cap (the bounded-hyperbolic-diameter stand-in)."""
    pairs = []
    while len(pairs) < n:
        c = complex(rng.uniform(-box, box), rng.uniform(-box, box))
        if annulus is not None:
            lo, hi = annulus
            if not (lo < abs(c) < hi):
                continue
        r = float(rng.uniform(*r_range))
        pairs.append(DiskPair(center=c, radius=r, K=K))
    return CoveringFamily(tuple(pairs), K)
