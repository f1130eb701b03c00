"""Circle homeomorphisms with one critical point: rotation numbers, backward
critical orbits, the dynamical and cell partitions, and the associated
combinatorial and real-bounds checks.

Angles are stored as fractions of a full turn in [0, 1); the point 1 on the
unit circle is angle 0 and is the critical point of every map handled here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._fast import (HAVE_NUMBA, chain_backward, chain_forward, lift_eval,
                    table_orbit)
from .arithmetic import cf_expand, cf_from_quotients

TWO_PI = 2.0 * math.pi


class NonMonotoneLift(ValueError):
    pass


class BisectionStall(RuntimeError):
    pass


class LemmaViolation(RuntimeError):
    """A combinatorial fact that is a theorem failed: bad table or tolerance."""


def frac(x):
    return x - np.floor(x)


def circle_dist(a, b):
    """Shortest arc distance between angles (turn units)."""
    d = np.abs(frac(a) - frac(b))
    return np.minimum(d, 1.0 - d)


class CircleMapHandle:
    """Orientation-preserving circle homeomorphism via its lift displacement.

    Subclasses provide ``displacement(x)`` on [0,1) with x + displacement(x)
    strictly increasing.  ``rotation_value`` / ``rotation_quotients`` may carry
    the intended rotation number for exact return-time combinatorics.
    """

    rotation_value = None
    rotation_quotients: tuple[int, ...] | None = None

    def displacement(self, x):
        raise NotImplementedError

    def lift(self, x):
        x = np.asarray(x, dtype=float)
        out = x + self.displacement(frac(x))
        return float(out) if out.ndim == 0 else out

    def angle_image(self, x):
        return frac(self.lift(x))

    def eval(self, z):
        """Image of a point on the unit circle."""
        x = np.angle(z) / TWO_PI
        return np.exp(2j * np.pi * self.lift(x))

    def invert_angle(self, y: float) -> float:
        """Unique x in [0,1) with lift(x) = y mod 1 (monotone bisection)."""
        base = self.lift(0.0)
        target = (y - base) % 1.0
        lo, hi = 0.0, 1.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.lift(mid) - base < target:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-16:
                break
        else:
            raise BisectionStall("invert_angle bracket failed to shrink")
        return 0.5 * (lo + hi) % 1.0


class RigidRotation(CircleMapHandle):
    def __init__(self, alpha):
        a = float(alpha)
        if not (0 < a < 1):
            raise ValueError("rotation angle must lie in (0,1)")
        self.alpha = a
        self.rotation_value = alpha  # keep Fraction exactness if given

    def displacement(self, x):
        x = np.asarray(x, dtype=float)
        d = np.full_like(x, self.alpha)
        return float(d) if d.ndim == 0 else d

    def invert_angle(self, y: float) -> float:
        return (y - self.alpha) % 1.0


class TabulatedCircleMap(CircleMapHandle):
    """Circle map backed by a dense displacement table with linear
    interpolation; an optional exact lift refines inverse solves."""

    def __init__(self, displacements: np.ndarray, exact_lift=None,
                 rotation_value=None, rotation_quotients=None):
        d = np.asarray(displacements, dtype=float)
        n = len(d)
        nodes = np.arange(n) / n
        lifts = nodes + d
        if np.any(np.diff(lifts) <= 0) or lifts[-1] >= lifts[0] + 1.0:
            raise NonMonotoneLift("tabulated lift is not strictly increasing")
        self.n = n
        self._d = np.concatenate([d, d[:1]])          # wrap node
        self._lift_nodes = np.concatenate([lifts, [lifts[0] + 1.0]])
        self.exact_lift = exact_lift
        self.rotation_value = rotation_value
        self.rotation_quotients = rotation_quotients

    def displacement(self, x):
        x = np.asarray(x, dtype=float)
        pos = frac(x) * self.n
        i = np.minimum(pos.astype(np.int64), self.n - 1)
        w = pos - i
        out = (1.0 - w) * self._d[i] + w * self._d[i + 1]
        return float(out) if out.ndim == 0 else out

    def lift(self, x):
        if self.exact_lift is not None:
            x = np.asarray(x, dtype=float)
            out = self.exact_lift(x)
            return float(out) if np.ndim(out) == 0 else out
        return super().lift(x)

    def _lift_interp(self, x: float) -> float:
        pos = (x % 1.0) * self.n
        i = min(int(pos), self.n - 1)
        w = pos - i
        return math.floor(x) + (1.0 - w) * self._lift_nodes[i] + w * self._lift_nodes[i + 1]

    def invert_angle(self, y: float) -> float:
        base = self._lift_nodes[0]
        target = (y - base) % 1.0 + base
        # bracket from table nodes
        j = int(np.searchsorted(self._lift_nodes, target)) - 1
        j = max(j, 0)
        lo, hi = j / self.n, (j + 1) / self.n
        if self.exact_lift is None:
            # solve on the linear interpolant directly
            l0, l1 = self._lift_nodes[j], self._lift_nodes[j + 1]
            w = (target - l0) / (l1 - l0)
            return (lo + w / self.n) % 1.0
        f = self.exact_lift
        flo, fhi = f(lo), f(hi)
        if not (flo <= target <= fhi):  # table seed off by a node
            lo, hi, flo, fhi = 0.0, 1.0, f(0.0), f(1.0)
        for _ in range(8):
            mid = 0.5 * (lo + hi)
            fm = f(mid)
            if fm < target:
                lo, flo = mid, fm
            else:
                hi, fhi = mid, fm
        for _ in range(80):
            if fhi == flo:
                break
            mid = lo + (target - flo) * (hi - lo) / (fhi - flo)
            if not (lo < mid < hi):
                mid = 0.5 * (lo + hi)
            fm = f(mid)
            if fm < target:
                lo, flo = mid, fm
            else:
                hi, fhi = mid, fm
            if hi - lo < 1e-15:
                break
        else:
            raise BisectionStall("inverse solve did not reach width tolerance")
        return 0.5 * (lo + hi) % 1.0


def rotation_number(f: CircleMapHandle, iters: int, x0: float = 0.0,
                    monotone_samples: int = 2048):
    """Poincare rotation number by orbit averaging: (lift^N(x0) - x0)/N.

    The error is at most 1/iters for a true circle homeomorphism.  Returns
    (estimate, error_bound).
    """
    if iters < 100:
        raise ValueError("iters must be >= 100")
    xs = np.arange(monotone_samples + 1) / monotone_samples
    lifts = f.lift(xs) if isinstance(f.lift(xs[:2]), np.ndarray) else np.array([f.lift(x) for x in xs])
    if np.any(np.diff(lifts) < -1e-12):
        raise NonMonotoneLift("lift decreasing on sample grid")
    if isinstance(f, RigidRotation):
        return f.alpha, 1.0 / iters
    if isinstance(f, TabulatedCircleMap) and f.exact_lift is None:
        if HAVE_NUMBA:
            total = table_orbit(x0, iters, f._d, f.n, 0.0)
            return total / iters, 1.0 / iters
        d = f._d
        n = f.n
        x = x0
        total = 0.0
        for _ in range(iters):
            pos = (x % 1.0) * n
            i = int(pos)
            if i >= n:
                i = n - 1
            w = pos - i
            step = (1.0 - w) * d[i] + w * d[i + 1]
            total += step
            x += step
        return total / iters, 1.0 / iters
    x = x0
    total = 0.0
    for _ in range(iters):
        step = float(f.displacement(x % 1.0))
        total += step
        x += step
    return total / iters, 1.0 / iters


# --- backward critical orbits -------------------------------------------------


@dataclass
class OrbitTable:
    """Backward orbit x_i of the critical point: f^i(x_i) = 1, with the
    closest-return denominators q_0..q_{level+1} of the rotation number."""

    level: int
    returns: list[int]
    _angles: np.ndarray = field(repr=False)   # index offset = max_index - 1
    max_index: int = 0
    chain_defect: float = 0.0

    def x(self, i: int) -> float:
        if not (-self.max_index < i < self.max_index):
            raise IndexError(f"orbit index {i} outside |i| < {self.max_index}")
        return float(self._angles[i + self.max_index - 1])

    def point(self, i: int) -> complex:
        return complex(np.exp(2j * np.pi * self.x(i)))

    def angles(self, indices) -> np.ndarray:
        idx = np.asarray(indices, dtype=np.int64)
        return self._angles[idx + self.max_index - 1]


def resolve_returns(f: CircleMapHandle, level: int, iters: int = 200_000) -> list[int]:
    """Closest-return denominators q_0..q_{level+1} for f's rotation number."""
    depth = level + 1
    if f.rotation_quotients is not None:
        qts = list(f.rotation_quotients)
        if len(qts) < depth:
            raise ValueError("rotation_quotients hint shorter than needed depth")
        cf = cf_from_quotients(qts[:depth])
    elif f.rotation_value is not None:
        val = f.rotation_value
        cf = cf_expand(val, depth, allow_rational=isinstance(val, Fraction))
        if cf.depth < depth:
            raise ValueError("rotation number rational: not enough return levels")
    else:
        rho, _ = rotation_number(f, iters)
        cf = cf_expand(rho, depth)
    return [1] + [qn for _, qn in cf.convergents]


def critical_preimages(f: CircleMapHandle, level: int,
                       returns: list[int] | None = None) -> OrbitTable:
    """Backward orbit of the critical point through level ``level``.

    x_i solves f^i(x_i) = 1 and is computed by chaining the monotone inverse,
    x_i = f^{-1}(x_{i-1}); negative indices are forward images x_{-i} = f^i(1).
    """
    if level < 0:
        raise ValueError("level must be >= 0")
    q = returns if returns is not None else resolve_returns(f, max(level, 1))
    max_index = q[level] + q[level + 1]
    angles = np.empty(2 * max_index - 1)
    off = max_index - 1
    spec = getattr(f, "fast_spec", None)
    if spec is not None and HAVE_NUMBA:
        back = chain_backward(max_index, f._lift_nodes, spec["table"],
                              spec["nt"], spec["plain"], spec["corner"],
                              spec["anchor"], spec["halfangle"])
        angles[off:] = back
        fwd = chain_forward(max_index - 1, spec["table"], spec["nt"],
                            spec["plain"], spec["corner"], spec["anchor"],
                            spec["halfangle"])
        angles[:off] = fwd[::-1]
    else:
        angles[off] = 0.0
        x = 0.0
        for i in range(1, max_index):
            x = f.invert_angle(x)
            angles[off + i] = x
        y = 0.0
        for i in range(1, max_index):
            y = f.angle_image(y)
            angles[off - i] = y

    # chain self-consistency: one forward application per positive index
    fwd = frac(f.lift(angles[off + 1:]))
    defect = float(np.max(circle_dist(fwd, angles[off:-1]))) if max_index > 1 else 0.0
    return OrbitTable(level=level, returns=q[:level + 2], _angles=angles,
                      max_index=max_index, chain_defect=defect)


# --- partitions ----------------------------------------------------------------


@dataclass(frozen=True)
class Arc:
    lo: float
    hi: float                 # lo < hi <= lo + 1; arc runs counterclockwise
    left_index: int
    right_index: int
    family_level: int | None = None   # dynamical arcs: n or n+1
    family_i: int | None = None

    @property
    def length(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class Partition:
    kind: str
    level: int
    arcs: tuple[Arc, ...]

    def total_length(self) -> float:
        return sum(a.length for a in self.arcs)


def _sorted_arcs(angle_index_pairs):
    pairs = sorted(angle_index_pairs)
    arcs = []
    m = len(pairs)
    for k in range(m):
        a_lo, i_lo = pairs[k]
        a_hi, i_hi = pairs[(k + 1) % m]
        hi = a_hi if k + 1 < m else a_hi + 1.0
        arcs.append((a_lo, hi, i_lo, i_hi))
    return arcs


def dynamical_partition(f: CircleMapHandle, n: int,
                        table: OrbitTable | None = None) -> Partition:
    """Partition of the circle into I_n^i (i < q_{n+1}) and I_{n+1}^j (j < q_n)."""
    table = table if table is not None else critical_preimages(f, n)
    q = table.returns
    qn, qn1 = q[n], q[n + 1]
    pts = [(table.x(i), i) for i in range(qn + qn1)]
    arcs = []
    for lo, hi, i_lo, i_hi in _sorted_arcs(pts):
        d = abs(i_hi - i_lo)
        base = min(i_lo, i_hi)
        if d == qn and base < qn1:
            fam, fi = n, base
        elif d == qn1 and base < qn:
            fam, fi = n + 1, base
        else:
            raise LemmaViolation(
                f"dynamical arc endpoints ({i_lo},{i_hi}) do not match "
                f"closest-return structure at level {n}")
        arcs.append(Arc(lo, hi, i_lo, i_hi, family_level=fam, family_i=fi))
    return Partition(kind="dynamical", level=n, arcs=tuple(arcs))


def cell_partition(f: CircleMapHandle, n: int,
                   table: OrbitTable | None = None) -> Partition:
    """Arcs between consecutive points of Xi_n = {x_i : 0 <= i < q_{n+1}}."""
    table = table if table is not None else critical_preimages(f, n)
    qn1 = table.returns[n + 1]
    pts = [(table.x(i), i) for i in range(qn1)]
    arcs = [Arc(lo, hi, i_lo, i_hi) for lo, hi, i_lo, i_hi in _sorted_arcs(pts)]
    return Partition(kind="cell", level=n, arcs=tuple(arcs))


@dataclass(frozen=True)
class PartitionLemmasReport:
    level: int
    cell_vs_dynamical_ok: bool       # each cell arc = 1 or 2 adjacent dynamical arcs
    persistence_ok: bool             # persistence to level n+1 iff the index rule
    persistence_rule_cases: int      # arcs persisting by the rule
    containment_ok: bool             # every level n+2 arc inside a level n arc
    delta_emp: float                 # max |I|/|J| over contained pairs
    chain_defect: float


CHAIN_DEFECT_TOL = 1e-8


def partition_lemmas_check(f: CircleMapHandle, n: int,
                           table: OrbitTable | None = None) -> PartitionLemmasReport:
    """Verify the partition combinatorics at level n (exact index arithmetic).

    Checks: (a) every cell arc of level n is one or the union of two adjacent
    dynamical arcs of level n; (b) a cell arc persists to level n+1 exactly
    under the rule a_{n+2} = 1, k = j + q_n, 0 <= j <= q_{n+1} - q_n; and (c)
    every cell arc of level n+2 nests in a level-n cell arc with a length
    ratio bounded away from 1.
    """
    table = table if table is not None else critical_preimages(f, n + 2)
    if table.level < n + 2:
        raise ValueError("orbit table must reach level n+2")
    if table.chain_defect > CHAIN_DEFECT_TOL:
        raise LemmaViolation(
            f"orbit table inconsistent: chain defect {table.chain_defect:.3e}")
    q = table.returns
    # partial quotients recovered from the return times: q_k = a_k q_{k-1} + q_{k-2}
    a = {1: q[1]}
    for k in range(2, len(q)):
        a[k] = (q[k] - q[k - 2]) // q[k - 1]

    def sorted_points(count):
        return sorted((table.x(i), i) for i in range(count))

    def arc_pairs(pts):
        m = len(pts)
        return [(pts[k][1], pts[(k + 1) % m][1]) for k in range(m)]

    # (a) cell arcs of level n against the dynamical point set of level n
    pts_cell = sorted_points(q[n + 1])
    arcs_cell = arc_pairs(pts_cell)
    pi_n = sorted_points(q[n] + q[n + 1])
    xi_set = {i for _, i in pts_cell}
    cell_ok = True
    run = 0
    for _, idx in pi_n + pi_n[:1]:
        if idx in xi_set:
            run = 0
        else:
            run += 1
            if run > 1:
                cell_ok = False
                break

    # (b) persistence rule at level n -> n+1
    next_set = {frozenset(p) for p in arc_pairs(sorted_points(q[n + 2]))}
    a_n2 = a.get(n + 2)
    persist_ok = True
    rule_cases = 0
    for (i_lo, i_hi) in arcs_cell:
        j, k = min(i_lo, i_hi), max(i_lo, i_hi)
        persists = frozenset((i_lo, i_hi)) in next_set
        rule = (a_n2 == 1 and k == j + q[n] and 0 <= j <= q[n + 1] - q[n])
        if persists != rule:
            persist_ok = False
        if rule:
            rule_cases += 1

    # (c) nesting of level n+2 cell arcs inside level n cell arcs; since
    # Xi_n is a subset of Xi_{n+2} as an index set, walk the finer circular
    # order and track the current coarse host.
    pts2 = sorted_points(q[n + 3])
    host_len = {}
    for (i_lo, i_hi) in arcs_cell:
        host_len[i_lo] = (table.x(i_hi) - table.x(i_lo)) % 1.0
    containment_ok = True
    delta = 0.0
    # rotate so the walk starts at a coarse point (index 0 is always in Xi_n)
    start = next(k for k, (_, i) in enumerate(pts2) if i == 0)
    order = pts2[start:] + pts2[:start]
    current_host = None
    for k, (ang_lo, idx) in enumerate(order):
        if idx < q[n + 1]:
            current_host = idx
        ang_hi = order[(k + 1) % len(order)][0]
        seg = (ang_hi - ang_lo) % 1.0
        ratio = seg / host_len[current_host]
        delta = max(delta, ratio)
        if ratio > 1.0 + 1e-12:
            containment_ok = False
    if delta >= 1.0 - 1e-12 and n >= 1:
        containment_ok = False

    report = PartitionLemmasReport(
        level=n,
        cell_vs_dynamical_ok=cell_ok,
        persistence_ok=persist_ok,
        persistence_rule_cases=rule_cases,
        containment_ok=containment_ok,
        delta_emp=delta,
        chain_defect=table.chain_defect,
    )
    if not (cell_ok and persist_ok and containment_ok):
        raise LemmaViolation(f"partition lemma check failed at level {n}: {report}")
    return report


# --- real bounds ----------------------------------------------------------------


@dataclass(frozen=True)
class RealBoundsRow:
    level: int
    ratio_inner_return: float        # |[x_{q_n}, x_{-q_{n+1}}]| / |[x_{-q_{n+1}}, 1]|
    ratio_deep_return: float         # |[x_{q_n}, x_{q_n+q_{n+1}}]| / |[x_{q_n+q_{n+1}}, 1]|
    ratio_critical_value: float      # |[x_{q_n+q_{n+1}-1}, v]| / |[v, x_{q_{n+1}-1}]|
    adjacent_comparability: float    # max adjacent dynamical arc ratio
    pre_asymptotic: bool


def real_bounds_report(f: CircleMapHandle, levels,
                       table: OrbitTable | None = None) -> list[RealBoundsRow]:
    levels = list(levels)
    top = max(levels)
    table = table if table is not None else critical_preimages(f, top)
    v = f.angle_image(0.0)
    rows = []
    for n in levels:
        q = table.returns
        xq = table.x(q[n])
        xmq1 = table.x(-q[n + 1])
        xqq = table.x(q[n] + q[n + 1] - 1) if q[n] + q[n + 1] - 1 < table.max_index else None
        r1 = circle_dist(xq, xmq1) / circle_dist(xmq1, 0.0)
        xsum = table.x(q[n] + q[n + 1]) if q[n] + q[n + 1] < table.max_index else None
        if xsum is None:
            # the deep return q_n + q_{n+1} sits exactly at the table edge
            xsum = f.invert_angle(table.x(q[n] + q[n + 1] - 1))
        r2 = circle_dist(xq, xsum) / circle_dist(xsum, 0.0)
        r3 = circle_dist(xqq, v) / circle_dist(v, table.x(q[n + 1] - 1))
        part = dynamical_partition(f, n, table=table)
        lens = [a.length for a in part.arcs]
        adj = max(max(lens[k] / lens[(k + 1) % len(lens)],
                      lens[(k + 1) % len(lens)] / lens[k])
                  for k in range(len(lens)))
        rows.append(RealBoundsRow(level=n, ratio_inner_return=float(r1),
                                  ratio_deep_return=float(r2),
                                  ratio_critical_value=float(r3),
                                  adjacent_comparability=float(adj),
                                  pre_asymptotic=(n < 1)))
    return rows
