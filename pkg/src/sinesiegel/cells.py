"""Cell annuli attached to the cell partitions, the piecewise extension of the
boundary conjugacy into the disk, and its finite-difference dilatation.

Each cell-partition point x_i gets an inward depth equal to half the arc
distance between its two neighbors; the quadrilateral over each arc (two
radial sides, one inner chord, the boundary arc) is a cell.  The union of the
cells of one level is an annulus with the unit circle as outer boundary.  The
conjugacy h (known exactly on the backward critical orbit: h(x_i) =
e^{-2 pi i alpha i}) is extended cell-by-cell by a vertex-matched map that is
bilinear in angular and radial cell coordinates, with a radial closure on the
residual central disk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circlemaps import (CircleMapHandle, OrbitTable, RigidRotation,
                         critical_preimages, frac)

TWO_PI = 2.0 * math.pi


class ArcTooLarge(ValueError):
    """The smallness assumption d(x_i, x_r) < 1 fails at this level."""


class CellMismatch(RuntimeError):
    pass


class DegenerateJacobian(RuntimeError):
    pass


@dataclass
class CellAnnulus:
    """Cells of one level, stored as parallel arrays ordered by angle.

    For cell j: boundary arc from angle[j] to angle[j+1 mod m] (turn units),
    radial sides at those angles with inner radii 1 - depth, and the inner
    chord joining the two inner vertices.
    """

    level: int
    point_index: np.ndarray      # orbit index of the left vertex of each cell
    angles: np.ndarray           # sorted angles of the Xi_n points, turn units
    depths: np.ndarray           # Euclidean depth of y_i below x_i
    # inner chord of cell j as the line a*x + b*y = 1 (for ray intersection)
    chord_a: np.ndarray = field(repr=False, default=None)
    chord_b: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        m = len(self.angles)
        x = np.exp(TWO_PI * 1j * self.angles)
        y = (1.0 - self.depths) * x
        y_next = np.roll(y, -1)
        # line through y_j and y_{next}: a x + b y = 1
        x1, y1 = y.real, y.imag
        x2, y2 = y_next.real, y_next.imag
        det = x1 * y2 - x2 * y1
        self.chord_a = (y2 - y1) / det
        self.chord_b = (x1 - x2) / det

    @property
    def n_cells(self) -> int:
        return len(self.angles)

    def vertices(self, j: int):
        """(x_left, y_left, y_right, x_right) of cell j."""
        m = self.n_cells
        xl = np.exp(TWO_PI * 1j * self.angles[j])
        xr = np.exp(TWO_PI * 1j * self.angles[(j + 1) % m])
        yl = (1.0 - self.depths[j]) * xl
        yr = (1.0 - self.depths[(j + 1) % m]) * xr
        return xl, yl, yr, xr

    def inner_radius(self, j, phi):
        """Radius of the inner chord of cell(s) j along the ray at angle phi."""
        c = np.cos(TWO_PI * phi)
        s = np.sin(TWO_PI * phi)
        return 1.0 / (self.chord_a[j] * c + self.chord_b[j] * s)

    def locate(self, phi):
        """Cell index containing angle(s) phi."""
        p = frac(np.asarray(phi, dtype=float))
        j = np.searchsorted(self.angles, p, side="right") - 1
        return np.where(j < 0, self.n_cells - 1, j)

    def arc_lengths(self) -> np.ndarray:
        gaps = np.diff(np.concatenate([self.angles, self.angles[:1] + 1.0]))
        return TWO_PI * gaps

    def side_commensurability(self) -> np.ndarray:
        """Max pairwise side ratio per cell (arc, two radial sides, chord)."""
        arcs = self.arc_lengths()
        out = np.empty(self.n_cells)
        for j in range(self.n_cells):
            xl, yl, yr, xr = self.vertices(j)
            sides = np.array([arcs[j], abs(xl - yl), abs(yr - xr), abs(yl - yr)])
            out[j] = float(sides.max() / sides.min())
        return out


def build_cells(f: CircleMapHandle, n: int,
                table: OrbitTable | None = None) -> CellAnnulus:
    """Cells of level n for the circle map f.

    Raises ArcTooLarge when some adjacent pair of cell points is farther than
    Euclidean arc distance 1 apart (the standing smallness assumption).
    """
    table = table if table is not None else critical_preimages(f, n)
    q = table.returns
    count = q[n + 1]
    idx = np.arange(count)
    angles = table.angles(idx)
    order = np.argsort(angles)
    angles = angles[order]
    idx = idx[order]
    gaps = np.diff(np.concatenate([angles, angles[:1] + 1.0]))
    arc = TWO_PI * gaps
    if np.any(arc >= 1.0):
        raise ArcTooLarge(
            f"level {n}: largest adjacent arc {arc.max():.3f} >= 1; raise n")
    # depth at x_i: half the arc distance between its two neighbors
    depth = 0.5 * (arc + np.roll(arc, 1))
    return CellAnnulus(level=n, point_index=idx, angles=angles, depths=depth)


def first_usable_level(f: CircleMapHandle, start: int = 0, stop: int = 12,
                       table: OrbitTable | None = None) -> int:
    for n in range(start, stop):
        try:
            build_cells(f, n, table=table)
            return n
        except ArcTooLarge:
            continue
    raise ArcTooLarge(f"no usable cell level below {stop}")


@dataclass
class CellLayers:
    """Nested cell annuli n0..N with the band decomposition of the disk.

    Band n is the part of the disk between the inner boundary of Y_n and the
    inner boundary of Y_{n+1} (band N reaches the unit circle); a point's band
    is the deepest level whose annulus contains it.
    """

    levels: list[int]
    annuli: dict[int, CellAnnulus]

    def inner_radius_profile(self, level: int, phi):
        ann = self.annuli[level]
        j = ann.locate(phi)
        return ann.inner_radius(j, phi)

    def band_of(self, z: np.ndarray):
        """Band level per point (-1 = core below all annuli). |z| <= 1."""
        z = np.asarray(z, dtype=complex)
        phi = np.angle(z) / TWO_PI
        r = np.abs(z)
        band = np.full(z.shape, -1, dtype=np.int64)
        for n in self.levels:  # ascending: deepest correct level wins
            band = np.where(r >= self.inner_radius_profile(n, phi), n, band)
        return band


def build_layers(f: CircleMapHandle, max_level: int, start: int = 0,
                 table: OrbitTable | None = None) -> CellLayers:
    table = table if table is not None else critical_preimages(f, max_level)
    n0 = first_usable_level(f, start=start, stop=max_level + 1, table=table)
    levels = list(range(n0, max_level + 1))
    annuli = {n: build_cells(f, n, table=table) for n in levels}
    return CellLayers(levels=levels, annuli=annuli)


@dataclass
class ExtensionH:
    """Piecewise extension of the boundary conjugacy h to the closed disk."""

    alpha: float
    max_level: int
    source: CellLayers
    target: CellLayers
    boundary_points: int          # |Xi_N| used for the boundary interpolation

    def __post_init__(self):
        for n in self.source.levels:
            if self.source.annuli[n].n_cells != self.target.annuli[n].n_cells:
                raise CellMismatch(
                    f"source and target annuli disagree at level {n}: "
                    f"{self.source.annuli[n].n_cells} vs "
                    f"{self.target.annuli[n].n_cells} cells")

    @property
    def levels(self) -> list[int]:
        return self.source.levels

    def _map_in_band(self, z, band):
        src = self.source.annuli[band]
        tgt = self.target.annuli[band]
        phi = frac(np.angle(z) / TWO_PI)
        r = np.abs(z)
        j = src.locate(phi)
        m = src.n_cells
        lo = src.angles[j]
        width = (src.angles[(j + 1) % m] - lo) % 1.0
        u = ((phi - lo) % 1.0) / width
        r_in = src.inner_radius(j, phi)
        v = (1.0 - r) / (1.0 - r_in)
        lo_t = tgt.angles[j]
        width_t = (tgt.angles[(j + 1) % m] - lo_t) % 1.0
        phi_t = lo_t + u * width_t
        r_in_t = tgt.inner_radius(j, phi_t)
        r_t = 1.0 - v * (1.0 - r_in_t)
        return r_t * np.exp(TWO_PI * 1j * phi_t)

    def eval(self, z):
        z = np.asarray(z, dtype=complex)
        scalar = z.ndim == 0
        z = np.atleast_1d(z)
        if np.any(np.abs(z) > 1.0 + 1e-12):
            raise ValueError("H is defined on the closed unit disk")
        out = np.empty_like(z)
        band = self.source.band_of(z)
        nonzero = np.abs(z) > 0
        for n in self.levels:
            mask = band == n
            if np.any(mask):
                out[mask] = self._map_in_band(z[mask], n)
        core = (band == -1) & nonzero
        if np.any(core):
            zc = z[core]
            phi = frac(np.angle(zc) / TWO_PI)
            n0 = self.levels[0]
            r0 = self.source.inner_radius_profile(n0, phi)
            edge = self._map_in_band(r0 * np.exp(TWO_PI * 1j * phi), n0)
            out[core] = (np.abs(zc) / r0) * edge
        out[~nonzero] = 0.0
        return complex(out[0]) if scalar else out

    def boundary_conjugacy(self, x):
        """h on the circle: piecewise-linear in angle through the Xi_N data."""
        return self.eval(np.exp(TWO_PI * 1j * np.asarray(x, dtype=float)))


def build_extension(f: CircleMapHandle, max_level: int, alpha=None,
                    table: OrbitTable | None = None,
                    start_level: int = 0) -> ExtensionH:
    """Extension H of the conjugacy between f and the rigid rotation.

    The target cell structure is built from the rigid rotation R_alpha, whose
    backward critical orbit is x_i = e^{-2 pi i alpha i}; on those points the
    conjugacy is exact: h(x_i) = R_alpha^{-i}(1).
    """
    if alpha is None:
        alpha = f.rotation_value
        if alpha is None:
            raise ValueError("alpha not provided and no rotation hint on f")
    table = table if table is not None else critical_preimages(f, max_level)
    rigid = RigidRotation(alpha)
    rigid.rotation_quotients = f.rotation_quotients
    rigid_table = critical_preimages(rigid, max_level, returns=table.returns)
    src = build_layers(f, max_level, start=start_level, table=table)
    tgt_annuli = {}
    for n in src.levels:
        try:
            ann = build_cells(rigid, n, table=rigid_table)
        except ArcTooLarge as exc:
            raise CellMismatch(
                f"target rotation cells do not form at level {n}; "
                "alpha disagrees with the source rotation number") from exc
        src_ann = src.annuli[n]
        if ann.n_cells != src_ann.n_cells:
            raise CellMismatch(f"cell count mismatch at level {n}")
        # align target cells with source cells through the orbit indices
        perm = np.argsort(src_ann.point_index)
        lookup = {int(i): k for k, i in enumerate(ann.point_index)}
        order = np.array([lookup[int(i)] for i in src_ann.point_index])
        tgt_annuli[n] = CellAnnulus(level=n,
                                    point_index=ann.point_index[order],
                                    angles=ann.angles[order],
                                    depths=ann.depths[order])
        if np.any(np.diff(tgt_annuli[n].angles) <= 0):
            raise CellMismatch(
                f"target cell order disagrees with source at level {n}")
    tgt = CellLayers(levels=src.levels, annuli=tgt_annuli)
    ext = ExtensionH(alpha=float(alpha), max_level=max_level, source=src,
                     target=tgt, boundary_points=table.returns[max_level + 1])
    ext.quotients = getattr(f, "rotation_quotients", None)
    return ext


# --- dilatation ---------------------------------------------------------------


@dataclass(frozen=True)
class DilatationRow:
    level: int
    a_next2: int                   # partial quotient a_{n+2} of the rotation
    max_beltrami: float            # max |mu_H| over samples in the band
    max_dilatation: float          # (1+|mu|)/(1-|mu|)
    yoccoz_ratio: float            # dilatation / (1 + log(a_{n+2})^2)
    samples: int
    degenerate: int


def _beltrami_at(H: ExtensionH, z: np.ndarray, h: np.ndarray):
    fp = (H.eval(z + h) - H.eval(z - h)) / (2.0 * h)
    fq = (H.eval(z + 1j * h) - H.eval(z - 1j * h)) / (2.0 * h)
    fz = 0.5 * (fp - 1j * fq)
    fzb = 0.5 * (fp + 1j * fq)
    with np.errstate(divide="ignore", invalid="ignore"):
        jac = np.abs(fz) ** 2 - np.abs(fzb) ** 2
        mu = np.abs(fzb) / np.where(np.abs(fz) > 0, np.abs(fz), np.inf)
    return mu, jac


def dilatation_report(H: ExtensionH, samples_per_cell: int = 9,
                      quotients=None) -> list[DilatationRow]:
    """Finite-difference Beltrami modulus of H, per cell level.

    Sampling stays in the interior (u, v) of each cell of the level's band,
    with the step scaled to the local cell size so stencils do not cross
    band interfaces.  Degenerate-Jacobian samples are excluded and counted.
    """
    rows = []
    g = int(math.isqrt(samples_per_cell))
    us = (np.arange(g) + 0.5) / g * 0.5 + 0.25
    if quotients is None:
        quotients = getattr(H, "quotients", None)
    for n in H.levels:
        src = H.source.annuli[n]
        m = src.n_cells
        uu, vv, jj = np.meshgrid(us, us, np.arange(m), indexing="ij")
        uu, vv, jj = uu.ravel(), vv.ravel(), jj.ravel().astype(np.int64)
        lo = src.angles[jj]
        width = (src.angles[(jj + 1) % m] - lo) % 1.0
        phi = lo + uu * width
        r_in = src.inner_radius(jj, phi)
        # restrict to the part of the cell inside band n
        if n < H.levels[-1]:
            r_top = H.source.inner_radius_profile(n + 1, phi)
        else:
            r_top = np.ones_like(phi)
        r = r_top - vv * (r_top - r_in)
        z = r * np.exp(TWO_PI * 1j * phi)
        keep = (np.abs(z) < 1.0 - 1e-12) & (H.source.band_of(z) == n)
        z = z[keep]
        size = np.minimum((width * TWO_PI)[keep], np.abs(r_top - r_in)[keep])
        h = np.maximum(size * 1e-4, 1e-12)
        mu, jac = _beltrami_at(H, z, h)
        bad = ~np.isfinite(mu) | (jac <= 0)
        good = mu[~bad]
        if len(good) == 0:
            raise DegenerateJacobian(f"no valid samples at level {n}")
        mu_max = float(np.max(good))
        mu_max = min(mu_max, 1.0 - 1e-15)
        kmax = (1.0 + mu_max) / (1.0 - mu_max)
        a_n2 = 0
        if quotients is not None and n + 2 <= len(quotients):
            a_n2 = int(quotients[n + 1])
        rows.append(DilatationRow(
            level=n, a_next2=a_n2, max_beltrami=mu_max, max_dilatation=kmax,
            yoccoz_ratio=kmax / (1.0 + math.log(a_n2) ** 2) if a_n2 else float("nan"),
            samples=int(len(good)), degenerate=int(bad.sum())))
    return rows
