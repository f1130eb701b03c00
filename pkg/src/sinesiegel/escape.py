"""Escape classification into the unit disk, spherical areas of the level
sets X_n, pulled-back Beltrami magnitudes, the exponential-area (David)
condition fit, hyperbolic neighborhoods of circle arcs, and the enclosure of
the sets Z_n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cells import CellLayers
from .circlemaps import OrbitTable
from .gridfield import GridField, SphereAtlas

TWO_PI = 2.0 * math.pi

NONESCAPING = -1


class InsufficientSamples(RuntimeError):
    pass


class AllBelowThreshold(RuntimeError):
    pass


class AngleOrder(ValueError):
    pass


# --- first entry ---------------------------------------------------------------


@dataclass(frozen=True)
class EscapeInfo:
    k: int | None                  # least k with g^k(z) in the disk; None if not
    landing: complex | None
    landing_level: int | str       # band level, "core", "deep", or "nonescaping"


def iterate_first_entry(model, z0: np.ndarray, max_iter: int = 10_000,
                        value_cap: float = 1e15):
    """Vectorized first-entry iteration of g over exterior points.

    Returns (k, landing): k > 0 is the entry step, NONESCAPING marks points
    that overflow toward the essential singularity or survive max_iter.
    """
    z0 = np.asarray(z0, dtype=complex).ravel()
    k = np.full(z0.shape, NONESCAPING, dtype=np.int32)
    landing = np.full(z0.shape, np.nan, dtype=complex)
    cur = z0.copy()
    active = np.isfinite(cur) & (np.abs(cur) >= 1.0)
    for step in range(1, max_iter + 1):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        with np.errstate(all="ignore"):
            w = model.eval_g(cur[idx])
        bad = ~np.isfinite(w) | (np.abs(w) > value_cap)
        entered = (np.abs(w) < 1.0) & ~bad
        hit = idx[entered]
        k[hit] = step
        landing[hit] = w[entered]
        active[hit] = False
        active[idx[bad]] = False
        keep = ~entered & ~bad
        cur[idx[keep]] = w[keep]
    return k, landing


def first_entry(model, z: complex, max_iter: int = 10_000,
                layers: CellLayers | None = None,
                value_cap: float = 1e15) -> EscapeInfo:
    """First entry of a single exterior point into the unit disk."""
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if abs(z) <= 1.0:
        raise ValueError("z must lie strictly outside the closed unit disk "
                         "(the circle is invariant and never enters)")
    k, landing = iterate_first_entry(model, np.array([z]), max_iter, value_cap)
    if k[0] == NONESCAPING:
        return EscapeInfo(k=None, landing=None, landing_level="nonescaping")
    lev: int | str
    if layers is not None:
        band = int(layers.band_of(np.array([landing[0]]))[0])
        if band == -1:
            lev = "core"
        elif band == layers.levels[-1]:
            lev = "deep"
        else:
            lev = band
    else:
        lev = "core"
    return EscapeInfo(k=int(k[0]), landing=complex(landing[0]), landing_level=lev)


# --- area decay of the level sets X_n -------------------------------------------


@dataclass
class AreaDecayResult:
    levels: list[int]
    areas: dict[int, float]
    pixel_counts: dict[int, int]
    delta_fit: float
    log_intercept: float
    fitted_levels: list[int]
    recursion_rows: list[dict]
    recursion_ok: bool
    escape_fraction: float
    nonescaping_area: float
    core_area: float
    deep_area: float
    max_iter: int
    resolution: int
    flags: list[str] = field(default_factory=list)


def _classify_grid(model, layers: CellLayers, points: np.ndarray,
                   weights: np.ndarray, max_iter: int, tile: int = 262_144):
    """Accumulate spherical area and pixel count per landing band."""
    top = layers.levels[-1]
    area = np.zeros(top + 3)      # bands 0..top, [-3]=core... use dict later
    area_core = 0.0
    area_deep = 0.0
    area_non = 0.0
    counts = np.zeros(top + 1, dtype=np.int64)
    band_area = {n: 0.0 for n in layers.levels}
    escaped_w = 0.0
    total_w = float(weights.sum())
    for start in range(0, len(points), tile):
        zs = points[start:start + tile]
        ws = weights[start:start + tile]
        k, landing = iterate_first_entry(model, zs, max_iter)
        esc = k > 0
        escaped_w += float(ws[esc].sum())
        area_non += float(ws[~esc].sum())
        if np.any(esc):
            band = layers.band_of(landing[esc])
            wsel = ws[esc]
            for n in layers.levels[:-1]:
                m = band == n
                band_area[n] += float(wsel[m].sum())
                counts[n] += int(m.sum())
            area_deep += float(wsel[band == top].sum())
            area_core += float(wsel[band == -1].sum())
    return band_area, counts, area_core, area_deep, area_non, escaped_w, total_w


def area_decay_experiment(model, levels, resolution: int = 2048,
                          box_half: float = 3.0, max_iter: int = 600,
                          layers: CellLayers | None = None,
                          table: OrbitTable | None = None,
                          min_pixels: int = 100) -> AreaDecayResult:
    """Spherical areas of the escape level sets X_n and their geometric fit.

    X_n collects exterior points whose first entry into the disk lands in the
    band of cell level n.  The plane chart covers 1 <= |z| <= box_half at the
    given resolution; an inversion chart covers |z| > box_half.  Points that
    never enter within ``max_iter`` count as non-escaping (shrinking the
    estimates; the cutoff is recorded).
    """
    from .cells import build_layers   # local import to avoid cycles

    levels = list(levels)
    top = max(levels) + 1
    if layers is None:
        layers = build_layers(model.doubled_circle_map(), top, table=table)
    flags_pre = []
    if min(levels) < layers.levels[0]:
        dropped = [n for n in levels if n < layers.levels[0]]
        flags_pre.append(f"levels {dropped} below first usable cell level "
                         f"{layers.levels[0]}; dropped")
        levels = [n for n in levels if n >= layers.levels[0]]
        if not levels:
            raise ValueError("no usable levels requested")

    plane = GridField.empty((-box_half, box_half, -box_half, box_half), resolution)
    pc = plane.centers().ravel()
    pw = plane.weights().ravel()
    sel = (np.abs(pc) > 1.0) & (np.abs(pc) <= box_half)
    pts = [pc[sel]]
    wts = [pw[sel]]
    inv_res = max(64, resolution // 8)
    inv = GridField.empty((-1.0 / box_half, 1.0 / box_half,
                           -1.0 / box_half, 1.0 / box_half), inv_res, chart=1)
    ic = inv.centers().ravel()
    iw = inv.weights().ravel()
    isel = (np.abs(ic) < 1.0 / box_half) & (ic != 0)
    pts.append(1.0 / ic[isel])
    wts.append(iw[isel])
    points = np.concatenate(pts)
    weights = np.concatenate(wts)

    band_area, counts, core_a, deep_a, non_a, esc_w, total_w = _classify_grid(
        model, layers, points, weights, max_iter)

    flags = list(flags_pre)
    areas = {n: band_area[n] for n in levels if n in band_area}
    fitted = []
    for n in levels:
        if counts[n] < min_pixels:
            flags.append(f"level {n}: only {counts[n]} pixels (min {min_pixels})")
        elif areas.get(n, 0.0) > 0:
            fitted.append(n)
    if len(fitted) < 2:
        raise InsufficientSamples(
            f"fewer than two resolved levels: counts {dict(enumerate(counts))}")

    xs = np.array(fitted, dtype=float)
    ys = np.log([areas[n] for n in fitted])
    slope, intercept = np.polyfit(xs, ys, 1)
    delta_fit = float(np.exp(slope))

    # two-step recursion area(X_{n+2}) <= C eps^n + delta * area(X_n) with the
    # fitted constants eps = delta_fit, delta = delta_fit^2, C = e^intercept
    c0 = float(np.exp(intercept))
    rows = []
    ok = True
    for n in fitted:
        if n + 2 not in areas or (n + 2) not in fitted:
            continue
        bound = c0 * delta_fit ** n + delta_fit ** 2 * areas[n]
        holds = areas[n + 2] <= bound
        rows.append({"n": n, "area_n": areas[n], "area_n2": areas[n + 2],
                     "bound": bound, "holds": bool(holds)})
        ok = ok and holds

    return AreaDecayResult(
        levels=levels, areas=areas,
        pixel_counts={n: int(counts[n]) for n in levels},
        delta_fit=delta_fit, log_intercept=float(intercept),
        fitted_levels=fitted, recursion_rows=rows, recursion_ok=ok,
        escape_fraction=esc_w / total_w, nonescaping_area=non_a,
        core_area=core_a, deep_area=deep_a, max_iter=max_iter,
        resolution=resolution, flags=flags)


# --- Beltrami magnitudes ---------------------------------------------------------


def _beltrami_once(H, z, h):
    fp = (H.eval(z + h) - H.eval(z - h)) / (2.0 * h)
    fq = (H.eval(z + 1j * h) - H.eval(z - 1j * h)) / (2.0 * h)
    fz = 0.5 * (fp - 1j * fq)
    fzb = 0.5 * (fp + 1j * fq)
    with np.errstate(divide="ignore", invalid="ignore"):
        mu = np.abs(fzb) / np.abs(fz)
    return np.nan_to_num(mu, nan=1.0, posinf=1.0)


def beltrami_magnitude_in_disk(H, z: np.ndarray, step_scale: float = 1e-4):
    """|mu_H| at points of the open unit disk by central finite differences.

    H is piecewise-defined; a stencil straddling a cell-band seam produces a
    junk quotient, so three step sizes are evaluated and the median taken
    (only stencils entirely within the seam's reach corrupt all three).
    """
    z = np.asarray(z, dtype=complex)
    h = np.maximum((1.0 - np.abs(z)), 1e-6) * step_scale
    est = np.stack([_beltrami_once(H, z, h),
                    _beltrami_once(H, z, h / 4.0),
                    _beltrami_once(H, z, h / 16.0)])
    mu = np.median(est, axis=0)
    return np.clip(mu, 0.0, 1.0 - 1e-12)


def nu_magnitude(model, H, z, max_iter: int = 10_000):
    """|nu| at z: the Beltrami magnitude of H pulled back along first entry.

    Inside the disk this is |mu_H(z)| itself; outside it equals
    |mu_H(g^{k_z}(z))| because holomorphic pullback preserves the modulus;
    non-escaping points carry nu = 0.
    """
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    out = np.zeros(z.shape, dtype=float)
    inside = np.abs(z) < 1.0
    if np.any(inside):
        out[inside] = beltrami_magnitude_in_disk(H, z[inside])
    outside = np.abs(z) > 1.0
    if np.any(outside):
        k, landing = iterate_first_entry(model, z[outside], max_iter)
        esc = k > 0
        vals = np.zeros(int(outside.sum()))
        if np.any(esc):
            vals[esc] = beltrami_magnitude_in_disk(H, landing[esc])
        out[outside] = vals
    return float(out[0]) if scalar else out


def mu_magnitude(model, H, z, max_iter: int = 10_000):
    """|mu(z)| = |nu(z^2)|: pullback through the square map preserves the
    modulus and makes the field even."""
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    out = nu_magnitude(model, H, np.atleast_1d(z) ** 2, max_iter=max_iter)
    return float(out[0]) if scalar else out


# --- David condition fit ----------------------------------------------------------


@dataclass(frozen=True)
class DavidFit:
    epsilons: tuple[float, ...]
    areas: tuple[float, ...]
    alpha_fit: float
    M_fit: float
    r_squared: float
    curvature: float           # quadratic coefficient of log-area in 1/eps
    vacuous: bool
    passed: bool


def david_condition_fit(field: GridField, epsilons, eps0: float = 0.5,
                        r2_threshold: float = 0.9,
                        curvature_tol: float = 0.05,
                        min_pixels: int = 10) -> DavidFit:
    """Exponential-law fit of area{|mu| > 1 - eps} against 1/eps.

    Passing requires a negative slope, R^2 above the threshold, and no
    significant convex curvature (a power law bends upward in these
    coordinates).  Thresholds capturing fewer than ``min_pixels`` samples
    are unresolved at this grid and excluded from the fit.  Raises
    AllBelowThreshold when even the weakest threshold captures nothing (a
    vacuous pass, surfaced as an error flag).
    """
    eps = np.asarray(sorted(epsilons), dtype=float)
    if len(eps) < 5:
        raise ValueError("need at least 5 epsilon values")
    if np.any((eps <= 0) | (eps >= eps0 + 1e-12)):
        raise ValueError(f"epsilons must lie in (0, {eps0}]")
    w = field.weights()
    vals = field.values
    areas = np.array([float(w[vals > 1.0 - e].sum()) for e in eps])
    counts = np.array([int((vals > 1.0 - e).sum()) for e in eps])
    if areas.max() == 0.0:
        raise AllBelowThreshold("no sample exceeds the weakest threshold; "
                                "the condition holds vacuously")
    good = (areas > 0) & (counts >= min_pixels)
    x = 1.0 / eps[good]
    y = np.log(areas[good])
    if good.sum() < 3:
        return DavidFit(tuple(eps), tuple(areas), float("nan"), float("nan"),
                        0.0, float("nan"), False, False)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 0.0
    c2 = float(np.polyfit(x, y, 2)[0]) if good.sum() >= 4 else 0.0
    # convexity measured by the quadratic term's swing across the range,
    # relative to the total drop
    swing = abs(c2) * (x.max() - x.min()) ** 2 / 8.0
    drop = max(abs(y.max() - y.min()), 1e-12)
    curved = (c2 > 0) and (swing / drop > curvature_tol)
    passed = (slope < 0) and (r2 > r2_threshold) and not curved
    return DavidFit(tuple(eps), tuple(areas), alpha_fit=float(-slope),
                    M_fit=float(np.exp(intercept)), r_squared=float(r2),
                    curvature=c2, vacuous=False, passed=bool(passed))


# --- hyperbolic neighborhoods -----------------------------------------------------


@dataclass(frozen=True)
class HyperbolicNbhd:
    """Region bounded by two circular arcs through the endpoints of a circle
    arc, meeting the unit circle at a given exterior angle (small-arc normal
    form of a hyperbolic-distance neighborhood in the slit plane)."""

    arc_lo: float       # turn units
    arc_hi: float
    angle: float        # exterior angle in (0, pi)
    outer_center: complex
    outer_radius: float
    inner_center: complex
    inner_radius: float

    def contains(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        r = np.abs(z)
        in_outer = np.abs(z - self.outer_center) < self.outer_radius
        in_inner = np.abs(z - self.inner_center) < self.inner_radius
        return np.where(r >= 1.0, in_outer, in_inner)

    def outer_lobe_contains(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return (np.abs(z) > 1.0) & (np.abs(z - self.outer_center) < self.outer_radius)

    def outer_lobe_area(self) -> float:
        """Euclidean area of the part of the region outside the unit disk."""
        return _lens_complement_area(self.outer_center, self.outer_radius)

    def outer_lobe_area_spherical(self) -> float:
        """Closed-form Euclidean lobe area scaled by the spherical density at
        the lobe's radial midpoint (small-lobe approximation)."""
        d = abs(self.outer_center)
        height = max(d + self.outer_radius - 1.0, 0.0)
        dens = 1.0 / (1.0 + (1.0 + 0.5 * height) ** 2) ** 2
        return self.outer_lobe_area() * dens


def _lens_complement_area(center: complex, radius: float) -> float:
    """Area of disk(center, radius) minus its intersection with the unit disk."""
    d = abs(center)
    r = radius
    if d >= 1.0 + r:
        return math.pi * r * r
    if d + r <= 1.0:
        return 0.0
    if d <= abs(1.0 - r):  # one disk inside the other
        if r >= 1.0:
            return math.pi * (r * r - 1.0)
        return 0.0
    # standard circle-circle intersection
    a1 = math.acos((d * d + r * r - 1.0) / (2.0 * d * r))
    a2 = math.acos((d * d + 1.0 - r * r) / (2.0 * d))
    inter = (r * r * (a1 - math.sin(2 * a1) / 2.0)
             + (a2 - math.sin(2 * a2) / 2.0))
    return math.pi * r * r - inter


def hyperbolic_nbhd(arc_lo: float, arc_hi: float, angle: float) -> HyperbolicNbhd:
    """Construct the neighborhood of the arc [arc_lo, arc_hi] (turn units,
    counterclockwise) with exterior angle ``angle``.

    A circle through the arc endpoints has center s*mid on the bisector ray
    and radius rho(s) = sqrt(s^2 - 2 s c + 1) with c = cos(half-arc); it meets
    the unit circle at angle gamma with cos(gamma) = (1 - s c)/rho.  The outer
    boundary arc of the region meets the circle at interior angle pi - angle
    (the exterior angle is measured outside the region, beyond the arc), so
    the root with gamma = pi - angle and |s| + rho > 1 is selected; the inner
    boundary arc is its circle-inversion partner.  Shrinking ``angle``
    deepens the region.
    """
    if not (0 < angle < math.pi):
        raise ValueError("angle must lie in (0, pi)")
    width = (arc_hi - arc_lo) % 1.0
    if width == 0:
        raise ValueError("arc has zero width")
    half = math.pi * width            # half the arc in radians
    c = math.cos(half)
    gamma_t = math.pi - angle
    if c <= abs(math.cos(gamma_t)) + 1e-12:
        raise ValueError("arc too large for this exterior angle in the "
                         "small-arc normal form")
    mid = complex(np.exp(2j * math.pi * (arc_lo + 0.5 * width)))
    sin_g, cos_g = math.sin(gamma_t), math.cos(gamma_t)
    sin_h = math.sin(half)
    denom = c * c - cos_g * cos_g
    # carry delta = s - c, which stays O(sin half): rho = hypot(delta, sin half)
    # and cos(gamma) = (sin^2 half - c*delta)/rho are then cancellation-free
    if abs(cos_g) < 1e-14:
        deltas = [sin_h * sin_h / c]          # s = 1/c, delta = (1-c^2)/c
    else:
        deltas = [sin_h * (c * sin_h + sin_g * cos_g) / denom,
                  sin_h * (c * sin_h - sin_g * cos_g) / denom]
    best = None
    for delta in deltas:
        rho = math.hypot(delta, sin_h)
        if rho <= 0:
            continue
        cosg = (sin_h * sin_h - c * delta) / rho
        gamma = math.acos(max(-1.0, min(1.0, cosg)))
        if abs(gamma - gamma_t) < 1e-6 and (best is None
                                            or abs(gamma - gamma_t) < best[0]):
            best = (abs(gamma - gamma_t), c + delta, rho)
    if best is None:
        raise ValueError("no circle attains the requested angle")
    _, s, rho = best
    outer_center = mid * s
    denom_inv = s * s - rho * rho
    inner_center = mid * (s / denom_inv)
    inner_radius = rho / abs(denom_inv)
    return HyperbolicNbhd(arc_lo=arc_lo % 1.0, arc_hi=(arc_lo + width) % 1.0,
                          angle=angle, outer_center=outer_center,
                          outer_radius=rho, inner_center=inner_center,
                          inner_radius=inner_radius)


@dataclass
class ZEnclosureResult:
    level: int
    alpha: float
    beta: float
    regions: list[HyperbolicNbhd]
    area_sum_spherical: float     # sum of closed-form lobe areas (upper bound)
    area_union_pixel: float       # pixel-union spherical area (when resolved)
    under_resolved: bool


def z_set_enclosure(table: OrbitTable, n: int, alpha: float, beta: float,
                    resolution: int = 1024) -> ZEnclosureResult:
    """Schwarz-lemma enclosures of the constituents of Z_n.

    Builds H_alpha(I_{n+1}^i) for i <= q_n, H_alpha([x_i, x_{i-q_{n+1}}]) for
    i <= q_{n+1}, and H_beta([x_{q_n+i}, x_{i-q_{n+1}}]) for i <= q_{n+1}-1,
    and reports the spherical area of the union of their outer lobes.
    """
    if not (0 < beta < alpha < math.pi / 3):
        raise AngleOrder("need 0 < beta < alpha < pi/3")
    q = table.returns
    qn, qn1 = q[n], q[n + 1]
    if table.level < n + 1:
        raise ValueError("orbit table must reach level n+1 (index q_n + q_{n+1})")
    regions = []

    def arc(i, j):
        a, b = table.x(i), table.x(j)
        # the arc between two orbit points, oriented as the shorter one
        w = (b - a) % 1.0
        if w <= 0.5:
            return a, (a + w) % 1.0
        return b, (b + 1.0 - w) % 1.0

    for i in range(qn + 1):
        lo, hi = arc(i, i + qn1)
        regions.append(hyperbolic_nbhd(lo, hi, alpha))
    for i in range(qn1 + 1):
        lo, hi = arc(i, i - qn1)
        regions.append(hyperbolic_nbhd(lo, hi, alpha))
    for i in range(qn1):
        lo, hi = arc(qn + i, i - qn1)
        regions.append(hyperbolic_nbhd(lo, hi, beta))

    area_sum = sum(r.outer_lobe_area_spherical() for r in regions)

    # pixel union on a frame around the circle, per-region bounding boxes
    reach = max(abs(r.outer_center) + r.outer_radius for r in regions)
    reach = min(max(reach * 1.02, 1.01), 3.0)
    g = GridField.empty((-reach, reach, -reach, reach), resolution)
    z = g.centers()
    mask = np.zeros(z.shape, dtype=bool)
    px_w = 2.0 * reach / resolution
    for r in regions:
        cx, cy = r.outer_center.real, r.outer_center.imag
        i0 = max(0, int((cx - r.outer_radius + reach) / px_w) - 1)
        i1 = min(resolution, int((cx + r.outer_radius + reach) / px_w) + 2)
        j0 = max(0, int((cy - r.outer_radius + reach) / px_w) - 1)
        j1 = min(resolution, int((cy + r.outer_radius + reach) / px_w) + 2)
        sub = z[j0:j1, i0:i1]
        mask[j0:j1, i0:i1] |= r.outer_lobe_contains(sub)
    area_union = float(np.sum(g.weights()[mask]))
    min_lobe = min(r.outer_lobe_area() for r in regions)
    under = min_lobe < 25 * px_w ** 2
    return ZEnclosureResult(level=n, alpha=alpha, beta=beta, regions=regions,
                            area_sum_spherical=area_sum,
                            area_union_pixel=area_union, under_resolved=under)


# --- pullback area through the square map ------------------------------------------


def sqrt_area_pullback_check(E: GridField, atlas: SphereAtlas | None = None) -> float:
    """area(square-map preimage of E) / sqrt(area(E)) in spherical measure.

    E is an indicator field on chart 0; its truthy pixels define the set.
    Returns 0 for an empty set.
    """
    w = E.weights()
    mask = E.values.astype(bool)
    area_e = float(w[mask].sum())
    if area_e == 0.0:
        return 0.0
    atlas = atlas or SphereAtlas(resolution=1024)

    def indicator(z):
        return np.nan_to_num(E.lookup(z * z), nan=0.0) > 0.5

    area_pre = atlas.measure(indicator)
    return area_pre / math.sqrt(area_e)
