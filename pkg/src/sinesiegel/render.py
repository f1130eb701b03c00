"""Siegel disk renderer for the sine family e^{2 pi i theta} sin(z).

Pixels whose forward orbit stays bounded for the requested number of steps
are candidates; the Siegel disk is the connected component of the origin
inside the bounded set (flood fill).  The forward orbit of the critical point
pi/2 is overlaid and its distance to the component boundary is reported in
pixels, together with the distances of +/- pi/2 themselves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .arithmetic import RationalInput, cf_expand, parse_theta

ESCAPE_RADIUS = 50.0


class WindowTooSmall(ValueError):
    pass


@dataclass
class RenderResult:
    theta: float
    window: tuple[float, float, float, float]
    resolution: int
    iters: int
    bounded: np.ndarray = field(repr=False)        # orbit stays |z| < 50
    component: np.ndarray = field(repr=False)      # flood fill from the origin
    boundary: np.ndarray = field(repr=False)       # component edge pixels
    critical_orbit: np.ndarray = field(repr=False)
    boundary_hits: dict = field(default_factory=dict)  # distances in pixels
    orbit_hausdorff_px: float = float("nan")
    symmetry_defect_px: int = 0
    non_irrational_warning: bool = False

    @property
    def pixel_size(self) -> float:
        x0, x1, _, _ = self.window
        return (x1 - x0) / self.resolution

    def pixel_of(self, z: complex) -> tuple[int, int]:
        x0, x1, y0, y1 = self.window
        ix = int((z.real - x0) / (x1 - x0) * self.resolution)
        iy = int((z.imag - y0) / (y1 - y0) * self.resolution)
        return iy, ix

    def save_ppm(self, path):
        img = np.zeros((self.resolution, self.resolution, 3), dtype=np.uint8)
        img[self.bounded] = (60, 60, 90)
        img[self.component] = (30, 90, 200)
        img[self.boundary] = (240, 240, 255)
        ys, xs = self._orbit_pixels()
        img[ys, xs] = (255, 120, 40)
        with open(path, "wb") as fh:
            fh.write(b"P6\n%d %d\n255\n" % (self.resolution, self.resolution))
            fh.write(img[::-1].tobytes())

    def save_png(self, path):
        try:
            from PIL import Image
        except ImportError as exc:   # pragma: no cover
            raise RuntimeError("PNG output needs Pillow") from exc
        tmp = path + ".ppm"
        self.save_ppm(tmp)
        Image.open(tmp).save(path)

    def _orbit_pixels(self):
        x0, x1, y0, y1 = self.window
        z = self.critical_orbit
        inside = ((z.real >= x0) & (z.real < x1)
                  & (z.imag >= y0) & (z.imag < y1))
        z = z[inside]
        ix = ((z.real - x0) / (x1 - x0) * self.resolution).astype(int)
        iy = ((z.imag - y0) / (y1 - y0) * self.resolution).astype(int)
        return iy, ix


def render_siegel(theta, window=( -3.3, 3.3, -3.3, 3.3), resolution: int = 1024,
                  iters: int = 2000, orbit_points: int = 100_000) -> RenderResult:
    """Classify the Siegel disk of e^{2 pi i theta} sin z at pixel scale."""
    spec = parse_theta(theta)
    x0, x1, y0, y1 = window
    if not (x0 < -math.pi / 2 - 0.1 and x1 > math.pi / 2 + 0.1
            and y0 < -0.1 and y1 > 0.1):
        raise WindowTooSmall("window must contain both critical points +/- pi/2")
    warn = False
    try:
        cf_expand(spec.value, 12)
    except (RationalInput, ValueError):
        warn = True

    rot = np.exp(2j * np.pi * spec.value)

    def axis(a0, a1):
        # pixel centers built antisymmetric-exact when the window is centered,
        # so float ties cannot break the odd symmetry of the classification
        if abs(a0 + a1) < 1e-15 and resolution % 2 == 0:
            pos = (np.arange(resolution // 2) + 0.5) * (a1 - a0) / resolution
            return np.concatenate([-pos[::-1], pos])
        return a0 + (np.arange(resolution) + 0.5) * (a1 - a0) / resolution

    xs = axis(x0, x1)
    ys = axis(y0, y1)
    Z = xs[None, :] + 1j * ys[:, None]
    cur = Z.copy().ravel()
    alive = np.ones(cur.shape, dtype=bool)
    idx = np.arange(cur.size)
    vals = cur[idx]
    for _ in range(iters):
        if idx.size == 0:
            break
        with np.errstate(all="ignore"):
            vals = rot * np.sin(vals)
        dead = ~np.isfinite(vals) | (np.abs(vals) > ESCAPE_RADIUS)
        if dead.any():
            alive[idx[dead]] = False
            keep = ~dead
            idx = idx[keep]
            vals = vals[keep]
    bounded = alive.reshape(resolution, resolution)

    # The critical points are boundary pinch points of the origin component
    # (the neighboring Fatou components touch there); their pixels act as
    # fill barriers so the flood fill cannot leak straight through the
    # tangency.  Sub-pixel tangencies of preimage decorations elsewhere can
    # still attach bounded neighbors; the classified component is the
    # pixel-scale connected hull of the Siegel disk.
    barrier = np.zeros_like(bounded)
    for pt in (math.pi / 2, -math.pi / 2):
        iy = int((0 - y0) / (y1 - y0) * resolution)
        ix = int((pt - x0) / (x1 - x0) * resolution)
        barrier[iy - 1:iy + 2, ix - 1:ix + 2] = True

    def component_of_origin(mask):
        labels, _ = ndimage.label(mask & ~barrier)
        oy, ox = (int((0 - y0) / (y1 - y0) * resolution),
                  int((0 - x0) / (x1 - x0) * resolution))
        lab0 = labels[oy, ox]
        return labels == lab0 if lab0 > 0 else np.zeros_like(mask)

    def prune(mask, steps):
        """Keep pixels whose orbit stays inside (a 1px dilation of) the mask;
        slow escapers ride the Julia set out of it and are dropped."""
        ok_zone = ndimage.binary_dilation(mask | barrier, iterations=1).ravel()
        keep = mask.copy().ravel()
        pix = np.nonzero(keep)[0]
        vals2 = Z.ravel()[pix]
        for _ in range(steps):
            if pix.size == 0:
                break
            with np.errstate(all="ignore"):
                vals2 = rot * np.sin(vals2)
            ix = np.floor((vals2.real - x0) / (x1 - x0) * resolution).astype(np.int64)
            iy = np.floor((vals2.imag - y0) / (y1 - y0) * resolution).astype(np.int64)
            inside = (ix >= 0) & (ix < resolution) & (iy >= 0) & (iy < resolution)
            pos = np.clip(iy, 0, resolution - 1) * resolution + \
                np.clip(ix, 0, resolution - 1)
            out = ~(inside & ok_zone[pos])
            if out.any():
                keep[pix[out]] = False
                good = ~out
                pix = pix[good]
                vals2 = vals2[good]
        kept = keep.reshape(resolution, resolution)
        return kept & kept[::-1, ::-1]       # f is odd: symmetrize float ties

    component = component_of_origin(bounded)
    prune_steps = min(iters, 600)
    for _ in range(4):
        pruned = prune(component, prune_steps)
        new_component = component_of_origin(pruned)
        if np.array_equal(new_component, component):
            break
        component = new_component
    eroded = ndimage.binary_erosion(component)
    boundary = component & ~eroded

    # forward critical orbit
    orbit = np.empty(orbit_points, dtype=complex)
    z = complex(math.pi / 2)
    for k in range(orbit_points):
        z = rot * np.sin(z)
        orbit[k] = z

    result = RenderResult(theta=spec.value, window=window, resolution=resolution,
                          iters=iters, bounded=bounded, component=component,
                          boundary=boundary, critical_orbit=orbit,
                          non_irrational_warning=warn)

    # distances in pixels from the critical points to the component boundary
    px = result.pixel_size
    if boundary.any():
        dist_to_boundary = ndimage.distance_transform_edt(~boundary)
        for name, pt in (("pi/2", math.pi / 2), ("-pi/2", -math.pi / 2)):
            iy, ix = result.pixel_of(complex(pt))
            result.boundary_hits[name] = float(dist_to_boundary[iy, ix])
        inside = ((orbit.real >= x0) & (orbit.real < x1)
                  & (orbit.imag >= y0) & (orbit.imag < y1))
        zin = orbit[inside]
        ix = ((zin.real - x0) / (x1 - x0) * resolution).astype(int)
        iy = ((zin.imag - y0) / (y1 - y0) * resolution).astype(int)
        result.orbit_hausdorff_px = float(dist_to_boundary[iy, ix].max())
    else:
        result.boundary_hits = {"pi/2": float("inf"), "-pi/2": float("inf")}

    # odd symmetry: the bounded image should equal its rotation by pi;
    # any mismatch must hug the classification's own edges (<= 1 pixel)
    flipped = bounded[::-1, ::-1]
    mism = bounded ^ flipped
    if mism.any():
        edge = (bounded & ~ndimage.binary_erosion(bounded)) | \
               (~bounded & ndimage.binary_dilation(bounded))
        dist_edge = ndimage.distance_transform_edt(~edge)
        result.symmetry_defect_px = int(math.ceil(float(dist_edge[mism].max())))
    else:
        result.symmetry_defect_px = 0
    return result
