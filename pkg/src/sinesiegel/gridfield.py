"""Scalar fields sampled on planar grids with spherical-area weights, plus the
two-chart atlas of the Riemann sphere used for global area measurements.

The spherical metric is |dz|/(1+|z|^2); the area element per pixel is the
pixel's Euclidean area divided by (1+|z|^2)^2 at its center, identical in the
inverted chart w = 1/z because the metric is inversion-invariant.  The total
spherical area of the sphere is pi.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"SSGF"


@dataclass
class GridField:
    """Scalar field on a square pixel grid over a complex rectangle.

    chart 0 samples the z-plane directly; chart 1 samples w = 1/z, so a pixel
    at w represents the point z = 1/w (w = 0 is the point at infinity).
    """

    box: tuple[float, float, float, float]      # xmin, xmax, ymin, ymax
    resolution: int
    values: np.ndarray
    chart: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != (self.resolution, self.resolution):
            raise ValueError("values must be resolution x resolution")

    @classmethod
    def empty(cls, box, resolution, chart=0, dtype=float):
        return cls(box=tuple(box), resolution=resolution, chart=chart,
                   values=np.zeros((resolution, resolution), dtype=dtype))

    @property
    def pixel_area(self) -> float:
        xmin, xmax, ymin, ymax = self.box
        return ((xmax - xmin) / self.resolution) * ((ymax - ymin) / self.resolution)

    def centers(self) -> np.ndarray:
        """Chart coordinates of pixel centers, shape (res, res)."""
        xmin, xmax, ymin, ymax = self.box
        xs = xmin + (np.arange(self.resolution) + 0.5) * (xmax - xmin) / self.resolution
        ys = ymin + (np.arange(self.resolution) + 0.5) * (ymax - ymin) / self.resolution
        return xs[None, :] + 1j * ys[:, None]

    def points(self) -> np.ndarray:
        """Points of the sphere represented by the pixels (z coordinates;
        infinity appears as inf for the w = 0 pixel of chart 1)."""
        c = self.centers()
        if self.chart == 0:
            return c
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(c == 0, np.inf + 0j, 1.0 / c)

    def weights(self) -> np.ndarray:
        """Spherical area element per pixel."""
        c = self.centers()
        return self.pixel_area / (1.0 + np.abs(c) ** 2) ** 2

    def area_where(self, mask: np.ndarray) -> float:
        return float(np.sum(self.weights()[mask]))

    def lookup(self, z: np.ndarray):
        """Values at chart coordinates z (nearest pixel); NaN outside."""
        xmin, xmax, ymin, ymax = self.box
        z = np.asarray(z, dtype=complex)
        ix = np.floor((z.real - xmin) / (xmax - xmin) * self.resolution).astype(np.int64)
        iy = np.floor((z.imag - ymin) / (ymax - ymin) * self.resolution).astype(np.int64)
        inside = (ix >= 0) & (ix < self.resolution) & (iy >= 0) & (iy < self.resolution)
        out = np.full(z.shape, np.nan)
        vals = self.values[iy[inside], ix[inside]]
        out[inside] = vals
        return out

    # -- serialization: flat binary, little-endian ---------------------------

    def save(self, path):
        header = struct.pack("<4sBI4d", MAGIC, self.chart, self.resolution,
                             *self.box)
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(self.values.astype("<f8").tobytes())

    @classmethod
    def load(cls, path) -> "GridField":
        with open(path, "rb") as fh:
            head = fh.read(struct.calcsize("<4sBI4d"))
            magic, chart, res, x0, x1, y0, y1 = struct.unpack("<4sBI4d", head)
            if magic != MAGIC:
                raise ValueError("not a grid field file")
            data = np.frombuffer(fh.read(), dtype="<f8").reshape(res, res)
        return cls(box=(x0, x1, y0, y1), resolution=res, chart=chart,
                   values=data.copy())

    def to_ppm(self, path, lo=None, hi=None):
        """Grayscale P6 heatmap of the values."""
        v = np.asarray(self.values, dtype=float)
        finite = np.isfinite(v)
        lo = float(np.min(v[finite])) if lo is None else lo
        hi = float(np.max(v[finite])) if hi is None else hi
        span = hi - lo if hi > lo else 1.0
        byte = np.clip((v - lo) / span * 255.0, 0, 255).astype(np.uint8)
        byte[~finite] = 0
        rgb = np.repeat(byte[::-1, :, None], 3, axis=2)  # y up
        with open(path, "wb") as fh:
            fh.write(b"P6\n%d %d\n255\n" % (self.resolution, self.resolution))
            fh.write(rgb.tobytes())


@dataclass
class SphereAtlas:
    """Two-chart cover of the sphere: plane disk |z| <= 1 and inverted disk.

    Pixels are assigned to the chart where their center satisfies |c| <= 1,
    so every sphere point is counted exactly once and the weight totals
    approach pi (the spherical area of the sphere).
    """

    resolution: int = 1024
    charts: tuple[GridField, GridField] = field(init=False)

    def __post_init__(self):
        box = (-1.0, 1.0, -1.0, 1.0)
        self.charts = (GridField.empty(box, self.resolution, chart=0),
                       GridField.empty(box, self.resolution, chart=1))

    def total_area(self) -> float:
        total = 0.0
        for g in self.charts:
            c = g.centers()
            total += g.area_where(np.abs(c) <= 1.0)
        return total

    def measure(self, indicator, include_infinity: bool = False) -> float:
        """Spherical area of {z : indicator(z)} over the whole sphere.

        ``indicator`` receives finite z-plane points; the w = 0 pixel (the
        point at infinity) is counted per ``include_infinity``.
        """
        total = 0.0
        for g in self.charts:
            c = g.centers()
            own = np.abs(c) <= 1.0
            z = g.points()
            at_inf = np.isinf(z.real) | np.isinf(z.imag)
            sel = own & ~at_inf
            mask = np.zeros_like(own)
            mask[sel] = indicator(z[sel])
            if include_infinity:
                mask |= own & at_inf
            total += g.area_where(mask)
        return total
