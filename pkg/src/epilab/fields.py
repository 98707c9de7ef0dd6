"""Sampled fields on the unit disk (polar) or on masked Cartesian grids.

Polar layout: values[i, k, c] lives at radius i/N_r, angle 2*pi*k/M, so the
last radial row is exactly the boundary trace.  Cartesian layout: values
[iy, ix, c] lives at origin + (ix*h, iy*h); an accompanying boolean mask
marks the nodes that belong to the computational domain.  Samples requested
outside a grid (or on inactive nodes) read as zero.

Field files (.fbf) are JSON documents: a small header describing the layout
plus the row-major float64 payload, base64-encoded.
"""

from __future__ import annotations

import base64
import json
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .arcs import TWO_PI, Trace
from .errors import GeometryError, ValidationError


@dataclass(frozen=True)
class PolarGrid:
    """Uniform grid on the closed unit disk: N_r+1 rings, M angles."""

    n_r: int
    n_theta: int

    def __post_init__(self):
        if self.n_r < 8 or self.n_theta < 64 or self.n_theta % 2 != 0:
            raise ValidationError("polar grid needs n_r >= 8 and even n_theta >= 64")

    @property
    def dr(self) -> float:
        return 1.0 / self.n_r

    @property
    def dtheta(self) -> float:
        return TWO_PI / self.n_theta

    def radii(self) -> np.ndarray:
        return np.arange(self.n_r + 1) / self.n_r

    def angles(self) -> np.ndarray:
        return np.arange(self.n_theta) * self.dtheta


@dataclass(frozen=True)
class CartesianGrid:
    """Uniform grid on a rectangle with an active-node mask."""

    origin: tuple[float, float]
    h: float
    mask: np.ndarray  # bool, shape (ny, nx)

    def __post_init__(self):
        if self.h <= 0:
            raise ValidationError("grid spacing must be positive")
        m = np.asarray(self.mask, dtype=bool)
        if m.ndim != 2:
            raise ValidationError("mask must be 2-D")
        object.__setattr__(self, "mask", m)

    @property
    def shape(self) -> tuple[int, int]:
        return self.mask.shape

    def node_xy(self) -> tuple[np.ndarray, np.ndarray]:
        ny, nx = self.shape
        x = self.origin[0] + np.arange(nx) * self.h
        y = self.origin[1] + np.arange(ny) * self.h
        return np.meshgrid(x, y)


@dataclass(frozen=True)
class DiskField:
    """A vector-valued field on one of the two grid layouts."""

    grid: Union[PolarGrid, CartesianGrid]
    values: np.ndarray  # (n_r+1, n_theta, n) or (ny, nx, n)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 2:
            v = v[:, :, None]
        if v.ndim != 3:
            raise ValidationError("field values must have shape (rows, cols[, n])")
        if isinstance(self.grid, PolarGrid):
            want = (self.grid.n_r + 1, self.grid.n_theta)
        else:
            want = self.grid.shape
        if v.shape[:2] != want:
            raise ValidationError(f"value shape {v.shape[:2]} does not match grid {want}")
        object.__setattr__(self, "values", v)

    @property
    def is_polar(self) -> bool:
        return isinstance(self.grid, PolarGrid)

    @property
    def n_components(self) -> int:
        return self.values.shape[2]

    def max_norm(self) -> float:
        return float(np.sqrt(np.sum(self.values**2, axis=2)).max())

    def boundary_trace(self) -> Trace:
        if not self.is_polar:
            raise GeometryError("boundary trace is defined for polar fields")
        return Trace(values=self.values[-1].copy())

    def norms(self) -> np.ndarray:
        return np.sqrt(np.sum(self.values**2, axis=2))


def polar_field_from_values(n_r: int, n_theta: int, values: np.ndarray) -> DiskField:
    return DiskField(grid=PolarGrid(n_r=n_r, n_theta=n_theta), values=values)


def sample_polar(field: DiskField, r: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Bilinear interpolation on the polar grid; shape (*r.shape, n)."""
    if not field.is_polar:
        raise GeometryError("sample_polar expects a polar field")
    g = field.grid
    r = np.clip(np.asarray(r, dtype=float), 0.0, 1.0)
    theta = np.mod(np.asarray(theta, dtype=float), TWO_PI)
    fi = np.minimum(r / g.dr, g.n_r - 1e-12)
    i0 = np.floor(fi).astype(int)
    wi = fi - i0
    fk = theta / g.dtheta
    k0 = np.floor(fk).astype(int) % g.n_theta
    wk = fk - np.floor(fk)
    k1 = (k0 + 1) % g.n_theta
    v = field.values
    out = ((1 - wi)[..., None] * ((1 - wk)[..., None] * v[i0, k0] + wk[..., None] * v[i0, k1])
           + wi[..., None] * ((1 - wk)[..., None] * v[i0 + 1, k0] + wk[..., None] * v[i0 + 1, k1]))
    return out


def sample_cartesian(field: DiskField, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Bilinear interpolation; points outside the grid read as zero."""
    if field.is_polar:
        raise GeometryError("sample_cartesian expects a cartesian field")
    g = field.grid
    ny, nx = g.shape
    fx = (np.asarray(x, dtype=float) - g.origin[0]) / g.h
    fy = (np.asarray(y, dtype=float) - g.origin[1]) / g.h
    out = np.zeros(fx.shape + (field.n_components,))
    ok = (fx >= 0) & (fx <= nx - 1) & (fy >= 0) & (fy <= ny - 1)
    fxo = np.clip(np.where(ok, fx, 0.0), 0, nx - 1 - 1e-12)
    fyo = np.clip(np.where(ok, fy, 0.0), 0, ny - 1 - 1e-12)
    ix = np.floor(fxo).astype(int)
    iy = np.floor(fyo).astype(int)
    wx = fxo - ix
    wy = fyo - iy
    v = field.values
    val = ((1 - wy)[..., None] * ((1 - wx)[..., None] * v[iy, ix] + wx[..., None] * v[iy, ix + 1])
           + wy[..., None] * ((1 - wx)[..., None] * v[iy + 1, ix] + wx[..., None] * v[iy + 1, ix + 1]))
    return np.where(ok[..., None], val, 0.0)


def _encode(arr: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(arr).tobytes()).decode("ascii")


def _decode(payload: str, dtype, shape) -> np.ndarray:
    raw = base64.b64decode(payload.encode("ascii"))
    return np.frombuffer(raw, dtype=dtype).reshape(shape).copy()


def save_field(field: DiskField, path: str, meta: Optional[dict] = None) -> None:
    """Write a field file: JSON header plus base64 float64 payload.

    ``meta`` is stored verbatim under a "meta" key (e.g. provenance);
    readers ignore it.
    """
    if field.is_polar:
        g = field.grid
        doc = {
            "format": "fbf-1",
            "layout": "polar",
            "n_r": g.n_r,
            "n_theta": g.n_theta,
            "n_components": field.n_components,
            "payload": _encode(field.values),
        }
    else:
        g = field.grid
        doc = {
            "format": "fbf-1",
            "layout": "cartesian",
            "origin": [g.origin[0], g.origin[1]],
            "h": g.h,
            "shape": list(g.shape),
            "n_components": field.n_components,
            "mask": _encode(g.mask.astype(np.uint8)),
            "payload": _encode(field.values),
        }
    if meta is not None:
        doc["meta"] = meta
    with open(path, "w") as f:
        json.dump(doc, f)
        f.write("\n")


def load_field(path: str) -> DiskField:
    with open(path) as f:
        doc = json.load(f)
    if doc.get("format") != "fbf-1":
        raise ValidationError(f"not a field file: {path}")
    n = int(doc["n_components"])
    if doc["layout"] == "polar":
        n_r, n_theta = int(doc["n_r"]), int(doc["n_theta"])
        values = _decode(doc["payload"], np.float64, (n_r + 1, n_theta, n))
        return DiskField(grid=PolarGrid(n_r=n_r, n_theta=n_theta), values=values)
    if doc["layout"] == "cartesian":
        ny, nx = (int(s) for s in doc["shape"])
        mask = _decode(doc["mask"], np.uint8, (ny, nx)).astype(bool)
        values = _decode(doc["payload"], np.float64, (ny, nx, n))
        grid = CartesianGrid(origin=(float(doc["origin"][0]), float(doc["origin"][1])),
                             h=float(doc["h"]), mask=mask)
        return DiskField(grid=grid, values=values)
    raise ValidationError(f"unknown layout {doc['layout']!r}")
