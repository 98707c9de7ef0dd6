"""Boundary-adjusted (Weiss) energies, numerically and in closed form.

For a field u on B_r(x0) in the plane the base quantity is

    W0(u, r, x0) = r^-2 * int_{B_r} |grad u|^2  -  r^-3 * int_{dB_r} |u|^2,

to which each functional adds its scaled positivity measure:

    one-phase:     + lam1 * r^-2 * |{u > 0}|
    double-phase:  + r^-2 * (lam1 * |{u > 0}| + lam2 * |{u < 0}|)
    vectorial:     + lam1 * r^-2 * |{|u| > 0}|

W is invariant under the one-homogeneous rescaling u(x0 + r x)/r, and for
traces c = sum_j c_j phi_j in an arc eigenbasis both the one-homogeneous
extension z = r c(theta) and the harmonic-power extension
h = sum_j r^alpha_j c_j phi_j have closed-form energies:

    W0(z) = sum |c_j|^2 ((1 + lambda_j)/d - 1)
    W0(h) = sum |c_j|^2 (alpha_j - 1)

The closed forms and the grid quadrature are kept as independent routes and
cross-checked in the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .arcs import TWO_PI, SpectralTrace
from .errors import GeometryError, ValidationError
from .fields import CartesianGrid, DiskField, PolarGrid, sample_cartesian

ONE_PHASE = "one_phase"
DOUBLE_PHASE = "double_phase"
VECTORIAL = "vectorial"

#: default relative threshold deciding that a sampled value is "zero"
MEASURE_ZERO_TOL = 1e-8


@dataclass(frozen=True)
class FunctionalSpec:
    """Which energy is being used: kind, measure weights, component count.

    ``weight`` is an optional spatially varying factor q(x, y) multiplying
    the measure term (a positive float or a vectorized callable); the
    default is the unweighted functional.
    """

    kind: str
    n_components: int = 1
    lam1: float = 1.0
    lam2: float = 0.0
    weight: Optional[Union[float, Callable]] = None

    def __post_init__(self):
        if self.kind not in (ONE_PHASE, DOUBLE_PHASE, VECTORIAL):
            raise ValidationError(f"unknown functional kind {self.kind!r}")
        if self.lam1 <= 0:
            raise ValidationError("lam1 must be positive")
        if self.kind == DOUBLE_PHASE:
            if self.n_components != 1:
                raise ValidationError("double-phase fields are scalar")
            if self.lam2 <= 0:
                raise ValidationError("double-phase needs lam2 > 0")
            if abs(self.lam1 - self.lam2) < 1e-15:
                raise ValidationError("double-phase needs lam1 != lam2")
        if self.kind == ONE_PHASE and self.n_components != 1:
            raise ValidationError("one-phase fields are scalar")
        if self.n_components < 1:
            raise ValidationError("need at least one component")
        if isinstance(self.weight, (int, float)) and self.weight <= 0:
            raise ValidationError("weight must be positive")

    def admissible_densities(self) -> tuple[float, ...]:
        """Possible Weiss densities at free-boundary points (d = 2)."""
        half = math.pi / 2.0
        if self.kind == ONE_PHASE:
            return (self.lam1 * half,)
        if self.kind == DOUBLE_PHASE:
            return (self.lam1 * half, self.lam2 * half, (self.lam1 + self.lam2) * half)
        return (self.lam1 * half, self.lam1 * math.pi)


def one_phase(lam1: float = 1.0, weight=None) -> FunctionalSpec:
    return FunctionalSpec(kind=ONE_PHASE, n_components=1, lam1=lam1, weight=weight)


def double_phase(lam1: float, lam2: float, weight=None) -> FunctionalSpec:
    return FunctionalSpec(kind=DOUBLE_PHASE, n_components=1, lam1=lam1, lam2=lam2,
                          weight=weight)


def vectorial(n_components: int = 2, lam1: float = 1.0, weight=None) -> FunctionalSpec:
    return FunctionalSpec(kind=VECTORIAL, n_components=n_components, lam1=lam1,
                          weight=weight)


@dataclass(frozen=True)
class WeissReport:
    """One Weiss-energy evaluation, with its pieces kept separate."""

    x0: tuple[float, float]
    r: float
    r_used: float
    dirichlet: float       # r^-2 int |grad u|^2
    boundary: float        # r^-3 int_{dB_r} |u|^2
    w0: float
    measure_pos: float     # r^-2 |{u > 0}|        (or |{|u| > 0}| for vectorial)
    measure_neg: float     # r^-2 |{u < 0}|        (0 unless double-phase)
    measure_term: float    # lambda-weighted (and q-weighted) measure
    w: float
    zero_tol: float

    def to_dict(self) -> dict:
        return {
            "x0": [self.x0[0], self.x0[1]],
            "r": self.r,
            "r_used": self.r_used,
            "dirichlet": self.dirichlet,
            "boundary": self.boundary,
            "w0": self.w0,
            "measure_pos": self.measure_pos,
            "measure_neg": self.measure_neg,
            "measure_term": self.measure_term,
            "w": self.w,
            "zero_tol": self.zero_tol,
        }


# ---------------------------------------------------------------------------
# closed forms on spectral traces


def spectral_dirichlet_homogeneous(st: SpectralTrace) -> float:
    """int_B1 |grad z|^2 for z = r c(theta):  (1/d) sum |c_j|^2 (1 + lambda_j)."""
    d = st.basis.d
    return float(np.sum(st.mode_norms_sq() * (1.0 + st.basis.lambdas())) / d)

def spectral_dirichlet_harmonic(st: SpectralTrace) -> float:
    """int_B1 |grad h|^2 for h = sum r^alpha_j c_j phi_j:  sum |c_j|^2 alpha_j."""
    return float(np.sum(st.mode_norms_sq() * st.basis.alphas()))


def spectral_w0_homogeneous(st: SpectralTrace) -> float:
    d = st.basis.d
    return float(np.sum(st.mode_norms_sq() * ((1.0 + st.basis.lambdas()) / d - 1.0)))


def spectral_w0_harmonic(st: SpectralTrace) -> float:
    return float(np.sum(st.mode_norms_sq() * (st.basis.alphas() - 1.0)))


def epi_epsilon_bound(alpha_k: float, d: int = 2) -> float:
    """Largest guaranteed contraction factor from the spectral gap.

    When the lowest retained mode has exponent alpha_k > 1, every
    eps <= (alpha_k - 1)/(d + alpha_k - 1) gives W0(h) <= (1 - eps) W0(z).
    """
    if alpha_k <= 1.0:
        raise ValidationError("the spectral bound needs alpha_k > 1")
    return (alpha_k - 1.0) / (d + alpha_k - 1.0)


def spectral_gap_identity(st: SpectralTrace, eps: float) -> float:
    """Exact value of W0(h) - (1 - eps) W0(z), mode by mode.

    Algebraically equal to
        -((1-eps)/d) sum |c_j|^2 (alpha_j - 1)(alpha_j - 1 + d - d/(1-eps)),
    written in a form that stays finite at eps = 1.
    """
    d = st.basis.d
    m = st.mode_norms_sq()
    a = st.basis.alphas() - 1.0
    return float(-((1.0 - eps) / d) * np.sum(m * a * (a + d)) + np.sum(m * a))


def cone_measure(arc_length: float) -> float:
    """Area of the cone over an arc inside the unit disk (d = 2)."""
    return 0.5 * arc_length


# ---------------------------------------------------------------------------
# numerical evaluation


def _phase_areas_polar(field: DiskField, n_bands: int, zero_tol: float,
                       kind: str, weight) -> tuple[float, float]:
    g = field.grid
    v = field.values
    v00 = v[:n_bands, :, :]
    v10 = v[1:n_bands + 1, :, :]
    v01 = np.roll(v00, -1, axis=1)
    v11 = np.roll(v10, -1, axis=1)
    center = 0.25 * (v00 + v10 + v01 + v11)
    r_mid = (np.arange(n_bands) + 0.5) * g.dr
    cell_area = r_mid[:, None] * g.dr * g.dtheta
    if weight is not None:
        if callable(weight):
            th_mid = (np.arange(g.n_theta) + 0.5) * g.dtheta
            xs = r_mid[:, None] * np.cos(th_mid)[None, :]
            ys = r_mid[:, None] * np.sin(th_mid)[None, :]
            cell_area = cell_area * np.asarray(weight(xs, ys), dtype=float)
        else:
            cell_area = cell_area * float(weight)
    if kind == VECTORIAL:
        norm = np.sqrt(np.sum(center**2, axis=2))
        pos = float(np.sum(cell_area * (norm > zero_tol)))
        return pos, 0.0
    s = center[:, :, 0]
    pos = float(np.sum(cell_area * (s > zero_tol)))
    neg = float(np.sum(cell_area * (s < -zero_tol))) if kind == DOUBLE_PHASE else 0.0
    return pos, neg


def _weiss_polar(field: DiskField, r: float, spec: FunctionalSpec,
                 zero_tol: Optional[float]) -> WeissReport:
    g = field.grid
    n_ring = int(round(r * g.n_r))
    if n_ring < 1:
        raise GeometryError(f"radius {r} is below the grid resolution")
    if n_ring > g.n_r:
        raise GeometryError(f"radius {r} exceeds the unit disk")
    r_used = n_ring * g.dr
    if zero_tol is None:
        zero_tol = MEASURE_ZERO_TOL * max(field.max_norm(), 1e-300)

    v = field.values
    v00 = v[:n_ring, :, :]
    v10 = v[1:n_ring + 1, :, :]
    v01 = np.roll(v00, -1, axis=1)
    v11 = np.roll(v10, -1, axis=1)
    du_r = ((v10 + v11) - (v00 + v01)) / (2.0 * g.dr)
    du_t = ((v01 + v11) - (v00 + v10)) / (2.0 * g.dtheta)
    r_mid = (np.arange(n_ring) + 0.5) * g.dr
    integrand = np.sum(du_r**2, axis=2) + np.sum(du_t**2, axis=2) / (r_mid**2)[:, None]
    dirichlet_raw = float(np.sum(integrand * r_mid[:, None]) * g.dr * g.dtheta)

    ring = v[n_ring]
    boundary_raw = float(np.sum(ring**2) * g.dtheta) * r_used  # int |u|^2 dH^1

    pos, neg = _phase_areas_polar(field, n_ring, zero_tol, spec.kind, spec.weight)
    pos_unweighted, neg_unweighted = (pos, neg)
    if spec.weight is not None:
        pos_unweighted, neg_unweighted = _phase_areas_polar(
            field, n_ring, zero_tol, spec.kind, None)

    inv2 = 1.0 / (r_used * r_used)
    dirichlet = dirichlet_raw * inv2
    boundary = boundary_raw / r_used**3
    w0 = dirichlet - boundary
    measure_term = (spec.lam1 * pos + spec.lam2 * neg) * inv2
    return WeissReport(x0=(0.0, 0.0), r=r, r_used=r_used, dirichlet=dirichlet,
                       boundary=boundary, w0=w0,
                       measure_pos=pos_unweighted * inv2,
                       measure_neg=neg_unweighted * inv2,
                       measure_term=measure_term, w=w0 + measure_term,
                       zero_tol=zero_tol)


def _ball_coverage(cx: np.ndarray, cy: np.ndarray, x0: tuple[float, float],
                   r: float, h: float) -> np.ndarray:
    """Fraction of each h-by-h square (centered at cx, cy) inside B_r(x0).

    Squares clearly inside or outside get 0 or 1.  Near the rim the circle
    is treated as its tangent line and the exact square/half-plane overlap
    is used, which varies smoothly with r; a hard in/out test would make
    area quadratures jump by whole cells as r varies, which matters when
    two nearby radii are differenced (density extrapolation, curve slopes).
    The neglected curvature contributes O((h/r)^2) per rim cell.
    """
    dist = np.hypot(cx - x0[0], cy - x0[1])
    half_diag = 0.5 * math.sqrt(2.0) * h
    cover = (dist <= r - half_diag).astype(float)
    rim = np.abs(dist - r) < half_diag
    if rim.any():
        d = dist[rim]
        # rim normal components in cell units, sorted so that a >= b
        nx = np.abs(cx[rim] - x0[0]) / d
        ny = np.abs(cy[rim] - x0[1]) / d
        a = np.maximum(nx, ny)
        b = np.minimum(nx, ny)
        t = (r - d) / h                 # signed line offset from the center
        hi = 0.5 * (a + b)
        lo = 0.5 * (a - b)
        with np.errstate(divide="ignore", invalid="ignore"):
            corner_hi = 1.0 - (hi - t) ** 2 / (2.0 * a * b)
            corner_lo = (hi + t) ** 2 / (2.0 * a * b)
        area = np.select(
            [t <= -hi, t >= hi, np.abs(t) <= lo, t > 0.0],
            [0.0, 1.0, 0.5 + t / a, corner_hi],
            default=corner_lo)
        cover[rim] = area
    return cover


def _weiss_cartesian(field: DiskField, x0: tuple[float, float], r: float,
                     spec: FunctionalSpec, zero_tol: Optional[float]) -> WeissReport:
    g = field.grid
    h = g.h
    if r < 4 * h:
        raise GeometryError(f"radius {r} is below 4 grid spacings")
    if zero_tol is None:
        zero_tol = MEASURE_ZERO_TOL * max(field.max_norm(), 1e-300)
    ny, nx = g.shape
    xg, yg = g.node_xy()

    # the whole ball must be inside the grid rectangle
    if (x0[0] - r < g.origin[0] - 1e-12 or x0[1] - r < g.origin[1] - 1e-12
            or x0[0] + r > g.origin[0] + (nx - 1) * h + 1e-12
            or x0[1] + r > g.origin[1] + (ny - 1) * h + 1e-12):
        raise GeometryError("ball B_r(x0) sticks out of the field's grid")

    v = field.values
    # gradient energy from edge differences, each edge weighted by the ball
    # coverage of the h-by-h cell centered at its midpoint; this is exact for
    # piecewise-linear fields whose kinks lie on grid lines, where centered
    # node differences would smear the gradient across the kink
    gx2 = np.sum(((v[:, 1:] - v[:, :-1]) / h) ** 2, axis=2)
    gy2 = np.sum(((v[1:, :] - v[:-1, :]) / h) ** 2, axis=2)
    cov_x = _ball_coverage(0.5 * (xg[:, 1:] + xg[:, :-1]), yg[:, 1:], x0, r, h)
    cov_y = _ball_coverage(xg[1:, :], 0.5 * (yg[1:, :] + yg[:-1, :]), x0, r, h)
    dirichlet_raw = float((np.sum(gx2 * cov_x) + np.sum(gy2 * cov_y)) * h * h)

    n_ring = max(64, int(math.ceil(TWO_PI * r / h)))
    phi = np.arange(n_ring) * (TWO_PI / n_ring)
    ring_vals = sample_cartesian(field, x0[0] + r * np.cos(phi), x0[1] + r * np.sin(phi))
    boundary_raw = float(np.sum(ring_vals**2) * (TWO_PI * r / n_ring))

    # positivity measured at cell centers, cells weighted by ball coverage
    centers = 0.25 * (v[:-1, :-1] + v[1:, :-1] + v[:-1, 1:] + v[1:, 1:])
    cxg = 0.5 * (xg[:-1, :-1] + xg[1:, 1:])
    cyg = 0.5 * (yg[:-1, :-1] + yg[1:, 1:])
    cell_in = _ball_coverage(cxg, cyg, x0, r, h)
    area = (h * h) * cell_in
    if spec.weight is not None:
        area = area * (np.asarray(spec.weight(cxg, cyg), dtype=float)
                       if callable(spec.weight) else float(spec.weight))
    if spec.kind == VECTORIAL:
        norm = np.sqrt(np.sum(centers**2, axis=2))
        pos_w = float(np.sum(area * (norm > zero_tol)))
        neg_w = 0.0
        pos_u = float(np.sum((h * h) * cell_in * (norm > zero_tol)))
        neg_u = 0.0
    else:
        s = centers[:, :, 0]
        pos_mask = s > zero_tol
        pos_w = float(np.sum(area * pos_mask))
        pos_u = float(np.sum((h * h) * cell_in * pos_mask))
        if spec.kind == DOUBLE_PHASE:
            neg_mask = s < -zero_tol
            neg_w = float(np.sum(area * neg_mask))
            neg_u = float(np.sum((h * h) * cell_in * neg_mask))
        else:
            neg_w = neg_u = 0.0

    inv2 = 1.0 / (r * r)
    dirichlet = dirichlet_raw * inv2
    boundary = boundary_raw / r**3
    w0 = dirichlet - boundary
    measure_term = (spec.lam1 * pos_w + spec.lam2 * neg_w) * inv2
    return WeissReport(x0=(float(x0[0]), float(x0[1])), r=r, r_used=r,
                       dirichlet=dirichlet, boundary=boundary, w0=w0,
                       measure_pos=pos_u * inv2, measure_neg=neg_u * inv2,
                       measure_term=measure_term, w=w0 + measure_term,
                       zero_tol=zero_tol)


def weiss(field: DiskField, x0: tuple[float, float], r: float, spec: FunctionalSpec,
          zero_tol: Optional[float] = None) -> WeissReport:
    """Evaluate the Weiss energy of a sampled field on B_r(x0).

    Polar fields are centered at the origin by construction, so x0 must be
    (0, 0) and r is rounded to the nearest grid ring.  Cartesian fields
    accept any center whose ball stays inside the grid.
    """
    if field.n_components != spec.n_components:
        raise ValidationError(
            f"field has {field.n_components} components, spec wants {spec.n_components}")
    if r <= 0:
        raise GeometryError("radius must be positive")
    if field.is_polar:
        if abs(x0[0]) > 1e-12 or abs(x0[1]) > 1e-12:
            raise GeometryError("polar fields are evaluated at the origin only")
        return _weiss_polar(field, r, spec, zero_tol)
    return _weiss_cartesian(field, x0, r, spec, zero_tol)
