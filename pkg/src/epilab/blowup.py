"""Rescaling analysis at free-boundary points.

Around a point x0 the field is studied through its rescalings

    u_{x0,r}(x) = u(x0 + r x) / r,

sampled on the unit disk.  The module provides: Weiss-energy curves
r -> W(u, x0, r) together with the homogeneity deficit
int_{dB_1} |x . grad u_r - u_r|^2 (which vanishes exactly on 1-homogeneous
fields), power-law fits of the density gap W(r) - theta, extrapolation of
the density theta at r = 0, classification of the small-radius limit into
half-plane / two-plane / linear profiles, and extraction of the discrete
free boundary with per-point normal vectors and cone diagnostics.

Radii below RELIABLE_RADIUS_FACTOR grid spacings are considered to be inside
the interpolation noise floor and are never chosen automatically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .arcs import TWO_PI
from .errors import GeometryError, ValidationError
from .fields import (CartesianGrid, DiskField, PolarGrid, polar_field_from_values,
                     sample_cartesian, sample_polar)
from .weiss import (DOUBLE_PHASE, VECTORIAL, FunctionalSpec, WeissReport, weiss)

#: smallest trustworthy evaluation radius, in grid spacings
RELIABLE_RADIUS_FACTOR = 8.0
#: gap between the two radii used for the density extrapolation, in spacings
DENSITY_STEP_FACTOR = 2.0
#: a classification is accepted when its L2(dB_1) residual is below this
#: fraction of the trace norm
RESIDUAL_REL_THRESHOLD = 0.05
#: contour level for the free boundary, relative to max |u|
ZERO_LEVEL_REL = 1e-6
#: density gaps below this are treated as "already at the density"
DECAY_FLOOR = 1e-8
#: least number of usable curve points for a decay fit
MIN_DECAY_POINTS = 5
#: pairs of boundary points farther apart than this are not compared
PAIR_MAX_DIST = 0.3
#: radius of the cone test ball, in grid spacings
CONE_DELTA_FACTOR = 8.0
#: candidate cone apertures, tried from the widest cone to the narrowest
CONE_EPS_GRID = tuple(round(0.05 * k, 2) for k in range(1, 20))
#: linear profiles gate: densities above this count as the high-density case
HIGH_DENSITY_GATE = 0.75 * math.pi


# ---------------------------------------------------------------------------
# report types


@dataclass(frozen=True)
class CurvePoint:
    """One radius of a Weiss curve: the energy and the homogeneity deficit."""

    r: float
    w: float
    deficit: float
    report: Optional[WeissReport] = None


@dataclass(frozen=True)
class DecayFit:
    """Power-law fit of the density gap W(r) - theta ~ prefactor * r^gamma."""

    gamma: Optional[float]
    lower: Optional[float]
    upper: Optional[float]
    prefactor: Optional[float]
    already_at_density: bool
    n_points: int


@dataclass(frozen=True)
class HalfPlane:
    """slope * xi * max(0, e . x) with |xi| = 1."""

    xi: tuple
    e: tuple
    slope: float

    kind = "half_plane"


@dataclass(frozen=True)
class TwoPlane:
    """mu1 * max(0, e . x) + mu2 * min(0, e . x) with mu1, mu2 > 0."""

    mu1: float
    mu2: float
    e: tuple

    kind = "two_plane"


@dataclass(frozen=True)
class LinearVector:
    """Component-wise linear profile (amp_i * (e_i . x))_i.

    When two components carry genuinely different directions the zero set of
    the profile is a single point, so the sampled point is predicted to be
    isolated on the free boundary; ``isolated_hint`` records that.
    """

    amplitudes: tuple
    directions: tuple
    isolated_hint: bool

    kind = "linear_vector"


@dataclass(frozen=True)
class Undetermined:
    """No candidate profile fits below the residual threshold."""

    kind = "undetermined"


Classification = Union[HalfPlane, TwoPlane, LinearVector, Undetermined]


@dataclass(frozen=True)
class ClassifyResult:
    classification: Classification
    residual: float
    r: float
    trace_norm: float


@dataclass(frozen=True)
class BlowupReport:
    x0: tuple
    curve: list
    theta_hat: float
    decay: DecayFit
    classification: Classification
    residual: float

    def to_dict(self) -> dict:
        cls = self.classification
        doc = {
            "x0": [self.x0[0], self.x0[1]],
            "theta_hat": self.theta_hat,
            "classification": {"kind": cls.kind},
            "residual": self.residual,
            "decay": {
                "gamma": self.decay.gamma,
                "lower": self.decay.lower,
                "upper": self.decay.upper,
                "prefactor": self.decay.prefactor,
                "already_at_density": self.decay.already_at_density,
                "n_points": self.decay.n_points,
            },
            "curve": [{"r": p.r, "w": p.w, "deficit": p.deficit} for p in self.curve],
        }
        if isinstance(cls, HalfPlane):
            doc["classification"].update(xi=list(cls.xi), e=list(cls.e), slope=cls.slope)
        elif isinstance(cls, TwoPlane):
            doc["classification"].update(mu1=cls.mu1, mu2=cls.mu2, e=list(cls.e))
        elif isinstance(cls, LinearVector):
            doc["classification"].update(
                amplitudes=list(cls.amplitudes),
                directions=[list(e) for e in cls.directions],
                isolated_hint=cls.isolated_hint)
        return doc


@dataclass(frozen=True)
class FreeBoundaryPoint:
    x: tuple
    e: Optional[tuple]          # unit normal, pointing into the support
    tags: tuple                 # phase on the +e side, phase on the -e side
    cone_eps: Optional[float]   # smallest passing cone aperture, None = failed
    theta_hat: Optional[float]  # extrapolated density, None if unavailable


@dataclass(frozen=True)
class FreeBoundarySample:
    points: list
    pair_stats: list            # (|x - y|, |e(x) - e(y)|) for nearby pairs


# ---------------------------------------------------------------------------
# sampling helpers


def _grid_spacing(field: DiskField) -> float:
    if field.is_polar:
        return field.grid.dr
    return field.grid.h


def _require_ball_inside(field: DiskField, x0, r: float) -> None:
    if r <= 0:
        raise GeometryError("radius must be positive")
    if field.is_polar:
        if abs(x0[0]) > 1e-12 or abs(x0[1]) > 1e-12:
            raise GeometryError("polar fields are rescaled about the origin only")
        if r > 1.0 + 1e-12:
            raise GeometryError("ball B_r sticks out of the unit disk")
        return
    g = field.grid
    ny, nx = g.shape
    if (x0[0] - r < g.origin[0] - 1e-12 or x0[1] - r < g.origin[1] - 1e-12
            or x0[0] + r > g.origin[0] + (nx - 1) * g.h + 1e-12
            or x0[1] + r > g.origin[1] + (ny - 1) * g.h + 1e-12):
        raise GeometryError("ball B_r(x0) sticks out of the field's grid")


def _sample_points(field: DiskField, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample at absolute coordinates; works on both grid layouts."""
    if field.is_polar:
        rr = np.hypot(xs, ys)
        th = np.arctan2(ys, xs)
        return sample_polar(field, np.minimum(rr, 1.0), th)
    return sample_cartesian(field, xs, ys)


def rescaled_trace(field: DiskField, x0, r: float,
                   n_ring: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """Trace of u_{x0,r} on the unit circle: angles and (n_ring, n) values."""
    _require_ball_inside(field, x0, r)
    theta = np.arange(n_ring) * (TWO_PI / n_ring)
    vals = _sample_points(field, x0[0] + r * np.cos(theta), x0[1] + r * np.sin(theta))
    return theta, vals / r


def rescale(field: DiskField, x0, r: float, n_r: Optional[int] = None,
            n_theta: Optional[int] = None) -> DiskField:
    """Resample u_{x0,r}(x) = u(x0 + r x)/r onto a unit polar grid."""
    _require_ball_inside(field, x0, r)
    spacing = _grid_spacing(field)
    if n_r is None:
        n_r = int(min(512, max(16, math.ceil(2.0 * r / spacing))))
    if n_theta is None:
        if field.is_polar:
            n_theta = field.grid.n_theta
        else:
            n_theta = int(max(64, 2 * math.ceil(2.0 * math.pi * r / spacing)))
        n_theta += n_theta % 2
    rho = np.arange(n_r + 1) / n_r
    theta = np.arange(n_theta) * (TWO_PI / n_theta)
    xs = x0[0] + r * rho[:, None] * np.cos(theta)[None, :]
    ys = x0[1] + r * rho[:, None] * np.sin(theta)[None, :]
    return polar_field_from_values(n_r, n_theta, _sample_points(field, xs, ys) / r)


# ---------------------------------------------------------------------------
# Weiss curves and the homogeneity deficit


def homogeneity_deficit(field: DiskField, x0, r: float) -> float:
    """int_{dB_1} |x . grad u_r - u_r|^2, zero iff u is 1-homogeneous about x0.

    Evaluated on the physical circle of radius r: the integrand equals the
    radial derivative of u minus u/r, and the radial derivative is taken as a
    centered difference of the grid interpolant at half-spacing offsets.
    """
    spacing = _grid_spacing(field)
    delta = 0.5 * spacing
    _require_ball_inside(field, x0, r + delta)
    n_ring = int(max(256, math.ceil(TWO_PI * r / spacing)))
    theta = np.arange(n_ring) * (TWO_PI / n_ring)
    cx, cy = np.cos(theta), np.sin(theta)
    mid = _sample_points(field, x0[0] + r * cx, x0[1] + r * cy)
    outer = _sample_points(field, x0[0] + (r + delta) * cx, x0[1] + (r + delta) * cy)
    inner = _sample_points(field, x0[0] + (r - delta) * cx, x0[1] + (r - delta) * cy)
    radial = (outer - inner) / (2.0 * delta)
    integrand = np.sum((radial - mid / r) ** 2, axis=1)
    return float(np.sum(integrand) * (TWO_PI / n_ring))


def weiss_curve(field: DiskField, x0, radii, spec: FunctionalSpec) -> list:
    """Weiss energy and homogeneity deficit at each radius, ascending."""
    rs = sorted(float(r) for r in np.atleast_1d(np.asarray(radii, dtype=float)))
    if not rs:
        raise ValidationError("weiss_curve needs at least one radius")
    out = []
    for r in rs:
        rep = weiss(field, x0, r, spec)
        out.append(CurvePoint(r=r, w=rep.w, deficit=homogeneity_deficit(field, x0, r),
                              report=rep))
    return out


def fit_decay(curve, theta: float) -> DecayFit:
    """Least-squares power-law fit of the density gap along the curve.

    Fits log(W(r) - theta) = gamma log r + log prefactor over the curve
    points whose gap exceeds DECAY_FLOOR; the confidence band is +/- two
    standard errors of the fitted slope.  With fewer than MIN_DECAY_POINTS
    usable points the curve is flagged as already at its density.
    """
    rs = np.array([p.r for p in curve], dtype=float)
    gaps = np.array([p.w for p in curve], dtype=float) - float(theta)
    keep = gaps > DECAY_FLOOR
    n = int(np.count_nonzero(keep))
    if n < MIN_DECAY_POINTS:
        return DecayFit(gamma=None, lower=None, upper=None, prefactor=None,
                        already_at_density=True, n_points=n)
    lx = np.log(rs[keep])
    ly = np.log(gaps[keep])
    design = np.column_stack([lx, np.ones_like(lx)])
    coef, res, _, _ = np.linalg.lstsq(design, ly, rcond=None)
    gamma, intercept = float(coef[0]), float(coef[1])
    if n > 2:
        ss = float(res[0]) if res.size else float(np.sum((design @ coef - ly) ** 2))
        var = ss / (n - 2) / float(np.sum((lx - lx.mean()) ** 2))
        half = 2.0 * math.sqrt(max(var, 0.0))
    else:
        half = float("inf")
    return DecayFit(gamma=gamma, lower=gamma - half, upper=gamma + half,
                    prefactor=math.exp(intercept), already_at_density=False,
                    n_points=n)


def density_estimate(field: DiskField, x0, spec: FunctionalSpec) -> float:
    """Extrapolate W(u, x0, r) to r = 0 from the two smallest reliable radii.

    The curve is monotone nondecreasing for minimizers, so the linear
    extrapolation through the two smallest trustworthy radii is one-sided
    and conservative.
    """
    spacing = _grid_spacing(field)
    r1 = RELIABLE_RADIUS_FACTOR * spacing
    r2 = r1 + DENSITY_STEP_FACTOR * spacing
    _require_ball_inside(field, x0, r2)
    w1 = weiss(field, x0, r1, spec).w
    w2 = weiss(field, x0, r2, spec).w
    return w1 - (w2 - w1) / (r2 - r1) * r1


# ---------------------------------------------------------------------------
# classification of the small-radius profile


def _circular_mean_direction(theta: np.ndarray, weights: np.ndarray) -> float:
    mx = float(np.sum(weights * np.cos(theta)))
    my = float(np.sum(weights * np.sin(theta)))
    if mx * mx + my * my < 1e-300:
        return 0.0
    return math.atan2(my, mx)


def _refine_angle(phi0: float, residual_of) -> float:
    """Deterministic coarse-to-fine search for the best interface angle."""
    best_phi, best_res = phi0, residual_of(phi0)
    for offsets in (np.arange(-0.35, 0.3501, 0.05), np.arange(-0.045, 0.04501, 0.005)):
        for off in offsets:
            phi = best_phi + float(off)
            res = residual_of(phi)
            if res < best_res - 1e-15:
                best_phi, best_res = phi, res
    return best_phi


def _fit_half_plane(theta, trace, dtheta):
    """Best slope * xi * max(0, cos(theta - phi)) in L2(dB_1)."""
    norms = np.sqrt(np.sum(trace ** 2, axis=1))

    def fit_at(phi):
        basis = np.maximum(0.0, np.cos(theta - phi))
        bb = float(np.sum(basis * basis))
        if bb < 1e-300:
            return None, float("inf")
        coef = trace.T @ basis / bb
        resid2 = float(np.sum((trace - basis[:, None] * coef[None, :]) ** 2)) * dtheta
        return coef, math.sqrt(max(resid2, 0.0))

    phi = _refine_angle(_circular_mean_direction(theta, norms),
                        lambda p: fit_at(p)[1])
    coef, residual = fit_at(phi)
    slope = float(np.linalg.norm(coef)) if coef is not None else 0.0
    if coef is None or slope < 1e-300:
        return None, float("inf")
    cls = HalfPlane(xi=tuple(float(c) for c in coef / slope),
                    e=(math.cos(phi), math.sin(phi)), slope=slope)
    return cls, residual


def _fit_two_plane(theta, trace, dtheta):
    """Best mu1 * c_+ - mu2 * c_- with c = cos(theta - phi), scalar traces."""
    u = trace[:, 0]

    def fit_at(phi):
        c = np.cos(theta - phi)
        pos, neg = c > 0, c < 0
        cp2 = float(np.sum(c[pos] ** 2))
        cn2 = float(np.sum(c[neg] ** 2))
        if cp2 < 1e-300 or cn2 < 1e-300:
            return None, float("inf")
        mu1 = float(np.sum(u[pos] * c[pos])) / cp2
        mu2 = float(np.sum(u[neg] * c[neg])) / cn2
        model = np.where(pos, mu1 * c, mu2 * c)
        resid2 = float(np.sum((u - model) ** 2)) * dtheta
        return (mu1, mu2), math.sqrt(max(resid2, 0.0))

    phi = _refine_angle(_circular_mean_direction(theta, u),
                        lambda p: fit_at(p)[1])
    mus, residual = fit_at(phi)
    if mus is None or mus[0] <= 0 or mus[1] <= 0:
        return None, float("inf")
    cls = TwoPlane(mu1=mus[0], mu2=mus[1], e=(math.cos(phi), math.sin(phi)))
    return cls, residual


def _fit_linear_vector(theta, trace, dtheta):
    """Best component-wise linear profile via first Fourier coefficients."""
    cos_coef = trace.T @ np.cos(theta) * dtheta / math.pi
    sin_coef = trace.T @ np.sin(theta) * dtheta / math.pi
    model = np.cos(theta)[:, None] * cos_coef[None, :] \
        + np.sin(theta)[:, None] * sin_coef[None, :]
    resid2 = float(np.sum((trace - model) ** 2)) * dtheta
    amps, dirs = [], []
    for a, b in zip(cos_coef, sin_coef):
        amp = math.hypot(float(a), float(b))
        amps.append(amp)
        dirs.append((float(a) / amp, float(b) / amp) if amp > 1e-300 else (1.0, 0.0))
    scale = max(amps) if amps else 0.0
    isolated = False
    for i in range(len(dirs)):
        for j in range(i + 1, len(dirs)):
            if amps[i] > 1e-9 * scale and amps[j] > 1e-9 * scale:
                cross = dirs[i][0] * dirs[j][1] - dirs[i][1] * dirs[j][0]
                if abs(cross) > 1e-3:
                    isolated = True
    cls = LinearVector(amplitudes=tuple(amps), directions=tuple(dirs),
                       isolated_hint=isolated)
    return cls, math.sqrt(max(resid2, 0.0))


def classify_blowup(field: DiskField, x0, spec: FunctionalSpec,
                    r: Optional[float] = None) -> ClassifyResult:
    """Fit the rescaled trace at the smallest reliable radius to a profile.

    Candidates are tried in the order half-plane, two-plane (sign-changing
    functionals only), component-wise linear (vector functionals at high
    density only); the winner is the best fit whose L2(dB_1) residual is
    below RESIDUAL_REL_THRESHOLD times the trace norm, with ties resolved
    in candidate order.  If no candidate passes, the result is Undetermined
    with the smallest residual seen.
    """
    if field.n_components != spec.n_components:
        raise ValidationError(
            f"field has {field.n_components} components, spec wants {spec.n_components}")
    spacing = _grid_spacing(field)
    if r is None:
        r = RELIABLE_RADIUS_FACTOR * spacing
    theta, trace = rescaled_trace(field, x0, r, n_ring=max(
        256, int(math.ceil(TWO_PI * r / spacing))))
    dtheta = TWO_PI / theta.size
    trace_norm = math.sqrt(float(np.sum(trace ** 2)) * dtheta)

    candidates = [_fit_half_plane(theta, trace, dtheta)]
    if spec.kind == DOUBLE_PHASE:
        candidates.append(_fit_two_plane(theta, trace, dtheta))
    if spec.kind == VECTORIAL:
        try:
            theta_hat = density_estimate(field, x0, spec)
        except GeometryError:
            theta_hat = None
        if theta_hat is None or theta_hat > HIGH_DENSITY_GATE:
            candidates.append(_fit_linear_vector(theta, trace, dtheta))

    candidates = [(c, res) for c, res in candidates if c is not None]
    best_res = min((res for _, res in candidates), default=float("inf"))
    threshold = RESIDUAL_REL_THRESHOLD * trace_norm
    for cls, res in candidates:
        if res <= threshold and res <= best_res * (1.0 + 1e-9) + 1e-15:
            return ClassifyResult(classification=cls, residual=res, r=r,
                                  trace_norm=trace_norm)
    return ClassifyResult(classification=Undetermined(), residual=best_res, r=r,
                          trace_norm=trace_norm)


# ---------------------------------------------------------------------------
# assembled per-point report


def _distance_to_domain_boundary(field: DiskField, x0) -> float:
    if field.is_polar:
        return 1.0 - math.hypot(x0[0], x0[1])
    g = field.grid
    ny, nx = g.shape
    d = min(x0[0] - g.origin[0], x0[1] - g.origin[1],
            g.origin[0] + (nx - 1) * g.h - x0[0],
            g.origin[1] + (ny - 1) * g.h - x0[1])
    if not g.mask.all():
        xg, yg = g.node_xy()
        off = ~g.mask
        d_mask = math.sqrt(float(((xg[off] - x0[0]) ** 2 + (yg[off] - x0[1]) ** 2).min()))
        d = min(d, d_mask)
    return d


def blowup_report(field: DiskField, x0, spec: FunctionalSpec,
                  r_min: Optional[float] = None, r_max: Optional[float] = None,
                  n_radii: int = 16) -> BlowupReport:
    """Weiss curve, extrapolated density, decay fit, and profile class at x0."""
    spacing = _grid_spacing(field)
    if r_min is None:
        r_min = RELIABLE_RADIUS_FACTOR * spacing
    if r_max is None:
        r_max = 0.5 * _distance_to_domain_boundary(field, x0)
    if not (0 < r_min < r_max):
        raise GeometryError(
            f"no usable radius window at {tuple(x0)}: [{r_min:.4g}, {r_max:.4g}]")
    if n_radii < 2:
        raise ValidationError("need at least two radii")
    radii = np.geomspace(r_min, r_max, n_radii)
    curve = weiss_curve(field, x0, radii, spec)
    theta_hat = density_estimate(field, x0, spec)
    decay = fit_decay(curve, theta_hat)
    cls = classify_blowup(field, x0, spec)
    return BlowupReport(x0=(float(x0[0]), float(x0[1])), curve=curve,
                        theta_hat=theta_hat, decay=decay,
                        classification=cls.classification, residual=cls.residual)


# ---------------------------------------------------------------------------
# free-boundary extraction


def _contour_segments(level_fn: np.ndarray, valid: np.ndarray, xg: np.ndarray,
                      yg: np.ndarray) -> list:
    """Marching-squares segments of {level_fn = 0} over valid cells."""
    f00 = level_fn[:-1, :-1]
    f01 = level_fn[:-1, 1:]
    f10 = level_fn[1:, :-1]
    f11 = level_fn[1:, 1:]
    code = ((f00 > 0) * 1 + (f01 > 0) * 2 + (f11 > 0) * 4 + (f10 > 0) * 8)
    cells = np.argwhere(valid & (code > 0) & (code < 15))
    segs = []
    for iy, ix in cells:
        corners = {
            "a": (f00[iy, ix], xg[iy, ix], yg[iy, ix]),
            "b": (f01[iy, ix], xg[iy, ix + 1], yg[iy, ix + 1]),
            "c": (f11[iy, ix], xg[iy + 1, ix + 1], yg[iy + 1, ix + 1]),
            "d": (f10[iy, ix], xg[iy + 1, ix], yg[iy + 1, ix]),
        }
        crossings = {}
        for name, (p, q) in {"ab": ("a", "b"), "bc": ("b", "c"),
                             "cd": ("c", "d"), "da": ("d", "a")}.items():
            fp, xp, yp = corners[p]
            fq, xq, yq = corners[q]
            if (fp > 0) != (fq > 0):
                t = fp / (fp - fq)
                crossings[name] = (xp + t * (xq - xp), yp + t * (yq - yp))
        names = sorted(crossings)
        if len(names) == 2:
            segs.append((crossings[names[0]], crossings[names[1]]))
        elif len(names) == 4:
            # saddle cell: pair the crossings by the sign of the center mean
            center_pos = (corners["a"][0] + corners["b"][0]
                          + corners["c"][0] + corners["d"][0]) > 0
            a_pos = corners["a"][0] > 0
            if center_pos == a_pos:
                pairs = (("ab", "da"), ("bc", "cd"))
            else:
                pairs = (("ab", "bc"), ("cd", "da"))
            for p, q in pairs:
                segs.append((crossings[p], crossings[q]))
    return segs


def _phase_tag(field: DiskField, spec: FunctionalSpec, x: float, y: float,
               zero_tol: float) -> str:
    val = _sample_points(field, np.array([x]), np.array([y]))[0]
    if spec.kind == VECTORIAL:
        return "support" if float(np.linalg.norm(val)) > zero_tol else "zero"
    s = float(val[0])
    if s > zero_tol:
        return "positive"
    if s < -zero_tol:
        return "negative"
    return "zero"


def _cone_test(norms: np.ndarray, xg: np.ndarray, yg: np.ndarray,
               mask: np.ndarray, x0, e, delta: float, zero_tol: float,
               inner: float) -> Optional[float]:
    """Smallest aperture for which the support fills the forward cone and
    avoids the backward cone inside B_delta(x0); None when every one fails."""
    dx = xg - x0[0]
    dy = yg - x0[1]
    dist = np.hypot(dx, dy)
    window = mask & (dist <= delta) & (dist >= inner)
    if not window.any():
        return None
    proj = dx * e[0] + dy * e[1]
    for eps in CONE_EPS_GRID:
        fwd = window & (proj >= eps * dist)
        bwd = window & (proj <= -eps * dist)
        if not fwd.any() or not bwd.any():
            continue
        if (norms[fwd] > zero_tol).all() and (norms[bwd] <= zero_tol).all():
            return eps
    return None


def zero_contour(field: DiskField) -> list:
    """Zero-level contour of |u| as line segments in domain coordinates.

    Traced over cells whose four corners are all active, at the same
    relative level free-boundary extraction uses.
    """
    if field.is_polar:
        raise GeometryError("contour tracing works on cartesian fields")
    g = field.grid
    zero_tol = ZERO_LEVEL_REL * max(field.max_norm(), 1e-300)
    xg, yg = g.node_xy()
    valid = g.mask[:-1, :-1] & g.mask[:-1, 1:] & g.mask[1:, :-1] & g.mask[1:, 1:]
    return _contour_segments(field.norms() - zero_tol, valid, xg, yg)


def extract_free_boundary(field: DiskField, spec: FunctionalSpec,
                          max_points: int = 96) -> FreeBoundarySample:
    """Contour of |u| at the zero level, with normals and pair statistics.

    The contour is traced by marching squares over cells whose corners are
    all active; each sampled contour point gets a profile classification
    (whose interface direction provides the normal), phase tags a few
    spacings to both sides, a cone-aperture diagnostic, and an extrapolated
    density.  Points too close to the domain boundary to fit the smallest
    reliable ball are dropped.
    """
    if field.is_polar:
        raise GeometryError("free-boundary extraction works on cartesian fields")
    if field.n_components != spec.n_components:
        raise ValidationError(
            f"field has {field.n_components} components, spec wants {spec.n_components}")
    g = field.grid
    h = g.h
    zero_tol = ZERO_LEVEL_REL * max(field.max_norm(), 1e-300)
    norms = field.norms()
    xg, yg = g.node_xy()
    segs = zero_contour(field)
    if not segs:
        return FreeBoundarySample(points=[], pair_stats=[])

    mids = [((a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0) for a, b in segs]
    mids.sort()
    stride = max(1, math.ceil(len(mids) / max_points))
    reliable = (RELIABLE_RADIUS_FACTOR + DENSITY_STEP_FACTOR) * h
    points = []
    for x, y in mids[::stride]:
        if _distance_to_domain_boundary(field, (x, y)) < reliable:
            continue
        try:
            res = classify_blowup(field, (x, y), spec)
        except GeometryError:
            continue
        cls = res.classification
        if isinstance(cls, (HalfPlane, TwoPlane)):
            e = cls.e
        elif isinstance(cls, LinearVector) and not cls.isolated_hint:
            e = cls.directions[int(np.argmax(cls.amplitudes))]
        else:
            e = None
        if e is not None:
            tags = (_phase_tag(field, spec, x + 3 * h * e[0], y + 3 * h * e[1], zero_tol),
                    _phase_tag(field, spec, x - 3 * h * e[0], y - 3 * h * e[1], zero_tol))
            cone_eps = _cone_test(norms, xg, yg, g.mask, (x, y), e,
                                  CONE_DELTA_FACTOR * h, zero_tol, 1.5 * h)
        else:
            tags = ()
            cone_eps = None
        try:
            theta_hat = density_estimate(field, (x, y), spec)
        except GeometryError:
            theta_hat = None
        points.append(FreeBoundaryPoint(x=(x, y), e=e, tags=tags,
                                        cone_eps=cone_eps, theta_hat=theta_hat))

    pair_stats = []
    with_e = [p for p in points if p.e is not None]
    for i in range(len(with_e)):
        for j in range(i + 1, len(with_e)):
            p, q = with_e[i], with_e[j]
            d = math.hypot(p.x[0] - q.x[0], p.x[1] - q.x[1])
            if 0 < d <= PAIR_MAX_DIST:
                gap = math.hypot(p.e[0] - q.e[0], p.e[1] - q.e[1])
                pair_stats.append((d, gap))
    return FreeBoundarySample(points=points, pair_stats=pair_stats)
