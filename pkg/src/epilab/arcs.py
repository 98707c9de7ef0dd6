"""Arcs on the unit circle, Dirichlet eigenbases, and spectral traces.

Boundary data for the energies in this package live on unions of open arcs
of the unit circle.  On a single arc of length L the Dirichlet eigenpairs of
the circular Laplacian are

    lambda_j = (j*pi/L)**2,    phi_j(t) = sqrt(2/L) * sin(j*pi*t/L),

and the homogeneity exponent attached to an eigenvalue in dimension d is the
nonnegative root of alpha*(alpha + d - 2) = lambda.  On the full circle the
basis is the periodic one {1, cos(j t), sin(j t)} (normalized), with
lambda = j**2 and alpha = j.

Quadrature convention: integrals against a sampled trace use the composite
trapezoid rule on the trace's own uniform angular grid; integrals of basis
functions alone use the trapezoid rule on a uniform grid of the arc itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConsistencyError, GeometryError, SupportMismatchError, ValidationError

TWO_PI = 2.0 * math.pi

#: angles closer than this are considered equal when comparing arc geometry
ANGLE_TOL = 1e-12

#: relative factor for deciding that a sample of a trace is "zero"
DEFAULT_ZERO_TOL = 1e-10


def _normalize_angle(theta: float) -> float:
    t = math.fmod(float(theta), TWO_PI)
    return t + TWO_PI if t < 0.0 else t


@dataclass(frozen=True)
class ArcSet:
    """Disjoint open arcs on the unit circle, sorted by start angle.

    Each arc is a pair ``(start, length)`` with ``start`` in [0, 2*pi) and
    ``0 < length <= 2*pi``.  Arcs may touch at endpoints but not overlap,
    and the total length never exceeds the full circle.
    """

    arcs: tuple[tuple[float, float], ...]

    def __post_init__(self):
        cleaned = []
        for start, length in self.arcs:
            if not (length > 0.0):
                raise GeometryError(f"arc length must be positive, got {length}")
            if length > TWO_PI + ANGLE_TOL:
                raise GeometryError(f"arc length {length} exceeds the full circle")
            cleaned.append((_normalize_angle(start), min(float(length), TWO_PI)))
        cleaned.sort()
        for (s0, l0), (s1, _l1) in zip(cleaned, cleaned[1:]):
            if s0 + l0 > s1 + ANGLE_TOL:
                raise GeometryError("arcs overlap")
        if len(cleaned) > 1:
            s0, l0 = cleaned[-1]
            s1, _ = cleaned[0]
            if s0 + l0 > s1 + TWO_PI + ANGLE_TOL:
                raise GeometryError("arcs overlap across the seam")
        if sum(l for _, l in cleaned) > TWO_PI + 1e-9:
            raise GeometryError("total arc length exceeds the full circle")
        object.__setattr__(self, "arcs", tuple(cleaned))

    @property
    def total_length(self) -> float:
        return sum(l for _, l in self.arcs)

    @property
    def n_components(self) -> int:
        return len(self.arcs)

    def is_full_circle(self, tol: float = 1e-9) -> bool:
        return self.n_components == 1 and self.arcs[0][1] >= TWO_PI - tol

    def contains(self, theta) -> np.ndarray:
        """Boolean mask: which angles fall inside one of the arcs."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        mask = np.zeros(theta.shape, dtype=bool)
        for start, length in self.arcs:
            rel = np.mod(theta - start, TWO_PI)
            mask |= rel <= length + ANGLE_TOL
        return mask

    def longest(self) -> tuple[float, float]:
        if not self.arcs:
            raise GeometryError("empty arc set has no longest component")
        return max(self.arcs, key=lambda a: a[1])


def empty_arcset() -> ArcSet:
    return ArcSet(arcs=())


@dataclass(frozen=True)
class Trace:
    """Vector-valued boundary datum sampled on a uniform angular grid.

    ``values`` has shape (M, n): sample k lives at angle 2*pi*k/M.  M must
    be even and at least 64 so that support detection and quadrature are
    meaningful.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2:
            raise ValidationError("trace values must have shape (M,) or (M, n)")
        if v.shape[0] < 64 or v.shape[0] % 2 != 0:
            raise ValidationError("trace needs an even number of samples, at least 64")
        if not np.all(np.isfinite(v)):
            raise ValidationError("trace contains non-finite samples")
        object.__setattr__(self, "values", v)

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_components(self) -> int:
        return self.values.shape[1]

    @property
    def angles(self) -> np.ndarray:
        return np.arange(self.n_samples) * (TWO_PI / self.n_samples)

    def norms(self) -> np.ndarray:
        """Euclidean norm across components, per sample."""
        return np.sqrt(np.sum(self.values**2, axis=1))

    def max_norm(self) -> float:
        n = self.norms()
        return float(n.max()) if n.size else 0.0

    @staticmethod
    def from_function(fn: Callable[[np.ndarray], np.ndarray], n_samples: int = 2048) -> "Trace":
        theta = np.arange(n_samples) * (TWO_PI / n_samples)
        vals = np.asarray(fn(theta), dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        elif vals.shape[0] != n_samples:
            vals = vals.T
        return Trace(values=vals)

    def positive_part(self) -> "Trace":
        if self.n_components != 1:
            raise ValidationError("positive part is defined for scalar traces only")
        return Trace(values=np.maximum(self.values, 0.0))

    def negative_part(self) -> "Trace":
        """Pointwise max(-c, 0); the trace splits as c = c+ - c-."""
        if self.n_components != 1:
            raise ValidationError("negative part is defined for scalar traces only")
        return Trace(values=np.maximum(-self.values, 0.0))


def decompose_support(trace: Trace, zero_tol: Optional[float] = None) -> ArcSet:
    """Detect the support of a trace as a union of open arcs.

    A sample counts as positive when its component norm exceeds
    ``zero_tol`` (default 1e-10 times the largest norm).  Maximal runs of
    positive samples, merged across the 0/2*pi seam, become arcs widened by
    one grid spacing at each end, so an exactly grid-aligned support such as
    max(0, sin) on (0, pi) is recovered without bias.
    """
    if zero_tol is None:
        zero_tol = DEFAULT_ZERO_TOL * trace.max_norm()
    mask = trace.norms() > zero_tol
    m = trace.n_samples
    dtheta = TWO_PI / m
    if not mask.any():
        return empty_arcset()
    if mask.all():
        return ArcSet(arcs=((0.0, TWO_PI),))

    # walk runs on the circular index space, starting just after a gap
    start_idx = int(np.argmin(mask))  # an index with mask == False
    runs = []
    k = 0
    while k < m:
        idx = (start_idx + k) % m
        if mask[idx]:
            j = k
            while j + 1 < m and mask[(start_idx + j + 1) % m]:
                j += 1
            runs.append(((start_idx + k) % m, j - k + 1))
            k = j + 1
        else:
            k += 1
    arcs = []
    for first, count in runs:
        start = (first - 1) * dtheta
        length = (count + 1) * dtheta
        arcs.append((_normalize_angle(start), min(length, TWO_PI)))
    return ArcSet(arcs=tuple(arcs))


@dataclass(frozen=True)
class Mode:
    """One eigenmode: eigenvalue, homogeneity exponent, and shape label."""

    lam: float
    alpha: float
    kind: str  # "arc", "const", "cos", "sin"
    j: int


def homogeneity_exponent(lam: float, d: int) -> float:
    """Nonnegative root of alpha*(alpha + d - 2) = lambda."""
    if lam < 0:
        raise ValidationError("eigenvalue must be nonnegative")
    b = d - 2
    return 0.5 * (-b + math.sqrt(b * b + 4.0 * lam))


@dataclass(frozen=True)
class EigenBasis:
    """Orthonormal eigenbasis on an arc (or on the full circle)."""

    start: float
    length: float
    d: int
    modes: tuple[Mode, ...]

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @property
    def full_circle(self) -> bool:
        return self.length >= TWO_PI - 1e-9

    def lambdas(self) -> np.ndarray:
        return np.array([m.lam for m in self.modes])

    def alphas(self) -> np.ndarray:
        return np.array([m.alpha for m in self.modes])

    def evaluate(self, theta) -> np.ndarray:
        """Basis values at given angles; shape (n_modes, len(theta)).

        Arc modes vanish identically outside their arc.
        """
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        out = np.zeros((self.n_modes, theta.size))
        if self.full_circle:
            for i, m in enumerate(self.modes):
                if m.kind == "const":
                    out[i] = 1.0 / math.sqrt(TWO_PI)
                elif m.kind == "cos":
                    out[i] = np.cos(m.j * theta) / math.sqrt(math.pi)
                else:
                    out[i] = np.sin(m.j * theta) / math.sqrt(math.pi)
            return out
        rel = np.mod(theta - self.start, TWO_PI)
        inside = rel <= self.length + ANGLE_TOL
        t = rel[inside]
        amp = math.sqrt(2.0 / self.length)
        for i, m in enumerate(self.modes):
            out[i, inside] = amp * np.sin(m.j * math.pi * t / self.length)
        return out

    def evaluate_deriv(self, theta) -> np.ndarray:
        """Angular derivatives of the basis functions."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        out = np.zeros((self.n_modes, theta.size))
        if self.full_circle:
            for i, m in enumerate(self.modes):
                if m.kind == "const":
                    out[i] = 0.0
                elif m.kind == "cos":
                    out[i] = -m.j * np.sin(m.j * theta) / math.sqrt(math.pi)
                else:
                    out[i] = m.j * np.cos(m.j * theta) / math.sqrt(math.pi)
            return out
        rel = np.mod(theta - self.start, TWO_PI)
        inside = rel <= self.length + ANGLE_TOL
        t = rel[inside]
        amp = math.sqrt(2.0 / self.length)
        for i, m in enumerate(self.modes):
            k = m.j * math.pi / self.length
            out[i, inside] = amp * k * np.cos(k * t)
        return out

    def quadrature(self, n_nodes: int = 2048) -> tuple[np.ndarray, np.ndarray]:
        """Trapezoid nodes/weights on the arc's own uniform grid."""
        if self.full_circle:
            nodes = np.arange(n_nodes) * (TWO_PI / n_nodes)
            weights = np.full(n_nodes, TWO_PI / n_nodes)
            return nodes, weights
        nodes = self.start + np.linspace(0.0, self.length, n_nodes + 1)
        weights = np.full(n_nodes + 1, self.length / n_nodes)
        weights[0] *= 0.5
        weights[-1] *= 0.5
        return nodes, weights


def eigenpairs(arc: tuple[float, float], d: int = 2, n_modes: int = 32) -> EigenBasis:
    """Build the first ``n_modes`` eigenmodes on an arc.

    An arc of the full circle length (within 1e-9) gets the periodic basis
    ordered constant, cos 1, sin 1, cos 2, sin 2, ...
    """
    start, length = float(arc[0]), float(arc[1])
    if not (0.0 < length <= TWO_PI + ANGLE_TOL):
        raise GeometryError(f"arc length {length} outside (0, 2*pi]")
    if d < 2:
        raise ValidationError("dimension must be at least 2")
    if n_modes < 1:
        raise ValidationError("need at least one mode")
    if length >= TWO_PI - 1e-9:
        modes = [Mode(lam=0.0, alpha=0.0, kind="const", j=0)]
        j = 1
        while len(modes) < n_modes:
            lam = float(j * j)
            alpha = homogeneity_exponent(lam, d)
            modes.append(Mode(lam=lam, alpha=alpha, kind="cos", j=j))
            if len(modes) < n_modes:
                modes.append(Mode(lam=lam, alpha=alpha, kind="sin", j=j))
            j += 1
        return EigenBasis(start=0.0, length=TWO_PI, d=d, modes=tuple(modes))
    modes = []
    for j in range(1, n_modes + 1):
        lam = (j * math.pi / length) ** 2
        modes.append(Mode(lam=lam, alpha=homogeneity_exponent(lam, d), kind="arc", j=j))
    return EigenBasis(start=_normalize_angle(start), length=length, d=d, modes=tuple(modes))


@dataclass(frozen=True)
class SpectralTrace:
    """A trace expressed in an eigenbasis: coefficient block plus tail.

    ``coeffs`` has shape (n_modes, n_components); ``tail`` is the part of
    the squared L2 norm not captured by the retained modes (it is only as
    accurate as the trace quadrature, so tiny negative values can occur).
    """

    basis: EigenBasis
    coeffs: np.ndarray
    tail: float
    norm_sq: float

    @property
    def n_components(self) -> int:
        return self.coeffs.shape[1]

    def mode_norms_sq(self) -> np.ndarray:
        """|c_j|^2 summed over components, one entry per mode."""
        return np.sum(self.coeffs**2, axis=1)

    def reconstruct(self, theta) -> np.ndarray:
        """Sum of retained modes at given angles; shape (len(theta), n)."""
        phi = self.basis.evaluate(theta)
        return phi.T @ self.coeffs

    def restrict_to_modes(self, indices: Sequence[int]) -> "SpectralTrace":
        idx = list(indices)
        sub_modes = tuple(self.basis.modes[i] for i in idx)
        sub_basis = EigenBasis(start=self.basis.start, length=self.basis.length,
                               d=self.basis.d, modes=sub_modes)
        dropped = [i for i in range(self.basis.n_modes) if i not in idx]
        extra = float(np.sum(self.mode_norms_sq()[dropped])) if dropped else 0.0
        return SpectralTrace(basis=sub_basis, coeffs=self.coeffs[idx].copy(),
                             tail=self.tail + extra, norm_sq=self.norm_sq)


def fourier_coefficients(trace: Trace, basis: EigenBasis,
                         zero_tol: Optional[float] = None) -> SpectralTrace:
    """Project a trace on an eigenbasis via trapezoid quadrature.

    The trace must be supported inside the basis arc: samples outside with
    norm above ``zero_tol`` raise SupportMismatchError.  Coefficients use
    the composite trapezoid rule on the trace's own grid (the basis
    functions vanish at arc endpoints, so interior samples carry full
    weight).
    """
    if zero_tol is None:
        zero_tol = DEFAULT_ZERO_TOL * trace.max_norm()
    theta = trace.angles
    dtheta = TWO_PI / trace.n_samples
    if not basis.full_circle:
        rel = np.mod(theta - basis.start, TWO_PI)
        outside = rel > basis.length + ANGLE_TOL
        if np.any(trace.norms()[outside] > zero_tol):
            worst = float(trace.norms()[outside].max())
            raise SupportMismatchError(
                f"trace has mass {worst:.3e} outside the basis arc")
    phi = basis.evaluate(theta)                      # (J, M)
    coeffs = (phi @ trace.values) * dtheta           # (J, n)
    if basis.full_circle:
        norm_sq = float(np.sum(trace.values**2) * dtheta)
    else:
        rel = np.mod(theta - basis.start, TWO_PI)
        inside = rel <= basis.length + ANGLE_TOL
        norm_sq = float(np.sum(trace.values[inside] ** 2) * dtheta)
    tail = norm_sq - float(np.sum(coeffs**2))
    return SpectralTrace(basis=basis, coeffs=coeffs, tail=tail, norm_sq=norm_sq)


def split_big_small(support: ArcSet, delta0: float = 0.3) -> tuple[Optional[tuple[float, float]], ArcSet]:
    """Split support components into one 'big' arc and the 'small' rest.

    Components of length at most pi - delta0/4 go to the small set.  At
    most one component can remain when the total length is at most
    2*pi - delta0 (two such components would already exceed that total);
    finding two anyway means the geometry bookkeeping is broken.  Supports
    longer than 2*pi - delta0 belong to the very-large-cone regime and are
    rejected here.
    """
    if delta0 <= 0 or delta0 >= math.pi:
        raise ValidationError("delta0 must lie in (0, pi)")
    threshold = math.pi - delta0 / 4.0
    small = [a for a in support.arcs if a[1] <= threshold + ANGLE_TOL]
    big = [a for a in support.arcs if a[1] > threshold + ANGLE_TOL]
    if len(big) >= 2:
        if support.total_length <= TWO_PI - delta0 + ANGLE_TOL:
            raise ConsistencyError(
                "two components exceed pi - delta0/4 yet the total fits in "
                "2*pi - delta0; that cannot happen for disjoint arcs")
        raise GeometryError(
            "support is in the very-large regime; splitting does not apply")
    return (big[0] if big else None), ArcSet(arcs=tuple(small))
