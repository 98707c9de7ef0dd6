"""Competitor fields for the epiperimetric inequalities.

Given a boundary trace c on a union of arcs, the baseline object is the
one-homogeneous extension z(r, theta) = r * c(theta).  The inequality
machinery replaces z inside the disk with a cheaper field h that keeps the
same boundary values.  The building blocks:

* harmonic power extension  h = sum_j r^alpha_j c_j phi_j  on each arc,
* a logarithmic radial cutoff psi_rho (0 on [0, rho/2], harmonic in the
  plane on (rho/2, rho), 1 on [rho, 1]) to trim the support near the origin,
* an internal variation of the lowest mode on a long arc: the arc opening
  is widened/narrowed at radius r by eps * xi_rho(r), where xi_rho is a
  compactly supported bump rescaled into (0, rho), and the mode is
  reparametrized accordingly; this trades boundary-adjusted energy against
  support measure at the rate  |support(z_eps)| = |support(z)| + eps*rho^3/2.

``assemble_competitor`` dispatches on the functional and the support
geometry (one very large arc / one big arc plus small arcs / two big arcs
for double-phase or high-density vectorial data) and returns both fields
plus per-piece bookkeeping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .arcs import (TWO_PI, ArcSet, EigenBasis, SpectralTrace, Trace,
                   decompose_support, eigenpairs, fourier_coefficients,
                   split_big_small)
from .errors import GeometryError, NumericalError, ValidationError
from .fields import DiskField, PolarGrid
from .weiss import (DOUBLE_PHASE, ONE_PHASE, VECTORIAL, FunctionalSpec, weiss)

# --------------------------------------------------------------------------
# profiles

#: sup of the internal-variation bump xi(r) = 30 r^2 (1-r)^2, normalized so
#: that int_0^1 r xi(r) dr = 1/2 (the support-measure bookkeeping relies on it)
XI_LINF = 30.0 / 16.0

#: int_0^1 (r xi^2 + r^3 xi'^2) dr for the same bump (5/7 + 30/7)
XI_ENERGY_INT = 5.0

#: largest rho keeping |xi_rho| = rho * xi(r/rho) bounded by 1
RHO_MAX = 1.0 / XI_LINF


@dataclass(frozen=True)
class XiProfile:
    """The bump xi_rho(r) = rho * xi(r/rho), supported in (0, rho)."""

    rho: float

    def __post_init__(self):
        if not (0.0 < self.rho <= RHO_MAX + 1e-12):
            raise ValidationError(f"rho must lie in (0, {RHO_MAX:.4f}]")

    def val(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        s = r / self.rho
        inside = (s > 0.0) & (s < 1.0)
        out = np.zeros_like(r)
        ss = s[inside]
        out[inside] = self.rho * 30.0 * ss**2 * (1.0 - ss) ** 2
        return out

    def deriv(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        s = r / self.rho
        inside = (s > 0.0) & (s < 1.0)
        out = np.zeros_like(r)
        ss = s[inside]
        out[inside] = 60.0 * ss * (1.0 - ss) * (1.0 - 2.0 * ss)
        return out

    @property
    def max_abs(self) -> float:
        return self.rho * XI_LINF

    @property
    def r_weighted_integral(self) -> float:
        """int_0^1 r xi_rho(r) dr = rho^3 / 2."""
        return 0.5 * self.rho**3


def xi_profile(rho: float) -> XiProfile:
    return XiProfile(rho=rho)


def rho_conservative(delta0: float = 0.3, double_phase: bool = False) -> float:
    """Worst-case admissible variation scale from the analytic constant chain.

    1 / (a*|xi|_inf + 4*pi*(1+(pi+delta0)^2)/(pi-delta0) * E_xi) with a = 4
    for the double-phase variant (two variations sharing one gap) and a = 1
    otherwise.  It is far smaller than anything a grid can resolve; it is
    exposed for the rate-witness checks, which integrate the variation with
    dedicated 1-D quadrature instead of a grid.
    """
    k = math.pi * (1.0 + (math.pi + delta0) ** 2) / (math.pi - delta0)
    a = 4.0 if double_phase else 1.0
    return 1.0 / (a * XI_LINF + 4.0 * k * XI_ENERGY_INT)


@dataclass(frozen=True)
class CutoffProfile:
    """Radial cutoff: 0, then log(2r/rho)/log 2, then 1."""

    rho: float

    def __post_init__(self):
        if not (0.0 < self.rho < 1.0):
            raise ValidationError("cutoff scale must lie in (0, 1)")

    def val(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        out = np.ones_like(r)
        out[r <= 0.5 * self.rho] = 0.0
        mid = (r > 0.5 * self.rho) & (r < self.rho)
        out[mid] = np.log(2.0 * r[mid] / self.rho) / math.log(2.0)
        return out


def cutoff_psi(rho: float) -> CutoffProfile:
    return CutoffProfile(rho=rho)


# --------------------------------------------------------------------------
# extensions


def homogeneous_extension(trace: Trace, n_r: int = 256) -> DiskField:
    """z(r, theta) = r * c(theta); the boundary row reproduces the trace."""
    m = trace.n_samples
    r = np.arange(n_r + 1) / n_r
    values = r[:, None, None] * trace.values[None, :, :]
    return DiskField(grid=PolarGrid(n_r=n_r, n_theta=m), values=values)


def _power_extension_values(st: SpectralTrace, n_r: int, m: int,
                            exponents: np.ndarray) -> np.ndarray:
    """sum_j r^(e_j) c_j phi_j(theta) on the grid."""
    theta = np.arange(m) * (TWO_PI / m)
    phi = st.basis.evaluate(theta)          # (J, m)
    r = np.arange(n_r + 1) / n_r
    vals = np.zeros((n_r + 1, m, st.n_components))
    for j in range(st.basis.n_modes):
        e = exponents[j]
        radial = np.ones_like(r) if e == 0.0 else r**e
        vals += radial[:, None, None] * phi[j][None, :, None] * st.coeffs[j][None, None, :]
    return vals


def harmonic_cone_extension(st: SpectralTrace, n_r: int = 256,
                            n_theta: Optional[int] = None) -> DiskField:
    """h = sum_j r^alpha_j c_j phi_j; boundary row is the retained-mode sum."""
    m = n_theta if n_theta is not None else 2048
    vals = _power_extension_values(st, n_r, m, st.basis.alphas())
    return DiskField(grid=PolarGrid(n_r=n_r, n_theta=m), values=vals)


def truncated_competitor(st: SpectralTrace, rho: float, n_r: int = 256,
                         n_theta: Optional[int] = None) -> DiskField:
    """psi_rho * harmonic extension: support vanishes on B_{rho/2}."""
    h = harmonic_cone_extension(st, n_r=n_r, n_theta=n_theta)
    psi = cutoff_psi(rho).val(h.grid.radii())
    return DiskField(grid=h.grid, values=psi[:, None, None] * h.values)


# --------------------------------------------------------------------------
# internal variation of the lowest mode on a long arc


def internal_variation_values(first_mode: SpectralTrace, eps: float, xi: XiProfile,
                              n_r: int, m: int, edge: str = "end") -> np.ndarray:
    """Grid samples of z_eps for a single-mode trace on an arc.

    At radius r the arc opening becomes A(r) = L + eps*xi_rho(r); the mode
    is evaluated at the pulled-back angle L*t/A(r), where t is the angular
    offset from the fixed endpoint (``edge`` says which endpoint moves).
    """
    basis = first_mode.basis
    if basis.full_circle or basis.n_modes != 1:
        raise ValidationError("internal variation needs a single arc mode")
    L = basis.length
    c1 = first_mode.coeffs[0]               # (n,)
    amp = math.sqrt(2.0 / L)
    r = np.arange(n_r + 1) / n_r
    a = L + eps * xi.val(r)
    if np.any(a <= 0.0):
        raise GeometryError("variation collapses the arc")
    theta = np.arange(m) * (TWO_PI / m)
    rel = np.mod(theta - basis.start, TWO_PI)
    if edge == "start":
        rel = np.mod(basis.start + L - theta, TWO_PI)
    elif edge != "end":
        raise ValidationError("edge must be 'start' or 'end'")
    inside = rel[None, :] <= a[:, None]     # (n_r+1, m)
    phi = np.where(inside, L * rel[None, :] / a[:, None], 0.0)
    shape = amp * np.sin(math.pi * phi / L) * inside
    return r[:, None, None] * shape[:, :, None] * c1[None, None, :]


def internal_variation(first_mode: SpectralTrace, eps: float, xi: XiProfile,
                       n_r: int = 256, n_theta: int = 2048,
                       edge: str = "end") -> DiskField:
    vals = internal_variation_values(first_mode, eps, xi, n_r, n_theta, edge)
    return DiskField(grid=PolarGrid(n_r=n_r, n_theta=n_theta), values=vals)


def internal_variation_measure(arc_length: float, eps: float, xi: XiProfile) -> float:
    """Exact support area of z_eps: |cone| + eps * rho^3 / 2."""
    return 0.5 * arc_length + eps * xi.r_weighted_integral


def internal_variation_energy(arc_length: float, c1_norm_sq: float, eps: float,
                              xi: XiProfile, n_quad: int = 400) -> tuple[float, float]:
    """W0 and support measure of z_eps for a pure first mode, by 1-D quadrature.

    The angular integrals reduce exactly (substituting the pulled-back
    angle) to radial integrals of smooth profiles, so the sub-grid scale of
    xi_rho costs nothing: with A(r) = L + eps*xi_rho(r),

      int |d_r z|^2 dtheta   = (A/L) [ |c|^2 (1 + r eps xi'/A) + r^2 eps^2 xi'^2 K2 / A^2 ]
      int |d_t z|^2/r^2 dtheta = (L/A) |c'|^2,

    with |c'|^2 = |c|^2 (pi/L)^2 and K2 = |c|^2 (pi^2/3 + 1/2).
    """
    L = arc_length
    csq = c1_norm_sq
    cpsq = csq * (math.pi / L) ** 2
    k2 = csq * (math.pi**2 / 3.0 + 0.5)

    # exact on (rho, 1) where xi vanishes
    outer = (csq + cpsq) * 0.5 * (1.0 - xi.rho**2)

    nodes, wts = np.polynomial.legendre.leggauss(n_quad)
    r = 0.5 * xi.rho * (nodes + 1.0)
    w = 0.5 * xi.rho * wts
    a = L + eps * xi.val(r)
    if np.any(a <= 0.0):
        raise GeometryError("variation collapses the arc")
    xp = eps * xi.deriv(r)
    rad = (a / L) * (csq * (1.0 + r * xp / a) + (r**2) * (xp**2) * k2 / a**2)
    ang = (L / a) * cpsq
    inner = float(np.sum(w * (rad + ang) * r))

    w0 = outer + inner - csq
    return w0, internal_variation_measure(L, eps, xi)


# --------------------------------------------------------------------------
# assembled competitors


@dataclass(frozen=True)
class PieceReport:
    """Bookkeeping for one support component of the assembled competitor."""

    arc: tuple[float, float]
    role: str                 # "small" | "big" | "full" | "spliced"
    phase: str                # "pos" | "neg" | "vector"
    rho: float
    eps_internal: float
    n_modes: int
    tail: float


@dataclass(frozen=True)
class CompetitorBundle:
    z: DiskField
    h: DiskField
    branch: str
    pieces: tuple[PieceReport, ...]
    support: ArcSet
    spec: FunctionalSpec
    theta_target: float


@dataclass(frozen=True)
class AssemblyParams:
    """Tunable geometry/resolution knobs for assemble_competitor."""

    delta0: float = 0.3
    eta0: float = 0.1
    rho1: float = 0.2
    n_modes: int = 32
    n_r: int = 256
    rho_ladder: tuple[float, ...] = (0.2, 0.1, 0.05)
    zero_tol: Optional[float] = None


def _grid_aligned(arc: tuple[float, float], m: int) -> tuple[float, float]:
    """Snap an arc to the angular grid (supports from traces already are)."""
    d = TWO_PI / m
    start = round(arc[0] / d) * d
    length = max(d, round(arc[1] / d) * d)
    return start, min(length, TWO_PI)

def _arc_trace_values(trace: Trace, arc: tuple[float, float]) -> np.ndarray:
    """Trace samples with everything outside the arc zeroed."""
    theta = trace.angles
    rel = np.mod(theta - arc[0], TWO_PI)
    mask = rel <= arc[1] + 1e-12
    return trace.values * mask[:, None]


def _spectral_on_arc(values: np.ndarray, arc: tuple[float, float],
                     n_modes: int, d: int = 2) -> SpectralTrace:
    basis = eigenpairs(arc, d=d, n_modes=n_modes)
    return fourier_coefficients(Trace(values=values), basis)


def _residual_values(values: np.ndarray, st: SpectralTrace, m: int) -> np.ndarray:
    theta = np.arange(m) * (TWO_PI / m)
    return values - st.reconstruct(theta)


def _homogeneous_values(values: np.ndarray, n_r: int) -> np.ndarray:
    r = np.arange(n_r + 1) / n_r
    return r[:, None, None] * values[None, :, :]


def _small_arc_values(trace: Trace, arc: tuple[float, float], rho: float,
                      params: AssemblyParams) -> tuple[np.ndarray, PieceReport, str]:
    """Truncated harmonic extension plus homogeneous residual carry."""
    m = trace.n_samples
    arc = _grid_aligned(arc, m)
    vals = _arc_trace_values(trace, arc)
    n_modes = min(params.n_modes, max(4, int(arc[1] / (TWO_PI / m) / 2)))
    st = _spectral_on_arc(vals, arc, n_modes)
    h = _power_extension_values(st, params.n_r, m, st.basis.alphas())
    psi = cutoff_psi(2.0 * rho).val(np.arange(params.n_r + 1) / params.n_r)
    h = psi[:, None, None] * h
    h += _homogeneous_values(_residual_values(vals, st, m), params.n_r)
    rep = PieceReport(arc=arc, role="small", phase="vector", rho=rho,
                      eps_internal=0.0, n_modes=n_modes, tail=st.tail)
    return h, rep, "small"


def _big_arc_values(trace: Trace, arc: tuple[float, float], rho: float,
                    eps: float, params: AssemblyParams,
                    edge: str = "end") -> tuple[np.ndarray, PieceReport]:
    """First-mode internal variation + truncated harmonic higher modes."""
    m = trace.n_samples
    arc = _grid_aligned(arc, m)
    vals = _arc_trace_values(trace, arc)
    st = _spectral_on_arc(vals, arc, params.n_modes)
    first = st.restrict_to_modes([0])
    rest = st.restrict_to_modes(list(range(1, st.basis.n_modes)))

    if abs(eps) > 0.0:
        xi = xi_profile(rho)
        zvar = internal_variation_values(first, eps, xi, params.n_r, m, edge=edge)
    else:
        zvar = _power_extension_values(first, params.n_r, m, np.array([1.0]))
    hg = _power_extension_values(rest, params.n_r, m, rest.basis.alphas())
    psi = cutoff_psi(2.0 * rho).val(np.arange(params.n_r + 1) / params.n_r)
    h = zvar + psi[:, None, None] * hg
    h += _homogeneous_values(_residual_values(vals, st, m), params.n_r)
    rep = PieceReport(arc=arc, role="big", phase="vector", rho=rho,
                      eps_internal=eps, n_modes=params.n_modes, tail=st.tail)
    return h, rep


def _full_circle_values(trace: Trace, params: AssemblyParams,
                        ) -> tuple[np.ndarray, PieceReport]:
    """Harmonic extension on the periodic basis (+ homogeneous residual)."""
    m = trace.n_samples
    st = _spectral_on_arc(trace.values, (0.0, TWO_PI), params.n_modes)
    h = _power_extension_values(st, n_r=params.n_r, m=m, exponents=st.basis.alphas())
    h += _homogeneous_values(_residual_values(trace.values, st, m), params.n_r)
    rep = PieceReport(arc=(0.0, TWO_PI), role="full", phase="vector",
                      rho=0.0, eps_internal=0.0, n_modes=st.basis.n_modes, tail=st.tail)
    return h, rep


def _variation_room(support: ArcSet, arc: tuple[float, float], edge: str) -> float:
    """Angular clearance beyond the moving endpoint before the next arc."""
    if edge == "end":
        point = arc[0] + arc[1]
    else:
        point = arc[0]
    best = TWO_PI
    for other in support.arcs:
        if abs(other[0] - arc[0]) < 1e-12 and abs(other[1] - arc[1]) < 1e-12:
            continue
        if edge == "end":
            gap = math.fmod(other[0] - point, TWO_PI)
        else:
            gap = math.fmod(point - (other[0] + other[1]), TWO_PI)
        if gap < 0:
            gap += TWO_PI
        best = min(best, gap)
    if support.n_components == 1:
        best = max(0.0, TWO_PI - arc[1])
    return best


def _candidate_variations(delta: float, room: float, params: AssemblyParams) -> list[tuple[float, float]]:
    """(rho, eps) candidates for the big-arc piece; (rho1, 0) is the fallback."""
    cands: list[tuple[float, float]] = [(params.rho1, 0.0)]
    if abs(delta) < 1e-12:
        return cands
    eps = -delta
    for rho in params.rho_ladder:
        if rho > RHO_MAX:
            continue
        reach = max(eps, 0.0) * rho * XI_LINF
        if reach >= room - 1e-9:
            continue
        cands.append((rho, eps))
    return cands


def _bundle_field(values: np.ndarray, trace: Trace, n_r: int) -> DiskField:
    values = values.copy()
    values[-1] = trace.values  # boundary row carries the input trace exactly
    return DiskField(grid=PolarGrid(n_r=n_r, n_theta=trace.n_samples), values=values)


def _assemble_one_phase_like(trace: Trace, spec: FunctionalSpec, theta_target: float,
                             params: AssemblyParams, support: ArcSet,
                             ) -> tuple[np.ndarray, str, list[PieceReport]]:
    """Shared OP / low-density vectorial assembly on a decomposed support."""
    m = trace.n_samples
    n = trace.n_components
    total = support.total_length

    if total >= TWO_PI - params.eta0 or total > TWO_PI - params.delta0:
        h, rep = _full_circle_values(trace, params)
        return h, "VeryLargeCone", [rep]

    # robust bucket split: at most one component can exceed pi - delta0/4
    # here (see split_big_small); treat it with the variation machinery.
    big, small = split_big_small(support, params.delta0)

    base = np.zeros((params.n_r + 1, m, n))
    pieces: list[PieceReport] = []
    for arc in small.arcs:
        vals, rep, _ = _small_arc_values(trace, arc, params.rho1, params)
        base += vals
        pieces.append(rep)

    if big is None:
        return base, "SmallConesOnly", pieces

    delta = big[1] - math.pi
    room = _variation_room(support, big, "end")
    candidates = []
    for rho, eps in _candidate_variations(delta, room, params):
        candidates.append(_big_arc_values(trace, big, rho, eps, params))
    if big[1] < math.pi:
        # the lowest mode decays faster than linearly here, so the plain
        # truncated harmonic extension is admissible too -- let it compete
        vals, rep, _ = _small_arc_values(trace, big, params.rho1, params)
        candidates.append((vals, replace(rep, role="big")))
    best = None
    for vals, rep in candidates:
        cand = base + vals
        field = _bundle_field(cand, trace, params.n_r)
        w = weiss(field, (0.0, 0.0), 1.0, spec, zero_tol=params.zero_tol).w
        if best is None or w < best[0]:
            best = (w, cand, rep)
    _, h, rep = best
    return h, "BigPlusSmall", pieces + [rep]


def _assemble_vector_high_density(trace: Trace, spec: FunctionalSpec,
                                  theta_target: float, params: AssemblyParams,
                                  support: ArcSet,
                                  ) -> tuple[np.ndarray, str, list[PieceReport]]:
    m = trace.n_samples
    n = trace.n_components
    if support.is_full_circle():
        h, rep = _full_circle_values(trace, params)
        return h, "VectorHighDensity", [rep]

    longest = support.longest()
    if longest[1] >= TWO_PI - params.delta0:
        # one-homogeneous first mode + harmonic higher modes, no cutoff
        arc = _grid_aligned(longest, m)
        vals = _arc_trace_values(trace, arc)
        st = _spectral_on_arc(vals, arc, params.n_modes)
        exps = st.basis.alphas().copy()
        exps[0] = 1.0
        h = _power_extension_values(st, params.n_r, m, exps)
        h += _homogeneous_values(_residual_values(vals, st, m), params.n_r)
        pieces = [PieceReport(arc=arc, role="big", phase="vector", rho=0.0,
                              eps_internal=0.0, n_modes=params.n_modes, tail=st.tail)]
        base = h
        for other in support.arcs:
            if abs(other[0] - arc[0]) < 1e-12 and abs(other[1] - arc[1]) < 1e-12:
                continue
            vals, rep, _ = _small_arc_values(trace, other, params.rho1, params)
            base = base + vals
            pieces.append(rep)
        return base, "VectorHighDensity", pieces

    bigs = [a for a in support.arcs if a[1] > math.pi - params.delta0 / 4.0]
    if len(bigs) == 2:
        h, pieces = _two_big_arcs(trace, bigs[0], bigs[1], support, spec, params,
                                  phase_split=False)
        rest = np.zeros((params.n_r + 1, m, n))
        for other in support.arcs:
            if any(abs(other[0] - b[0]) < 1e-12 for b in bigs):
                continue
            vals, rep, _ = _small_arc_values(trace, other, params.rho1, params)
            rest += vals
            pieces.append(rep)
        return h + rest, "VectorHighDensity", pieces

    return _assemble_one_phase_like(trace, spec, theta_target, params, support)


def _two_big_arcs(trace: Trace, arc_a: tuple[float, float], arc_b: tuple[float, float],
                  support: ArcSet, spec: FunctionalSpec, params: AssemblyParams,
                  phase_split: bool) -> tuple[np.ndarray, list[PieceReport]]:
    """Variations for two long arcs placed on the boundary of one shared gap.

    ``phase_split`` distinguishes the double-phase call (the two arcs carry
    c+ and -c- separately and the field is their difference) from the
    vectorial call (both arcs live on the same trace).
    """
    m = trace.n_samples
    # the two complementary gaps, measured from arc_a's end / arc_a's start
    end_a = arc_a[0] + arc_a[1]
    gap_after = math.fmod(arc_b[0] - end_a, TWO_PI)
    if gap_after < 0:
        gap_after += TWO_PI
    end_b = arc_b[0] + arc_b[1]
    gap_before = math.fmod(arc_a[0] - end_b, TWO_PI)
    if gap_before < 0:
        gap_before += TWO_PI
    if gap_after >= gap_before:
        edge_a, edge_b, room = "end", "start", gap_after
    else:
        edge_a, edge_b, room = "start", "end", gap_before

    best = None
    for va, rep_a in _side_candidates(trace, arc_a, edge_a, room / 2.0, params):
        for vb, rep_b in _side_candidates(trace, arc_b, edge_b, room / 2.0, params):
            if _variations_collide(va, vb, rep_a, rep_b):
                continue
            cand = va + vb
            field = _bundle_field(cand, trace, params.n_r)
            w = weiss(field, (0.0, 0.0), 1.0, spec, zero_tol=params.zero_tol).w
            if best is None or w < best[0]:
                best = (w, cand, [rep_a, rep_b])
    if best is None:
        raise NumericalError("no collision-free variation pair found")
    _, h, pieces = best
    return h, pieces


def _side_candidates(tr: Trace, arc: tuple[float, float], edge: str, room: float,
                     params: AssemblyParams) -> list[tuple[np.ndarray, PieceReport]]:
    """All admissible treatments for one long arc bordering a shared gap."""
    cands = []
    for rho, eps in _candidate_variations(arc[1] - math.pi, room, params):
        cands.append(_big_arc_values(tr, arc, rho, eps, params, edge=edge))
    if arc[1] < math.pi:
        vals, rep, _ = _small_arc_values(tr, arc, params.rho1, params)
        cands.append((vals, replace(rep, role="big")))
    return cands


def _variations_collide(va: np.ndarray, vb: np.ndarray, rep_a: PieceReport,
                        rep_b: PieceReport) -> bool:
    """True when an outward variation makes the two supports overlap."""
    if rep_a.eps_internal <= 0.0 and rep_b.eps_internal <= 0.0:
        return False
    na = np.sum(va**2, axis=2)
    nb = np.sum(vb**2, axis=2)
    return bool(np.any((na > 0.0) & (nb > 0.0)))


def _assemble_double_phase(trace: Trace, spec: FunctionalSpec, theta_target: float,
                           params: AssemblyParams,
                           ) -> tuple[np.ndarray, str, list[PieceReport], ArcSet]:
    m = trace.n_samples
    cpos = trace.positive_part()
    cneg = trace.negative_part()
    spos = decompose_support(cpos, zero_tol=params.zero_tol)
    sneg = decompose_support(cneg, zero_tol=params.zero_tol)
    if spos.total_length == 0.0 or sneg.total_length == 0.0:
        raise ValidationError("double-phase assembly needs both phases present")
    sneg = _trim_against(sneg, spos, max_trim=2.5 * TWO_PI / m)
    support = ArcSet(arcs=spos.arcs + sneg.arcs)

    # very large positive phase: harmonic competitor spliced into B_rho1
    if spos.total_length >= TWO_PI - params.eta0:
        h = _spliced_very_large(cpos, params) - _homogeneous_values(cneg.values, params.n_r)
        rep = PieceReport(arc=spos.arcs[0], role="spliced", phase="pos",
                          rho=params.rho1, eps_internal=0.0,
                          n_modes=params.n_modes, tail=0.0)
        return h, "VeryLargeCone", [rep], support
    if sneg.total_length >= TWO_PI - params.eta0:
        h = -_spliced_very_large(cneg, params) + _homogeneous_values(cpos.values, params.n_r)
        rep = PieceReport(arc=sneg.arcs[0], role="spliced", phase="neg",
                          rho=params.rho1, eps_internal=0.0,
                          n_modes=params.n_modes, tail=0.0)
        return h, "VeryLargeCone", [rep], support

    # the paired-variation construction applies when each phase carries one
    # long arc (opening at least pi - delta0)
    pair_floor = math.pi - params.delta0
    dp_pos = spos.longest() if spos.longest()[1] >= pair_floor else None
    dp_neg = sneg.longest() if sneg.longest()[1] >= pair_floor else None

    if dp_pos is not None and dp_neg is not None:
        base = np.zeros((params.n_r + 1, m, 1))
        pieces: list[PieceReport] = []
        for arc in spos.arcs:
            if arc == dp_pos:
                continue
            vals, rep, _ = _small_arc_values(cpos, arc, params.rho1, params)
            base += vals
            pieces.append(replace(rep, phase="pos"))
        for arc in sneg.arcs:
            if arc == dp_neg:
                continue
            vals, rep, _ = _small_arc_values(cneg, arc, params.rho1, params)
            base -= vals
            pieces.append(replace(rep, phase="neg"))
        hb, reps = _two_big_arcs_dp(cpos, cneg, dp_pos, dp_neg, base, trace,
                                    spec, params)
        return base + hb, "DoublePhaseTwoBig", pieces + reps, support

    big_pos, small_pos = split_big_small(spos, params.delta0)
    big_neg, small_neg = split_big_small(sneg, params.delta0)

    base = np.zeros((params.n_r + 1, m, 1))
    pieces = []
    for arc in small_pos.arcs:
        vals, rep, _ = _small_arc_values(cpos, arc, params.rho1, params)
        base += vals
        pieces.append(replace(rep, phase="pos"))
    for arc in small_neg.arcs:
        vals, rep, _ = _small_arc_values(cneg, arc, params.rho1, params)
        base -= vals
        pieces.append(replace(rep, phase="neg"))

    for big, sign, tr, phase in ((big_pos, 1.0, cpos, "pos"), (big_neg, -1.0, cneg, "neg")):
        if big is None:
            continue
        delta = big[1] - math.pi
        room = _variation_room(support, big, "end")
        best = None
        for rho, eps in _candidate_variations(delta, room, params):
            vals, rep = _big_arc_values(tr, big, rho, eps, params)
            cand = base + sign * vals
            field = _bundle_field(cand, trace, params.n_r)
            w = weiss(field, (0.0, 0.0), 1.0, spec, zero_tol=params.zero_tol).w
            if best is None or w < best[0]:
                best = (w, sign * vals, replace(rep, phase=phase))
        base = base + best[1]
        pieces.append(best[2])
        return base, "BigPlusSmall", pieces, support

    return base, "SmallConesOnly", pieces, support


def _two_big_arcs_dp(cpos: Trace, cneg: Trace, big_pos, big_neg, base, trace,
                     spec, params) -> tuple[np.ndarray, list[PieceReport]]:
    m = trace.n_samples
    end_p = big_pos[0] + big_pos[1]
    gap_after = math.fmod(big_neg[0] - end_p, TWO_PI)
    if gap_after < 0:
        gap_after += TWO_PI
    end_n = big_neg[0] + big_neg[1]
    gap_before = math.fmod(big_pos[0] - end_n, TWO_PI)
    if gap_before < 0:
        gap_before += TWO_PI
    if gap_after >= gap_before:
        edge_p, edge_n, room = "end", "start", gap_after
    else:
        edge_p, edge_n, room = "start", "end", gap_before

    best = None
    for vp, rep_p in _side_candidates(cpos, big_pos, edge_p, room / 2.0, params):
        for vn, rep_n in _side_candidates(cneg, big_neg, edge_n, room / 2.0, params):
            if _variations_collide(vp, vn, rep_p, rep_n):
                continue
            cand = base + vp - vn
            field = _bundle_field(cand, trace, params.n_r)
            w = weiss(field, (0.0, 0.0), 1.0, spec, zero_tol=params.zero_tol).w
            if best is None or w < best[0]:
                best = (w, vp - vn,
                        [replace(rep_p, phase="pos"), replace(rep_n, phase="neg")])
    if best is None:
        raise NumericalError("no collision-free variation pair found")
    return best[1], best[2]


def _trim_against(secondary: ArcSet, primary: ArcSet, max_trim: float) -> ArcSet:
    """Shrink ``secondary`` arcs minimally so they don't overlap ``primary``.

    Support decomposition pads each arc by half a grid cell per side, so the
    arcs of two phases meeting at a free-boundary point overlap by up to two
    cells; anything deeper than ``max_trim`` is a genuinely two-valued datum.
    """
    out = []
    for b, lb in secondary.arcs:
        for a, la in primary.arcs:
            rel = math.fmod(b - a, TWO_PI)
            if rel < 0:
                rel += TWO_PI
            if rel < la - 1e-12:          # our start lies inside a primary arc
                cut = la - rel
                if cut > max_trim or cut >= lb:
                    raise GeometryError("phase supports overlap beyond grid margin")
                b = math.fmod(b + cut, TWO_PI)
                lb -= cut
            rel_end = math.fmod(b + lb - a, TWO_PI)
            if rel_end < 0:
                rel_end += TWO_PI
            if 1e-12 < rel_end < la - 1e-12:   # our end lies inside a primary arc
                if rel_end > max_trim or rel_end >= lb:
                    raise GeometryError("phase supports overlap beyond grid margin")
                lb -= rel_end
        out.append((b, lb))
    return ArcSet(arcs=tuple(out))


def _spliced_very_large(tr: Trace, params: AssemblyParams) -> np.ndarray:
    """z outside B_rho1, the rescaled full-circle harmonic competitor inside."""
    m = tr.n_samples
    st = _spectral_on_arc(tr.values, (0.0, TWO_PI), params.n_modes)
    r = np.arange(params.n_r + 1) / params.n_r
    z = _homogeneous_values(tr.values, params.n_r)
    inner = r <= params.rho1
    theta = np.arange(m) * (TWO_PI / m)
    phi = st.basis.evaluate(theta)
    out = z.copy()
    rs = r[inner] / params.rho1
    vals = np.zeros((rs.size, m, tr.n_components))
    for j, mode in enumerate(st.basis.modes):
        radial = np.ones_like(rs) if mode.alpha == 0.0 else rs**mode.alpha
        vals += radial[:, None, None] * phi[j][None, :, None] * st.coeffs[j][None, None, :]
    res = _residual_values(tr.values, st, m)
    vals += rs[:, None, None] * res[None, :, :]
    out[inner] = params.rho1 * vals
    return out


def assemble_competitor(trace: Trace, spec: FunctionalSpec, theta_target: float,
                        params: Optional[AssemblyParams] = None) -> CompetitorBundle:
    """Build the inequality competitor h (and the baseline z) for a trace.

    The branch is chosen from the functional and the support geometry; every
    constructed field keeps the input trace exactly on the boundary row.
    """
    if params is None:
        params = AssemblyParams()
    if trace.n_components != spec.n_components:
        raise ValidationError("trace/spec component mismatch")
    if spec.kind == ONE_PHASE and np.any(trace.values < -1e-12 * max(trace.max_norm(), 1e-300)):
        raise ValidationError("one-phase traces must be nonnegative")

    densities = spec.admissible_densities()
    if not any(abs(theta_target - t) < 1e-9 for t in densities):
        raise ValidationError(
            f"density target {theta_target} not admissible for {spec.kind}")

    z = homogeneous_extension(trace, n_r=params.n_r)

    if spec.kind == DOUBLE_PHASE and abs(theta_target - (spec.lam1 + spec.lam2) * math.pi / 2) < 1e-9:
        h_vals, branch, pieces, support = _assemble_double_phase(
            trace, spec, theta_target, params)
    else:
        work = trace
        flip = False
        if spec.kind == DOUBLE_PHASE:
            # single-phase density target: the other phase must be absent
            pos_mass = float(np.max(np.maximum(work.values, 0.0)))
            neg_mass = float(np.max(np.maximum(-work.values, 0.0)))
            tol = 1e-9 * max(pos_mass, neg_mass, 1e-300)
            if abs(theta_target - spec.lam2 * math.pi / 2) < 1e-9 and spec.lam1 != spec.lam2:
                flip = pos_mass <= tol
            if abs(theta_target - spec.lam1 * math.pi / 2) < 1e-9 and neg_mass > tol:
                raise ValidationError("negative phase present at a one-phase density target")
            if flip:
                work = Trace(values=-work.values)
        support = decompose_support(work, zero_tol=params.zero_tol)
        if support.total_length == 0.0:
            raise ValidationError("trace has empty support")
        if spec.kind == VECTORIAL and abs(theta_target - spec.lam1 * math.pi) < 1e-9:
            h_vals, branch, pieces = _assemble_vector_high_density(
                work, spec, theta_target, params, support)
        else:
            h_vals, branch, pieces = _assemble_one_phase_like(
                work, spec, theta_target, params, support)
        if flip:
            h_vals = -h_vals

    h = _bundle_field(h_vals, trace, params.n_r)
    return CompetitorBundle(z=z, h=h, branch=branch, pieces=tuple(pieces),
                            support=support, spec=spec, theta_target=theta_target)
