"""Direct minimization of the free-boundary energies on Cartesian grids.

The discrete objective is

    E_kappa(u) = sum_edges |u_a - u_b|^2 + h^2 * sum_nodes w * Phi_kappa(|u|),

where Phi_kappa(t) = min(t^2/kappa^2, 1) smooths the support indicator and
w carries the measure weights (lam1, or lam1/lam2 by sign for the
double-phase functional, times an optional q).  A decreasing continuation
schedule in kappa drives Phi toward the indicator; each stage is minimized
by projected gradient descent with Armijo backtracking, the projection
clamping one-phase iterates at zero and pinning Dirichlet nodes.

``cusp_experiment`` runs the two-ball configuration in which both
components of a vector minimizer are forced positive on two separated
disks.  The scalar sign-flip reduction (datum +C / -C with a sign-blind
measure term) certifies that both phases appear and seeds the vector run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.ndimage
import scipy.sparse
import scipy.sparse.linalg

from ._kernels import backend_name, energy, energy_and_grad
from .errors import GeometryError, NumericalError, ValidationError
from .fields import CartesianGrid, DiskField
from .weiss import DOUBLE_PHASE, ONE_PHASE, FunctionalSpec, vectorial, weiss

#: continuation schedule, in units of the largest boundary value; the
#: leading factors above 1 keep the smoothed term's gradient alive at the
#: harmonic-extension start (below the data's maximum it is flat there)
KAPPA_FACTORS = (2.0, 1.0, 0.5, 0.2, 0.08, 0.03, 0.012)

ARMIJO_SLOPE = 1e-4
BACKTRACK = 0.5
STEP_GROW = 1.3
MAX_BACKTRACKS = 60
SUPPORT_REL_TOL = 1e-8


@dataclass
class MinimizeProblem:
    """Grid, Dirichlet data, functional, and solver knobs for one run."""

    grid: CartesianGrid
    boundary_values: np.ndarray      # (rows, cols, n), zero off the fixed set
    fixed: np.ndarray                # bool (rows, cols), Dirichlet nodes
    spec: FunctionalSpec
    kappa_factors: tuple = KAPPA_FACTORS
    stop_tol: float = 1e-9
    max_iters: int = 20000

    def __post_init__(self):
        rows, cols = self.grid.shape
        self.boundary_values = np.asarray(self.boundary_values, dtype=float)
        if self.boundary_values.ndim == 2:
            self.boundary_values = self.boundary_values[:, :, None]
        if self.boundary_values.shape[:2] != (rows, cols):
            raise ValidationError("boundary values must cover the grid")
        if self.boundary_values.shape[2] != self.spec.n_components:
            raise ValidationError("boundary values / spec component mismatch")
        if not np.all(np.isfinite(self.boundary_values)):
            raise ValidationError("boundary values must be finite")
        self.fixed = np.asarray(self.fixed, dtype=bool)
        if self.fixed.shape != (rows, cols):
            raise ValidationError("fixed mask must cover the grid")
        if not np.all(self.grid.mask[self.fixed]):
            raise ValidationError("fixed nodes must lie in the active domain")
        if not np.any(self.fixed):
            raise ValidationError("problem has no Dirichlet nodes")
        if self.spec.kind == ONE_PHASE and np.any(self.boundary_values < 0):
            raise ValidationError("one-phase boundary data must be nonnegative")
        facs = tuple(float(k) for k in self.kappa_factors)
        if not facs or facs[-1] <= 0 or any(
                b >= a for a, b in zip(facs, facs[1:])):
            raise ValidationError(
                "kappa schedule must strictly decrease to a positive value")
        self.kappa_factors = facs

    def datum_scale(self) -> float:
        return float(np.max(np.abs(self.boundary_values)))


@dataclass
class MinimizerResult:
    u: DiskField
    energy_history: list          # (iteration, E_kappa) pairs
    final_kappa: float
    converged: bool
    energy: float                 # unsmoothed discrete functional value
    backend: str = field(default_factory=backend_name)


def _base_weight(spec: FunctionalSpec, grid: CartesianGrid) -> np.ndarray:
    rows, cols = grid.shape
    if spec.weight is None:
        q = np.ones((rows, cols))
    elif callable(spec.weight):
        x, y = grid.node_xy()
        q = np.asarray(spec.weight(x, y), dtype=float)
        if q.shape != (rows, cols):
            raise ValidationError("weight callable must return one value per node")
        if np.any(q[grid.mask] <= 0):
            raise ValidationError("weight must be strictly positive on the domain")
    else:
        q = np.full((rows, cols), float(spec.weight))
    return q


def _measure_weight_fn(spec: FunctionalSpec, q: np.ndarray) -> Callable:
    """Per-node weight of the smoothed measure term, as a function of u.

    The double-phase weight depends on the iterate's sign; since
    Phi_kappa(|u|) vanishes quadratically at u = 0, the composite
    lam(sign u) * Phi_kappa(|u|) stays C^1 and the chain rule through the
    current sign pattern gives the exact gradient.
    """
    if spec.kind == DOUBLE_PHASE:
        lam1, lam2 = spec.lam1, spec.lam2

        def weight(u: np.ndarray) -> np.ndarray:
            return q * np.where(u[:, :, 0] >= 0.0, lam1, lam2)

        return weight
    static = spec.lam1 * q
    return lambda u: static


def harmonic_extension_grid(grid: CartesianGrid, boundary_values: np.ndarray,
                            fixed: np.ndarray) -> np.ndarray:
    """Solve the 5-point Laplace equation on free nodes, per component."""
    rows, cols = grid.shape
    active = grid.mask
    free = active & ~np.asarray(fixed, dtype=bool)
    vals = np.array(boundary_values, dtype=float)
    if vals.ndim == 2:
        vals = vals[:, :, None]
    idx = -np.ones((rows, cols), dtype=np.int64)
    fr, fc = np.nonzero(free)
    idx[fr, fc] = np.arange(fr.size)
    n = fr.size
    if n == 0:
        return vals
    rows_l, cols_l, data_l = [], [], []
    rhs = np.zeros((n, vals.shape[2]))
    deg = np.zeros(n)
    for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        nr, nc = fr + dr, fc + dc
        ok = (nr >= 0) & (nr < rows) & (nc >= 0) & (nc < cols)
        ok[ok] &= active[nr[ok], nc[ok]]
        deg += ok
        nb_free = np.zeros_like(ok)
        nb_free[ok] = free[nr[ok], nc[ok]]
        rows_l.append(idx[fr[nb_free], fc[nb_free]])
        cols_l.append(idx[nr[nb_free], nc[nb_free]])
        data_l.append(-np.ones(int(nb_free.sum())))
        nb_fixed = ok & ~nb_free
        np.add.at(rhs, idx[fr[nb_fixed], fc[nb_fixed]],
                  vals[nr[nb_fixed], nc[nb_fixed]])
    rows_l.append(np.arange(n))
    cols_l.append(np.arange(n))
    data_l.append(deg)
    a = scipy.sparse.csc_matrix(
        (np.concatenate(data_l), (np.concatenate(rows_l), np.concatenate(cols_l))),
        shape=(n, n))
    solve = scipy.sparse.linalg.factorized(a)
    for comp in range(vals.shape[2]):
        vals[fr, fc, comp] = solve(np.ascontiguousarray(rhs[:, comp]))
    vals[~active] = 0.0
    return vals


def _project(u: np.ndarray, p: MinimizeProblem) -> np.ndarray:
    if p.spec.kind == ONE_PHASE:
        np.maximum(u, 0.0, out=u)
    u[p.fixed] = p.boundary_values[p.fixed]
    u[~p.grid.mask] = 0.0
    return u


def _unsmoothed_energy(u: np.ndarray, p: MinimizeProblem, q: np.ndarray) -> float:
    """Discrete functional value with the exact support indicator."""
    active = p.grid.mask
    h = p.grid.h
    ex = (active[:, 1:] & active[:, :-1])[..., None]
    ey = (active[1:, :] & active[:-1, :])[..., None]
    dir_term = float(np.sum(np.diff(u, axis=1) ** 2 * ex)
                     + np.sum(np.diff(u, axis=0) ** 2 * ey))
    tol = SUPPORT_REL_TOL * p.datum_scale()
    if p.spec.kind == DOUBLE_PHASE:
        s = u[:, :, 0]
        meas = np.sum(q * (p.spec.lam1 * ((s > tol) & active)
                           + p.spec.lam2 * ((s < -tol) & active)))
    else:
        norm2 = np.sum(u * u, axis=2)
        meas = p.spec.lam1 * np.sum(q * ((norm2 > tol * tol) & active))
    return dir_term + h * h * float(meas)


def _descend(p: MinimizeProblem, u0: np.ndarray) -> MinimizerResult:
    """Continuation over the kappa schedule, PGD + Armijo within each stage."""
    grid = p.grid
    active = grid.mask
    free = active & ~p.fixed
    h = grid.h
    scale = p.datum_scale()
    if scale == 0.0:
        raise ValidationError("boundary data is identically zero")
    q = _base_weight(p.spec, grid)
    weight_of = _measure_weight_fn(p.spec, q)

    u = _project(np.array(u0, dtype=float), p)
    history: list = []
    it_total = 0
    converged_all = True
    step = 1.0
    kappa = p.kappa_factors[0] * scale
    for factor in p.kappa_factors:
        kappa = factor * scale
        e, g = energy_and_grad(u, active, free, weight_of(u), kappa, h)
        history.append((it_total, e))
        stage_done = False
        quiet = 0
        u_prev = g_prev = None
        for _ in range(p.max_iters):
            it_total += 1
            # Barzilai-Borwein step seed from the last move; the Armijo
            # test below still enforces monotone descent
            if u_prev is not None:
                s = u - u_prev
                y = g - g_prev
                sy = float(np.sum(s * y))
                yy = float(np.sum(y * y))
                trial = sy / yy if (sy > 0.0 and yy > 0.0) else step * STEP_GROW
            else:
                trial = step * STEP_GROW
            step = min(max(trial, 1e-12), 1e6)
            accepted = False
            e_new = e
            for _ in range(MAX_BACKTRACKS):
                cand = _project(u - step * g, p)
                d = cand - u
                slope = float(np.sum(g * d))
                e_new = energy(cand, active, free, weight_of(cand), kappa, h)
                if e_new <= e + ARMIJO_SLOPE * slope:
                    accepted = True
                    break
                step *= BACKTRACK
            if not accepted:
                stage_done = True        # no admissible descent step remains
                break
            if not math.isfinite(e_new):
                err = NumericalError("energy diverged during descent")
                err.history = history
                raise err
            rel_drop = (e - e_new) / max(abs(e), 1e-300)
            u_prev, g_prev = u, g
            u, e = cand, e_new
            history.append((it_total, e))
            # a single tiny drop can be a backtracking artifact; require a
            # run of them before declaring the stage stationary
            quiet = quiet + 1 if rel_drop < p.stop_tol else 0
            if quiet >= 3:
                stage_done = True
                break
            _, g = energy_and_grad(u, active, free, weight_of(u), kappa, h)
        converged_all = converged_all and stage_done

    u = _polish_support(u, p, q, kappa)
    return MinimizerResult(
        u=DiskField(grid=grid, values=u),
        energy_history=history,
        final_kappa=kappa,
        converged=converged_all,
        energy=_unsmoothed_energy(u, p, q))


def _polish_support(u: np.ndarray, p: MinimizeProblem, q: np.ndarray,
                    kappa: float) -> np.ndarray:
    """Re-solve harmonically on the thresholded support.

    The smoothed stages leave exponentially small toes across the free
    boundary that never reach exact zero; freezing the support at the final
    kappa level and minimizing the Dirichlet term exactly on it (a block
    descent step for the unsmoothed functional) removes them.  The polished
    field is kept only when it does not increase the exact energy.
    """
    norm = np.sqrt(np.sum(u * u, axis=2))
    support = (norm > kappa) | p.fixed
    cand_fixed = p.fixed | (p.grid.mask & ~support)
    cand_bvals = np.where(p.fixed[..., None], p.boundary_values, 0.0)
    cand = harmonic_extension_grid(p.grid, cand_bvals, cand_fixed)
    if p.spec.kind == ONE_PHASE:
        np.maximum(cand, 0.0, out=cand)
    if _unsmoothed_energy(cand, p, q) <= _unsmoothed_energy(u, p, q):
        return cand
    return u


def minimize(p: MinimizeProblem) -> MinimizerResult:
    """Minimize the smoothed functional from the harmonic extension."""
    u0 = harmonic_extension_grid(p.grid, p.boundary_values, p.fixed)
    return _descend(p, u0)


def minimize_weighted(p: MinimizeProblem) -> MinimizerResult:
    """Weighted-measure variant; shares the minimize() code path exactly."""
    return minimize(p)


def minimize_from(p: MinimizeProblem, u0: np.ndarray) -> MinimizerResult:
    """Minimize starting from a caller-supplied field instead of the
    harmonic extension (used to seed related problems into a known basin)."""
    u0 = np.asarray(u0, dtype=float)
    if u0.ndim == 2:
        u0 = u0[:, :, None]
    if u0.shape != p.boundary_values.shape:
        raise ValidationError("seed field shape must match the problem")
    return _descend(p, u0)


# --------------------------------------------------------------------------
# problem builders


def disk_problem(datum: Callable, h: float, spec: FunctionalSpec,
                 radius: float = 1.0, **solver_kw) -> MinimizeProblem:
    """Dirichlet problem on a gridded disk; ``datum`` maps angles to values.

    The active set is the set of nodes inside the disk; values are imposed
    on the ring of active nodes with an inactive 4-neighbor, each node
    reading the datum at its own polar angle (nearest boundary point).
    """
    n_half = int(math.ceil(radius / h)) + 2
    n = 2 * n_half + 1
    origin = (-n_half * h, -n_half * h)
    coords = origin[0] + h * np.arange(n)
    x, y = np.meshgrid(coords, coords)
    mask = x**2 + y**2 <= radius**2
    grid = CartesianGrid(origin=origin, h=h, mask=mask)

    inner = scipy.ndimage.binary_erosion(mask)
    ring = mask & ~inner
    vals = np.asarray(datum(np.arctan2(y[ring], x[ring])), dtype=float)
    if vals.ndim == 1:
        vals = vals[:, None]
    bvals = np.zeros((n, n, vals.shape[1]))
    bvals[ring] = vals
    return MinimizeProblem(grid=grid, boundary_values=bvals, fixed=ring,
                           spec=spec, **solver_kw)


def box_problem(origin: tuple, shape: tuple, h: float, spec: FunctionalSpec,
                dirichlet_sets: Sequence, **solver_kw) -> MinimizeProblem:
    """Rectangle with zero outer boundary plus fixed interior node sets.

    Each entry of ``dirichlet_sets`` is ``(region, value)`` where region is
    a predicate on coordinate arrays and value a constant vector.
    """
    rows, cols = shape
    grid = CartesianGrid(origin=origin, h=h,
                         mask=np.ones((rows, cols), dtype=bool))
    x, y = grid.node_xy()
    fixed = np.zeros((rows, cols), dtype=bool)
    fixed[0, :] = fixed[-1, :] = True
    fixed[:, 0] = fixed[:, -1] = True
    bvals = np.zeros((rows, cols, spec.n_components))
    for region, value in dirichlet_sets:
        sel = np.asarray(region(x, y), dtype=bool)
        fixed |= sel
        bvals[sel] = np.asarray(value, dtype=float)
    return MinimizeProblem(grid=grid, boundary_values=bvals, fixed=fixed,
                           spec=spec, **solver_kw)


# --------------------------------------------------------------------------
# the two-ball cusp experiment


@dataclass
class CuspReport:
    """Outcome of the two-ball experiment at one (eps, C) setting."""

    vector: MinimizerResult
    scalar: MinimizerResult
    connectivity: int                 # component count of {|u| > 0}
    components_equal: bool
    both_phases: bool                 # scalar reduction takes both signs
    density_scan: list                # (x, y, theta_hat) triples
    eps: float
    c_value: float
    h: float

    def max_scan_density(self) -> float:
        if not self.density_scan:
            return float("nan")
        return max(t for _, _, t in self.density_scan)


def _ball(cx: float, cy: float, rad: float = 1.0) -> Callable:
    return lambda x, y: (x - cx) ** 2 + (y - cy) ** 2 <= rad * rad


def cusp_experiment(eps: float, c_value: float, h: float = 0.05,
                    box: Optional[tuple] = None,
                    kappa_factors: tuple = KAPPA_FACTORS,
                    max_iters: int = 20000,
                    scan_radius_factor: float = 8.0) -> CuspReport:
    """Two unit balls at distance 3 carrying near-antipodal vector data.

    The vector run fixes u = ((1+eps)C, C) on B_1(0,0) and (-C, -C) on
    B_1(3,0).  At eps = 0 the components coincide with the scalar sign-flip
    solution and the two phases meet along a contact arc; at small eps > 0
    the positivity set becomes connected and the complement pinches, which
    is where high Weiss densities (toward pi) are expected.

    A logarithmic radial comparison forces the first phase to cover a ball
    of radius exp(C/9), so the box (x_lo, x_hi, y_lo, y_hi) must pad the
    balls by at least that much for the contact geometry to fit; the
    default box does exactly that.

    The scalar run solves the sign-blind reduction with data +C / -C; its
    minimizer taking both signs certifies the double-phase structure, and
    its phase portrait seeds the vector run.
    """
    if eps < 0 or c_value <= 0:
        raise ValidationError("eps must be >= 0 and C > 0")
    reach = math.exp(c_value / 9.0)
    if box is None:
        box = (-1.0 - reach - 2 * h, 4.0 + reach + 2 * h,
               -1.0 - reach - 2 * h, 1.0 + reach + 2 * h)
    lo_x, hi_x, lo_y, hi_y = (float(b) for b in box)
    if (lo_x > -1.0 - reach or hi_x < 4.0 + reach
            or lo_y > -1.0 - reach or hi_y < 1.0 + reach):
        raise GeometryError(
            f"box must pad both balls by the comparison radius exp(C/9) = {reach:.4g}")
    cols = int(math.ceil((hi_x - lo_x) / h)) + 1
    rows = int(math.ceil((hi_y - lo_y) / h)) + 1
    origin = (lo_x, lo_y)
    shape = (rows, cols)
    ball_a, ball_b = _ball(0.0, 0.0), _ball(3.0, 0.0)

    scalar_spec = vectorial(n_components=1, lam1=1.0)
    scalar_res = minimize(box_problem(
        origin, shape, h, scalar_spec,
        [(ball_a, (c_value,)), (ball_b, (-c_value,))],
        kappa_factors=kappa_factors, max_iters=max_iters))
    v = scalar_res.u.values[:, :, 0]
    tol = 1e-6 * c_value
    both_phases = bool(np.any(v > tol) and np.any(v < -tol))

    vector_spec = vectorial(n_components=2, lam1=1.0)
    vp = box_problem(
        origin, shape, h, vector_spec,
        [(ball_a, ((1.0 + eps) * c_value, c_value)),
         (ball_b, (-c_value, -c_value))],
        kappa_factors=kappa_factors, max_iters=max_iters)
    # seed with the scalar phase portrait: the positive phase carries the
    # first ball's datum direction, the negative phase the second ball's
    seed = np.stack([(1.0 + eps) * np.maximum(v, 0.0) + np.minimum(v, 0.0), v],
                    axis=-1)
    vec_res = minimize_from(vp, seed)

    u = vec_res.u.values
    norm = np.sqrt(np.sum(u * u, axis=2))
    support = norm > tol
    _, n_comp = scipy.ndimage.label(support)
    comp_equal = bool(np.max(np.abs(u[:, :, 0] - u[:, :, 1])) <= 1e-9 * c_value)

    # the free boundary shows up in two guises: support edges, and interior
    # valleys where |u| dips toward zero along the contact line between the
    # two phases (the zero set there is a curve, not a region)
    valley = vp.grid.mask & ~vp.fixed & (norm <= vec_res.final_kappa)
    scan = _density_scan(vec_res.u, vector_spec, support, valley,
                         r_scan=scan_radius_factor * h)
    return CuspReport(vector=vec_res, scalar=scalar_res,
                      connectivity=int(n_comp), components_equal=comp_equal,
                      both_phases=both_phases, density_scan=scan,
                      eps=eps, c_value=c_value, h=h)


def _density_scan(u_field: DiskField, spec: FunctionalSpec,
                  support: np.ndarray, valley: np.ndarray, r_scan: float,
                  max_points: int = 160) -> list:
    """Weiss densities extrapolated to r = 0 at sampled free-boundary nodes."""
    grid = u_field.grid
    h = grid.h
    boundary = (support & ~scipy.ndimage.binary_erosion(support)) | valley
    x, y = grid.node_xy()
    rows, cols = grid.shape
    x_lo, y_lo = grid.origin
    x_hi = x_lo + (cols - 1) * h
    y_hi = y_lo + (rows - 1) * h
    pad = r_scan + 3 * h
    ok = boundary & (x - pad >= x_lo) & (x + pad <= x_hi) \
        & (y - pad >= y_lo) & (y + pad <= y_hi)
    pts = np.argwhere(ok)
    if pts.size == 0:
        return []
    stride = max(1, len(pts) // max_points)
    out = []
    for r_i, c_i in pts[::stride]:
        x0 = (float(x[r_i, c_i]), float(y[r_i, c_i]))
        try:
            w1 = weiss(u_field, x0, r_scan, spec).w
            w2 = weiss(u_field, x0, r_scan + 2 * h, spec).w
        except GeometryError:
            continue
        slope = (w2 - w1) / (2 * h)
        out.append((x0[0], x0[1], float(w1 - slope * r_scan)))
    return out
