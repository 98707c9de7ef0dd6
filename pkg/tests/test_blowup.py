"""Blow-up analysis: rescaling, Weiss curves, decay fits, profile
classification, and free-boundary extraction with cone/density annotations."""

import json
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from epilab.blowup import (CurvePoint, blowup_report, classify_blowup,
                           density_estimate, extract_free_boundary, fit_decay,
                           homogeneity_deficit, rescale, rescaled_trace,
                           weiss_curve)
from epilab.errors import GeometryError
from epilab.fields import CartesianGrid, DiskField, PolarGrid, sample_polar
from epilab.minimize import disk_problem, minimize
from epilab.weiss import double_phase, one_phase, vectorial

H = 1.0 / 64


def aligned_grid(h=1.0 / 32, half=1.25):
    """Square grid whose node lines pass through x = 0 and y = 0."""
    n = int(round(2 * half / h)) + 1
    xs = -half + h * np.arange(n)
    xg, yg = np.meshgrid(xs, xs)
    grid = CartesianGrid((-half, -half), h, np.ones((n, n), bool))
    return grid, xg, yg


def half_plane_field(h=1.0 / 32, kink=0.0, slope=1.0):
    grid, xg, _ = aligned_grid(h)
    return DiskField(grid, (slope * np.maximum(0.0, xg - kink))[:, :, None])


def two_plane_field(mu1, mu2, phi=0.0, h=1.0 / 32):
    grid, xg, yg = aligned_grid(h)
    c = np.cos(np.arctan2(yg, xg) - phi) * np.hypot(xg, yg)
    return DiskField(grid, (np.where(c > 0, mu1, mu2) * c)[:, :, None])


def linear_vector_field(amps, dirs, h=1.0 / 32):
    grid, xg, yg = aligned_grid(h)
    comps = [a * (e[0] * xg + e[1] * yg) for a, e in zip(amps, dirs)]
    return DiskField(grid, np.stack(comps, axis=-1))


def quarter_harmonic_field(n_r=128, n_theta=512):
    """u = rho^{3/2} sin(2 theta) on the quarter sector, zero elsewhere.

    3/2-homogeneous and harmonic where positive, so no flat blow-up profile
    fits its trace, and the homogeneity deficit at radius r is exactly
    (r/4) * integral of (sin 2t)^2 over [0, pi/2] = pi * r / 16.
    """
    grid = PolarGrid(n_r, n_theta)
    rho = grid.radii()[:, None]
    th = grid.angles()[None, :]
    angular = np.where((th >= 0.0) & (th <= math.pi / 2), np.sin(2 * th), 0.0)
    return DiskField(grid, (rho ** 1.5 * angular)[:, :, None])


def perturbed_half_plane_datum(th):
    return np.maximum(0.0, np.sin(th) + 0.1 * np.sin(3 * th))


def flat_half_plane_datum(th):
    return np.maximum(0.0, np.cos(th))


@pytest.fixture(scope="module")
def flat_minimizer():
    return minimize(disk_problem(flat_half_plane_datum, H, one_phase(1.0)))


@pytest.fixture(scope="module")
def flat_sample(flat_minimizer):
    return extract_free_boundary(flat_minimizer.u, one_phase(1.0))


@pytest.fixture(scope="module")
def perturbed_minimizer():
    return minimize(disk_problem(perturbed_half_plane_datum, H, one_phase(1.0)))


@pytest.fixture(scope="module")
def perturbed_sample(perturbed_minimizer):
    return extract_free_boundary(perturbed_minimizer.u, one_phase(1.0))


@pytest.fixture(scope="module")
def perturbed_report(perturbed_minimizer, perturbed_sample):
    pts = perturbed_sample.points
    x0 = min(pts, key=lambda q: math.hypot(*q.x)).x
    return blowup_report(perturbed_minimizer.u, x0, one_phase(1.0))


# --------------------------------------------------------------------------
# rescaling


def test_rescale_homogeneous_fixed_point():
    # 1-homogeneous around its kink, so u_{x0,r} is r-independent
    u = half_plane_field(h=1.0 / 40, kink=0.1)
    w = rescale(u, (0.1, 0.0), 0.5)
    rng = np.random.default_rng(3)
    rho = rng.uniform(0.1, 1.0, 200)
    th = rng.uniform(0.0, 2 * math.pi, 200)
    got = sample_polar(w, rho, th)[:, 0]
    assert np.abs(got - rho * np.maximum(0.0, np.cos(th))).max() < 5e-4


def test_rescaled_trace_values():
    u = half_plane_field(h=1.0 / 40, kink=0.1)
    th, vals = rescaled_trace(u, (0.1, 0.0), 0.5)
    assert vals.shape == (th.size, 1)
    assert np.abs(vals[:, 0] - np.maximum(0.0, np.cos(th))).max() < 5e-4


def test_rescale_composition():
    # zooming twice matches one zoom by the product of the factors
    u = half_plane_field(h=1.0 / 40, kink=0.1)
    w_two_step = rescale(rescale(u, (0.1, 0.0), 0.8), (0.0, 0.0), 0.5)
    w_direct = rescale(u, (0.1, 0.0), 0.4)
    th = 2 * math.pi * np.arange(256) / 256
    a = sample_polar(w_two_step, np.ones(256), th)[:, 0]
    b = sample_polar(w_direct, np.ones(256), th)[:, 0]
    assert np.abs(a - b).max() < 0.02


def test_rescale_output_grid():
    u = half_plane_field()
    w = rescale(u, (0.0, 0.0), 0.5)
    assert w.grid.n_r >= 16
    assert w.grid.n_theta >= 64 and w.grid.n_theta % 2 == 0


def test_rescale_ball_must_fit():
    u = half_plane_field(h=1.0 / 40)
    with pytest.raises(GeometryError):
        rescale(u, (1.0, 0.0), 0.5)


def test_rescale_polar_center_only():
    u = quarter_harmonic_field()
    with pytest.raises(GeometryError):
        rescale(u, (0.3, 0.0), 0.2)


# --------------------------------------------------------------------------
# Weiss curves and the homogeneity deficit


def test_half_plane_curve_sits_at_density():
    u = half_plane_field()
    curve = weiss_curve(u, (0.0, 0.0), [0.5, 0.25, 0.75, 0.375, 0.625],
                        one_phase(1.0))
    radii = [p.r for p in curve]
    assert radii == sorted(radii)
    for p in curve:
        assert abs(p.w - math.pi / 2) < 0.01
        assert p.deficit < 1e-12
        assert p.report is not None and p.report.r_used > 0


def test_homogeneity_deficit_oracle():
    u = quarter_harmonic_field()
    for r in (0.3, 0.5, 0.7):
        assert abs(homogeneity_deficit(u, (0.0, 0.0), r) - math.pi * r / 16) \
            < 1e-3 * r


def test_homogeneity_deficit_vanishes_on_cone():
    u = half_plane_field()
    assert homogeneity_deficit(u, (0.0, 0.0), 0.5) < 1e-12


def test_fit_decay_recovers_power_law():
    radii = np.geomspace(0.05, 0.4, 12)
    theta = math.pi / 2
    curve = [CurvePoint(r=float(r), w=theta + 0.3 * r ** 0.5, deficit=0.0)
             for r in radii]
    fit = fit_decay(curve, theta)
    assert not fit.already_at_density
    assert abs(fit.gamma - 0.5) < 1e-9
    assert abs(fit.prefactor - 0.3) < 1e-9
    assert fit.lower < 0.5 < fit.upper
    assert fit.n_points == 12


def test_fit_decay_flags_flat_curve():
    curve = [CurvePoint(r=r, w=math.pi / 2 + 1e-12, deficit=0.0)
             for r in (0.1, 0.2, 0.3, 0.4)]
    fit = fit_decay(curve, math.pi / 2)
    assert fit.already_at_density


# --------------------------------------------------------------------------
# classification against exact profiles


def test_classify_half_plane_exact():
    u = half_plane_field(slope=1.4)
    res = classify_blowup(u, (0.0, 0.0), one_phase(1.0))
    prof = res.classification
    assert prof.kind == "half_plane"
    assert res.residual < 1e-6
    assert abs(prof.slope - 1.4) < 1e-3
    assert_allclose(prof.e, (1.0, 0.0), atol=1e-3)
    assert_allclose(np.abs(prof.xi), (1.0,), atol=1e-3)


def test_classify_two_plane_exact():
    lam1, lam2 = 2.0, 1.0
    mu2 = 1.2
    mu1 = math.sqrt(mu2 ** 2 + lam1 - lam2)
    res = classify_blowup(two_plane_field(mu1, mu2), (0.0, 0.0),
                          double_phase(lam1, lam2))
    prof = res.classification
    assert prof.kind == "two_plane"
    assert res.residual < 1e-6
    assert abs(prof.mu1 - mu1) < 1e-3 and abs(prof.mu2 - mu2) < 1e-3
    assert_allclose(prof.e, (1.0, 0.0), atol=1e-3)


def test_classify_two_plane_rotated():
    # the kink no longer lies on grid lines; parameters must still come
    # back sharp even though interpolation smears the trace slightly
    lam1, lam2 = 2.0, 1.0
    mu2 = 1.2
    mu1 = math.sqrt(mu2 ** 2 + lam1 - lam2)
    phi = 0.35
    res = classify_blowup(two_plane_field(mu1, mu2, phi=phi), (0.0, 0.0),
                          double_phase(lam1, lam2))
    prof = res.classification
    assert prof.kind == "two_plane"
    assert res.residual < 0.01 * res.trace_norm + 0.01
    assert abs(prof.mu1 - mu1) < 1e-3 and abs(prof.mu2 - mu2) < 1e-3
    assert_allclose(prof.e, (math.cos(phi), math.sin(phi)), atol=1e-3)


def test_classify_linear_vector_exact():
    amps = (1.3, 0.7)
    dirs = ((1.0, 0.0), (0.6, 0.8))
    res = classify_blowup(linear_vector_field(amps, dirs), (0.0, 0.0),
                          vectorial(2))
    prof = res.classification
    assert prof.kind == "linear_vector"
    assert res.residual < 1e-6
    assert_allclose(prof.amplitudes, amps, atol=1e-3)
    assert prof.isolated_hint  # the two directions span distinct lines


def test_classify_linear_vector_parallel():
    res = classify_blowup(linear_vector_field((1.3, 0.7), ((1.0, 0.0),
                                                           (1.0, 0.0))),
                          (0.0, 0.0), vectorial(2))
    assert res.classification.kind == "linear_vector"
    assert not res.classification.isolated_hint


def test_classify_rejects_non_cone():
    # 3/2-homogeneous trace: no half-plane profile comes close
    res = classify_blowup(quarter_harmonic_field(), (0.0, 0.0),
                          one_phase(1.0), r=0.5)
    assert res.classification.kind == "undetermined"
    assert res.residual > 0.05 * res.trace_norm


# --------------------------------------------------------------------------
# density extrapolation


def test_density_half_plane():
    got = density_estimate(half_plane_field(), (0.0, 0.0), one_phase(1.0))
    assert abs(got - math.pi / 2) < 0.02


def test_density_two_plane():
    lam1, lam2 = 2.0, 1.0
    mu2 = 1.2
    mu1 = math.sqrt(mu2 ** 2 + lam1 - lam2)
    got = density_estimate(two_plane_field(mu1, mu2), (0.0, 0.0),
                           double_phase(lam1, lam2))
    assert abs(got - (lam1 + lam2) * math.pi / 2) < 0.06


def test_density_linear_vector():
    u = linear_vector_field((1.3, 0.7), ((1.0, 0.0), (0.6, 0.8)))
    assert abs(density_estimate(u, (0.0, 0.0), vectorial(2)) - math.pi) < 0.06


def test_density_needs_room():
    with pytest.raises(GeometryError):
        density_estimate(half_plane_field(), (1.2, 0.0), one_phase(1.0))


def test_report_needs_room():
    with pytest.raises(GeometryError):
        blowup_report(half_plane_field(), (1.2, 0.0), one_phase(1.0))


# --------------------------------------------------------------------------
# full reports on a minimizer


def test_minimizer_curve_monotone(perturbed_report):
    w = [p.w for p in perturbed_report.curve]
    assert len(w) >= 10
    for a, b in zip(w, w[1:]):
        assert b >= a - 1e-3


def test_minimizer_density_below_curve(perturbed_report):
    assert perturbed_report.theta_hat <= min(p.w for p in
                                             perturbed_report.curve) + 0.01


def test_minimizer_monotonicity_identity(perturbed_report):
    # dW/dr dominates deficit/r for minimizers, up to discretization slack
    c = perturbed_report.curve
    for a, b in zip(c, c[1:]):
        slope = (b.w - a.w) / (b.r - a.r)
        assert slope >= a.deficit / a.r - 0.08


def test_minimizer_decay_fit(perturbed_report):
    fit = fit_decay(perturbed_report.curve, math.pi / 2)
    assert not fit.already_at_density
    assert fit.n_points >= 10
    assert fit.gamma > 0
    assert fit.lower > 0
    assert fit.lower < fit.gamma < fit.upper


def test_minimizer_trace_cauchy_rate(perturbed_minimizer, perturbed_report):
    # || u_{x0,t} - u_{x0,s} ||_{L2} <= C t^{gamma/2} for s < t, with a
    # single fitted C: no pair may exceed the fitted law by more than 2.5x
    rep = perturbed_report
    gamma = fit_decay(rep.curve, math.pi / 2).gamma
    dtheta = 2 * math.pi / 256
    traces = [rescaled_trace(perturbed_minimizer.u, rep.x0, p.r)[1][:, 0]
              for p in rep.curve]
    dists, scales = [], []
    for i in range(len(traces)):
        for j in range(i + 1, len(traces)):
            d = math.sqrt(float(np.sum((traces[j] - traces[i]) ** 2)) * dtheta)
            dists.append(d)
            scales.append(rep.curve[j].r ** (gamma / 2))
    dists = np.array(dists)
    scales = np.array(scales)
    c_fit = float(dists @ scales / (scales @ scales))
    assert c_fit > 0
    assert np.max(dists / (c_fit * scales)) < 2.5


def test_minimizer_classified_as_half_plane(perturbed_report):
    prof = perturbed_report.classification
    assert prof.kind == "half_plane"
    assert abs(prof.slope - 1.0) < 0.1
    assert math.hypot(prof.e[0], prof.e[1] - 1.0) < 0.1
    assert perturbed_report.residual < 0.01


def test_normal_field_holder_sanity(perturbed_sample):
    # log-log regression of |e_x - e_y| on |x - y| must not come out
    # decreasing: normals vary no worse than a Holder modulus
    pairs = [(d, de) for d, de in perturbed_sample.pair_stats if de > 1e-12]
    assert len(pairs) >= 30
    logs = np.log(np.array(pairs))
    slope = np.polyfit(logs[:, 0], logs[:, 1], 1)[0]
    assert slope > -0.05


def test_report_serializes(perturbed_report):
    blob = json.dumps(perturbed_report.to_dict())
    back = json.loads(blob)
    assert back["classification"]["kind"] == "half_plane"
    assert len(back["curve"]) == len(perturbed_report.curve)


# --------------------------------------------------------------------------
# free-boundary extraction


def test_extract_finds_interface(flat_sample):
    pts = flat_sample.points
    assert len(pts) >= 25
    xs = np.array([q.x for q in pts])
    # the interface of the flat datum is the vertical diameter
    assert np.abs(xs[:, 0]).max() <= 3 * H
    assert xs[:, 1].max() > 0.6 and xs[:, 1].min() < -0.6


def test_extract_normals_align(flat_sample):
    pts = flat_sample.points
    # classification may honestly fail where the interface meets the rim
    # and the zoom ball overlaps the fixed datum ring; nowhere else
    missing = [q for q in pts if q.e is None]
    assert len(missing) <= 0.1 * len(pts)
    assert all(math.hypot(*q.x) > 0.8 for q in missing)
    for q in pts:
        if q.e is not None:
            assert math.hypot(q.e[0] - 1.0, q.e[1]) < 0.15
    interior = [q for q in pts if abs(q.x[1]) <= 0.5]
    assert len(interior) >= 10
    for q in interior:
        assert math.hypot(q.e[0] - 1.0, q.e[1]) < 0.08


def test_extract_pair_stats_flat(flat_sample):
    stats = np.array(flat_sample.pair_stats)
    assert stats.shape[0] >= 30
    assert np.all(stats[:, 0] <= 0.3)
    slope = np.polyfit(stats[:, 0], stats[:, 1], 1)[0]
    assert abs(slope) < 0.15


def test_extract_cone_certificates(flat_sample):
    classified = [q for q in flat_sample.points if q.e is not None]
    assert len(classified) >= 25
    for q in classified:
        assert q.cone_eps is not None
        assert 0.0 < q.cone_eps <= 0.5


def test_extract_phase_tags(flat_sample):
    classified = [q for q in flat_sample.points if q.e is not None]
    assert {q.tags for q in classified} == {("positive", "zero")}


def test_extract_densities(flat_sample):
    thetas = np.array([q.theta_hat for q in flat_sample.points
                       if q.theta_hat is not None])
    assert thetas.size >= 20
    # points near the rim pick up datum-ring contamination in the larger
    # extrapolation ball, so the worst case is looser than the bulk
    assert np.abs(thetas - math.pi / 2).max() < 0.12
    assert abs(np.median(thetas) - math.pi / 2) < 0.02


def test_extract_requires_cartesian():
    with pytest.raises(GeometryError):
        extract_free_boundary(quarter_harmonic_field(), one_phase(1.0))


def test_extract_nothing_on_positive_field():
    grid, xg, _ = aligned_grid(h=1.0 / 16)
    u = DiskField(grid, np.full(xg.shape, 0.3)[:, :, None])
    sample = extract_free_boundary(u, one_phase(1.0))
    assert sample.points == [] and sample.pair_stats == []
