"""Pure-NumPy implementation of the grid energy kernels.

Semantics shared with the compiled version: the energy of a field v on a
masked grid with spacing h is

    E = sum_edges |v_a - v_b|^2  +  h^2 * sum_nodes q * Phi_kappa(|v|),

where edges join horizontally/vertically adjacent active nodes and
Phi_kappa(t) = min(t^2/kappa^2, 1).  The first sum is exactly
h^2 * |forward-difference gradient|^2.  Gradients are zeroed at non-free
(Dirichlet or inactive) nodes so a descent step cannot move them.
"""

import numpy as np


def energy(values, active, free, q, kappa, h):
    v = values
    act = active.astype(bool)
    ex = (act[:, 1:] & act[:, :-1])[..., None]
    ey = (act[1:, :] & act[:-1, :])[..., None]
    vx = v[:, 1:, :] - v[:, :-1, :]
    vy = v[1:, :, :] - v[:-1, :, :]
    dir_term = float(np.sum(vx * vx * ex) + np.sum(vy * vy * ey))
    t2 = np.sum(v * v, axis=2)
    k2 = kappa * kappa
    phi = np.where(t2 < k2, t2 / k2, 1.0)
    meas = h * h * float(np.sum(q * phi * act))
    return dir_term + meas


def energy_and_grad(values, active, free, q, kappa, h):
    v = values
    act = active.astype(bool)
    ex = (act[:, 1:] & act[:, :-1])[..., None]
    ey = (act[1:, :] & act[:-1, :])[..., None]
    vx = (v[:, 1:, :] - v[:, :-1, :]) * ex
    vy = (v[1:, :, :] - v[:-1, :, :]) * ey
    dir_term = float(np.sum(vx * vx) + np.sum(vy * vy))
    t2 = np.sum(v * v, axis=2)
    k2 = kappa * kappa
    small = t2 < k2
    phi = np.where(small, t2 / k2, 1.0)
    meas = h * h * float(np.sum(q * phi * act))

    g = np.zeros_like(v)
    g[:, 1:, :] += 2.0 * vx
    g[:, :-1, :] -= 2.0 * vx
    g[1:, :, :] += 2.0 * vy
    g[:-1, :, :] -= 2.0 * vy
    g += (2.0 * h * h / k2) * (q * small * act)[..., None] * v
    g *= free[..., None]
    return dir_term + meas, g
