"""Epiperimetric-inequality verification on boundary traces.

``verify`` builds the homogeneous extension z and the assembled competitor h
for a trace, evaluates the Weiss energy of both at the unit ball, and
reports the achieved contraction factor

    eps = 1 - (W(h) - Theta) / (W(z) - Theta)

whenever the trace has positive energy excess W(z) - Theta.  ``corpus_run``
drives this over randomized trace families (per-functional) with
deterministic per-case seeding and aggregates the results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .arcs import TWO_PI, Trace, decompose_support, eigenpairs
from .competitors import AssemblyParams, CompetitorBundle, assemble_competitor
from .errors import ValidationError
from .weiss import (DOUBLE_PHASE, ONE_PHASE, VECTORIAL, FunctionalSpec,
                    double_phase, one_phase, vectorial, weiss)

#: a case counts as having genuine energy excess above this deficit
EXCESS_FLOOR = 1e-2

REGIME_EXCESS = "excess"
REGIME_AT_MINIMUM = "at_minimum"
REGIME_BELOW = "below_density"


@dataclass(frozen=True)
class EpiReport:
    """Outcome of one epiperimetric verification."""

    kind: str
    theta_target: float
    branch: str
    w_z: float
    w_h: float
    deficit_z: float
    deficit_h: float
    achieved_eps: float
    regime: str
    inequality_ok: bool
    support: tuple[tuple[float, float], ...]
    pieces: tuple[dict, ...]
    n_r: int
    n_theta: int

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "theta_target": self.theta_target,
            "branch": self.branch,
            "w_z": self.w_z,
            "w_h": self.w_h,
            "deficit_z": self.deficit_z,
            "deficit_h": self.deficit_h,
            "achieved_eps": self.achieved_eps,
            "regime": self.regime,
            "inequality_ok": self.inequality_ok,
            "support": [list(a) for a in self.support],
            "pieces": list(self.pieces),
            "n_r": self.n_r,
            "n_theta": self.n_theta,
        }


def verify(trace: Trace, spec: FunctionalSpec, theta_target: float,
           params: Optional[AssemblyParams] = None,
           num_tol: float = 1e-8) -> EpiReport:
    """Assemble the competitor for a trace and compare Weiss energies."""
    if params is None:
        params = AssemblyParams()
    bundle = assemble_competitor(trace, spec, theta_target, params=params)
    rep_z = weiss(bundle.z, (0.0, 0.0), 1.0, spec, zero_tol=params.zero_tol)
    rep_h = weiss(bundle.h, (0.0, 0.0), 1.0, spec, zero_tol=params.zero_tol)
    dz = rep_z.w - theta_target
    dh = rep_h.w - theta_target
    tol = num_tol * (1.0 + abs(rep_z.w))
    if dz > tol:
        regime = REGIME_EXCESS
        eps = 1.0 - dh / dz
    elif dz < -tol:
        regime = REGIME_BELOW
        eps = float("nan")
    else:
        regime = REGIME_AT_MINIMUM
        eps = 0.0
    pieces = tuple({
        "arc": list(p.arc), "role": p.role, "phase": p.phase, "rho": p.rho,
        "eps_internal": p.eps_internal, "n_modes": p.n_modes, "tail": p.tail,
    } for p in bundle.pieces)
    return EpiReport(
        kind=spec.kind, theta_target=theta_target, branch=bundle.branch,
        w_z=rep_z.w, w_h=rep_h.w, deficit_z=dz, deficit_h=dh,
        achieved_eps=eps, regime=regime,
        inequality_ok=bool(dh <= dz + tol),
        support=bundle.support.arcs, pieces=pieces,
        n_r=params.n_r, n_theta=trace.n_samples)


def verify_refined(trace: Trace, spec: FunctionalSpec, theta_target: float,
                   n_r_levels: Sequence[int] = (128, 256, 512),
                   params: Optional[AssemblyParams] = None,
                   num_tol: float = 1e-8) -> list[EpiReport]:
    """Re-run verification over a ladder of radial resolutions."""
    if params is None:
        params = AssemblyParams()
    out = []
    for n_r in n_r_levels:
        out.append(verify(trace, spec, theta_target,
                          params=AssemblyParams(
                              delta0=params.delta0, eta0=params.eta0,
                              rho1=params.rho1, n_modes=params.n_modes,
                              n_r=int(n_r), rho_ladder=params.rho_ladder,
                              zero_tol=params.zero_tol),
                          num_tol=num_tol))
    return out


# --------------------------------------------------------------------------
# randomized corpus


def _aligned(x: float, m: int) -> float:
    d = TWO_PI / m
    return round(x / d) * d


def _random_arcs(rng: np.random.Generator, m: int, max_arcs: int = 3,
                 min_len: float = 0.35, max_len: float = 2.6,
                 gap: float = 0.25, budget: float = TWO_PI - 0.45) -> list[tuple[float, float]]:
    """Disjoint grid-aligned arcs with bounded total length."""
    k = int(rng.integers(1, max_arcs + 1))
    lengths = []
    for _ in range(k):
        remaining = budget - sum(lengths) - gap * (len(lengths) + 1)
        if remaining < min_len:
            break
        lengths.append(float(rng.uniform(min_len, min(max_len, remaining))))
    slack = TWO_PI - sum(lengths) - gap * len(lengths)
    cuts = np.sort(rng.uniform(0.0, slack, size=len(lengths)))
    arcs = []
    pos = float(rng.uniform(0.0, TWO_PI))
    prev_cut = 0.0
    for L, cut in zip(lengths, cuts):
        pos += (cut - prev_cut) + (gap if arcs else 0.0)
        prev_cut = cut
        start = _aligned(pos % TWO_PI, m)
        length = max(_aligned(L, m), TWO_PI / m * 8)
        arcs.append((start, length))
        pos += L
    return arcs


def _random_arc_signal(rng: np.random.Generator, arc: tuple[float, float],
                       m: int, n_modes: int = 8) -> np.ndarray:
    """sum_j c_j phi_j on the arc (c_j ~ N(0, j^-2)), sampled on the grid."""
    basis = eigenpairs(arc, d=2, n_modes=n_modes)
    coeffs = rng.normal(0.0, 1.0, size=n_modes) / (np.arange(n_modes) + 1.0)
    theta = np.arange(m) * (TWO_PI / m)
    phi = basis.evaluate(theta)
    return coeffs @ phi


def _corpus_trace(rng: np.random.Generator, kind: str, m: int,
                  n_components: int) -> tuple[Trace, float]:
    """One random admissible trace and its density target.

    One-phase draws are redrawn until the detected support length lands in
    [0.5, 2*pi - 0.3]; double-phase traces carry exactly one positive and
    one negative arc.
    """
    for _ in range(50):
        arcs = _random_arcs(rng, m)
        if kind == ONE_PHASE:
            sig = np.zeros(m)
            for arc in arcs:
                sig += np.maximum(_random_arc_signal(rng, arc, m), 0.0)
            if np.max(sig) <= 1e-6:
                continue
            trace = Trace(values=sig[:, None])
            if 0.5 <= decompose_support(trace).total_length <= TWO_PI - 0.3:
                return trace, math.pi / 2.0
        elif kind == DOUBLE_PHASE:
            if len(arcs) < 2:
                continue
            pos = np.maximum(_random_arc_signal(rng, arcs[0], m), 0.0)
            neg = np.maximum(_random_arc_signal(rng, arcs[1], m), 0.0)
            if np.max(pos) > 1e-6 and np.max(neg) > 1e-6:
                return Trace(values=(pos - neg)[:, None]), 3.0 * math.pi / 2.0
        elif kind == VECTORIAL:
            sig = np.zeros((m, n_components))
            for arc in arcs:
                for i in range(n_components):
                    sig[:, i] += _random_arc_signal(rng, arc, m)
            mask = np.zeros(m, dtype=bool)
            theta = np.arange(m) * (TWO_PI / m)
            for arc in arcs:
                rel = np.mod(theta - arc[0], TWO_PI)
                mask |= rel <= arc[1]
            sig[~mask] = 0.0
            if np.max(np.abs(sig)) > 1e-6:
                return Trace(values=sig), math.pi / 2.0
        else:
            raise ValidationError(f"unknown functional kind {kind!r}")
    raise ValidationError("failed to draw a nondegenerate corpus trace")


def _corpus_spec(kind: str, n_components: int) -> FunctionalSpec:
    if kind == ONE_PHASE:
        return one_phase(lam1=1.0)
    if kind == DOUBLE_PHASE:
        return double_phase(lam1=1.0, lam2=2.0)
    if kind == VECTORIAL:
        return vectorial(n_components=n_components, lam1=1.0)
    raise ValidationError(f"unknown functional kind {kind!r}")


@dataclass
class CorpusResult:
    kind: str
    seed: int
    rows: list[dict] = field(default_factory=list)

    @property
    def n_cases(self) -> int:
        return len(self.rows)

    def excess_rows(self) -> list[dict]:
        return [r for r in self.rows if r["deficit_z"] >= EXCESS_FLOOR]

    def stats(self) -> dict:
        exc = self.excess_rows()
        eps = sorted(r["achieved_eps"] for r in exc)
        violations = [r for r in self.rows if not r["inequality_ok"]]
        return {
            "kind": self.kind,
            "seed": self.seed,
            "n_cases": self.n_cases,
            "n_excess": len(exc),
            "n_violations": len(violations),
            "min_eps": eps[0] if eps else float("nan"),
            "median_eps": eps[len(eps) // 2] if eps else float("nan"),
        }


def corpus_case(kind: str, index: int, seed: int = 0,
                n_theta: int = 1024, n_components: int = 2,
                params: Optional[AssemblyParams] = None) -> dict:
    """Run one corpus case in isolation.

    Case ``index`` draws from an RNG seeded with ``seed ^ index``, so any
    case can be reproduced on its own and the corpus can be split across
    workers without changing results.
    """
    if params is None:
        params = AssemblyParams()
    rng = np.random.default_rng(seed ^ index)
    trace, theta_target = _corpus_trace(rng, kind, n_theta, n_components)
    rep = verify(trace, _corpus_spec(kind, n_components), theta_target,
                 params=params)
    return {
        "index": index,
        "kind": kind,
        "theta_target": theta_target,
        "branch": rep.branch,
        "n_arcs": len(rep.support),
        "support_length": sum(a[1] for a in rep.support),
        "w_z": rep.w_z,
        "w_h": rep.w_h,
        "deficit_z": rep.deficit_z,
        "deficit_h": rep.deficit_h,
        "achieved_eps": rep.achieved_eps,
        "regime": rep.regime,
        "inequality_ok": rep.inequality_ok,
    }


def corpus_run(kind: str, n_cases: int, seed: int = 0,
               n_theta: int = 1024, n_components: int = 2,
               params: Optional[AssemblyParams] = None) -> CorpusResult:
    """Verify the inequality over a family of randomized traces."""
    result = CorpusResult(kind=kind, seed=seed)
    for i in range(n_cases):
        result.rows.append(corpus_case(kind, i, seed=seed, n_theta=n_theta,
                                       n_components=n_components, params=params))
    return result
