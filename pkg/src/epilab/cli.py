"""Command-line front end: JSON configs with flag overrides, subcommand
dispatch, and deterministic artifact emission with provenance headers.

Exit codes: 0 success, 2 configuration error, 3 numerical failure (with
whatever artifacts were already written left in place).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Optional

import numpy as np

from . import __version__
from .arcs import Trace, eigenpairs
from .blowup import blowup_report, extract_free_boundary, zero_contour
from .errors import ConfigError, EpilabError, ValidationError
from .fields import DiskField, load_field, save_field
from .minimize import cusp_experiment, disk_problem, minimize
from .svgplot import curves_svg, heatmap_svg, segments_svg
from .verify import corpus_case, verify, verify_refined
from .weiss import FunctionalSpec, double_phase, one_phase, vectorial

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

# every command accepts these on top of its own keys
_COMMON = {
    "output_dir": (str, "."),
    "seed": (int, 0),
    "parallelism": (int, 1),
}

_SCHEMAS = {
    "spectral-table": {
        "L": (float, math.pi / 2),
        "J": (int, 8),
    },
    "verify-epi": {
        "kind": (str, "one_phase"),
        "trace_file": (str, None),
        "theta": (float, None),
        "lam1": (float, 1.0),
        "lam2": (float, 2.0),
        "n_components": (int, 2),
        "n_theta": (int, 2048),
        # at-minimum band: wide enough to absorb quadrature error on
        # exact cones at the default resolutions (a few parts in 1e6)
        "num_tol": (float, 1e-5),
        "refine": (bool, False),
    },
    "corpus": {
        "kind": (str, "one_phase"),
        "count": (int, 100),
        "n_theta": (int, 1024),
        "n_components": (int, 2),
    },
    "minimize": {
        "h": (float, 1.0 / 64),
        "max_iters": (int, 20000),
        "datum": (str, "half_plane"),  # half_plane | constant | fourier
        "constant": (float, 0.5),
        "cos": (list, None),
        "sin": (list, None),
        "kind": (str, "one_phase"),
        "lam1": (float, 1.0),
        "lam2": (float, 1.0),
        "weight": (float, None),
        "out": (str, "field.fbf"),
    },
    "cusp": {
        "eps": (float, 0.2),
        "C": (float, 10.0),
        "h": (float, 0.05),
        "max_iters": (int, 20000),
    },
    "blowup": {
        "field": (str, None),
        "x0": (list, [0.0, 0.0]),
        "rmin": (float, None),
        "rmax": (float, None),
        "n_radii": (int, 16),
        "kind": (str, None),
        "lam1": (float, 1.0),
        "lam2": (float, 1.0),
        "max_points": (int, 96),
    },
}

_KIND_CHOICES = ("one_phase", "double_phase", "vectorial")


# --------------------------------------------------------------------------
# configuration


def _check_type(command: str, key: str, value, expected) -> object:
    if expected is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{command}: key {key!r} must be a number")
        return float(value)
    if expected is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{command}: key {key!r} must be an integer")
        return value
    if expected is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{command}: key {key!r} must be a boolean")
        return value
    if expected is list:
        if not isinstance(value, list):
            raise ConfigError(f"{command}: key {key!r} must be a list")
        return value
    if not isinstance(value, str):
        raise ConfigError(f"{command}: key {key!r} must be a string")
    return value


def _load_config_file(path: str) -> dict:
    try:
        with open(path) as f:
            doc = json.load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return doc


def effective_config(command: str, config_path: Optional[str],
                     overrides: dict) -> dict:
    """Defaults, then config-file keys, then explicit flags (flags win)."""
    schema = {**_COMMON, **_SCHEMAS[command]}
    cfg = {k: default for k, (_, default) in schema.items()}
    if config_path:
        doc = _load_config_file(config_path)
        declared = doc.pop("command", command)
        if declared != command:
            raise ConfigError(
                f"config declares command {declared!r} but {command!r} was invoked")
        for key, value in doc.items():
            if key not in schema:
                raise ConfigError(
                    f"unknown config key {key!r} for {command}; allowed: "
                    + ", ".join(sorted(schema)))
            cfg[key] = _check_type(command, key, value, schema[key][0])
    for key, value in overrides.items():
        cfg[key] = value

    threads = os.environ.get("EPILAB_THREADS")
    if threads is not None:
        try:
            cfg["parallelism"] = int(threads)
        except ValueError as exc:
            raise ConfigError(f"EPILAB_THREADS must be an integer, got {threads!r}") from exc
    if cfg["parallelism"] < 1:
        raise ConfigError("parallelism must be >= 1")
    return cfg


def provenance(command: str, cfg: dict) -> dict:
    """Digest of everything that determines the results (not where they go)."""
    payload = {k: v for k, v in cfg.items()
               if k not in ("output_dir", "parallelism")}
    blob = json.dumps({"command": command, "config": payload},
                      sort_keys=True, separators=(",", ":"))
    return {
        "command": command,
        "config_sha256": hashlib.sha256(blob.encode()).hexdigest(),
        "version": __version__,
    }


# --------------------------------------------------------------------------
# artifact writers


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def _write_csv(path: str, fieldnames: list, rows: list, prov: dict) -> None:
    with open(path, "w", newline="") as f:
        f.write(f"# provenance command={prov['command']} "
                f"config_sha256={prov['config_sha256']} "
                f"version={prov['version']}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([_cell(row[k]) for k in fieldnames])


def _jsonable(value):
    """Strict-JSON copy: non-finite floats become null, arrays become lists."""
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else None
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def _write_json(path: str, payload: dict, prov: dict) -> None:
    doc = {"provenance": prov}
    doc.update(payload)
    with open(path, "w") as f:
        json.dump(_jsonable(doc), f, indent=2, sort_keys=True, allow_nan=False)
        f.write("\n")


# --------------------------------------------------------------------------
# subcommands


def _run_spectral_table(cfg: dict, prov: dict, outdir: str) -> None:
    if cfg["L"] <= 0 or cfg["L"] > 2 * math.pi:
        raise ConfigError("L must lie in (0, 2*pi]")
    if cfg["J"] < 1:
        raise ConfigError("J must be >= 1")
    basis = eigenpairs((0.0, cfg["L"]), d=2, n_modes=cfg["J"])
    rows = [{"j": m.j, "lambda": m.lam, "alpha": m.alpha}
            for m in basis.modes]
    _write_csv(os.path.join(outdir, "spectral_table.csv"),
               ["j", "lambda", "alpha"], rows, prov)
    print(f"{'j':>4} {'lambda':>16} {'alpha':>16}")
    for r in rows:
        print(f"{r['j']:>4} {r['lambda']:>16.10g} {r['alpha']:>16.10g}")


def _verify_spec(cfg: dict) -> FunctionalSpec:
    kind = cfg["kind"]
    if kind == "one_phase":
        return one_phase(cfg["lam1"])
    if kind == "double_phase":
        return double_phase(cfg["lam1"], cfg["lam2"])
    if kind == "vectorial":
        return vectorial(cfg["n_components"], cfg["lam1"])
    raise ConfigError(f"kind must be one of {', '.join(_KIND_CHOICES)}")


def _verify_trace(cfg: dict, spec: FunctionalSpec) -> tuple:
    """The configured trace and its density target."""
    if cfg["trace_file"] is not None:
        try:
            with open(cfg["trace_file"]) as f:
                doc = json.load(f)
        except OSError as exc:
            raise ConfigError(f"cannot read trace file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"{cfg['trace_file']}: line {exc.lineno}: {exc.msg}") from exc
        if not isinstance(doc, dict) or "values" not in doc:
            raise ConfigError('trace file must be an object with a "values" key')
        trace = Trace(values=np.asarray(doc["values"], dtype=float))
        theta = cfg["theta"] if cfg["theta"] is not None else doc.get("theta")
        if theta is None:
            raise ConfigError(
                "a custom trace needs a density target: set theta in the "
                "config/flags or in the trace file")
        return trace, float(theta)
    # bundled default: the half-plane trace, flat in the first component
    def datum(th):
        vals = np.zeros((th.size, spec.n_components))
        vals[:, 0] = np.maximum(0.0, np.cos(th))
        return vals
    trace = Trace.from_function(datum, n_samples=cfg["n_theta"])
    if cfg["theta"] is not None:
        return trace, cfg["theta"]
    if spec.kind == "double_phase":
        raise ConfigError("double_phase verification needs trace_file and theta")
    return trace, spec.lam1 * math.pi / 2.0


def _run_verify_epi(cfg: dict, prov: dict, outdir: str) -> None:
    spec = _verify_spec(cfg)
    trace, theta = _verify_trace(cfg, spec)
    if cfg["refine"]:
        reports = verify_refined(trace, spec, theta, num_tol=cfg["num_tol"])
        payload = {"reports": [r.to_dict() for r in reports]}
        last = reports[-1]
    else:
        last = verify(trace, spec, theta, num_tol=cfg["num_tol"])
        payload = {"report": last.to_dict()}
    _write_json(os.path.join(outdir, "epi_report.json"), payload, prov)
    print(f"regime={last.regime} deficit_z={last.deficit_z:.6g} "
          f"deficit_h={last.deficit_h:.6g} achieved_eps={last.achieved_eps:.6g}")


_CORPUS_COLUMNS = ["index", "kind", "theta_target", "branch", "n_arcs",
                   "support_length", "w_z", "w_h", "deficit_z", "deficit_h",
                   "achieved_eps", "regime", "inequality_ok"]


def _corpus_worker(args) -> dict:
    kind, index, seed, n_theta, n_components = args
    return corpus_case(kind, index, seed=seed, n_theta=n_theta,
                       n_components=n_components)


def _run_corpus(cfg: dict, prov: dict, outdir: str) -> None:
    if cfg["kind"] not in _KIND_CHOICES:
        raise ConfigError(f"kind must be one of {', '.join(_KIND_CHOICES)}")
    if cfg["count"] < 1:
        raise ConfigError("count must be >= 1")
    jobs = [(cfg["kind"], i, cfg["seed"], cfg["n_theta"], cfg["n_components"])
            for i in range(cfg["count"])]
    workers = min(cfg["parallelism"], cfg["count"])
    if workers > 1:
        # per-case RNG streams make the split embarrassingly parallel;
        # executor.map keeps submission order, so the merge is stable
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_corpus_worker, jobs, chunksize=8))
    else:
        rows = [_corpus_worker(j) for j in jobs]
    _write_csv(os.path.join(outdir, "corpus.csv"), _CORPUS_COLUMNS, rows, prov)

    excess = [r for r in rows if r["deficit_z"] >= 1e-2]
    eps = sorted(r["achieved_eps"] for r in excess)
    stats = {
        "kind": cfg["kind"],
        "seed": cfg["seed"],
        "n_cases": len(rows),
        "n_excess": len(excess),
        "n_violations": sum(not r["inequality_ok"] for r in rows),
        "min_eps": eps[0] if eps else None,
        "median_eps": eps[len(eps) // 2] if eps else None,
    }
    _write_json(os.path.join(outdir, "corpus_stats.json"), {"stats": stats}, prov)
    print(f"cases={stats['n_cases']} excess={stats['n_excess']} "
          f"violations={stats['n_violations']} min_eps={stats['min_eps']}")


def _minimize_datum(cfg: dict):
    name = cfg["datum"]
    clip = cfg["kind"] != "double_phase"
    if name == "half_plane":
        return lambda th: np.maximum(0.0, np.cos(th))
    if name == "constant":
        c = cfg["constant"]
        return lambda th: np.full_like(th, c)
    if name == "fourier":
        cos_c = [float(c) for c in (cfg["cos"] or [])]
        sin_c = [float(c) for c in (cfg["sin"] or [])]
        if not cos_c and not sin_c:
            raise ConfigError("fourier datum needs cos and/or sin coefficients")

        def fn(th):
            out = np.zeros_like(th)
            for k, c in enumerate(cos_c):
                out += c * np.cos(k * th)
            for k, c in enumerate(sin_c):
                out += c * np.sin((k + 1) * th)
            return np.maximum(0.0, out) if clip else out
        return fn
    raise ConfigError("datum must be half_plane, constant, or fourier")


def _minimize_spec(cfg: dict) -> FunctionalSpec:
    kind = cfg["kind"]
    weight = cfg["weight"]
    if kind == "one_phase":
        return one_phase(cfg["lam1"], weight=weight)
    if kind == "double_phase":
        return double_phase(cfg["lam1"], cfg["lam2"], weight=weight)
    if kind == "vectorial":
        # scalar sign-blind reduction; multi-component runs live under `cusp`
        return vectorial(1, cfg["lam1"], weight=weight)
    raise ConfigError(f"kind must be one of {', '.join(_KIND_CHOICES)}")


def _run_minimize(cfg: dict, prov: dict, outdir: str) -> None:
    spec = _minimize_spec(cfg)
    problem = disk_problem(_minimize_datum(cfg), cfg["h"], spec,
                           max_iters=cfg["max_iters"])
    res = minimize(problem)
    out_path = os.path.join(outdir, cfg["out"])
    save_field(res.u, out_path, meta=prov)
    report = {
        "kind": spec.kind,
        "h": cfg["h"],
        "energy": res.energy,
        "converged": res.converged,
        "final_kappa": res.final_kappa,
        "iterations": int(res.energy_history[-1][0]) if res.energy_history else 0,
        "backend": res.backend,
        "field": cfg["out"],
    }
    _write_json(os.path.join(outdir, "minimize_report.json"),
                {"report": report}, prov)
    print(f"energy={res.energy:.6g} converged={res.converged} -> {out_path}")


def _run_cusp(cfg: dict, prov: dict, outdir: str) -> None:
    rep = cusp_experiment(cfg["eps"], cfg["C"], h=cfg["h"],
                          max_iters=cfg["max_iters"])
    save_field(rep.vector.u, os.path.join(outdir, "cusp_vector.fbf"), meta=prov)
    save_field(rep.scalar.u, os.path.join(outdir, "cusp_scalar.fbf"), meta=prov)
    payload = {
        "report": {
            "eps": rep.eps,
            "C": rep.c_value,
            "h": rep.h,
            "connectivity": rep.connectivity,
            "components_equal": rep.components_equal,
            "both_phases": rep.both_phases,
            "max_scan_density": rep.max_scan_density(),
            "density_scan": [[x, y, t] for x, y, t in rep.density_scan],
            "vector_field": "cusp_vector.fbf",
            "scalar_field": "cusp_scalar.fbf",
        }
    }
    _write_json(os.path.join(outdir, "cusp_report.json"), payload, prov)
    print(f"connectivity={rep.connectivity} both_phases={rep.both_phases} "
          f"max_scan_density={rep.max_scan_density():.6g}")


def _blowup_spec(cfg: dict, field: DiskField) -> FunctionalSpec:
    kind = cfg["kind"]
    if kind is None:
        kind = "one_phase" if field.n_components == 1 else "vectorial"
    if kind == "one_phase":
        return one_phase(cfg["lam1"])
    if kind == "double_phase":
        return double_phase(cfg["lam1"], cfg["lam2"])
    if kind == "vectorial":
        return vectorial(field.n_components, cfg["lam1"])
    raise ConfigError(f"kind must be one of {', '.join(_KIND_CHOICES)}")


_BOUNDARY_COLUMNS = ["x", "y", "normal_x", "normal_y", "cone_eps",
                     "theta_hat", "tag_forward", "tag_backward"]


def _run_blowup(cfg: dict, prov: dict, outdir: str) -> None:
    if cfg["field"] is None:
        raise ConfigError("blowup needs --field (path to a .fbf file)")
    try:
        field = load_field(cfg["field"])
    except OSError as exc:
        raise ConfigError(f"cannot read field file: {exc}") from exc
    x0 = cfg["x0"]
    if len(x0) != 2:
        raise ConfigError("x0 must be two numbers: x,y")
    x0 = (float(x0[0]), float(x0[1]))
    spec = _blowup_spec(cfg, field)

    rep = blowup_report(field, x0, spec, r_min=cfg["rmin"], r_max=cfg["rmax"],
                        n_radii=cfg["n_radii"])
    _write_json(os.path.join(outdir, "blowup.json"), {"report": rep.to_dict()},
                prov)

    curve_rows = [{
        "r": p.r, "w": p.w, "deficit": p.deficit,
        "dirichlet": p.report.dirichlet if p.report else None,
        "boundary": p.report.boundary if p.report else None,
        "measure_term": p.report.measure_term if p.report else None,
    } for p in rep.curve]
    _write_csv(os.path.join(outdir, "weiss_curve.csv"),
               ["r", "w", "deficit", "dirichlet", "boundary", "measure_term"],
               curve_rows, prov)

    boundary_rows = []
    segments = []
    points = []
    if not field.is_polar:
        sample = extract_free_boundary(field, spec,
                                       max_points=cfg["max_points"])
        segments = zero_contour(field)
        for q in sample.points:
            points.append(q.x)
            boundary_rows.append({
                "x": q.x[0], "y": q.x[1],
                "normal_x": None if q.e is None else q.e[0],
                "normal_y": None if q.e is None else q.e[1],
                "cone_eps": q.cone_eps,
                "theta_hat": q.theta_hat,
                "tag_forward": q.tags[0] if q.tags else None,
                "tag_backward": q.tags[1] if q.tags else None,
            })
    _write_csv(os.path.join(outdir, "boundary.csv"), _BOUNDARY_COLUMNS,
               boundary_rows, prov)

    norms = field.norms()
    if field.is_polar:
        extent = (0.0, 2 * math.pi, 0.0, 1.0)
        heatmap_svg(norms, extent, os.path.join(outdir, "field.svg"),
                    title="|u| (columns: angle, rows: radius)")
    else:
        g = field.grid
        rows_n, cols_n = g.shape
        extent = (g.origin[0], g.origin[0] + (cols_n - 1) * g.h,
                  g.origin[1], g.origin[1] + (rows_n - 1) * g.h)
        heatmap_svg(norms, extent, os.path.join(outdir, "field.svg"),
                    mask=g.mask, title="|u|")
    segments_svg(segments, extent, os.path.join(outdir, "contour.svg"),
                 points=points, title="zero contour and sampled points")
    curves_svg([([p.r for p in rep.curve], [p.w for p in rep.curve], "W(r)")],
               os.path.join(outdir, "weiss_curve.svg"),
               title="Weiss energy vs radius", xlabel="r", ylabel="W",
               hlines=[(rep.theta_hat, "extrapolated density")])

    kind = rep.classification.kind
    print(f"classification={kind} residual={rep.residual:.6g} "
          f"theta_hat={rep.theta_hat:.6g}")


_RUNNERS = {
    "spectral-table": _run_spectral_table,
    "verify-epi": _run_verify_epi,
    "corpus": _run_corpus,
    "minimize": _run_minimize,
    "cusp": _run_cusp,
    "blowup": _run_blowup,
}


# --------------------------------------------------------------------------
# argument parsing


def _parse_float_list(text: str) -> list:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}") from exc


def _add_flags(sub: argparse.ArgumentParser, schema: dict) -> None:
    for key, (typ, _default) in schema.items():
        flag = "--" + key.replace("_", "-") if key != "C" else "--C"
        kwargs: dict = {"default": argparse.SUPPRESS, "dest": key}
        if typ is bool:
            kwargs["action"] = "store_true"
        elif typ is list:
            kwargs["type"] = _parse_float_list
        else:
            kwargs["type"] = typ
        sub.add_argument(flag, **kwargs)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epilab",
        description="Free-boundary laboratory: epiperimetric verification, "
                    "grid minimization, and blow-up analysis.")
    parser.add_argument("--version", action="version",
                        version=f"epilab {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)
    for command, schema in _SCHEMAS.items():
        sub = subs.add_parser(command)
        sub.add_argument("--config", default=None,
                         help="JSON config file; explicit flags override it")
        _add_flags(sub, {**_COMMON, **schema})
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad flags, matching the config-error code
        return int(exc.code or 0)
    overrides = {k: v for k, v in vars(args).items()
                 if k not in ("command", "config")}
    try:
        cfg = effective_config(args.command, args.config, overrides)
    except ConfigError as exc:
        print(f"epilab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    prov = provenance(args.command, cfg)
    outdir = cfg["output_dir"]
    try:
        os.makedirs(outdir, exist_ok=True)
        _RUNNERS[args.command](cfg, prov, outdir)
    except (ConfigError, ValidationError) as exc:
        print(f"epilab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EpilabError as exc:
        print(f"epilab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"epilab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
