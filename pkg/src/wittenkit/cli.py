"""Command-line front end: ``wittenkit {compactify,greens-check,verify-identity,spectrum,sweep}``.

Exit status is 0 when every checked tolerance is met, 2 when a verification
fails (reports are still written) and 1 on input errors (nothing written).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .clifford import build_clifford_rep
from .config import ConfigError, RunConfig, apply_overrides, load_config
from .errors import (DomainError, InfeasibleTransitionError, InvalidInteriorError, MollifierError, ShapeError,
                     ToleranceError, VerificationError)
from .identity import bound_report, compactify, verify_identity
from .kernels import brute_force_g_delta, counter_terms, s_product_direct
from .radial import build_model_manifold, curvature_grid
from .spectral import h_norm_profile, radial_dirac_spectrum, rayleigh_upper_bound
from .witten import Mode, make_family

log = logging.getLogger("wittenkit")

CSV_COLUMNS = ["label", "n", "rho", "sigma", "lhs", "rhs", "residual_rel", "ratio1", "ratio2", "inf_spec_sq"]
INPUT_ERRORS = (InfeasibleTransitionError, DomainError, InvalidInteriorError, ShapeError, ValueError)


class Failed(Exception):
    """A verification check failed after its reports were written."""


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: Path, obj) -> None:
    atomic_write(path, json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def write_csv(path: Path, columns, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in columns])
    atomic_write(path, buf.getvalue())


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


# -- model construction -----------------------------------------------------

def _model(cfg: RunConfig, scale: float | None = None, core: float | None = None):
    interior = cfg.interior
    if core is not None:
        interior = {"kind": "capped", "core": core}
    s = cfg.scale if scale is None else scale
    label = cfg.label or "model"
    if scale is not None or core is not None:
        label = f"{label}-s{s:g}" + (f"-c{core:g}" if core is not None else "")
    model = build_model_manifold(cfg.n, cfg.rho * s / cfg.scale, interior, label=label, scale=s,
                                 grid_points=cfg.mesh_value("curvature_grid"))
    cm = compactify(model, cfg.C_n, cfg.mollifier_width)
    return model, cm


def _spectrum(cfg: RunConfig, cm):
    # a tolerance miss is reported by the caller, after the reports are written
    try:
        spec = radial_dirac_spectrum(cm.Omega, cm.sigma, cm.n, mesh=cfg.mesh_value("spectrum"),
                                     k_max=cfg.mesh_value("k_max"), tol=cfg.tolerances["spectrum"],
                                     max_mesh=cfg.mesh_value("max_spectrum"))
        return spec, True
    except ToleranceError:
        spec = radial_dirac_spectrum(cm.Omega, cm.sigma, cm.n, mesh=cfg.mesh_value("spectrum"),
                                     k_max=cfg.mesh_value("k_max"), tol=None)
        return spec, False


# -- commands ---------------------------------------------------------------

def cmd_compactify(cfg: RunConfig, out: Path) -> None:
    model, cm = _model(cfg)
    comp = cm.comp
    r, curv = curvature_grid(comp, model, cfg.mesh_value("curvature_grid"))
    tol = cfg.tolerances["curvature"]
    ok = bool(np.min(curv) >= -tol)
    write_json(out / "compactification.json", {
        "config": cfg.to_json(), "model": model.to_json(), "compactification": comp.to_json(),
        "min_curvature": float(np.min(curv)), "curvature_tolerance": tol, "passed": ok})
    rows = [{"r": a, "curvature": b, "lambda": float(comp.lam(a)), "Omega": float(cm.Omega(a))}
            for a, b in zip(r, curv)]
    write_csv(out / "curvature.csv", ["r", "curvature", "lambda", "Omega"], rows)
    if not ok:
        raise Failed(f"scalar curvature {np.min(curv):.3e} below -{tol:g}")


def cmd_greens_check(cfg: RunConfig, out: Path) -> None:
    g = cfg.greens
    n = g.get("n", cfg.n)
    sigma, R = g.get("sigma", 1.0), g.get("R", 2.0)
    rep = build_clifford_rep(n)
    ct = counter_terms(rep, sigma, R)
    rows, ok = [], True
    for frac in g.get("points", [0.1, 0.3, 0.5, 0.7, 0.9]):
        rp = frac * ct.R_prime
        y = np.zeros(n)
        y[0] = rp
        closed = float(ct.g_delta(rp))
        for method in g.get("methods", ["product"]):
            tol = cfg.tolerances["greens_mc" if method == "mc" else "greens_product"]
            res = brute_force_g_delta(rep, sigma, R, y, method=method, seed=cfg.seed,
                                      samples=cfg.mesh_value("mc_samples"))
            rel = abs(res.scalar - closed) / abs(closed)
            passed = rel <= tol
            ok &= passed
            rows.append({"r_prime": rp, "method": method, "closed_form": closed, "brute_force": res.scalar,
                         "error_estimate": res.error, "rel_error": rel, "tolerance": tol, "passed": passed})
    radii = np.geomspace(0.05, 5.0, 50) * sigma
    direct = np.array([s_product_direct(rep, sigma, r) for r in radii])
    sprod_err = float(np.max(np.abs(direct - ct.s_product_trace(radii)) / ct.s_product_trace(radii)))
    ok &= sprod_err <= cfg.tolerances["s_product"]
    columns = ["r_prime", "method", "closed_form", "brute_force", "error_estimate", "rel_error", "tolerance", "passed"]
    write_csv(out / "greens_check.csv", columns, rows)
    write_json(out / "greens_check.json", {
        "config": cfg.to_json(), "counter_terms": ct.to_json(), "rows": rows,
        "s_product_max_rel_error": sprod_err, "s_product_tolerance": cfg.tolerances["s_product"], "passed": ok})
    if not ok:
        raise Failed("closed-form counter terms disagree with the brute-force oracle")


def _identity_row(cfg: RunConfig, scale=None, core=None):
    model, cm = _model(cfg, scale, core)
    rep = build_clifford_rep(cfg.n)
    family = make_family(model, rep)
    report = verify_identity(cm, family, rtol=cfg.tolerances["residual_rel"], seed=cfg.seed, raise_on_failure=False)
    spec, spec_ok = _spectrum(cfg, cm)
    ratios = bound_report(cm, report, spec.inf_spec_sq)
    row = {"label": model.label, "n": cfg.n, "rho": model.rho, "sigma": cm.sigma, "lhs": report.lhs,
           "rhs": report.rhs, "residual_rel": report.residual_rel, "ratio1": ratios.ratio1,
           "ratio2": ratios.ratio2, "inf_spec_sq": spec.inf_spec_sq}
    payload = {"identity": report.to_json(), "spectrum": spec.to_json(), "bounds": vars(ratios),
               "compactification": cm.comp.to_json(), "model": model.to_json()}
    return row, payload, report.passed and spec_ok


def cmd_verify_identity(cfg: RunConfig, out: Path) -> None:
    row, payload, passed = _identity_row(cfg)
    payload["config"] = cfg.to_json()
    if cfg.modes:
        payload["partial_waves"] = _partial_waves(cfg)
        passed &= payload["partial_waves"]["passed"]
    write_json(out / "report.json", payload)
    write_csv(out / "identity.csv", CSV_COLUMNS, [row])
    if not passed:
        raise Failed(f"identity residual {row['residual_rel']:.3e} or spectrum convergence outside tolerance")


def _partial_waves(cfg: RunConfig) -> dict:
    from .witten import partial_wave_check

    model, _ = _model(cfg)
    rep = build_clifford_rep(cfg.n)
    family = make_family(model, rep, [Mode.from_json(m, rep) for m in cfg.modes])
    rows = []
    for r in model.rho * np.array([1.1, 1.5, 2.0, 4.0, 10.0]):
        a, b = partial_wave_check(family, float(r), order=cfg.mesh_value("angular_order") * 3)
        rows.append({"r": float(r), "trace_pi_minus_weight": a, "trace_deviation": b, "abs_diff": abs(a - b)})
    tol = cfg.tolerances["partial_wave"]
    return {"rows": rows, "tolerance": tol, "passed": all(x["abs_diff"] <= tol * max(1.0, abs(x["trace_deviation"]))
                                                          for x in rows)}


def cmd_spectrum(cfg: RunConfig, out: Path) -> None:
    _, cm = _model(cfg)
    spec, ok = _spectrum(cfg, cm)
    bound = rayleigh_upper_bound(cm)
    hn = h_norm_profile(cm.comp, 2)
    ok &= bound >= spec.inf_spec_sq
    write_json(out / "spectrum.json", {
        "config": cfg.to_json(), "spectrum": spec.to_json(), "rayleigh_upper_bound": bound,
        "h_norms": hn, "h_norms_scale_free": [v * cm.sigma ** (cfg.n / 2 + l) for l, v in enumerate(hn)],
        "spectrum_tolerance": cfg.tolerances["spectrum"], "passed": bool(ok)})
    if not ok:
        raise Failed("spectrum not converged or Rayleigh bound below the lowest eigenvalue")


def _sweep_task(args):
    cfg, scale, core = args
    row, payload, passed = _identity_row(cfg, scale, core)
    return row, payload, passed


def cmd_sweep(cfg: RunConfig, out: Path, jobs: int = 1) -> None:
    scales = cfg.sweep.get("scales", [1.0, 2.0])
    cores = cfg.sweep.get("cap_levels", [0.2, 0.6, 1.0])
    tasks = [(cfg, s, c) for s in scales for c in cores]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_task, tasks))
    else:
        results = [_sweep_task(t) for t in tasks]
    rows = [r for r, _, _ in results]
    ok = all(p for _, _, p in results)
    for row, payload, _ in results:
        write_json(out / "models" / f"{row['label']}.json", payload)
    spread = cfg.tolerances["ratio_spread"]
    stats = {}
    for key in ("ratio1", "ratio2"):
        vals = np.abs([r[key] for r in rows])
        finite = bool(np.all(np.isfinite(vals)) and np.all(vals > 0))
        ratio = float(vals.max() / vals.min()) if finite else float("inf")
        stats[key] = {"min": float(vals.min()), "max": float(vals.max()), "max_over_min": ratio,
                      "all_positive": bool(all(r[key] > 0 for r in rows)), "bounded": finite and ratio <= spread}
        ok &= stats[key]["bounded"]
    write_csv(out / "sweep.csv", CSV_COLUMNS, rows)
    write_json(out / "sweep.json", {"config": cfg.to_json(), "rows": rows, "stats": stats,
                                    "ratio_spread_tolerance": spread, "passed": ok})
    if not ok:
        raise Failed("sweep verification failed")


COMMANDS = {
    "compactify": cmd_compactify,
    "greens-check": cmd_greens_check,
    "verify-identity": cmd_verify_identity,
    "spectrum": cmd_spectrum,
    "sweep": cmd_sweep,
}


class _Parser(argparse.ArgumentParser):
    # usage mistakes are input errors (1); exit status 2 is reserved for failed verifications
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wittenkit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", default=None, help="output directory (default ./out)")
        p.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
        p.add_argument("--tol-override", action="append", default=[], metavar="KEY=VAL")
        p.add_argument("--jobs", type=int, default=1, help="parallel model evaluations (sweep)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = apply_overrides(load_config(args.config), args.tol_override)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed:1: seed must be non-negative")
            cfg.seed = args.seed
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out = Path(args.out or cfg.out or "out")
    fn = COMMANDS[args.command]
    try:
        if args.command == "sweep":
            fn(cfg, out, jobs=max(1, args.jobs))
        else:
            fn(cfg, out)
    except (Failed, VerificationError, ToleranceError, MollifierError) as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return 2
    except INPUT_ERRORS as exc:
        print(f"error: {args.config}:1: {exc}", file=sys.stderr)
        return 1
    log.info("wrote reports to %s", out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
