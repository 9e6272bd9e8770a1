"""Command line front end: ``catenoid-ac {profile,place,residual,solve}``.

Every subcommand reads an optional JSON config (validated against the shipped
schema; unknown keys are rejected) and writes CSV/JSON files to ``--out``.
Exit codes: 0 success, 1 numerical failure, 2 configuration or IO error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import approx, domain, jacobi, profile, solver
from .errors import CatenoidACError, ConfigError, NoCriticalCatenoidError

logger = logging.getLogger(__name__)

DEFAULTS = {
    "domain": {"shape": "ball", "R": 2.1717},
    "alphas": [0.2, 0.1, 0.05],
    "grid": {"points_per_layer": 8, "spectrum_cells": 1000},
    "tolerances": {"quadrature": 1e-12, "newton": 1e-9, "max_iter": 15, "zero_eigenvalue": 1e-8},
    "flags": {"with_psi1": True, "with_reduced_h": True, "modes": [0], "seed": "approximation"},
    "profile": {"t_max": 12.0, "dt": 0.01},
    "output": "out",
}


def load_schema(name: str) -> dict:
    text = resources.files("catenoid_ac").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def _merge(base, override):
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration (defaults filled in)."""

    data: dict

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        try:
            jsonschema.validate(raw, load_schema("config"))
        except jsonschema.ValidationError as exc:
            raise ConfigError(f"invalid config: {exc.message} at {list(exc.absolute_path)}") from exc
        data = _merge(DEFAULTS, raw)
        if "domain" in raw:
            data["domain"] = dict(raw["domain"])
        d = data["domain"]
        if d["shape"] == "ball" and "R" not in d:
            raise ConfigError("ball needs R")
        if d["shape"] == "ellipsoid" and not ("a" in d and "b" in d):
            raise ConfigError("ellipsoid needs a and b")
        return cls(data)

    @classmethod
    def load(cls, path) -> "RunConfig":
        if path is None:
            return cls.from_dict({})
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(raw)

    def __getitem__(self, key):
        return self.data[key]

    def make_domain(self):
        d = self.data["domain"]
        if d["shape"] == "ball":
            return domain.make_ball(d["R"])
        return domain.make_ellipsoid(d["a"], d["b"])


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, NaN/inf to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_json(path: Path, payload: dict, schema: str | None = None):
    payload = _clean(payload)
    if schema is not None:
        jsonschema.validate(payload, load_schema(schema))
    path.write_text(json.dumps(payload, indent=2) + "\n")
    return payload


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([f"{float(x):.17g}" for x in row])


# subcommands ------------------------------------------------------------------


def cmd_profile(cfg: RunConfig, out: Path):
    tol = cfg["tolerances"]["quadrature"]
    t_max, dt = cfg["profile"]["t_max"], cfg["profile"]["dt"]
    consts = profile.compute_constants(tol)
    psi = profile.solve_psi1(t_max=t_max, dt=dt)
    w, wp, _ = profile.eval_w(psi.t)
    write_csv(out / "profile.csv", ["t", "w", "dw", "psi1", "dpsi1", "d2psi1"],
              zip(psi.t, w, wp, psi.psi, psi.dpsi, psi.d2psi))
    return write_json(out / "constants.json", {
        "c0": consts.c0, "sigma0": consts.sigma0, "c1": consts.c1, "c0_exact": profile.C0_EXACT,
        "errors": consts.errors, "t_max": t_max,
        "psi1_weighted_sup": [psi.weighted_sup(j) for j in range(3)],
    }, "constants")


def cmd_place(cfg: RunConfig, out: Path):
    dom = cfg.make_domain()
    dom_info = {"a": dom.a, "b": dom.b}
    try:
        pl = domain.critical_placement(dom)
    except NoCriticalCatenoidError as exc:
        return write_json(out / "placement.json", {"found": False, "reason": str(exc), "domain": dom_info},
                          "placement")
    k1, k2 = pl.kappa_chart
    det = jacobi.nondeg_determinant(-pl.y_bar, pl.y_bar, k1, k2)
    spec = jacobi.spectrum(-pl.y_bar, pl.y_bar, k1, k2, modes=cfg["flags"]["modes"],
                           n=cfg["grid"]["spectrum_cells"], tol=cfg["tolerances"]["zero_eigenvalue"])
    return write_json(out / "placement.json", {
        "found": True, "domain": dom_info, "c": pl.c, "y_bar": pl.y_bar, "K1": pl.K1, "K2": pl.K2,
        "I": pl.I, "m1": pl.m1, "area": pl.area, "residuals": pl.residuals, "determinant": det,
        "spectrum": spec.to_dict(), "nondegenerate": bool(spec.nondegenerate and abs(det) > 1e-10),
    }, "placement")


def _residual_one(args):
    pl, alpha, with_psi1, with_h = args
    h = jacobi.solve_reduced_h(pl, alpha, profile.compute_constants()) if with_h else None
    spec = approx.ApproximationSpec(alpha, pl, h, with_psi1)
    fld = approx.residual_field(spec)
    return approx.residual_report(spec), fld


def cmd_residual(cfg: RunConfig, out: Path, jobs: int = 1):
    pl = domain.critical_placement(cfg.make_domain())
    flags = cfg["flags"]
    alphas = sorted(cfg["alphas"], reverse=True)
    if len(alphas) < 3:
        raise ConfigError("the residual study needs at least three alphas")
    tasks = [(pl, a, flags["with_psi1"], flags["with_reduced_h"]) for a in alphas]
    results = _map(_residual_one, tasks, jobs)
    reports = [r for r, _ in results]
    rows = []
    for (rep, fld) in results:
        m = fld.masks["interior"]
        rows.extend(zip(np.full(int(m.sum()), rep.alpha), fld.r[m], fld.x3[m], fld.values[m]))
    write_csv(out / "residual.csv", ["alpha", "r", "x3", "residual"], rows)
    interior = [r.interior_sup for r in reports]
    neumann = [r.neumann_sup for r in reports]
    return write_json(out / "slopes.json", {
        "alphas": alphas, "with_psi1": flags["with_psi1"], "with_reduced_h": flags["with_reduced_h"],
        "interior_slope": approx.loglog_slope(alphas, interior),
        "neumann_slope": approx.loglog_slope(alphas, neumann),
        "monotone": all(x > y for x, y in zip(interior, interior[1:])),
        "reports": [r.to_dict() for r in reports],
    }, "slopes")


def _solve_one(args):
    pl, alpha, conf = args
    try:
        grid, u, rep = solver.solve_alpha(pl, alpha, conf)
        return rep, grid, u, ""
    except CatenoidACError as exc:
        return None, None, None, str(exc)


def cmd_solve(cfg: RunConfig, out: Path, jobs: int = 1):
    pl = domain.critical_placement(cfg.make_domain())
    flags, tol = cfg["flags"], cfg["tolerances"]
    conf = solver.ContinuationConfig(
        with_psi1=flags["with_psi1"], with_reduced_h=flags["with_reduced_h"], seed=flags["seed"],
        points_per_layer=cfg["grid"]["points_per_layer"], tol=tol["newton"], max_iter=tol["max_iter"],
    )
    alphas = sorted(cfg["alphas"], reverse=True)
    E0 = solver.limit_energy(pl)
    if flags["seed"] == "previous" or jobs <= 1:
        rows = solver.continuation_study(pl.domain, alphas, conf, placement=pl)
    else:
        results = _map(_solve_one, [(pl, a, conf) for a in alphas], jobs)
        rows = [solver.ContinuationRow(a, rep, abs(rep.energy - E0) if rep else float("nan"), err, grid, u)
                for a, (rep, grid, u, err) in zip(alphas, results)]
    for row in rows:
        if row.grid is not None:
            g = row.grid
            write_csv(out / f"solution_{row.alpha:g}.csv", ["r", "x3", "u"], zip(g.r.ravel(), g.x3.ravel(), row.u))
            write_csv(out / f"interface_{row.alpha:g}.csv", ["r", "x3"], solver.zero_level_set(g, row.u))
    payload = write_json(out / "report.json", {
        "limit_energy": E0, "placement": {"c": pl.c, "y_bar": pl.y_bar},
        "rows": [r.to_dict() for r in rows],
    }, "report")
    return payload, all(r.report is not None for r in rows)


def _map(fun, tasks, jobs):
    if jobs <= 1 or len(tasks) <= 1:
        return [fun(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fun, tasks))


def _parse_modes(text: str):
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="catenoid-ac", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("profile", "layer profile, psi1 table and constants"),
                        ("place", "critical placement, determinant and spectrum"),
                        ("residual", "residual-order study of the approximation"),
                        ("solve", "Newton continuation study")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", type=Path, default=None, help="JSON run configuration")
        s.add_argument("--out", type=Path, default=None, help="output directory")
        s.add_argument("--jobs", type=int, default=1, help="parallel alpha runs")
        if name == "profile":
            s.add_argument("--tmax", type=float, default=None, help="half-width of the psi1 table")
        if name == "place":
            s.add_argument("--modes", type=str, default=None, help="e.g. 0..3 or 0,1")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig.load(args.config)
        overrides = {}
        if getattr(args, "tmax", None) is not None:
            overrides["profile"] = {"t_max": args.tmax}
        if getattr(args, "modes", None) is not None:
            try:
                overrides["flags"] = {"modes": _parse_modes(args.modes)}
            except ValueError as exc:
                raise ConfigError(f"bad --modes {args.modes!r}") from exc
        if overrides:
            cfg = RunConfig.from_dict(_merge({k: v for k, v in cfg.data.items()}, overrides))
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        out = args.out or Path(cfg["output"])
        out.mkdir(parents=True, exist_ok=True)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.command == "profile":
            cmd_profile(cfg, out)
        elif args.command == "place":
            payload = cmd_place(cfg, out)
            if not payload["found"]:
                print(f"no critical catenoid found: {payload['reason']}")
        elif args.command == "residual":
            cmd_residual(cfg, out, args.jobs)
        else:
            _, ok = cmd_solve(cfg, out, args.jobs)
            if not ok:
                return 1
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CatenoidACError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
