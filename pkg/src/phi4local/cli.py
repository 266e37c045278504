"""Command-line harness: enumeration, identity suites, solves and scans.

Exit codes: 0 pass, 1 identity failure, 2 configuration error, 3 numerical
abort.  All randomness is derived from the configured seed, so identical
configurations produce byte-identical reports.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path as FSPath

import numpy as np

from . import coalgebra, coeffs, equation, field as fieldmod, lift as liftmod, path as pathmod
from .symtree import InadmissibleDelta, enumerate_universe, parse_delta, parse_tree


@dataclass
class RunConfig:
    delta: str = "9/20"
    dim: int = 1
    grid: str = ""
    noise: str = "trig:0:0"
    lift: str = "multiplicative"
    out: str = ""
    suite: str = "all"
    seed: int = 0
    tol: dict = field(default_factory=dict)
    max_m_xi: int = 0            # 0: no restriction

    @classmethod
    def from_args(cls, ns) -> "RunConfig":
        cfg = cls()
        if ns.config:
            cfg = cls.from_file(ns.config)
        for name in ("delta", "dim", "grid", "noise", "lift", "out", "seed"):
            v = getattr(ns, name, None)
            if v is not None:
                setattr(cfg, name, v)
        if getattr(ns, "suite", None):
            cfg.suite = ns.suite
        for item in (getattr(ns, "tol", None) or []):
            name, _, val = item.partition("=")
            cfg.tol[name] = float(val)
        return cfg

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        text = FSPath(path).read_text()
        if path.endswith(".json"):
            data = json.loads(text)
        else:
            data = {}
            for line in text.splitlines():
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                key, _, val = line.partition("=")
                key, val = key.strip(), val.strip()
                if key == "tol":
                    sub = {}
                    for part in val.split(","):
                        n, _, v = part.partition(":")
                        sub[n.strip()] = float(v)
                    data[key] = sub
                else:
                    data[key] = val
        cfg = cls()
        for key, val in data.items():
            if not hasattr(cfg, key):
                raise ConfigError("unknown config key %r" % key)
            cur = getattr(cfg, key)
            if isinstance(cur, int) and key != "tol":
                val = int(val)
            setattr(cfg, key, val)
        return cfg

    def make_grid(self) -> fieldmod.Grid:
        if not self.grid:
            return fieldmod.DEFAULT_GRID
        h_s, k_s, S_s = self.grid.split(",")
        h = _parse_number(h_s)
        k = _parse_number(k_s)
        S = _parse_number(S_s)
        sub = max(1, int(math.ceil(k / (h * h / 4))))
        return fieldmod.Grid(S=S, h=h, k_store=k, substeps=sub)

    def make_noise(self, grid) -> np.ndarray:
        kind, _, rest = self.noise.partition(":")
        seed_s, _, eps_s = rest.partition(":")
        seed = int(seed_s or 0)
        eps = _parse_number(eps_s) if eps_s and _parse_number(eps_s) > 0 else None
        return fieldmod.noise_field(grid, kind, seed=seed, eps=eps)

    def descriptor(self) -> dict:
        return {"delta": self.delta, "dim": self.dim, "grid": self.grid,
                "noise": self.noise, "lift": self.lift, "suite": self.suite,
                "seed": self.seed, "tol": dict(sorted(self.tol.items())),
                "max_m_xi": self.max_m_xi}


class ConfigError(ValueError):
    pass


def _parse_number(s: str) -> float:
    s = s.strip()
    return float(Fraction(s)) if "/" in s else float(s)


def _emit(cfg: RunConfig, name: str, payload: dict) -> None:
    text = json.dumps(payload, indent=1, sort_keys=True, default=_json_default)
    if cfg.out:
        out = FSPath(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / (name + ".json")).write_text(text)
    else:
        print(text)


def _json_default(obj):
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    raise TypeError(type(obj))


def _universe(cfg: RunConfig):
    u = enumerate_universe(parse_delta(cfg.delta), cfg.dim)
    if cfg.max_m_xi:
        u = u.restrict(cfg.max_m_xi)
    return u


def _build_lift(cfg: RunConfig, grid, u, cg):
    xi = cfg.make_noise(grid)
    kind, _, arg = cfg.lift.partition(":")
    if kind == "multiplicative":
        return liftmod.build_local_product(grid, u, xi, coalg=cg), None
    if kind == "phi43":
        seeds = [cfg.seed + j for j in range(6)]
        eps = 4 * grid.h
        noise_kind = cfg.noise.split(":")[0]
        rmap, rep = liftmod.phi43_counterterms(
            grid, u, seeds, eps, kind=noise_kind if noise_kind != "zero" else "gauss")
        return liftmod.build_local_product(grid, u, xi, rmap=rmap, coalg=cg), rep
    if kind == "counterterm":
        data = json.loads(FSPath(arg).read_text())
        values = {}
        for name, val in data.items():
            t = parse_tree(name, u.delta)
            if t is None:
                raise ConfigError("counterterm key %r vanishes" % name)
            values[t] = val
        rmap = liftmod.CountertermMap(u, values)
        return liftmod.build_local_product(grid, u, xi, rmap=rmap, coalg=cg), None
    if kind == "custom":
        manifest = json.loads(FSPath(arg).read_text())
        custom = {}
        for name, relpath in manifest.items():
            t = parse_tree(name, u.delta)
            _g, f = fieldmod.load_field(FSPath(arg).parent / relpath)
            custom[t] = f
        return liftmod.build_local_product(grid, u, xi, custom=custom, coalg=cg), None
    raise ConfigError("unknown lift kind %r" % cfg.lift)


# -- commands -------------------------------------------------------------------

def cmd_enumerate(cfg: RunConfig) -> int:
    u = _universe(cfg)
    payload = u.to_json()
    payload["classification"] = coeffs.classification_table(u)
    _emit(cfg, "universe", payload)
    return 0


def cmd_verify(cfg: RunConfig) -> int:
    u = _universe(cfg)
    cg = coalgebra.Coalgebra(u)
    failures = []
    reports = {}

    def run_algebra():
        rows = []
        rows += cg.verify_coassoc()
        rows += cg.verify_explicit_formula()
        rows += cg.verify_delta_ranges()
        rows += coeffs.check_cube_identity(u)
        rows += coeffs.check_coherence(u, cg)
        rng = np.random.default_rng(cfg.seed)
        for j in range(5):
            rmap = liftmod.random_counterterm_map(u, rng)
            rows += cg.verify_renorm_commute(rmap.as_uid_map())
        reports["algebra"] = rows
        failures.extend(coalgebra.report_failures(rows))

    def run_path():
        grid = cfg.make_grid()
        lp, _ = _build_lift(cfg, grid, u, cg)
        p = pathmod.Path(lp)
        rng = np.random.default_rng(cfg.seed)
        probe = grid.probe_mask()
        nodes = pathmod.sample_nodes(grid, probe, rng, 3 * 50)
        tol = cfg.tol.get("chen", 1e-8)
        rows = []
        worst = 0.0
        for s in u.T:
            for n in range(0, len(nodes) - 2, 3):
                _a, rel = p.chen_residual(s, nodes[n], nodes[n + 1], nodes[n + 2])
                worst = max(worst, rel)
        rows.append({"identity": "chen", "tree": "*",
                     "status": "pass" if worst <= tol else "FAIL",
                     "residual": worst})
        worst = 0.0
        for t in u.N:
            from .symtree import I as _I
            for n in range(0, len(nodes) - 1, 2):
                _a, rel = p.strong_chen_residual(_I(t), nodes[n], nodes[n + 1])
                worst = max(worst, rel)
        rows.append({"identity": "strong-chen", "tree": "*",
                     "status": "pass" if worst <= tol else "FAIL",
                     "residual": worst})
        worst = 0.0
        for t in u.T_r:
            for n in range(0, len(nodes) - 1, 2):
                z = nodes[n]
                if not (0 < z[1] < grid.nx - 1):
                    continue
                _a, rel = p.derivative_residual(1, t, z, nodes[n + 1])
                worst = max(worst, rel)
        rows.append({"identity": "derivative-edge", "tree": "*",
                     "status": "pass" if worst <= tol else "FAIL",
                     "residual": worst})
        if lp.rmap is not None:
            ruid = lp.rmap.as_uid_map()
            worst = 0.0
            for t in (t for t in u.T_r if t.kind == "prod"):
                for n in range(0, len(nodes) - 1, 2):
                    _a, rel = p.renorm_path_residual(ruid, t, nodes[n], nodes[n + 1])
                    worst = max(worst, rel)
            rows.append({"identity": "path-rewrite", "tree": "*",
                         "status": "pass" if worst <= tol else "FAIL",
                         "residual": worst})
            rows += liftmod.extension_consistency_report(lp)
        reports["path"] = rows
        failures.extend(coalgebra.report_failures(rows))

    def run_products():
        grid = cfg.make_grid()
        lp, _ = _build_lift(cfg, grid, u, cg)
        p = pathmod.Path(lp)
        rows = []
        v1 = 0.5 + 0.3 * np.sin(2.0 * grid.x_field) * np.cos(1.5 * grid.t_field)
        rep = equation.cube_formula_check(p, lp.rmap, v1)
        tol = cfg.tol.get("cube", 1e-8 if lp.rmap is not None else 1e-10)
        rows.append({"identity": "cube-formula", "tree": "*",
                     "status": "pass" if rep["relative"] <= tol else "FAIL",
                     "residual": rep["relative"]})
        e = equation.TreeExpansion(p, v1)
        gamma = coeffs.pick_gamma(u, Fraction(3, 2))
        mn = equation.modelled_norms(p, e, gamma, n_pairs=60, seed=cfg.seed)
        tol = cfg.tol.get("utau", 1e-8)
        rows.append({"identity": "utau-classified", "tree": "*",
                     "status": "pass" if mn.max_rel_mismatch <= tol else "FAIL",
                     "residual": mn.max_rel_mismatch})
        tp = equation.three_point_residual(p, e, gamma, n_triples=40, seed=cfg.seed)
        rows.append({"identity": "three-point", "tree": "*",
                     "status": "pass" if tp["max_rel_residual"] <= tol else "FAIL",
                     "residual": tp["max_rel_residual"]})
        reports["products"] = rows
        failures.extend(coalgebra.report_failures(rows))

    suites = {"algebra": run_algebra, "path": run_path, "products": run_products}
    if cfg.suite == "all":
        for fn in suites.values():
            fn()
    elif cfg.suite in suites:
        suites[cfg.suite]()
    else:
        raise ConfigError("unknown suite %r" % cfg.suite)
    _emit(cfg, "verify-%s" % cfg.suite, {
        "config": cfg.descriptor(),
        "reports": reports,
        "failures": failures,
    })
    return 1 if failures else 0


def cmd_solve(cfg: RunConfig, radii=(0.1, 0.2, 0.25, 0.4, 0.5)) -> int:
    u = _universe(cfg)
    cg = coalgebra.Coalgebra(u)
    grid = cfg.make_grid()
    lp, lift_rep = _build_lift(cfg, grid, u, cg)
    p = pathmod.Path(lp)
    co = equation.remainder_coeffs(p)
    trace = equation.BoundaryTrace("smooth", 1.0, seed=cfg.seed)
    rec = equation.solve_remainder(p, co, trace,
                                   equation.SolveConfig(radii=tuple(radii)))
    v1 = 0.5 + 0.3 * np.sin(2.0 * grid.x_field) * np.cos(1.5 * grid.t_field)
    cube_rep = equation.cube_formula_check(p, lp.rmap, v1)
    rng = np.random.default_rng(cfg.seed)
    nodes = pathmod.sample_nodes(grid, grid.probe_mask(), rng, 9)
    chen = max(p.chen_residual(s, nodes[n], nodes[n + 1], nodes[n + 2])[1]
               for s in u.T_r[:4] for n in range(0, 7, 3))
    rec["residuals"] = {"cube_formula": cube_rep["relative"],
                        "chen_spot": chen}
    _emit(cfg, "solve", {"config": cfg.descriptor(), "run": rec,
                         "lift": lift_rep})
    return 0


def cmd_scan(cfg: RunConfig, kind: str, radii=(0.1, 0.2, 0.4)) -> int:
    u = _universe(cfg)
    cg = coalgebra.Coalgebra(u)
    grid = cfg.make_grid()
    lp, _ = _build_lift(cfg, grid, u, cg)
    p = pathmod.Path(lp)
    scales = [L for L in (1 / 16, 1 / 8, 1 / 4, 1 / 2) if L >= 2 * grid.h]
    if kind == "order":
        sigmas = [s for s in (u.T_cen + u.T_r) if s.m_xi <= 3]
        rows = pathmod.order_scan(p, sigmas, scales, seed=cfg.seed)
        _emit(cfg, "scan-order", {
            "config": cfg.descriptor(),
            "rows": [{"sigma": r.sigma, "target": r.target, "L": r.scales,
                      "value": r.values, "slope": r.slope} for r in rows]})
        return 0
    if kind == "apriori":
        co = equation.remainder_coeffs(p)
        traces = []
        for mag in (1.0, 10.0, 100.0):
            for seed in (1, 2, 3):
                traces.append(equation.BoundaryTrace("smooth", mag, seed=seed))
        traces.append(equation.BoundaryTrace("zero", 0.0))
        rep = equation.apriori_scan(p, co, traces, radii, scales=tuple(scales))
        rep["runs"] = [{"trace": r["trace"], "norms": r["norms"]}
                       for r in rep["runs"]]
        _emit(cfg, "scan-apriori", {"config": cfg.descriptor(), **rep})
        return 0
    if kind == "reconstruction":
        v1 = 0.4 + 0.2 * np.sin(1.7 * grid.x_field) * np.cos(2.1 * grid.t_field)
        e = equation.TreeExpansion(p, v1)
        from .symtree import XI
        rep = equation.reconstruction_check(p, e, XI, XI, scales)
        _emit(cfg, "scan-reconstruction", {"config": cfg.descriptor(), **rep})
        return 0
    raise ConfigError("unknown scan kind %r" % kind)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="phi4local")
    ap.add_argument("--config", default=None)
    sub = ap.add_subparsers(dest="cmd", required=True)

    def common(p):
        p.add_argument("--delta", default=None)
        p.add_argument("--dim", type=int, default=None)
        p.add_argument("--grid", default=None, help="h,k,S")
        p.add_argument("--noise", default=None, help="kind:seed:eps")
        p.add_argument("--lift", default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--tol", action="append", default=None,
                       help="name=value (repeatable)")

    p = sub.add_parser("enumerate")
    common(p)
    p.add_argument("--format", default="json", choices=["json"])

    p = sub.add_parser("verify")
    common(p)
    p.add_argument("--suite", default="all",
                   choices=["algebra", "path", "products", "all"])

    p = sub.add_parser("solve")
    common(p)

    p = sub.add_parser("scan")
    common(p)
    p.add_argument("--kind", default="order",
                   choices=["order", "apriori", "reconstruction"])
    p.add_argument("--radii", default="0.1,0.2,0.4")
    return ap


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.from_args(ns)
        if ns.cmd == "enumerate":
            return cmd_enumerate(cfg)
        if ns.cmd == "verify":
            return cmd_verify(cfg)
        if ns.cmd == "solve":
            return cmd_solve(cfg)
        if ns.cmd == "scan":
            radii = tuple(float(x) for x in ns.radii.split(","))
            return cmd_scan(cfg, ns.kind, radii)
        raise ConfigError("unknown command")
    except (ConfigError, InadmissibleDelta, ValueError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    except equation.NumericalAbort as exc:
        print("numerical abort: %s" % exc, file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
