"""bschaos command line: one subcommand per verification, CSV/JSON artifacts.

    bschaos <subcommand> --config run.json [--a --nu --beta --gamma --s --t ...]

Exit codes: 0 success, 2 a tolerance was exceeded (the metric is named on
stderr), 1 usage or configuration error.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional

import numpy as np

from . import __version__
from .core import (GridSpec, ModelParams, ParameterError, ScalarField, constant, eigen,
                   field_library, from_z, make_params, membership_check, norm_s, to_z)
from .fdcheck import cross_compare, fd_solve, make_zgrid, residual_study, resolved_ratios
from .romanov import DEFAULT_EPS, apply_B, h, reflection_error_bound, semigroup_defect
from .spectral import (EmptyIntersection, admissible_intervals, find_periodic, gsc_witness_bundle,
                       s_star, s_star_scan, verify_periodicity)
from .transport import apply_group, transport_point

SCHEMA = "bschaos/1"

# tolerances named after the metrics they guard
TOL = {
    "sstar_oracle": 1e-9,
    "group_law": 1e-12,
    "eigen_rel": 1e-5,
    "semigroup": 1e-6,
    "periodicity": 1e-4,
    "scalar_period": 1e-12,
    "gsc_decay": 1e-8,
    "lz_identity": 1e-12,
    "fd_discrepancy": 2e-3,
}
RESIDUAL_RATIO = (3.5, 4.5)


class UsageError(Exception):
    pass


class ToleranceFailure(Exception):
    def __init__(self, metric: str, value: float, tol: float):
        super().__init__(f"tolerance exceeded: {metric} = {value:.6g} > {tol:.3g}")
        self.metric = metric


@dataclass
class RunConfig:
    params: ModelParams
    t: float = 0.5
    eps: float = DEFAULT_EPS
    seed: int = 0
    probes: Optional[List[float]] = None
    field_name: str = "bump"
    field_args: dict = field(default_factory=dict)
    z_max: float = 16.0
    n_z: int = 2048
    n_t: Optional[int] = None
    output_path: Optional[str] = None
    extra: dict = field(default_factory=dict)

    def make_field(self) -> ScalarField:
        return field_library(self.field_name, self.params, **self.field_args)

    def describe(self) -> str:
        p = self.params
        args = ",".join(f"{k}={v}" for k, v in sorted(self.field_args.items()))
        return (f"bschaos {__version__} a={p.a!r} nu={p.nu!r} beta={p.beta!r} gamma={p.gamma!r} "
                f"s={p.s!r} t={self.t!r} eps={self.eps!r} seed={self.seed} "
                f"field={self.field_name}({args})")


DEFAULTS = {"a": 0.5, "nu": 1.0, "beta": 0.0, "gamma": 1.0, "s": 4.0, "t": 0.5,
            "eps": DEFAULT_EPS, "seed": 0}
CONFIG_KEYS = {"a", "nu", "beta", "gamma", "s", "t", "eps", "seed", "probes", "field", "grid", "out"}


def load_config(path: Optional[str], ns: argparse.Namespace) -> RunConfig:
    raw = {}
    if path:
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        if not isinstance(raw, dict):
            raise UsageError("config must be a JSON object")
        unknown = set(raw) - CONFIG_KEYS
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
    vals = {k: raw.get(k, v) for k, v in DEFAULTS.items()}
    for k in DEFAULTS:
        if getattr(ns, k, None) is not None:
            vals[k] = getattr(ns, k)
    fld = raw.get("field", {}) or {}
    grid = raw.get("grid", {}) or {}
    if not isinstance(fld, dict) or not isinstance(grid, dict):
        raise UsageError("'field' and 'grid' must be JSON objects")
    name = ns.field or fld.get("name", "bump")
    args = dict(fld.get("args", {}) or {})
    if ns.field_args is not None:
        try:
            args = json.loads(ns.field_args)
        except json.JSONDecodeError as exc:
            raise UsageError(f"--field-args is not JSON: {exc}") from None
    if not isinstance(args, dict):
        raise UsageError(f"field arguments must be a JSON object, got {args!r}")
    probes = raw.get("probes")
    if ns.probes is not None:
        try:
            probes = [float(v) for v in ns.probes.split(",") if v.strip()]
        except ValueError:
            raise UsageError(f"--probes must be comma-separated numbers, got {ns.probes!r}") from None
    try:
        params = make_params(float(vals["a"]), float(vals["nu"]), float(vals["beta"]),
                             float(vals["gamma"]), float(vals["s"]))
        cfg = RunConfig(
            params=params, t=float(vals["t"]), eps=float(vals["eps"]), seed=int(vals["seed"]),
            probes=None if probes is None else [float(v) for v in probes],
            field_name=str(name), field_args=args,
            z_max=float(ns.z_max if ns.z_max is not None else grid.get("z_max", 16.0)),
            n_z=int(ns.n_z if ns.n_z is not None else grid.get("n_z", 2048)),
            n_t=ns.n_t if ns.n_t is not None else grid.get("n_t"),
            output_path=ns.out if ns.out is not None else raw.get("out"))
    except (TypeError, ValueError) as exc:
        raise UsageError(f"malformed config: {exc}") from None
    try:
        cfg.make_field()
    except (TypeError, ParameterError) as exc:
        raise UsageError(f"bad field {cfg.field_name!r}: {exc}") from None
    if cfg.t <= 0:
        raise UsageError(f"t must be positive, got {cfg.t}")
    if not 0 < cfg.eps <= 1e-2:
        raise UsageError(f"eps must lie in (0, 1e-2], got {cfg.eps}")
    cfg.extra = {k: getattr(ns, k) for k in ("lam", "x_seed", "rotation", "periods", "n_points",
                                              "n_iter", "boundary", "levels") if hasattr(ns, k)}
    return cfg


# -- artifacts ---------------------------------------------------------------

def write_csv(cfg: RunConfig, header: List[str], rows) -> str:
    buf = io.StringIO()
    buf.write(f"# {cfg.describe()}\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def write_json(payload: dict) -> str:
    return json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def emit(cfg: RunConfig, text: str, out) -> None:
    if cfg.output_path:
        with open(cfg.output_path, "w") as fh:
            fh.write(text)
    else:
        out.write(text)


def _params_dict(p: ModelParams) -> dict:
    return {"a": p.a, "nu": p.nu, "beta": p.beta, "gamma": p.gamma, "s": p.s}


def _probes(cfg: RunConfig, z_lo: float, z_hi: float, n: int) -> np.ndarray:
    if cfg.probes is not None:
        return np.asarray(cfg.probes, dtype=float)
    return from_z(cfg.params, np.linspace(z_lo, z_hi, n))


def _lam(cfg: RunConfig, default) -> complex:
    raw = cfg.extra.get("lam")
    if raw is None:
        return complex(default)
    try:
        return complex(raw.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise UsageError(f"--lam must be a complex number like 0.5+1j, got {raw!r}") from None


# -- subcommands ---------------------------------------------------------------

def cmd_sstar(cfg: RunConfig, out) -> List[tuple]:
    thr = s_star(cfg.params)
    scan = s_star_scan(cfg.params)
    diff = abs(thr.s_star - scan)
    out.write(f"{thr.s_star!r}\n")
    out.write(f"scan: {scan!r}\n")
    out.write(f"oracle: {'agree' if diff <= TOL['sstar_oracle'] else 'disagree'}\n")
    if not thr.verbatim_agrees:
        out.write(f"verbatim branch formula: {thr.s_star_verbatim!r} (differs; "
                  "intersection argument gives the value above)\n")
    out.write(f"verdict at s={cfg.params.s:g}: "
              f"{'chaotic_regime' if cfg.params.s > thr.s_star else 'below_threshold'}\n")
    return [("sstar_oracle", diff, TOL["sstar_oracle"])]


def cmd_transport(cfg: RunConfig, out) -> List[tuple]:
    f = cfg.make_field()
    x = _probes(cfg, 0.0, 8.0, 33)
    point, refl = transport_point(cfg.params, x, cfg.t)
    vals = apply_group(cfg.params, f, cfg.t)(x)
    rows = zip(x, point, refl, vals.real, vals.imag)
    emit(cfg, write_csv(cfg, ["x", "characteristic_point", "reflected", "re", "im"], rows), out)
    return []


def cmd_evolve(cfg: RunConfig, out) -> List[tuple]:
    f = cfg.make_field()
    x = _probes(cfg, 0.0, 12.0, 49)
    vals = apply_B(cfg.params, f, cfg.t, eps=cfg.eps)(x)
    emit(cfg, write_csv(cfg, ["x", "z", "re", "im"],
                        zip(x, to_z(cfg.params, x), vals.real, vals.imag)), out)
    return []


def cmd_norm(cfg: RunConfig, out) -> List[tuple]:
    f = cfg.make_field()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = norm_s(cfg.params, f, GridSpec())
    mem = membership_check(cfg.params, f)
    payload = {"schema": SCHEMA, "version": __version__, "params": _params_dict(cfg.params),
               "field": cfg.field_name, "norm": res.value, "argmax": res.argmax,
               "truncated": res.truncated, "in_Y_s": bool(mem), "membership": mem.diagnostic,
               "warnings": [str(w.message) for w in caught]}
    emit(cfg, write_json(payload), out)
    return []


def cmd_eigencheck(cfg: RunConfig, out) -> List[tuple]:
    p = cfg.params
    lam = _lam(cfg, 0.3)
    f = eigen(p, lam)
    x = _probes(cfg, 6.0, 16.0, 41)
    got = apply_B(p, f, cfg.t, eps=cfg.eps)(x)
    want = h(p, lam, cfg.t) * f(x)
    rel = np.abs(got - want) / np.abs(want)
    bound = reflection_error_bound(p, lam, cfg.t, x)
    emit(cfg, write_csv(cfg, ["x", "z", "rel_err", "reflection_bound"],
                        zip(x, to_z(p, x), rel, bound)), out)
    return [("eigen_rel", float(rel.max()), TOL["eigen_rel"])]


def _default_seed(p: ModelParams) -> float:
    ivs = admissible_intervals(p, p.s)
    if not ivs:
        raise EmptyIntersection(f"s={p.s} does not exceed s*")
    lo, hi = max(ivs, key=lambda iv: iv[1] - iv[0])
    return 0.5 * (lo + hi)


def _orbit(cfg: RunConfig, x_seed=None, rotation=None):
    p = cfg.params
    x_seed = _default_seed(p) if x_seed is None else x_seed
    try:
        rotation = Fraction(rotation or "1")
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"--rotation must be a rational like 1/2, got {rotation!r}") from None
    orbit = find_periodic(p, p.s, x_seed, rotation)
    probes = _probes(cfg, 6.0, 24.0, 40)
    periods = int(cfg.extra.get("periods") or 1)
    check = verify_periodicity(p, orbit, probes, periods=periods, eps=cfg.eps,
                               tol=TOL["periodicity"])
    d = orbit.to_dict()
    d.update({"x_seed": x_seed, "periods": periods, "deviation": check.deviation,
              "z_min": check.z_min, "probes_used": check.probes_used,
              "probes_dropped": check.probes_dropped,
              "verified": check.deviation <= TOL["periodicity"]
              and orbit.scalar_defect() <= TOL["scalar_period"]})
    return d


def cmd_orbit(cfg: RunConfig, out) -> List[tuple]:
    d = _orbit(cfg, cfg.extra.get("x_seed"), cfg.extra.get("rotation"))
    emit(cfg, write_json({"schema": SCHEMA, "version": __version__,
                          "params": _params_dict(cfg.params), "orbit": d}), out)
    return [("periodicity", d["deviation"], TOL["periodicity"]),
            ("scalar_period", d["scalar_defect"], TOL["scalar_period"])]


def _bundle(cfg: RunConfig):
    return gsc_witness_bundle(cfg.params, cfg.params.s, cfg.t,
                              n_points=int(cfg.extra.get("n_points") or 8),
                              n_iter=int(cfg.extra.get("n_iter") or 200),
                              seed=cfg.seed, decay_tol=TOL["gsc_decay"])


def _bundle_checks(rep) -> List[tuple]:
    worst = max((float(w.certificate[-1]) for w in rep.omega1 + rep.omega2), default=math.inf)
    checks = [("gsc_decay", worst, TOL["gsc_decay"]),
              ("lz_identity", rep.max_lz_defect, TOL["lz_identity"])]
    if rep.failures:
        checks.append(("gsc_points_missing", float(len(rep.failures)), 0.0))
    if not rep.all_decay:
        checks.append(("gsc_not_monotone", 1.0, 0.0))
    return checks


def cmd_gsc(cfg: RunConfig, out) -> List[tuple]:
    rep = _bundle(cfg)
    d = rep.to_dict()
    d.update({"schema": SCHEMA, "version": __version__, "params": _params_dict(cfg.params),
              "seed": cfg.seed})
    emit(cfg, write_json(d), out)
    return _bundle_checks(rep)


def cmd_fd_compare(cfg: RunConfig, out) -> List[tuple]:
    p = cfg.params
    f = cfg.make_field()
    grid = make_zgrid(cfg.z_max, cfg.n_z, cfg.t, cfg.n_t)
    boundary = cfg.extra.get("boundary") or "auto"
    if cfg.probes is not None:
        probes = np.asarray(cfg.probes, dtype=float)
    else:
        probes = from_z(p, np.linspace(0.15 * cfg.z_max, 0.75 * cfg.z_max, 25))
    disc = cross_compare(p, f, cfg.t, grid, probes, boundary=boundary, eps=cfg.eps)
    sol = fd_solve(p, f, cfg.t, grid, boundary)
    if cfg.output_path:
        emit(cfg, write_csv(cfg, ["z", "re", "im"], zip(sol.z, sol.values.real, sol.values.imag)),
             out)
    out.write(f"discrepancy: {disc:.17g}\nboundary: {sol.boundary}\nn_z: {grid.n_z}\nn_t: {grid.n_t}\n"
              f"diffusion_number: {grid.diffusion_number:.6g}\n")
    return [("fd_discrepancy", disc, TOL["fd_discrepancy"])]


def cmd_residual(cfg: RunConfig, out) -> List[tuple]:
    x = _probes(cfg, 3.0, 6.0, 10)
    levels = residual_study(cfg.params, cfg.make_field(), x, cfg.t,
                            levels=int(cfg.extra.get("levels") or 7), eps=cfg.eps)
    rows = [(lv.h, lv.residual, lv.ratio, lv.noise_floor, lv.resolved) for lv in levels]
    emit(cfg, write_csv(cfg, ["h", "max_abs_residual", "ratio", "noise_floor", "resolved"], rows),
         out)
    ratios = resolved_ratios(levels)
    lo, hi = RESIDUAL_RATIO
    worst = max((max(lo - q, q - hi, 0.0) for q in ratios), default=math.inf)
    return [("residual_ratio_outside_[3.5,4.5]", worst, 0.0)]


def _group_law_defect(p: ModelParams, seed: int, n: int = 200) -> float:
    rng = np.random.default_rng(seed)
    f = field_library("bump", p, center=2.0, width=1.0)
    x = rng.uniform(0.0, 8.0, n)
    t1 = rng.uniform(-2.0, 2.0, n)
    t2 = rng.uniform(-2.0, 2.0, n)
    ok = x ** (1.0 - p.a) + p.c * t1 >= 0
    x, t1, t2 = x[ok], t1[ok], t2[ok]
    p1 = transport_point(p, transport_point(p, x, t1)[0], t2)[0]
    nested = f(p1)
    direct = f(transport_point(p, x, t1 + t2)[0])
    return float(np.max(np.abs(nested - direct) / (1.0 + np.abs(direct)), initial=0.0))


def build_certificate(cfg: RunConfig) -> dict:
    p = cfg.params
    thr = s_star(p)
    chaotic = p.s > thr.s_star
    cert = {"schema": SCHEMA, "version": __version__, "params": _params_dict(p),
            "s": p.s, "s_star": thr.s_star, "s_star_verbatim": thr.s_star_verbatim,
            "s_star_scan": s_star_scan(p), "t": cfg.t, "seed": cfg.seed,
            "verdict": "chaotic_regime" if chaotic else "below_threshold",
            "witness": None, "periodic_orbits": []}
    defects = {"group_law": _group_law_defect(p, cfg.seed),
               "sstar_oracle": abs(thr.s_star - cert["s_star_scan"])}
    bump = field_library("bump", p, center=2.0, width=1.0)
    # graded on z >= 6; near z = 0 the reflection breaks the law when beta != 0
    sg_probes = from_z(p, np.linspace(6.0, 16.0, 11))
    defects["semigroup"] = semigroup_defect(p, bump, cfg.t / 2, cfg.t / 2, sg_probes, eps=cfg.eps)
    near = from_z(p, np.linspace(0.5, 4.0, 8))
    cert["semigroup_reflection_zone"] = semigroup_defect(p, bump, cfg.t / 2, cfg.t / 2, near,
                                                         eps=cfg.eps)
    one = apply_B(p, constant(1.0), cfg.t, eps=cfg.eps)(sg_probes)
    defects["constant"] = float(np.max(np.abs(one - math.exp(p.gamma * cfg.t))))
    if chaotic:
        rep = _bundle(cfg)
        cert["witness"] = rep.summary()
        defects["lz_identity"] = rep.max_lz_defect
        defects["gsc_decay"] = max((float(w.certificate[-1]) for w in rep.omega1 + rep.omega2),
                                   default=math.inf)
        orbit = _orbit(cfg)
        cert["periodic_orbits"].append(orbit)
        defects["periodicity"] = orbit["deviation"]
        defects["scalar_period"] = orbit["scalar_defect"]
        lam_r = complex(0.5 * p.strip_width)
        x = from_z(p, np.linspace(6.0, 16.0, 21))
        f = eigen(p, lam_r)
        got = apply_B(p, f, cfg.t, eps=cfg.eps)(x)
        want = h(p, lam_r, cfg.t) * f(x)
        defects["eigen_rel"] = float(np.max(np.abs(got - want) / np.abs(want)))
    cert["max_defects"] = defects
    return cert


def cmd_report(cfg: RunConfig, out) -> List[tuple]:
    cert = build_certificate(cfg)
    emit(cfg, write_json(cert), out)
    checks = [(k, v, TOL[k]) for k, v in sorted(cert["max_defects"].items()) if k in TOL]
    if cert["verdict"] == "chaotic_regime" and not any(o["verified"] for o in cert["periodic_orbits"]):
        checks.append(("verified_periodic_orbits", 1.0, 0.0))
    return checks


COMMANDS = {
    "sstar": cmd_sstar,
    "transport": cmd_transport,
    "evolve": cmd_evolve,
    "norm": cmd_norm,
    "eigencheck": cmd_eigencheck,
    "orbit": cmd_orbit,
    "gsc": cmd_gsc,
    "fd-compare": cmd_fd_compare,
    "residual": cmd_residual,
    "report": cmd_report,
}

HELP = {
    "sstar": "chaos threshold s* with the brute-force cross-check",
    "transport": "S(t)f on the probes, with characteristic points",
    "evolve": "T(t)f on the probes via the Romanov quadrature",
    "norm": "weighted sup norm and membership in Y_s",
    "eigencheck": "T(t) phi_lam against h_t(lam) phi_lam",
    "orbit": "find and verify a periodic eigenfunction",
    "gsc": "witness eigenvalues in Omega1 and Omega2 with decay certificates",
    "fd-compare": "Crank-Nicolson against the quadrature",
    "residual": "PDE residual of T(t)f under stencil refinement",
    "report": "full certificate as JSON",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="bschaos", description="Numerical verification of chaos for the "
                 "degenerate Black-Scholes semigroup.")
    ap.add_argument("--version", action="version", version=f"bschaos {__version__}")
    sub = ap.add_subparsers(dest="command", metavar="subcommand", parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name, help=HELP[name], description=HELP[name])
        sp.add_argument("--config", help="JSON run configuration")
        for flag, typ in (("a", float), ("nu", float), ("beta", float), ("gamma", float),
                          ("s", float), ("t", float), ("eps", float), ("seed", int)):
            sp.add_argument(f"--{flag}", type=typ, default=None)
        sp.add_argument("--probes", help="comma-separated x probes")
        sp.add_argument("--field", help="field name (constant, call_payoff, bump, eigen, "
                        "gaussian_in_z)")
        sp.add_argument("--field-args", dest="field_args", help="field arguments as JSON")
        sp.add_argument("--z-max", dest="z_max", type=float)
        sp.add_argument("--n-z", dest="n_z", type=int)
        sp.add_argument("--n-t", dest="n_t", type=int)
        sp.add_argument("--out", help="artifact path (default stdout)")
        if name == "eigencheck":
            sp.add_argument("--lam", help="eigenvalue, e.g. 0.5+1j")
        if name in ("orbit",):
            sp.add_argument("--x-seed", dest="x_seed", type=float)
            sp.add_argument("--rotation", help="rational n/m")
            sp.add_argument("--periods", type=int)
        if name == "gsc":
            sp.add_argument("--n-points", dest="n_points", type=int)
            sp.add_argument("--n-iter", dest="n_iter", type=int)
        if name == "fd-compare":
            sp.add_argument("--boundary", choices=("auto", "reflect", "mirror"))
        if name == "residual":
            sp.add_argument("--levels", type=int)
    return ap


def run(argv=None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        ns = build_parser().parse_args(argv)
        if ns.command is None:
            raise UsageError("bschaos: a subcommand is required: " + ", ".join(COMMANDS))
        cfg = load_config(ns.config, ns)
        checks = COMMANDS[ns.command](cfg, out)
    except UsageError as exc:
        err.write(f"usage error: {exc}\n")
        return 1
    except (ParameterError, EmptyIntersection, ValueError) as exc:
        err.write(f"error: {exc}\n")
        return 1
    status = 0
    for metric, value, tol in checks:
        if not value <= tol:
            err.write(str(ToleranceFailure(metric, value, tol)) + "\n")
            status = 2
    return status


def main(argv=None) -> int:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
