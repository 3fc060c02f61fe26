"""Command line front end: ``fraplace {eigen,solve,criterion,verify,sweep}``.

Exit codes: 0 success (a "not solvable" verdict included), 1 validation error,
2 convergence failure, 3 property violation.
"""

import argparse
import copy
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import output
from .domain import boundary_power, build_grid
from .nonlocal_core import assemble_kernel, check_params
from .reactions import reaction_from_config, weights_array
from .solver import NonCoerciveError, SolverOptions, solve
from .spectral import EigenOptions, dense_oracle_p2, principal_eigenpair
from .verify import (check_comparison, check_contraction, check_necessity, check_picone,
                     check_quotient_bound, check_sign_part, check_submodularity,
                     evaluate_criterion, merge_reports, _rng)

log = logging.getLogger("fraplace")

EXIT_OK, EXIT_VALIDATION, EXIT_CONVERGENCE, EXIT_VIOLATION = 0, 1, 2, 3

DEFAULT_CONFIG = {
    "domain": {"lo": 0.0, "hi": 1.0, "n": 64},
    "s": 0.5,
    "p": 2.0,
    "reaction": {"kind": "logistic", "lambda": 20.0, "q": 2.0, "r": 4.0},
    "solver": {"tol": 1e-9, "max_iter": 50000, "starts": 1, "k_max": 1024, "stabilize_tol": 1e-6},
    "eigen": {"tol": 1e-9, "max_iter": 50000, "restarts": 3},
    "seed": 0,
    "output": {"dir": "runs", "formats": ["json", "csv", "svg"]},
}

# leaf fields whose type is fixed; "reaction" is validated by its own builder
_SCHEMA = {
    "domain": {"lo": float, "hi": float, "n": int},
    "s": float,
    "p": float,
    "reaction": dict,
    "solver": {"tol": float, "max_iter": int, "starts": int, "k_max": int, "stabilize_tol": float},
    "eigen": {"tol": float, "max_iter": int, "restarts": int},
    "seed": int,
    "output": {"dir": str, "formats": list},
}

PROPERTIES = ("picone", "submodularity", "comparison", "quotient_bound", "sign_part",
              "contraction", "necessity")


class ConfigError(ValueError):
    pass


def _merge(base, over, path=""):
    out = copy.deepcopy(base)
    for key, val in over.items():
        where = f"{path}{key}"
        if key not in _schema_at(path):
            raise ConfigError(f"{where}: unknown key")
        if isinstance(out.get(key), dict) and isinstance(val, dict) and key != "reaction":
            out[key] = _merge(out[key], val, where + ".")
        else:
            out[key] = val
    return out


def _schema_at(path):
    node = _SCHEMA
    for part in [p for p in path.split(".") if p]:
        node = node[part]
    return node


def _coerce(where, kind, val):
    if kind is int:
        if isinstance(val, bool) or not isinstance(val, (int, float)) or int(val) != val:
            raise ConfigError(f"{where}: expected an integer, got {val!r}")
        return int(val)
    if kind is float:
        if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
            raise ConfigError(f"{where}: expected a finite number, got {val!r}")
        return float(val)
    if not isinstance(val, kind):
        raise ConfigError(f"{where}: expected {kind.__name__}, got {val!r}")
    return val


def validate_config(cfg):
    """Type-check, range-check and normalize a merged config; returns a new dict."""
    out = {}
    for key, kind in _SCHEMA.items():
        if isinstance(kind, dict):
            out[key] = {sub: _coerce(f"{key}.{sub}", t, cfg[key][sub]) for sub, t in kind.items()}
        else:
            out[key] = _coerce(key, kind, cfg[key])
    d = out["domain"]
    if d["n"] < 2:
        raise ConfigError(f"domain.n: need an integer >= 2, got {d['n']}")
    if d["hi"] <= d["lo"]:
        raise ConfigError("domain.hi: must exceed domain.lo")
    if not 0 < out["s"] < 1:
        raise ConfigError(f"s: must lie in (0, 1), got {out['s']}")
    if not out["p"] > 1:
        raise ConfigError(f"p: must exceed 1, got {out['p']}")
    for sec in ("solver", "eigen"):
        if out[sec]["tol"] <= 0:
            raise ConfigError(f"{sec}.tol: must be positive")
        if out[sec]["max_iter"] < 1:
            raise ConfigError(f"{sec}.max_iter: must be >= 1")
    if out["solver"]["starts"] < 1:
        raise ConfigError("solver.starts: must be >= 1")
    if out["solver"]["k_max"] < 1:
        raise ConfigError("solver.k_max: must be >= 1")
    if out["solver"]["stabilize_tol"] <= 0:
        raise ConfigError("solver.stabilize_tol: must be positive")
    if out["eigen"]["restarts"] < 0:
        raise ConfigError("eigen.restarts: must be >= 0")
    bad = set(out["output"]["formats"]) - {"json", "csv", "svg"}
    if bad:
        raise ConfigError(f"output.formats: unknown formats {sorted(bad)}")
    out["reaction"] = copy.deepcopy(cfg["reaction"])
    try:
        reaction_from_config(out["reaction"], out["p"])
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"reaction: {exc}") from exc
    return out


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg, pairs):
    """Apply ``("solver.tol", "1e-8")`` style overrides to a config dict."""
    cfg = copy.deepcopy(cfg)
    for dotted, raw in pairs:
        parts = dotted.split(".")
        node = cfg
        for part in parts[:-1]:
            if not isinstance(node.get(part), dict):
                raise ConfigError(f"{dotted}: unknown config path")
            node = node[part]
        inside_reaction = parts[0] == "reaction"
        if not inside_reaction:
            try:
                schema = _schema_at(".".join(parts[:-1]))
            except (KeyError, TypeError):
                raise ConfigError(f"{dotted}: unknown config path") from None
            if parts[-1] not in schema:
                raise ConfigError(f"{dotted}: unknown config path")
        node[parts[-1]] = _parse_value(raw)
    return cfg


def load_config(path, overrides=()):
    user = {}
    if path is not None:
        try:
            user = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"config: cannot read {path}: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config: top level must be a JSON object")
    merged = _merge(DEFAULT_CONFIG, user)
    if "reaction" in user:
        merged["reaction"] = copy.deepcopy(user["reaction"])
    merged = apply_overrides(merged, overrides)
    return validate_config(merged)


def _split_overrides(extra):
    pairs = []
    i = 0
    while i < len(extra):
        tok = extra[i]
        name = tok[2:].split("=")[0]
        if not tok.startswith("--") or ("." not in name and name not in _SCHEMA):
            raise ConfigError(f"unrecognized argument {tok!r}")
        if "=" in tok:
            key, val = tok[2:].split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise ConfigError(f"{tok}: missing value")
            key, val = tok[2:], extra[i + 1]
            i += 2
        pairs.append((key, val))
    return pairs


class Context:
    """Everything a subcommand needs, built once from the resolved config."""

    def __init__(self, cfg, workers, outdir):
        self.cfg = cfg
        self.workers = workers
        self.outdir = outdir
        d = cfg["domain"]
        self.grid = build_grid(d["lo"], d["hi"], d["n"])
        check_params(cfg["s"], cfg["p"])
        self.kernel = assemble_kernel(self.grid, cfg["s"], cfg["p"])
        self.reaction = reaction_from_config(cfg["reaction"], cfg["p"])
        e = cfg["eigen"]
        self.eigen_opts = EigenOptions(tol=e["tol"], max_iter=e["max_iter"], restarts=e["restarts"],
                                       seed=cfg["seed"])
        sv = cfg["solver"]
        self.solver_opts = SolverOptions(tol=sv["tol"], max_iter=sv["max_iter"], starts=sv["starts"],
                                         k_max=sv["k_max"], stabilize_tol=sv["stabilize_tol"],
                                         seed=cfg["seed"], workers=workers)

    def wants(self, fmt):
        return fmt in self.cfg["output"]["formats"]

    def envelope(self, command, body):
        return {"schema_version": output.SCHEMA_VERSION, "command": command,
                "config": self.cfg, **body}

    def write_json(self, name, command, body):
        output.write_json(self.outdir / name, self.envelope(command, body))


def _weight_from_spec(ctx, spec):
    x = ctx.grid.nodes
    if spec in (None, "zero"):
        return np.zeros(ctx.grid.n), "zero"
    if spec == "a0":
        return weights_array(ctx.reaction, x, "zero"), "a0"
    if spec == "ainf":
        return weights_array(ctx.reaction, x, "infty"), "ainf"
    try:
        return np.full(ctx.grid.n, float(spec)), f"constant {float(spec)!r}"
    except ValueError:
        pass
    try:
        arr = json.loads(Path(spec).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"--weight: not a number, keyword or readable JSON file: {spec}") from exc
    vals = np.array([float(v) for v in arr])
    if vals.shape != (ctx.grid.n,):
        raise ConfigError(f"--weight: file has {vals.size} entries, domain.n = {ctx.grid.n}")
    return vals, f"file {spec}"


def cmd_eigen(ctx, args):
    a, label = _weight_from_spec(ctx, args.weight)
    res = principal_eigenpair(ctx.kernel, ctx.grid, a, ctx.eigen_opts)
    body = {"weight": label, "eigen": res.to_json()}
    if ctx.kernel.p == 2 and np.all(np.isfinite(a)):
        body["oracle_lambda"] = dense_oracle_p2(ctx.kernel, ctx.grid, a).value
    if ctx.wants("json"):
        ctx.write_json("eigen.json", "eigen", body)
    if res.v is not None:
        ds = boundary_power(ctx.grid, ctx.kernel.s)
        if ctx.wants("csv"):
            output.write_csv(ctx.outdir / "eigenfunction.csv", ["x", "v", "d^s", "v/d^s"],
                             [ctx.grid.nodes, res.v, ds, res.v / ds])
        if ctx.wants("svg"):
            output.write_svg(ctx.outdir / "eigenfunction.svg",
                             [("v", ctx.grid.nodes, res.v), ("d^s", ctx.grid.nodes, ds)],
                             "x", "v", f"lambda_1 = {res.lam}")
    print(f"lambda_1 = {res.lam}  residual = {res.residual:.3e}  converged = {res.converged}")
    return EXIT_OK if res.converged else EXIT_CONVERGENCE


def cmd_criterion(ctx, args):
    verdict = evaluate_criterion(ctx.kernel, ctx.grid, ctx.reaction, ctx.eigen_opts)
    if ctx.wants("json"):
        ctx.write_json("criterion.json", "criterion", {"verdict": verdict.to_json()})
    print(f"solvable = {verdict.solvable}: {verdict.reason}")
    return EXIT_OK


def _solution_files(ctx, res, stem="solution"):
    ds = boundary_power(ctx.grid, ctx.kernel.s)
    if ctx.wants("csv"):
        output.write_csv(ctx.outdir / f"{stem}.csv", ["x", "u", "d^s", "u/d^s"],
                         [ctx.grid.nodes, res.u, ds, res.u / ds])
    if ctx.wants("svg"):
        output.write_svg(ctx.outdir / f"{stem}.svg",
                         [("u", ctx.grid.nodes, res.u), ("d^s", ctx.grid.nodes, ds)],
                         "x", "u", f"sup u = {res.sup_u:.6g}")


def cmd_solve(ctx, args):
    verdict = evaluate_criterion(ctx.kernel, ctx.grid, ctx.reaction, ctx.eigen_opts)
    try:
        res = solve(ctx.kernel, ctx.grid, ctx.reaction, ctx.solver_opts, verdict=verdict)
    except NonCoerciveError as exc:
        print(f"non-coercive truncation: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    if ctx.wants("json"):
        ctx.write_json("solve.json", "solve", {"verdict": verdict.to_json(), "result": res.to_json()})
    _solution_files(ctx, res)
    print(f"solvable = {verdict.solvable}; {res.classification}: sup u = {res.sup_u:.6g}, "
          f"phi = {res.phi:.6g}, residual = {res.residual:.3e}, k = {res.k_final}")
    if verdict.solvable and (not res.converged or res.classification != "positive_solution"):
        return EXIT_CONVERGENCE
    return EXIT_OK


def _verify_reports(ctx, names, trials, seed, tamper=False):
    reports = []
    k = ctx.kernel
    for name in names:
        if name == "picone":
            reports.append(check_picone([1.5, 2.0, 3.0], trials, seed))
        elif name == "submodularity":
            reports.append(check_submodularity(k, trials, seed))
        elif name == "comparison":
            rng = _rng(seed, 4000)
            parts = []
            for _ in range(trials):
                u = rng.uniform(0.05, 2.0, k.n)
                v = rng.uniform(0.05, 2.0, k.n)
                parts.append(check_comparison(k, u, v))
            reports.append(merge_reports(parts))
        elif name == "quotient_bound":
            rng = _rng(seed, 5000)
            ds = boundary_power(ctx.grid, k.s)
            parts = [check_quotient_bound(ctx.grid, ds * rng.uniform(0.5, 2.0, k.n),
                                          ds * rng.uniform(0.5, 2.0, k.n), k.s, k.p)
                     for _ in range(trials)]
            reports.append(merge_reports(parts))
        elif name == "sign_part":
            reports.append(check_sign_part(k, trials, seed))
        elif name == "contraction":
            reports.append(check_contraction(k, trials, seed))
        elif name == "necessity":
            verdict = evaluate_criterion(k, ctx.grid, ctx.reaction, ctx.eigen_opts)
            res = solve(k, ctx.grid, ctx.reaction, ctx.solver_opts, verdict=verdict)
            if tamper:
                verdict = replace(verdict, solvable=not verdict.solvable)
            if tamper and res.classification != "positive_solution":
                res = replace(res, classification="positive_solution")
            reports.append(check_necessity(k, ctx.grid, ctx.reaction, res, verdict))
    return reports


def cmd_verify(ctx, args):
    names = [p for p in (args.properties or "").split(",") if p] if args.properties is not None \
        else list(PROPERTIES)
    unknown = set(names) - set(PROPERTIES)
    if unknown:
        raise ConfigError(f"--properties: unknown {sorted(unknown)}; choose from {PROPERTIES}")
    seed = ctx.cfg["seed"] if args.trial_seed is None else args.trial_seed
    reports = _verify_reports(ctx, names, args.trials, seed, args.tamper)
    if ctx.wants("json"):
        ctx.write_json("verify.json", "verify", {"reports": [r.to_json() for r in reports]})
    for r in reports:
        print(f"{r.property:24s} trials={r.trials:<9d} violations={r.violations:<4d} "
              f"worst_margin={r.worst_margin:.3e}")
    return EXIT_VIOLATION if any(r.violations for r in reports) else EXIT_OK


def sweep(ctx, lambdas):
    """Solve the logistic problem for each coefficient; rows ordered like ``lambdas``."""
    params = ctx.cfg["reaction"]

    def one(lam):
        cfg = dict(params, **{"lambda": float(lam)})
        reaction = reaction_from_config(cfg, ctx.cfg["p"])
        verdict = evaluate_criterion(ctx.kernel, ctx.grid, reaction, ctx.eigen_opts)
        res = solve(ctx.kernel, ctx.grid, reaction, ctx.solver_opts, verdict=verdict)
        return {"lambda": float(lam), "sup_u": res.sup_u, "phi": res.phi,
                "verdict": bool(verdict.solvable), "lambda_a0": float(verdict.lambda_a0),
                "classification": res.classification, "converged": res.converged}

    if ctx.workers > 1:
        with ThreadPoolExecutor(ctx.workers) as pool:
            return list(pool.map(one, lambdas))
    return [one(lam) for lam in lambdas]


def bracket_report(rows, lambda1, onset=1e-4, zero=1e-8):
    """Locate the first coefficient with ``sup u > onset`` and compare with ``lambda1``."""
    lams = [r["lambda"] for r in rows]
    step = (lams[-1] - lams[0]) / (len(lams) - 1) if len(lams) > 1 else 0.0
    on = next((i for i, r in enumerate(rows) if r["sup_u"] > onset), None)
    below = [r for r in rows if r["lambda"] < lambda1]
    out = {"lambda1_0": lambda1, "step": step,
           "onset_lambda": None if on is None else lams[on],
           "below_all_zero": all(r["sup_u"] < zero for r in below),
           "verdict_matches_sign": all(r["verdict"] == (r["lambda_a0"] < 0) for r in rows),
           "verdict_matches_onset": all(r["verdict"] == (r["sup_u"] > onset) for r in rows)}
    if on is None:
        out["bracketed"] = False
    else:
        prev = lams[on - 1] if on > 0 else -math.inf
        out["bracketed"] = bool(prev < lambda1 <= lams[on] and lams[on] - lambda1 <= step + 1e-12)
    return out


def cmd_sweep(ctx, args):
    r = ctx.cfg["reaction"]
    if r.get("kind") != "logistic" or r.get("q") != ctx.cfg["p"]:
        raise ConfigError("sweep: needs reaction.kind = logistic with reaction.q = p")
    lam1 = principal_eigenpair(ctx.kernel, ctx.grid, 0.0, ctx.eigen_opts).value
    lo, hi = args.lambda_lo, args.lambda_hi
    if args.relative:
        lo, hi = lo * lam1, hi * lam1
    if args.steps < 1 or hi < lo:
        raise ConfigError("sweep: need steps >= 1 and lambda-hi >= lambda-lo")
    lambdas = [lo] if lo == hi or args.steps == 1 else list(np.linspace(lo, hi, args.steps))
    try:
        rows = sweep(ctx, lambdas)
    except (NonCoerciveError, RuntimeError) as exc:
        print(f"sweep failed: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    report = bracket_report(rows, lam1)
    if ctx.wants("json"):
        ctx.write_json("sweep.json", "sweep", {"rows": rows, "bracket": report})
    if ctx.wants("csv"):
        path = ctx.outdir / "sweep.csv"
        lines = ["lambda,sup_u,phi,verdict"]
        lines += ["%.17g,%.17g,%.17g,%s" % (r["lambda"], r["sup_u"], r["phi"],
                                             "solvable" if r["verdict"] else "not_solvable")
                  for r in rows]
        path.write_text("\n".join(lines) + "\n")
    if ctx.wants("svg") and len(rows) > 1:
        output.write_svg(ctx.outdir / "sweep.svg",
                         [("sup u", [r["lambda"] for r in rows], [r["sup_u"] for r in rows])],
                         "lambda", "sup u", f"lambda_1(0) = {lam1:.6g}")
    print(f"lambda_1(0) = {lam1:.10g}; onset at {report['onset_lambda']}; bracketed = {report['bracketed']}")
    return EXIT_OK if all(r["converged"] for r in rows) else EXIT_CONVERGENCE


COMMANDS = {"eigen": cmd_eigen, "solve": cmd_solve, "criterion": cmd_criterion,
            "verify": cmd_verify, "sweep": cmd_sweep}


def build_parser():
    parser = argparse.ArgumentParser(prog="fraplace", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="JSON config file (defaults used when omitted)")
    common.add_argument("--workers", type=int, default=None,
                        help="parallel jobs (fallback: FRAPLACE_WORKERS, else 1)")
    common.add_argument("--overwrite", action="store_true",
                        help="write into output.dir itself instead of a timestamped subdirectory")
    sp = sub.add_parser("eigen", parents=[common], help="weighted principal eigenpair")
    sp.add_argument("--weight", default="zero",
                    help="zero | a0 | ainf | <number> | <path to JSON array>")
    sub.add_parser("solve", parents=[common], help="criterion and solution")
    sub.add_parser("criterion", parents=[common], help="solvability verdict only")
    sp = sub.add_parser("verify", parents=[common], help="property checks")
    sp.add_argument("--properties", default=None,
                    help=f"comma separated subset of {','.join(PROPERTIES)} (empty string: none)")
    sp.add_argument("--trials", type=int, default=1000)
    sp.add_argument("--trial-seed", type=int, default=None)
    sp.add_argument("--tamper", action="store_true",
                    help="flip the verdict given to the necessity check (harness self-test)")
    sp = sub.add_parser("sweep", parents=[common], help="logistic coefficient sweep")
    sp.add_argument("--lambda-lo", type=float, default=0.5)
    sp.add_argument("--lambda-hi", type=float, default=2.0)
    sp.add_argument("--steps", type=int, default=20)
    sp.add_argument("--relative", action="store_true",
                    help="read the range as multiples of lambda_1(0)")
    return parser


def _workers(flag):
    if flag is not None:
        return max(1, flag)
    env = os.environ.get("FRAPLACE_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"FRAPLACE_WORKERS: not an integer: {env!r}") from None
    return 1


def _output_dir(cfg, command, overwrite):
    base = Path(cfg["output"]["dir"])
    if overwrite:
        path = base
    else:
        stamp = time.strftime("%Y%m%d-%H%M%S")
        path = base / f"{command}-{stamp}"
        i = 1
        while path.exists():
            path = base / f"{command}-{stamp}-{i}"
            i += 1
    path.mkdir(parents=True, exist_ok=True)
    return path


def main(argv=None):
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = _split_overrides(extra)
        cfg = load_config(args.config, overrides)
        workers = _workers(args.workers)
        outdir = _output_dir(cfg, args.command, args.overwrite)
        ctx = Context(cfg, workers, outdir)
        return COMMANDS[args.command](ctx, args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
