"""Batch command line interface.

One JSON config per run, dotted --set overrides, named presets, and a
manifest written next to every artifact.  All output bodies are
deterministic functions of the resolved config; the timestamp lives
only in manifest.json, so reruns with an identical config hash produce
byte-identical CSV/JSON bodies.

Exit codes: 0 ok, 2 non-convergence (or a failing verdict), 3 invalid
config or spec, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .model import (ProblemSpec, DomainSpec, SourceSpec, SpecError,
                    DomainError, TableRangeError, validate_spec)
from .mesh import make_mesh, DiscreteField
from .linalg import principal_eigenpair, EigenError
from .solve import (SolverConfig, newton_solve, fixed_point_solve,
                    continuation_t, SweepTable)
from .checks import (check_psi_decreasing, pohozaev_defect, holder_quotient,
                     apriori_scaled_sweep, nonexistence_probe)
from . import transforms
from .presets import get_preset, preset_names

EXIT_OK = 0
EXIT_NONCONV = 2
EXIT_INVALID = 3
EXIT_IO = 4

_CONFIG_KEYS = {"problem", "domain", "mesh", "solver", "source", "sweep",
                "check", "probe", "transform"}


class ConfigError(Exception):
    """Anything wrong with the run configuration (exit 3)."""


# ---------------------------------------------------------------------------
# config plumbing


def _parse_set(item: str):
    if "=" not in item:
        raise ConfigError(f"--set needs dotted.path=value, got {item!r}")
    path, raw = item.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return path.split("."), value


def _apply_set(cfg: dict, path, value):
    node = cfg
    for key in path[:-1]:
        nxt = node.get(key)
        if not isinstance(nxt, dict):
            nxt = {}
            node[key] = nxt
        node = nxt
    node[path[-1]] = value


def load_config(args) -> tuple:
    """Resolve (config dict, origin string, preset meta or None)."""
    meta = None
    if args.preset:
        meta = get_preset(args.preset)
        cfg = meta["config"]
        origin = f"preset:{args.preset}"
    elif args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config: {e}")
        try:
            cfg = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}")
        origin = args.config
    else:
        raise ConfigError("either --config or --preset is required")
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    for item in args.set or ():
        path, value = _parse_set(item)
        _apply_set(cfg, path, value)
    unknown = set(cfg) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config section(s): {sorted(unknown)}")
    return cfg, origin, meta


def config_hash(cfg: dict) -> str:
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _json_text(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def build_problem(cfg: dict) -> ProblemSpec:
    if "problem" not in cfg:
        raise ConfigError("config needs a 'problem' section")
    return ProblemSpec.from_dict(cfg["problem"])


def build_mesh(cfg: dict, domain: DomainSpec):
    mcfg = cfg.get("mesh") or {}
    if domain.kind == "rectangle":
        return make_mesh(domain, nx=int(mcfg.get("nx", 63)),
                         ny=int(mcfg.get("ny", 63)))
    return make_mesh(domain, M=int(mcfg.get("M", 400)))


def build_solver(cfg: dict) -> SolverConfig:
    scfg = cfg.get("solver") or {}
    known = {f.name for f in dataclasses.fields(SolverConfig)}
    unknown = set(scfg) - known
    if unknown:
        raise ConfigError(f"unknown solver option(s): {sorted(unknown)}")
    return SolverConfig(**scfg)


def build_source(cfg: dict):
    if cfg.get("source") is None:
        return None
    return SourceSpec.from_dict(cfg["source"])


def _resolve_grid(cfg: dict, args, kind: str) -> np.ndarray:
    if getattr(args, "grid", None) is not None:
        text = args.grid.strip()
        if not text:
            return np.empty(0)
        return np.array([float(v) for v in text.split(",")])
    sweep = cfg.get("sweep") or {}
    if sweep.get("kind") not in (None, kind):
        raise ConfigError(f"config sweep kind {sweep.get('kind')!r} does not "
                          f"match this command ({kind}); pass --grid to override")
    grid = sweep.get("grid")
    if grid is None:
        raise ConfigError("no sweep grid: set sweep.grid in the config or pass --grid")
    if isinstance(grid, dict):
        start, stop = float(grid["start"]), float(grid["stop"])
        points = int(grid["points"])
        if grid.get("spacing", "log") == "log":
            return np.geomspace(start, stop, points)
        return np.linspace(start, stop, points)
    return np.array([float(v) for v in grid])


# ---------------------------------------------------------------------------
# artifact plumbing


class Artifacts:
    """Collects output files, then writes them in one pass."""

    def __init__(self, outdir: Path):
        self.outdir = outdir
        self.files: list = []

    def add(self, name: str, text: str):
        self.files.append((name, text))

    def flush(self, manifest: dict):
        try:
            self.outdir.mkdir(parents=True, exist_ok=True)
            for name, text in self.files:
                (self.outdir / name).write_text(text)
            (self.outdir / "manifest.json").write_text(_json_text(manifest))
        except OSError as e:
            print(f"error: cannot write outputs: {e}", file=sys.stderr)
            raise


def make_manifest(args, cfg, origin, meta, problem) -> dict:
    return {
        "command": "quadgrad " + " ".join(args.raw_argv),
        "config_path": origin,
        "config_sha256": config_hash(cfg),
        "output_dir": str(args.out),
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "preset": args.preset,
        "expected": meta["expected"] if meta else None,
        "problem": problem.to_dict() if problem is not None else None,
    }


def _default_out(args, origin: str) -> Path:
    if args.out:
        return Path(args.out)
    if args.preset:
        stem = args.preset
    else:
        stem = Path(origin).stem or "run"
    return Path("runs") / stem


# ---------------------------------------------------------------------------
# subcommands


def cmd_solve(args) -> int:
    cfg, origin, meta = load_config(args)
    problem = build_problem(cfg)
    mesh = build_mesh(cfg, problem.domain)
    solver = build_solver(cfg)
    source = build_source(cfg)
    args.out = _default_out(args, origin)

    runner = fixed_point_solve if args.method == "fixed-point" else newton_solve
    report = runner(problem, mesh, solver, source=source)

    art = Artifacts(args.out)
    art.add("report.json", _json_text(report.to_dict()))
    art.add("solution.txt", report.field.dump())
    if args.validate:
        vr = validate_spec(problem)
        art.add("validation.json", _json_text(vr.to_dict()))
    art.flush(make_manifest(args, cfg, origin, meta, problem))
    return EXIT_OK if report.converged else EXIT_NONCONV


def cmd_sweep_lambda(args) -> int:
    cfg, origin, meta = load_config(args)
    problem = build_problem(cfg)
    mesh = build_mesh(cfg, problem.domain)
    solver = build_solver(cfg)
    grid = _resolve_grid(cfg, args, "lambda")
    args.out = _default_out(args, origin)

    if grid.size == 0:
        table, verdict_dict = SweepTable(kind="lambda"), None
    else:
        table, verdict = apriori_scaled_sweep(problem, mesh, grid, solver)
        verdict_dict = verdict.to_dict()
    art = Artifacts(args.out)
    art.add("sweep.csv", table.to_csv())
    art.add("verdict.json", _json_text({"kind": "lambda", "verdict": verdict_dict}))
    art.flush(make_manifest(args, cfg, origin, meta, problem))
    return EXIT_OK


def cmd_sweep_t(args) -> int:
    cfg, origin, meta = load_config(args)
    problem = build_problem(cfg)
    mesh = build_mesh(cfg, problem.domain)
    solver = build_solver(cfg)
    grid = _resolve_grid(cfg, args, "t")
    args.out = _default_out(args, origin)

    table = continuation_t(problem, mesh, grid, solver, workers=args.workers)
    art = Artifacts(args.out)
    art.add("sweep.csv", table.to_csv())
    art.add("verdict.json", _json_text({
        "kind": "t", "t_fail": table.t_fail,
        "converged": sum(r.status == "converged" for r in table.rows),
        "total": len(table.rows)}))
    art.flush(make_manifest(args, cfg, origin, meta, problem))
    return EXIT_OK


def _check_eigen(cfg, problem, args):
    domain = problem.domain if problem else DomainSpec.from_dict(cfg["domain"])
    mesh = build_mesh(cfg, domain)
    pair = principal_eigenpair(mesh)
    out = {"lambda1": pair.value, "iterations": pair.iterations,
           "residual_sup": pair.residual_sup, "M": getattr(mesh, "M", None)}
    if args.richardson and hasattr(mesh, "refine"):
        fine = principal_eigenpair(mesh.refine())
        out["lambda1_fine"] = fine.value
        out["lambda1_richardson"] = (4.0 * fine.value - pair.value) / 3.0
    ok = pair.residual_sup <= 1e-8
    return {"name": "eigen", "ok": ok, **out}, ok, pair


def cmd_check(args) -> int:
    cfg, origin, meta = load_config(args)
    ccfg = cfg.get("check") or {}
    name = args.name or ccfg.get("name")
    if name not in ("psi-decreasing", "eigen", "pohozaev", "holder",
                    "scaled-bounded"):
        raise ConfigError(f"unknown check {name!r}")
    problem = build_problem(cfg) if "problem" in cfg else None
    args.out = _default_out(args, origin)
    art = Artifacts(args.out)
    extra_files = []

    if name == "eigen":
        payload, ok, _ = _check_eigen(cfg, problem, args)
    elif name == "psi-decreasing":
        if problem is None:
            raise ConfigError("psi-decreasing needs a problem section")
        verdict = check_psi_decreasing(
            problem.g, problem.f.p, problem.domain.dimension,
            L=float(ccfg.get("L", 1.0)), anchor=float(ccfg.get("anchor", 1.0)),
            rho0=float(ccfg.get("rho0", 0.0)))
        payload, ok = verdict.to_dict(), verdict.ok
    elif name == "scaled-bounded":
        if problem is None:
            raise ConfigError("scaled-bounded needs a problem section")
        mesh = build_mesh(cfg, problem.domain)
        grid = _resolve_grid(cfg, args, "lambda")
        table, verdict = apriori_scaled_sweep(problem, mesh, grid,
                                              build_solver(cfg))
        extra_files.append(("sweep.csv", table.to_csv()))
        payload, ok = verdict.to_dict(), verdict.ok
    else:
        # pohozaev and holder measure a solved field
        if problem is None:
            raise ConfigError(f"{name} needs a problem section")
        mesh = build_mesh(cfg, problem.domain)
        report = newton_solve(problem, mesh, build_solver(cfg),
                              source=build_source(cfg))
        ok = report.converged
        if name == "pohozaev":
            q = float(ccfg.get("q", problem.f.p))
            payload = {"name": "pohozaev", "ok": ok, "q": q,
                       "status": report.status,
                       "defect": pohozaev_defect(report.field, q) if ok else None}
        else:
            alpha = float(ccfg.get("alpha", 0.5))
            payload = {"name": "holder", "ok": ok, "alpha": alpha,
                       "status": report.status,
                       "quotient": holder_quotient(report.field, alpha) if ok else None}
        extra_files.append(("solution.txt", report.field.dump()))

    for fname, text in extra_files:
        art.add(fname, text)
    art.add("verdict.json", _json_text(payload))
    art.flush(make_manifest(args, cfg, origin, meta, problem))
    return EXIT_OK if ok else EXIT_NONCONV


def cmd_probe_nonexist(args) -> int:
    cfg, origin, meta = load_config(args)
    problem = build_problem(cfg)
    mesh = build_mesh(cfg, problem.domain)
    solver = build_solver(cfg)
    source = build_source(cfg)
    if source is None:
        raise ConfigError("probe-nonexist needs a source section")
    levels = args.levels or int((cfg.get("probe") or {}).get("levels", 3))
    args.out = _default_out(args, origin)

    report = nonexistence_probe(problem, source, mesh, levels=levels,
                                config=solver)
    art = Artifacts(args.out)
    art.add("probe.csv", report.to_csv())
    art.add("probe.json", _json_text(report.to_dict()))
    art.flush(make_manifest(args, cfg, origin, meta, problem))
    return EXIT_OK


def cmd_transform(args) -> int:
    cfg, origin, meta = load_config(args)
    problem = build_problem(cfg)
    tcfg = cfg.get("transform") or {}
    kind = args.kind or tcfg.get("kind")
    args.out = _default_out(args, origin)

    if kind == "semilinearize":
        anchor = tcfg.get("anchor")
        tp = transforms.semilinearize(problem,
                                      anchor=float(anchor) if anchor is not None else None)
    elif kind == "gamma-map":
        b = tcfg.get("b")
        tp = transforms.gamma_transform(problem, b=float(b) if b is not None else None)
    elif kind == "truncate-above":
        tp = transforms.truncate_at_s0(problem, float(tcfg.get("s0", 0.5)))
    elif kind == "truncate-tail":
        tp = transforms.truncate_at_delta(problem, float(tcfg.get("delta", 0.1)))
    else:
        raise ConfigError(f"unknown transform kind {kind!r}")

    grid = np.geomspace(1e-4, 1e2, 25)
    payload = {"kind": kind, "problem": tp.problem.to_dict(),
               "metadata": tp.metadata,
               "roundtrip_error": tp.roundtrip_error(grid)}
    art = Artifacts(args.out)
    art.add("transform.json", _json_text(payload))
    art.flush(make_manifest(args, cfg, origin, meta, problem))
    return EXIT_OK


def cmd_eigen(args) -> int:
    cfg, origin, meta = load_config(args)
    problem = build_problem(cfg) if "problem" in cfg else None
    args.out = _default_out(args, origin)
    payload, _, pair = _check_eigen(cfg, problem, args)
    art = Artifacts(args.out)
    art.add("eigen.json", _json_text(payload))
    art.add("phi1.txt", pair.field.dump())
    art.flush(make_manifest(args, cfg, origin, meta, problem))
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(sub):
    sub.add_argument("--config", help="path to the JSON run configuration")
    sub.add_argument("--preset", choices=preset_names(),
                     help="named preset instead of a config file")
    sub.add_argument("--set", action="append", metavar="PATH=JSON",
                     help="override a config leaf, e.g. problem.lambda=10")
    sub.add_argument("--out", help="output directory (default runs/<name>)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="quadgrad",
        description="Numerical experiments for elliptic problems with "
                    "singular quadratic gradient terms.")
    subs = ap.add_subparsers(dest="subcommand", required=True)

    sp = subs.add_parser("solve", help="one solve, report + solution dump")
    _add_common(sp)
    sp.add_argument("--method", choices=("newton", "fixed-point"),
                    default="newton")
    sp.add_argument("--validate", action="store_true",
                    help="also emit the structural-condition report")
    sp.set_defaults(fn=cmd_solve)

    sp = subs.add_parser("sweep-lambda", help="continuation in lambda")
    _add_common(sp)
    sp.add_argument("--grid", help="comma separated values (overrides config)")
    sp.set_defaults(fn=cmd_sweep_lambda)

    sp = subs.add_parser("sweep-t", help="sweep the auxiliary forcing t")
    _add_common(sp)
    sp.add_argument("--grid", help="comma separated values (overrides config)")
    sp.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                    help="thread pool size; t points are independent")
    sp.set_defaults(fn=cmd_sweep_t)

    sp = subs.add_parser("check", help="run one named verdict")
    _add_common(sp)
    sp.add_argument("--name", choices=("psi-decreasing", "eigen", "pohozaev",
                                       "holder", "scaled-bounded"))
    sp.add_argument("--grid", help="lambda grid for scaled-bounded")
    sp.add_argument("--no-richardson", dest="richardson", action="store_false")
    sp.set_defaults(fn=cmd_check, richardson=True)

    sp = subs.add_parser("probe-nonexist",
                         help="refinement probe for degeneration")
    _add_common(sp)
    sp.add_argument("--levels", type=int)
    sp.set_defaults(fn=cmd_probe_nonexist)

    sp = subs.add_parser("transform", help="emit a transformed problem")
    _add_common(sp)
    sp.add_argument("--kind", choices=("semilinearize", "gamma-map",
                                       "truncate-above", "truncate-tail"))
    sp.set_defaults(fn=cmd_transform)

    sp = subs.add_parser("eigen", help="principal Dirichlet eigenpair")
    _add_common(sp)
    sp.add_argument("--no-richardson", dest="richardson", action="store_false")
    sp.set_defaults(fn=cmd_eigen, richardson=True)
    return ap


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    args = ap.parse_args(argv)
    args.raw_argv = argv
    if args.out is not None:
        args.out = Path(args.out)
    try:
        return args.fn(args)
    except (ConfigError, SpecError, DomainError, TableRangeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except EigenError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NONCONV
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
