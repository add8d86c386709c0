"""Command-line front end.

Exit codes: 0 success, 2 input error, 3 infinite switching bound,
4 missing artifact. Every command accepts ``--manifest PATH``, which records
the invocation so that ``multinorm rerun PATH`` reproduces it exactly.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .cuttail import find_t_cut, simplify_bounds
from .engine import EngineConfig, InfiniteBoundError, bisect_sigma
from .numlin import as_matrix, spectral_abscissa
from .oracle import best_periodic_lower_bound, growth_probe
from .sysmodel import (
    SystemFormatError,
    law_from_json,
    law_to_json,
    load_system,
    save_system,
    simulate,
    system_from_dict,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INFINITE = 3
EXIT_MISSING = 4


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


@dataclass
class RunManifest:
    """Everything needed to replay one command."""

    command: str
    input: str
    config: dict
    outputs: list = field(default_factory=list)
    argv: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        data = json.loads(text)
        return cls(**{k: data[k] for k in ("command", "input", "config", "outputs", "argv")})


def fmt(x: float) -> str:
    """At least 6 significant digits (8 are printed)."""
    return f"{x:.8g}"


def _dump(data) -> str:
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def _write(path: str | None, text: str):
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _load(path: str):
    try:
        return load_system(path)
    except FileNotFoundError:
        raise CliError(f"{path}: no such file", EXIT_INPUT) from None
    except SystemFormatError as exc:
        raise CliError(f"{path}: {exc}", EXIT_INPUT) from None


def _config(args) -> EngineConfig:
    try:
        return EngineConfig(N=args.n_grid, delta=args.delta, K_max=args.kmax, hull=args.hull)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_INPUT) from None


def _require_finite(sys_, path: str):
    if not sys_.finite_upper:
        raise CliError(
            f"{path}: some upper bounds are infinite; run "
            f"'multinorm cut-tail {path} --simplify reduce --out FILE' and use the rewritten system",
            EXIT_INFINITE,
        )


def _bisect(args, stop_on_sign: bool):
    system = _load(args.system)
    _require_finite(system, args.system)
    cfg = _config(args)
    if system.n < 2:
        raise CliError("the system needs at least two modes", EXIT_INPUT)
    try:
        return bisect_sigma(system, cfg, target_width=args.width, max_steps=args.max_steps, stop_on_sign=stop_on_sign)
    except InfiniteBoundError as exc:
        raise CliError(str(exc), EXIT_INFINITE) from None
    except ValueError as exc:
        raise CliError(str(exc), EXIT_INPUT) from None


def _print_provenance(res):
    law = law_to_json(res.lower_law) if res.lower_law is not None else "log-norm bracket"
    print(f"  lower end: periodic law {law}")
    rep = res.upper_report
    if rep is None:
        print("  upper end: log-norm bracket")
    else:
        print(f"  upper end: {rep.case} at shift {fmt(res.upper_shift)}, N={rep.config.N}, "
              f"nu={fmt(rep.nu)}, nu_refined={fmt(rep.nu_refined)}, vertices={list(rep.vertex_counts)}")


def cmd_compute(args) -> int:
    res = _bisect(args, stop_on_sign=False)
    print(f"sigma in [{fmt(res.lo)}, {fmt(res.hi)}]")
    print(f"  width {fmt(res.width)} after {len(res.steps)} runs")
    _print_provenance(res)
    if args.out:
        _write(args.out, res.to_json())
    return EXIT_OK


def cmd_check_stability(args) -> int:
    res = _bisect(args, stop_on_sign=True)
    print(res.verdict if res.verdict != "UNDECIDED" else f"UNDECIDED [{fmt(res.lo)}, {fmt(res.hi)}]")
    print(f"sigma in [{fmt(res.lo)}, {fmt(res.hi)}]")
    _print_provenance(res)
    if args.out:
        _write(args.out, res.to_json())
    return EXIT_OK


def _load_matrix_or_system(path: str):
    """A system file, or ``{"matrix": ...}`` / a bare nested list."""
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise CliError(f"{path}: no such file", EXIT_INPUT) from None
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}", EXIT_INPUT) from None
    try:
        if isinstance(data, dict) and "modes" in data:
            return system_from_dict(data)
        raw = data["matrix"] if isinstance(data, dict) and "matrix" in data else data
        return [as_matrix(raw)]
    except (SystemFormatError, ValueError, TypeError, KeyError) as exc:
        raise CliError(f"{path}: {exc}", EXIT_INPUT) from None


def cmd_cut_tail(args) -> int:
    loaded = _load_matrix_or_system(args.system)
    modes = loaded if isinstance(loaded, list) else list(loaded.modes)
    rows = []
    print(f"{'mode':>4}  {'T_cut':>12}  method")
    for j, A in enumerate(modes):
        if not spectral_abscissa(A) < 0:
            rows.append({"mode": j + 1, "t_cut": None, "method": "skipped (unstable)"})
        elif A.shape[0] == 1:
            rows.append({"mode": j + 1, "t_cut": 0.0, "method": "scalar"})
        else:
            r = find_t_cut(A, seed=args.seed)
            rows.append({"mode": j + 1, "t_cut": r.T_cut, "method": r.method})
        t = rows[-1]["t_cut"]
        print(f"{j + 1:>4}  {fmt(t) if t is not None else '-':>12}  {rows[-1]['method']}")
    result = {"modes": rows}
    if args.simplify:
        if isinstance(loaded, list):
            raise CliError("--simplify needs a system file", EXIT_INPUT)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            new, changes = simplify_bounds(loaded, args.simplify)
        print("changes:")
        for c in changes:
            print(f"  mode {c.mode + 1}: {c.action} ({c.reason}) M {fmt(c.old_upper)} -> {fmt(c.new_upper)}")
        result["changes"] = [
            {"mode": c.mode + 1, "action": c.action, "reason": c.reason, "t_cut": c.t_cut,
             "old_upper": c.old_upper if math.isfinite(c.old_upper) else "inf",
             "new_upper": c.new_upper if math.isfinite(c.new_upper) else "inf"}
            for c in changes
        ]
        if args.out:
            save_system(new, args.out)
            log_path = str(Path(args.out).with_suffix(".changes.json"))
            _write(log_path, _dump(result))
            print(f"wrote {args.out} and {log_path}")
    elif args.out:
        _write(args.out, _dump(result))
    return EXIT_OK


def cmd_oracle(args) -> int:
    system = _load(args.system)
    _require_finite(system, args.system)
    res = best_periodic_lower_bound(system, args.max_legs, args.grid_points, args.budget)
    out = {
        "lower_bound": res.value if res.law is not None else None,
        "law": law_to_json(res.law) if res.law is not None else None,
        "exhaustive": res.exhaustive,
        "laws_evaluated": res.laws_evaluated,
    }
    if res.law is None:
        print("no periodizable law on this grid (a single mode cannot be repeated)")
    else:
        print(f"sigma >= {fmt(res.value)} via law {out['law']}")
    if not res.exhaustive:
        print(f"budget exhausted after {res.laws_evaluated} laws; bound is best-so-far")
    if args.probe:
        pr = growth_probe(system, args.probe, args.horizon, args.seed)
        out["growth_probe"] = {"value": pr.value, "short_horizon": pr.short_horizon, "samples": pr.samples}
        print(f"random growth probe: {fmt(pr.value)}" + (" (short horizon)" if pr.short_horizon else ""))
    if args.out:
        _write(args.out, _dump(out))
    return EXIT_OK


def _parse_law(text: str):
    p = Path(text)
    try:
        raw = json.loads(p.read_text()) if p.exists() else json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(f"law: invalid JSON ({exc.msg})", EXIT_INPUT) from None
    try:
        return law_from_json(raw)
    except SystemFormatError as exc:
        raise CliError(str(exc), EXIT_INPUT) from None


def cmd_simulate(args) -> int:
    system = _load(args.system)
    law = _parse_law(args.law)
    try:
        x0 = np.array([float(v) for v in args.x0.split(",")])
        traj = simulate(law, system, x0, args.step)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_INPUT) from None
    if args.format == "json":
        text = _dump({"times": traj.times.tolist(), "states": traj.states.tolist(),
                      "switch_times": traj.switch_times.tolist()})
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [f"x{k + 1}" for k in range(system.d)])
        for t, x in zip(traj.times, traj.states):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in x])
        text = buf.getvalue()
    _write(args.out, text)
    return EXIT_OK


def _polytopes_from_report(path: str) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise CliError(f"{path}: no such report", EXIT_MISSING) from None
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}", EXIT_INPUT) from None
    if isinstance(data, dict) and "polytopes" not in data:
        data = data.get("upper_report") or {}
    polys = data.get("polytopes") if isinstance(data, dict) else None
    if not polys or not polys.get("vertices") or not any(len(V) for V in polys["vertices"]):
        raise CliError(f"{path}: report holds no polytopes", EXIT_MISSING)
    return polys


def angle_order(points: np.ndarray) -> np.ndarray:
    """Planar points sorted by polar angle in ``[-pi, pi)``."""
    ang = np.arctan2(points[:, 1], points[:, 0])
    return points[np.argsort(ang, kind="stable")]


def cmd_export(args) -> int:
    polys = _polytopes_from_report(args.report)
    strategy = polys.get("strategy", "symmetrized")
    out_dir = Path(args.out) if args.out else Path(args.report).parent
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.report).stem
    for j, V in enumerate(polys["vertices"]):
        V = np.array(V, dtype=float).reshape(len(V), -1)
        path = out_dir / f"{stem}_space{j + 1}.{args.format}"
        if args.format == "json":
            path.write_text(_dump({"space": j + 1, "strategy": strategy, "vertices": V.tolist()}))
        else:
            pts = V
            if V.shape[1] == 2:
                # the symmetrized polygon is the hull of +-v; list both signs
                pts = angle_order(np.vstack([V, -V]) if strategy == "symmetrized" else V)
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(["x", "y"] if V.shape[1] == 2 else [f"x{k + 1}" for k in range(V.shape[1])])
            for p in pts:
                w.writerow([repr(float(v)) for v in p])
            path.write_text(buf.getvalue())
        half = " (half-count of the symmetrized polygon)" if strategy == "symmetrized" else ""
        print(f"space {j + 1}: len P = {len(V)}{half} -> {path}")
    return EXIT_OK


def _add_engine_flags(p):
    p.add_argument("system", help="system JSON file")
    p.add_argument("--n-grid", type=int, default=10, help="grid steps per switching segment")
    p.add_argument("--delta", type=float, default=1e-4, help="halting threshold for lower bounds")
    p.add_argument("--kmax", type=int, default=40, help="iteration cap per run")
    p.add_argument("--hull", choices=["sym", "pos"], default="sym")
    p.add_argument("--width", type=float, default=0.01, help="target interval width")
    p.add_argument("--max-steps", type=int, default=40, help="bisection run budget")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="report path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multinorm", description=__doc__.splitlines()[0])
    parser.add_argument("--manifest", help="record this invocation to a replayable manifest")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compute", help="certified interval for the exponent")
    _add_engine_flags(p)
    p.set_defaults(func=cmd_compute)

    p = sub.add_parser("check-stability", help="STABLE, UNSTABLE or UNDECIDED")
    _add_engine_flags(p)
    p.set_defaults(func=cmd_check_stability)

    p = sub.add_parser("cut-tail", help="cut-tail times per mode, optional bound simplification")
    p.add_argument("system", help="system JSON or matrix JSON")
    p.add_argument("--simplify", choices=["reduce", "cancel"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="rewritten system (with --simplify) or table JSON")
    p.set_defaults(func=cmd_cut_tail)

    p = sub.add_parser("oracle", help="brute-force periodic lower bound")
    p.add_argument("system")
    p.add_argument("--max-legs", type=int, default=2)
    p.add_argument("--grid-points", type=int, default=3, help="durations per mode, endpoints included")
    p.add_argument("--budget", type=int, default=200_000)
    p.add_argument("--probe", type=int, default=0, help="number of random laws for a growth probe")
    p.add_argument("--horizon", type=float, default=50.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("simulate", help="sample a trajectory under a switching law")
    p.add_argument("system")
    p.add_argument("--law", required=True, help="law JSON file or inline [[mode, duration], ...] (modes from 1)")
    p.add_argument("--x0", required=True, help="comma-separated initial state")
    p.add_argument("--step", type=float, default=0.05)
    p.add_argument("--format", choices=["json", "csv"], default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("export", help="polytope vertices of a report, one file per space")
    p.add_argument("report")
    p.add_argument("--format", choices=["json", "csv"], default="csv")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("rerun", help="replay a manifest")
    p.add_argument("manifest_file")
    p.add_argument("--out", help="override the recorded output path")
    p.set_defaults(func=None)
    return parser


def _manifest_for(args, argv: list) -> RunManifest:
    skip = {"func", "manifest", "command"}
    options = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    outputs = [options["out"]] if options.get("out") else []
    clean = []
    it = iter(argv)
    for a in it:
        if a == "--manifest":
            next(it, None)
        elif not a.startswith("--manifest="):
            clean.append(a)
    return RunManifest(args.command, options.get("system") or options.get("report", ""), options, outputs, clean)


def _rerun(args) -> int:
    try:
        man = RunManifest.from_json(Path(args.manifest_file).read_text())
    except FileNotFoundError:
        raise CliError(f"{args.manifest_file}: no such manifest", EXIT_MISSING) from None
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise CliError(f"{args.manifest_file}: malformed manifest ({exc})", EXIT_INPUT) from None
    argv = list(man.argv)
    if args.out:
        argv = _replace_out(argv, args.out)
    return main(argv)


def _replace_out(argv: list, out: str) -> list:
    res, it, found = [], iter(argv), False
    for a in it:
        if a == "--out":
            next(it, None)
            res += ["--out", out]
            found = True
        elif a.startswith("--out="):
            res.append(f"--out={out}")
            found = True
        else:
            res.append(a)
    return res if found else res + ["--out", out]


def main(argv: list | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        if args.command == "rerun":
            return _rerun(args)
        code = args.func(args)
        if args.manifest:
            Path(args.manifest).write_text(_manifest_for(args, argv).to_json())
        return code
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
