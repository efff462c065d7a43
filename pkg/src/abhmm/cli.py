"""``abhmm`` command-line entry point.

Subcommands::

    abhmm simulate --preset fig-ne1 --out out/ne1
    abhmm simulate --config out/ne1/manifest.json --out out/ne1-again
    abhmm fixed-point --alpha 0.1 --beta 1 --d 1
    abhmm bounds --alphas 0.05 0.1 --betas 1 --d-mins 1 --d-ratios 1 2 --Ms 3
    abhmm list-presets

Exit status: 0 on success, 1 on a numeric failure, 2 on invalid input.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import dynamics, output, presets
from .presets import ConfigError


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _load_config(path) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config: top level must be a JSON object")
    # a run manifest carries the resolved config under "config"
    if "schema_version" in data and "config" in data:
        data = data["config"]
    return data


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config) if args.config else {}
    if args.preset:
        cfg["preset"] = args.preset
    if not cfg:
        raise ConfigError("preset: give --preset or --config")
    for key in ("seed", "runs", "horizon", "workers", "alphas", "betas", "sigmas"):
        v = getattr(args, key)
        if v is not None:
            cfg[key] = v
    resolved = presets.resolve(cfg)
    out_dir = Path(args.out or resolved.get("out") or f"out/{resolved.get('preset', 'run')}")
    resolved.pop("out", None)
    files = presets.run(resolved, out_dir)
    man = output.manifest(resolved, [f.name for f in files])
    output.write_json(man, out_dir / "manifest.json")
    print(f"wrote {len(files)} files + manifest.json to {out_dir}")
    return 0


def cmd_fixed_point(args) -> int:
    d = np.asarray(args.d, dtype=float)
    if args.M is not None:
        if d.size == 1:
            d = np.full(args.M - 1, d[0])
        elif d.size != args.M - 1:
            raise ConfigError(f"d: expected {args.M - 1} values for M={args.M}, got {d.size}")
    M = d.size + 1
    if not 0 < args.alpha < 1.0 / M:
        raise ConfigError(f"alpha: alpha must be in (0, 1/M) for M={M}, got {args.alpha}")
    fp = dynamics.solve_fixed_point(args.alpha, args.beta, d, tolerance=args.tolerance,
                                    max_iterations=args.max_iterations)
    rep = dynamics.bounds_report(args.alpha, args.beta, d, args.C)
    result = {"alpha": args.alpha, "beta": args.beta, "d": d, "M": M,
              **fp.to_dict(), "bounds": rep.to_dict()}
    text = json.dumps(output._jsonable(result), indent=2, sort_keys=True)
    print(text)
    if args.out:
        output.write_json(result, args.out)
    return 0


def cmd_bounds(args) -> int:
    if args.preset:
        grid = {k: v for k, v in presets.BOUNDS_PRESETS[args.preset].items() if k != "description"}
    else:
        grid = {"alphas": args.alphas, "betas": args.betas, "d_mins": args.d_mins,
                "d_ratios": args.d_ratios, "Ms": args.Ms, "Cs": args.Cs or []}
        for k, v in grid.items():
            if v is None:
                raise ConfigError(f"{k}: required (or use --preset)")
    for k in ("betas", "d_mins"):
        if any(not v > 0 for v in grid[k]):
            raise ConfigError(f"{k}: values must be > 0")
    if any(r < 1 for r in grid["d_ratios"]):
        raise ConfigError("d_ratios: values must be >= 1")
    reports = presets.bounds_grid(**grid)
    if not reports:
        raise ConfigError("alphas: no valid tuple (need 0 < alpha < 1/M)")
    rows = [r.to_dict() for r in reports]
    header = list(rows[0])
    out = Path(args.out or "bounds.csv")
    output.write_rows(out, header, [[row[h] for h in header] for row in rows])
    output.write_json(output.manifest({**grid, "seed": None}, [out.name]),
                      out.with_suffix(".manifest.json"))
    print(f"wrote {len(rows)} rows to {out}")
    return 0


def cmd_list_presets(args) -> int:
    for name, p in presets.PRESETS.items():
        print(f"simulate  {name:16s} {p['description']}")
    for name, p in presets.BOUNDS_PRESETS.items():
        print(f"bounds    {name:16s} {p['description']}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="abhmm", description="alpha-beta HMM filtering experiments")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="run a Monte Carlo, reference or adaptation experiment")
    s.add_argument("--preset", choices=sorted(presets.PRESETS))
    s.add_argument("--config", help="JSON config or a manifest.json from an earlier run")
    s.add_argument("--out", help="output directory")
    s.add_argument("--seed", type=int)
    s.add_argument("--runs", type=int)
    s.add_argument("--horizon", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--alphas", type=float, nargs="+")
    s.add_argument("--betas", type=float, nargs="+")
    s.add_argument("--sigmas", type=float, nargs="+")
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fixed-point", help="solve the reference fixed point and report bounds")
    f.add_argument("--alpha", type=float, required=True)
    f.add_argument("--beta", type=float, required=True)
    f.add_argument("--d", type=float, nargs="+", required=True,
                   help="identifiability vector d_1..d_{M-1}")
    f.add_argument("--M", type=int, help="number of states; a single --d value is repeated")
    f.add_argument("--C", type=float, default=math.inf, help="log-likelihood-ratio bound")
    f.add_argument("--tolerance", type=float, default=1e-12)
    f.add_argument("--max-iterations", type=int, default=1_000_000)
    f.add_argument("--out", help="also write the JSON here")
    f.set_defaults(func=cmd_fixed_point)

    b = sub.add_parser("bounds", help="tabulate closed-form bounds over a parameter grid")
    b.add_argument("--preset", choices=sorted(presets.BOUNDS_PRESETS))
    b.add_argument("--alphas", type=float, nargs="+")
    b.add_argument("--betas", type=float, nargs="+")
    b.add_argument("--d-mins", type=float, nargs="+")
    b.add_argument("--d-ratios", type=float, nargs="+")
    b.add_argument("--Ms", type=int, nargs="+")
    b.add_argument("--Cs", type=float, nargs="+")
    b.add_argument("--out", help="CSV path (default bounds.csv)")
    b.set_defaults(func=cmd_bounds)

    lp = sub.add_parser("list-presets", help="list the named configurations")
    lp.set_defaults(func=cmd_list_presets)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ArithmeticError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 1
    except (ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
