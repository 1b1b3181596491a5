"""Command line interface.

Four commands:

``mfbsde certify --config FILE``
    Compute the constant chain for the configured scenario and write a
    human-readable report plus a JSON version next to it.

``mfbsde solve --config FILE [--solver NAME] [overrides...]``
    Run one of the solvers and write CSV/JSON results.

``mfbsde validate [--criteria 1,2,...]``
    Run the acceptance criteria and print one PASS/FAIL line each.

``mfbsde bench --config FILE``
    Time one backward sweep and one fixed-point solve at a few path counts.

Exit codes: 0 on success, 1 when a solver or certificate computation fails,
2 for invalid inputs (bad config, bad flags, solver/scenario mismatch).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import __version__
from .certificates import certify
from .config import (
    OutputOptions,
    load_config,
    manifest_for,
    write_certificate_files,
    write_result_csv,
    write_result_json,
)
from .core import build_grid, simulate_brownian
from .errors import InvalidInput, MFBSDEError
from .meanfield import (
    gamma_map,
    global_solve,
    local_solve,
    multidim_solve,
    picard_global,
    shift_fixed_point,
    shift_solve_simple,
)

_SOLVERS = {
    "local": local_solve,
    "global": global_solve,
    "picard": picard_global,
    "shift": shift_fixed_point,
    "shift-simple": shift_solve_simple,
    "multidim": multidim_solve,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mfbsde",
        description="Monte Carlo solvers and certificates for mean-field "
        "quadratic BSDEs",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="config file (INI)")
        p.add_argument("--out-dir", default=None, help="output directory override")
        p.add_argument("--prefix", default=None, help="output file prefix override")

    p_cert = sub.add_parser("certify", help="compute the constant chain")
    add_common(p_cert)

    p_solve = sub.add_parser("solve", help="run a solver")
    add_common(p_solve)
    p_solve.add_argument(
        "--solver",
        default="global",
        choices=sorted(_SOLVERS),
        help="which solver to run (default: global)",
    )
    p_solve.add_argument("--seed", type=int, default=None)
    p_solve.add_argument("--paths", type=int, default=None)
    p_solve.add_argument("--steps", type=int, default=None)
    p_solve.add_argument("--windows", type=int, default=None)
    p_solve.add_argument(
        "--override-epsilon",
        action="store_true",
        help="allow windows wider than the certified width (warns instead of failing)",
    )

    p_val = sub.add_parser("validate", help="run the acceptance criteria")
    p_val.add_argument(
        "--criteria",
        default=None,
        help="comma-separated criterion numbers (default: all)",
    )
    p_val.add_argument("--json", default=None, help="also write results to this JSON file")

    p_bench = sub.add_parser("bench", help="time sweeps and solves")
    add_common(p_bench)
    p_bench.add_argument("--paths", type=int, nargs="*", default=None)
    return parser


def _apply_overrides(solver_cfg, args):
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "paths", None) is not None:
        changes["n_paths"] = args.paths
    if getattr(args, "steps", None) is not None:
        changes["n_steps"] = args.steps
    if getattr(args, "windows", None) is not None:
        changes["n_windows"] = args.windows
    if getattr(args, "override_epsilon", False):
        changes["override_epsilon"] = True
    return solver_cfg.updated(**changes) if changes else solver_cfg


def _output_options(options: OutputOptions, args) -> OutputOptions:
    directory = args.out_dir if args.out_dir else options.directory
    prefix = args.prefix if args.prefix else options.prefix
    return OutputOptions(directory=directory, prefix=prefix)


def _cmd_certify(args) -> int:
    scenario, solver_cfg, options, text = load_config(args.config)
    options = _output_options(options, args)
    cert = certify(scenario)
    manifest = manifest_for(args.config, text, solver_cfg, "certify")
    out_dir = Path(options.directory)
    txt_path, json_path = write_certificate_files(out_dir, options.prefix, cert, manifest)
    print(cert.report_text())
    print(f"wrote {txt_path} and {json_path}")
    return 0


def _cmd_solve(args) -> int:
    scenario, solver_cfg, options, text = load_config(args.config)
    solver_cfg = _apply_overrides(solver_cfg, args)
    options = _output_options(options, args)
    run = _SOLVERS[args.solver]

    grid = build_grid(scenario.T, solver_cfg.n_steps)
    ensemble = simulate_brownian(grid, scenario.d, solver_cfg.n_paths, solver_cfg.seed)
    t0 = time.perf_counter()
    result = run(scenario, ensemble, solver_cfg)
    elapsed = time.perf_counter() - t0

    manifest = manifest_for(args.config, text, solver_cfg, args.solver)
    out_dir = Path(options.directory)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{options.prefix}_result.csv"
    json_path = out_dir / f"{options.prefix}_result.json"
    alpha_fn = None
    if result.certificate is not None and result.flags.get("alpha_envelope_rate") is not None:
        alpha_fn, _ = _envelope(result)
    write_result_csv(csv_path, result, manifest, alpha_fn=alpha_fn)
    write_result_json(json_path, result, manifest)

    traces = result.trace if isinstance(result.trace, list) else [result.trace]
    iters = ", ".join(str(t.iterations) for t in traces)
    print(f"solver={args.solver} scenario={scenario.name} paths={solver_cfg.n_paths} "
          f"steps={solver_cfg.n_steps} seed={solver_cfg.seed}")
    print(f"iterations per window: {iters}")
    print(f"state mean at t=0: "
          + ", ".join(f"{v:.6f}" for v in result.m_y.values[0]))
    for key in ("alpha_envelope_rate", "window_width_exceeded", "z_shift_bitwise"):
        if key in result.flags:
            print(f"{key}: {result.flags[key]}")
    print(f"elapsed: {elapsed:.2f}s")
    print(f"wrote {csv_path} and {json_path}")
    return 0


def _envelope(result):
    from .certificates import ode_bound

    return ode_bound(result.certificate.ctilde, result.y.grid.horizon)


def _cmd_validate(args) -> int:
    from . import acceptance

    ids = None
    if args.criteria:
        try:
            ids = [int(part) for part in args.criteria.split(",") if part.strip()]
        except ValueError as exc:
            raise InvalidInput(f"bad --criteria list: {args.criteria!r}") from exc
        unknown = [i for i in ids if i not in acceptance.CRITERIA]
        if unknown:
            raise InvalidInput(f"unknown criteria: {unknown}")
    results = []
    for cid in sorted(ids or acceptance.CRITERIA):
        res = acceptance.run_criterion(cid)
        print(res.line())
        results.append(res)
    if args.json:
        Path(args.json).write_text(
            json.dumps([r.as_dict() for r in results], indent=2, sort_keys=True) + "\n"
        )
    return 0 if all(r.passed for r in results) else 1


def _cmd_bench(args) -> int:
    import numpy as np

    scenario, solver_cfg, _options, _text = load_config(args.config)
    path_counts = args.paths or [10_000, 50_000]
    print(f"scenario={scenario.name} steps={solver_cfg.n_steps}")
    for n_paths in path_counts:
        cfg = solver_cfg.updated(n_paths=n_paths, track_ball=False, override_epsilon=True)
        grid = build_grid(scenario.T, cfg.n_steps)
        ensemble = simulate_brownian(grid, scenario.d, cfg.n_paths, cfg.seed)
        L = cfg.n_steps + 1
        m_u = np.zeros((L, scenario.n))
        m_v = np.zeros((L, scenario.d, scenario.n))
        if scenario.f is not None:
            t0 = time.perf_counter()
            gamma_map(m_u, m_v, scenario, ensemble, cfg)
            sweep = time.perf_counter() - t0
        else:
            sweep = float("nan")
        t0 = time.perf_counter()
        runner = global_solve if scenario.f is not None else multidim_solve
        try:
            result = runner(scenario, ensemble, cfg)
            solve_t = time.perf_counter() - t0
            traces = result.trace if isinstance(result.trace, list) else [result.trace]
            iters = sum(t.iterations for t in traces)
        except MFBSDEError as exc:
            solve_t, iters = float("nan"), f"failed: {exc}"
        print(f"paths={n_paths:>8d}  sweep={sweep:7.2f}s  solve={solve_t:7.2f}s  "
              f"iterations={iters}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on bad flags and 0 on --help/--version
        return int(exc.code or 0)
    try:
        if args.command == "certify":
            return _cmd_certify(args)
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "validate":
            return _cmd_validate(args)
        if args.command == "bench":
            return _cmd_bench(args)
        raise InvalidInput(f"unknown command {args.command!r}")
    except InvalidInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MFBSDEError as exc:
        print(f"error: {exc.__class__.__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
