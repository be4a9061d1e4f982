"""Command-line front end.

    phsvk rod [flags]
    phsvk beam [--linear] [flags]
    phsvk run CONFIG.json [flags]
    phsvk dump-config {rod,beam,beam_linear}

Exit codes: 0 success, 2 configuration error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import logging
import re
import sys
import time

from .config import ConfigError, apply_overrides, default_config, dump_config, load_config
from .integrator import StepFailed
from .scenarios import run_scenario

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3

log = logging.getLogger("phsvk")


def _elements(text: str) -> tuple[int, ...]:
    parts = re.split(r"[x,]", text.strip().lower())
    try:
        vals = tuple(int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N or NXxNY, got {text!r}") from None
    if not vals or len(vals) > 2 or any(v < 1 for v in vals):
        raise argparse.ArgumentTypeError(f"expected N or NXxNY with positive counts, got {text!r}")
    return vals


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--elements", type=_elements, help="cells per axis: N (rod) or NXxNY (beam)")
    p.add_argument("--dt", type=float, help="time step [s]")
    p.add_argument("--t-end", dest="t_end", type=float, help="final time [s]")
    p.add_argument("--out", help="output directory")
    p.add_argument("--newton-tol", dest="newton_tol", type=float, help="Newton residual tolerance")
    p.add_argument("--vtk-every", dest="vtk_every", type=int, help="VTK stride in steps (0 disables)")
    p.add_argument("--dump-matrices", dest="dump_matrices", action="store_true", default=None,
                   help="write constant operators and K, G_nu at F = I in Matrix Market format")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="phsvk", description="Port-Hamiltonian mixed FEM for St. Venant-Kirchhoff elastodynamics")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("rod", help="axially loaded rod benchmark")
    _add_run_flags(p)
    p = sub.add_parser("beam", help="cantilever beam benchmark")
    p.add_argument("--linear", action="store_true", help="frozen linear elastodynamics model")
    _add_run_flags(p)
    p = sub.add_parser("run", help="run a JSON config file")
    p.add_argument("config", help="path to a JSON scenario config")
    _add_run_flags(p)
    p = sub.add_parser("dump-config", help="print the default config of a scenario")
    p.add_argument("scenario", choices=["rod", "beam", "beam_linear"])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command == "dump-config":
        sys.stdout.write(dump_config(default_config(args.scenario)))
        return EXIT_OK

    try:
        if args.command == "run":
            config = load_config(args.config)
        else:
            scenario = "beam_linear" if getattr(args, "linear", False) else args.command
            config = default_config(scenario)
        config = apply_overrides(
            config,
            elements=args.elements,
            dt=args.dt,
            t_end=args.t_end,
            out=args.out,
            newton_tol=args.newton_tol,
            vtk_every=args.vtk_every,
            dump_matrices=args.dump_matrices,
        )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    start = time.perf_counter()
    try:
        result = run_scenario(config)
    except StepFailed as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    elapsed = time.perf_counter() - start

    traj = result.trajectory
    worst = max((abs(r) for r in traj.balance_residual), default=0.0)
    print(f"{config.scenario}{' (linear)' if config.linear else ''}: {len(traj.t) - 1} steps in {elapsed:.1f} s")
    print(f"  H(0) = {traj.H[0]:.6g} J, H(end) = {traj.H[-1]:.6g} J, max |balance residual| = {worst:.3g} J")
    for name, path in result.files.items():
        if not name.startswith("matrix:"):
            print(f"  {name}: {path}")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
