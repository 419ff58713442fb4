"""Command-line driver: canned ODE/PDE solves and timing benchmarks.

Exit codes: 0 success, 2 no convergence, 3 singular system, 4 bad arguments.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import statistics
import sys
import time
from dataclasses import dataclass

import numpy as np

from .almost_banded import DEFAULT_MAX_N, adaptive_qr_solve
from .errors import NoConvergence, SingularBoundaryBlock, SingularError
from .problems import (
    constant_problem,
    exp_problem,
    helmholtz_problem,
    helmholtz_residual,
    ones_forcing,
    oscillatory_exact,
    oscillatory_problem,
)
from .spaces import Ultraspherical
from .sylvester import BivariateSolution, normalize_boundary, semidiscretize, solve_pde, tensor_residual

log = logging.getLogger("adaptiveqr")

EXIT_OK, EXIT_NO_CONVERGENCE, EXIT_SINGULAR, EXIT_BAD_ARGS = 0, 2, 3, 4

BENCH_COLUMNS = ["problem", "ny", "nx", "t_qz_seconds", "t_solve_seconds", "nopt_max"]

COMMANDS = ("solve-ode", "solve-helmholtz", "bench-ode", "bench-pde")


class BadArguments(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    tolerance: float = 1e-14
    ny: int = 20
    nx_forcing: int = 20
    output_path: str = "-"
    format: str = "csv"
    seed: int = 0
    problem: str = "exp"
    k: float = 10.0
    k2: float = 100.0
    nx_ladder: tuple = (250, 500, 1000)
    k_ladder: tuple = (10, 20, 40, 80)
    repeats: int = 3
    max_n: int = DEFAULT_MAX_N

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise BadArguments(f"unknown command {self.command!r}")
        if not self.tolerance > 0:
            raise BadArguments("tolerance must be positive")
        if self.command in ("solve-helmholtz", "bench-pde") and self.ny < 3:
            raise BadArguments("ny must be at least 3 for PDE commands")
        if self.format not in ("csv", "json"):
            raise BadArguments("format must be csv or json")
        if self.nx_forcing < 0 or any(n < 1 for n in self.nx_ladder):
            raise BadArguments("forcing sizes must be positive")
        if self.repeats < 1:
            raise BadArguments("repeats must be >= 1")


def _write(config: RunConfig, rows: list[dict], meta: dict | None = None):
    """Write ``rows`` as CSV, or ``{**meta, "rows": rows}`` as JSON."""
    out = sys.stdout if config.output_path == "-" else open(config.output_path, "w", newline="")
    try:
        if config.format == "json":
            json.dump({**(meta or {}), "rows": rows}, out, indent=1)
            out.write("\n")
        else:
            fields = list(rows[0].keys()) if rows else list((meta or {}).keys())
            writer = csv.DictWriter(out, fieldnames=fields)
            writer.writeheader()
            writer.writerows(rows)
    finally:
        if out is not sys.stdout:
            out.close()


def _ode_problem(config: RunConfig):
    if config.problem == "exp":
        sys_ = exp_problem()

        def verify(u):
            c = np.zeros(max(len(u), 18))
            c[: len(u)] = u.coefficients
            return max(abs(c[j] - 1 / math.factorial(j)) for j in range(len(c)))

    elif config.problem == "constant":
        sys_ = constant_problem(3.0)

        def verify(u):
            c = np.zeros(max(len(u), 1))
            c[: len(u)] = u.coefficients
            return abs(c[0] - 3.0) + float(np.sum(np.abs(c[1:])))

    elif config.problem == "oscillatory":
        sys_ = oscillatory_problem(config.k)
        exact = oscillatory_exact(config.k)

        def verify(u):
            x = np.linspace(-1, 1, 20)
            return float(np.max(np.abs(u(x) - exact(x))))

    else:
        raise BadArguments(f"unknown ODE problem {config.problem!r}")
    return sys_, verify


def cmd_solve_ode(config: RunConfig) -> int:
    system, verify = _ode_problem(config)
    t0 = time.perf_counter()
    u, info = adaptive_qr_solve(system, tol=config.tolerance, max_n=config.max_n, full_output=True)
    wall = time.perf_counter() - t0
    bc_res, row_res = system.residual(u)
    residual = float(max(np.max(np.abs(bc_res), initial=0.0), np.max(np.abs(row_res), initial=0.0)))
    meta = {
        "problem": config.problem,
        "n_opt": info.n_opt,
        "residual_norm": residual,
        "verification_error": float(verify(u)),
        "wall_time_seconds": wall,
    }
    coeffs = u.coefficients if len(u) else np.zeros(1)
    rows = [{**meta, "index": j + 1, "coefficient": float(np.real(c))} for j, c in enumerate(coeffs)]
    _write(config, rows, meta)
    log.info("solve-ode %s: n_opt=%d residual=%.2e", config.problem, info.n_opt, residual)
    return EXIT_OK


def _helmholtz_diagnostics(config: RunConfig, problem, sol, F_cheb):
    rng = np.random.default_rng(config.seed)
    s = np.linspace(-1, 1, 10)
    one = np.ones_like(s)
    bx = np.concatenate([-one, one, s, s])
    by = np.concatenate([s, s, -one, one])
    boundary = float(np.max(np.abs(sol(bx, by))))
    sd = semidiscretize(problem, config.ny)
    Bn, gy = normalize_boundary(sd.Bn, sd.gy)
    rows = max(sol.X.shape[0], gy.shape[0])
    Xp = np.zeros((rows, sol.X.shape[1]))
    Xp[: sol.X.shape[0]] = sol.X
    gyp = np.zeros((rows, gy.shape[1]))
    gyp[: gy.shape[0]] = gy
    constraint = float(np.max(np.abs(Xp @ Bn.T - gyp)))
    x, y = rng.uniform(-0.99, 0.99, (2, 100))
    interior = float(np.max(np.abs(helmholtz_residual(sol, F_cheb, config.k2, x, y))))
    R = tensor_residual(problem, sol.X, n_cols=config.ny - len(problem.By))
    semi = float(np.max(np.abs(BivariateSolution(R, Ultraspherical(2), Ultraspherical(2))(x, y))))
    return {
        "boundary_residual": max(boundary, constraint),
        "interior_residual": interior,
        "semidiscrete_residual": semi,
    }


def cmd_solve_helmholtz(config: RunConfig) -> int:
    F = ones_forcing(config.nx_forcing, config.ny) if config.nx_forcing else np.zeros((1, 1))
    problem = helmholtz_problem(F, k2=config.k2)
    sol = solve_pde(problem, config.ny, tol=config.tolerance, max_n=config.max_n)
    meta = {
        "problem": "helmholtz",
        "ny": config.ny,
        "nx": config.nx_forcing,
        **_helmholtz_diagnostics(config, problem, sol, F),
        "t_qz_seconds": sol.t_qz,
        "t_solve_seconds": sol.t_solve,
        "nopt_max": max(sol.n_opt),
    }
    rows = [
        {**meta, "i": i + 1, "j": j + 1, "coefficient": float(sol.X[i, j])}
        for i in range(sol.X.shape[0])
        for j in range(sol.X.shape[1])
        if sol.X[i, j] != 0
    ]
    _write(config, rows, meta)
    return EXIT_OK


def bench_pde_rows(config: RunConfig) -> list[dict]:
    rows = []
    solve_pde(helmholtz_problem(ones_forcing(config.nx_ladder[0], config.ny), k2=config.k2), config.ny,
              tol=config.tolerance)  # warmup
    for nx in config.nx_ladder:
        problem = helmholtz_problem(ones_forcing(nx, config.ny), k2=config.k2)
        runs = [solve_pde(problem, config.ny, tol=config.tolerance, max_n=config.max_n) for _ in range(config.repeats)]
        rows.append({
            "problem": "helmholtz",
            "ny": config.ny,
            "nx": nx,
            "t_qz_seconds": statistics.median(r.t_qz for r in runs),
            "t_solve_seconds": statistics.median(r.t_solve for r in runs),
            "nopt_max": max(runs[0].n_opt),
        })
        log.info("bench-pde nx=%d t_solve=%.3fs", nx, rows[-1]["t_solve_seconds"])
    return rows


def bench_ode_rows(config: RunConfig) -> list[dict]:
    rows = []
    adaptive_qr_solve(oscillatory_problem(config.k_ladder[0]), tol=config.tolerance)  # warmup
    for k in config.k_ladder:
        system = oscillatory_problem(k)
        times, nopt = [], 0
        for _ in range(config.repeats):
            t0 = time.perf_counter()
            _, info = adaptive_qr_solve(system, tol=config.tolerance, max_n=config.max_n, full_output=True)
            times.append(time.perf_counter() - t0)
            nopt = info.n_opt
        rows.append({
            "problem": f"ode-oscillatory-k{k:g}",
            "ny": 0,
            "nx": k,
            "t_qz_seconds": 0.0,
            "t_solve_seconds": statistics.median(times),
            "nopt_max": nopt,
        })
    return rows


def cmd_bench(config: RunConfig) -> int:
    rows = bench_pde_rows(config) if config.command == "bench-pde" else bench_ode_rows(config)
    _write(config, rows, {"columns": BENCH_COLUMNS})
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_BAD_ARGS, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="adaptiveqr", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--tol", type=float, default=1e-14)
        p.add_argument("--out", default="-", help="output file, '-' for stdout")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--seed", type=int, default=0)
        if name == "solve-ode":
            p.add_argument("--problem", choices=("exp", "constant", "oscillatory"), default="exp")
            p.add_argument("--k", type=float, default=10.0, help="frequency of the oscillatory problem")
        if name in ("solve-helmholtz", "bench-pde"):
            p.add_argument("--ny", type=int, default=20 if name == "solve-helmholtz" else 50)
            p.add_argument("--k2", type=float, default=100.0)
        if name == "solve-helmholtz":
            p.add_argument("--nx", type=int, default=20, help="x-size of the all-ones forcing block (0: zero forcing)")
        if name == "bench-pde":
            p.add_argument("--nx", type=int, nargs="+", default=[250, 500, 1000])
        if name == "bench-ode":
            p.add_argument("--k", type=float, nargs="+", default=[10, 20, 40, 80])
        if name.startswith("bench"):
            p.add_argument("--repeats", type=int, default=3)
    return parser


def config_from_args(args) -> RunConfig:
    kw = dict(command=args.command, tolerance=args.tol, output_path=args.out, format=args.format, seed=args.seed)
    if args.command == "solve-ode":
        kw.update(problem=args.problem, k=args.k)
    if args.command in ("solve-helmholtz", "bench-pde"):
        kw.update(ny=args.ny, k2=args.k2)
    if args.command == "solve-helmholtz":
        kw.update(nx_forcing=args.nx)
    if args.command == "bench-pde":
        kw.update(nx_ladder=tuple(args.nx))
    if args.command == "bench-ode":
        kw.update(k_ladder=tuple(args.k))
    if args.command.startswith("bench"):
        kw.update(repeats=args.repeats)
    return RunConfig(**kw)


def run(config: RunConfig) -> int:
    handler = {
        "solve-ode": cmd_solve_ode,
        "solve-helmholtz": cmd_solve_helmholtz,
        "bench-ode": cmd_bench,
        "bench-pde": cmd_bench,
    }[config.command]
    try:
        return handler(config)
    except NoConvergence as exc:
        log.error("no convergence: %s", exc)
        return EXIT_NO_CONVERGENCE
    except (SingularError, SingularBoundaryBlock) as exc:
        log.error("singular system: %s", exc)
        return EXIT_SINGULAR


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        config = config_from_args(args)
    except BadArguments as exc:
        print(f"adaptiveqr: error: {exc}", file=sys.stderr)
        return EXIT_BAD_ARGS
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
