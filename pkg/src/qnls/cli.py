"""Batch command-line frontend.

Commands: solve, check, gen-gpe, gen-lv, gen-random, resources.
Exit codes: 0 success, 1 usage, 2 parse failure, 3 numerical failure,
4 invariant/check failure.  QNLS_DEBUG=1 turns on intended-block
verification inside every encoding operation.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from dataclasses import dataclass

import numpy as np

from . import __version__
from .block_encoding import CostLedger
from .classical_oracle import classical_newton
from .errors import (ConditioningError, DegenerateReferenceError, InputError,
                     InvariantViolationError, ParseError, QnlsError,
                     SingularJacobianError)
from .poly_system import (InhomogeneousSystem, MixedSystem, PolynomialSystem,
                          canonicalize, canonicalize_mixed, euler_check,
                          evaluate, gradient_inhomogeneous, gradient_md)
from .problem_io import parse_problem_file, problem_kind, write_problem_file
from .problems import (GpeParams, LvParams, gpe_default_guess, gpe_discretize,
                       lv_default_guess, lv_discretize, random_system)
from .quantum_newton import (NewtonTrace, TraceRow, newton_solve,
                             system_evaluators)
from .svt import InversionConfig, inversion_charge

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARSE = 2
EXIT_NUMERIC = 3
EXIT_CHECK = 4


class _UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Solver-run setup shared by the solve and resources commands."""

    problem: str
    iters: int
    backend: str = "exact"
    eps: float = 1e-6
    sigma_floor: float = 1e-3
    x0: str | None = None          # initial-guess file; None = random
    seed: int = 0                  # seed for the random guess
    gamma_ref: str = "previous"
    trace: str | None = None
    report: str | None = None

    def __post_init__(self):
        if self.iters < 0:
            raise InputError("iterations must be non-negative")
        if not self.eps > 0:
            raise InputError("eps must be positive")
        if not (0.0 < self.sigma_floor < 1.0):
            raise InputError("sigma_floor must lie in (0, 1)")

    @classmethod
    def from_args(cls, args) -> "RunConfig":
        return cls(problem=args.problem, iters=args.iters,
                   backend=args.backend, eps=args.eps,
                   sigma_floor=args.sigma_floor, x0=args.x0, seed=args.seed,
                   gamma_ref=args.gamma_ref,
                   trace=getattr(args, "trace", None),
                   report=getattr(args, "report", None))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _atomic_write(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _build_parser() -> _Parser:
    parser = _Parser(prog="qnls", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="run the Newton solver on a problem file")
    _add_run_args(solve)
    solve.add_argument("--trace", help="trace CSV output path")

    check = sub.add_parser("check", help="run invariant suites on a problem file")
    check.add_argument("--problem", required=True)
    check.add_argument("--suite", required=True,
                       help="comma list of appendixA,appendixB,euler,gradient,"
                            "scaling or 'all'")
    check.add_argument("--seed", type=int, default=0)

    lv = sub.add_parser("gen-lv", help="generate a Lotka-Volterra problem")
    for name in ("alpha", "beta", "gamma", "delta", "dt", "v0", "p0"):
        lv.add_argument(f"--{name}", type=float, required=True)
    lv.add_argument("--steps", type=int, required=True)
    lv.add_argument("--scale", type=float, default=None)
    lv.add_argument("--out", required=True)

    gpe = sub.add_parser("gen-gpe", help="generate a Gross-Pitaevskii problem")
    gpe.add_argument("--nx", type=int, required=True)
    gpe.add_argument("--hbar2m", type=float, default=0.5,
                     help="hbar^2 / 2m coefficient")
    gpe.add_argument("--g", type=float, required=True)
    gpe.add_argument("--vconst", type=float, default=0.0,
                     help="constant potential value")
    gpe.add_argument("--dt", type=float, required=True)
    gpe.add_argument("--dx", type=float, required=True)
    gpe.add_argument("--psi-seed", type=int, default=0,
                     help="seed for the random previous slice")
    gpe.add_argument("--scale", type=float, default=None)
    gpe.add_argument("--out", required=True)

    rnd = sub.add_parser("gen-random", help="generate a random homogeneous system")
    rnd.add_argument("--n", type=int, required=True)
    rnd.add_argument("--p", type=int, required=True)
    rnd.add_argument("--s", type=int, required=True)
    rnd.add_argument("--seed", type=int, required=True)
    rnd.add_argument("--out", required=True)

    res = sub.add_parser("resources", help="ledger-only run plus classical count")
    _add_run_args(res)
    res.add_argument("--out", help="report output path")
    return parser


def _add_run_args(p) -> None:
    p.add_argument("--problem", required=True)
    p.add_argument("--iters", type=int, required=True)
    p.add_argument("--backend", choices=("exact", "poly", "classical"),
                   default="exact")
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--sigma-floor", type=float, default=1e-3)
    p.add_argument("--x0", help="initial guess file (one value per line)")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for the random initial guess")
    p.add_argument("--gamma-ref", choices=("e1", "x0", "previous"),
                   default="previous")
    p.add_argument("--report", help="resource report output path")


def _load_problem(path: str):
    problem = parse_problem_file(path)
    factors_note = None
    if isinstance(problem, PolynomialSystem):
        problem, factor = canonicalize(problem)
        if factor != 1.0:
            factors_note = f"canonical rescale factor {factor:.6g}"
    elif isinstance(problem, MixedSystem):
        problem, factors = canonicalize_mixed(problem)
        if np.any(factors != 1.0):
            factors_note = (f"per-row canonical factors in "
                            f"[{factors.min():.6g}, {factors.max():.6g}]")
    return problem, factors_note


def _initial_guess(problem, cfg: RunConfig) -> np.ndarray:
    if cfg.x0:
        vals = np.loadtxt(cfg.x0, ndmin=1)
        if vals.shape != (problem.n,):
            raise InputError(f"guess file must hold {problem.n} values")
        return vals
    rng = np.random.default_rng(cfg.seed)
    v = rng.normal(size=problem.n)
    return 0.9 * v / np.linalg.norm(v)


def _run_solver(problem, cfg: RunConfig):
    x0 = _initial_guess(problem, cfg)
    ledger = CostLedger()
    if cfg.backend == "classical":
        f_eval, j_eval = system_evaluators(problem)
        try:
            tr = classical_newton(f_eval, j_eval, x0, cfg.iters, tol=0.0)
            halted = None
            iterates = tr.iterates
            residuals = tr.residuals
        except SingularJacobianError as exc:
            halted = str(exc)
            iterates = exc.partial.iterates
            residuals = exc.partial.residuals
        n, p, s = _problem_nps(problem)
        rows = []
        for k, (x, r) in enumerate(zip(iterates, residuals)):
            if k > 0:
                ledger.charge("classical_lu", primitive=float(n ** 3))
                ledger.charge("classical_gradient", primitive=float(p * p * n * s))
                ledger.charge("classical_evaluate",
                              oracle=float(n ** (p + 1) * s))
            rows.append(TraceRow(k, float(r), float(np.dot(x, x)), None, None,
                                 ledger.oracle_queries, ledger.primitive_ops,
                                 ledger.amplification_cost))
        trace = NewtonTrace(rows, halted)
        final_cost = 0.0
        return trace, ledger, final_cost
    inv_cfg = InversionConfig(cfg.sigma_floor, cfg.eps,
                              "polynomial" if cfg.backend == "poly" else "exact")
    state, trace = newton_solve(problem, x0, cfg.iters, inv_cfg,
                                gamma_reference=cfg.gamma_ref, ledger=ledger)
    return trace, state.ledger, state.be_xxT.cost


def _problem_nps(problem) -> tuple[int, int, int]:
    if isinstance(problem, PolynomialSystem):
        return problem.n, problem.p, problem.sparsity
    if isinstance(problem, MixedSystem):
        nl = problem.nonlinear
        return problem.n, (nl.p if nl else 1), (nl.sparsity if nl else 1)
    return problem.n, 1, 1


def _report_text(problem, cfg: RunConfig, ledger: CostLedger,
                 dominant: float) -> str:
    n, p, s = _problem_nps(problem)
    t = cfg.iters
    lines = [
        f"problem.kind = {problem_kind(problem)}",
        f"problem.n = {n}",
        f"problem.p = {p}",
        f"problem.s = {s}",
        f"run.iters = {t}",
        f"run.backend = {cfg.backend}",
        f"run.eps = {cfg.eps:.17g}",
        f"run.sigma_floor = {cfg.sigma_floor:.17g}",
        f"ledger.oracle_queries = {ledger.oracle_queries:.17g}",
        f"ledger.primitive_ops = {ledger.primitive_ops:.17g}",
        f"ledger.amplification_cost = {ledger.amplification_cost:.17g}",
    ]
    for key in sorted(ledger.notes):
        lines.append(f"ledger.note.{key} = {ledger.notes[key]:.17g}")
    lines.append(f"quantum.dominant_term = {dominant:.17g}")
    lines.append(
        "quantum.inversion_charge_unit = "
        f"{inversion_charge(cfg.sigma_floor, cfg.eps):.17g}")
    lines.append("classical.K = not represented")
    lines.append(f"classical.n3 = {n ** 3}")
    lines.append(f"classical.Kp2ns_unit = {p * p * n * s}")
    lines.append(f"classical.np1s = {n ** (p + 1) * s}")
    total = n ** 3 + p * p * n * s + n ** (p + 1) * s
    lines.append(f"classical.total_per_iter = {total}")
    lines.append(f"classical.total = {t * total}")
    return "\n".join(lines) + "\n"


def _cmd_solve(args) -> int:
    cfg = RunConfig.from_args(args)
    try:
        problem, note = _load_problem(cfg.problem)
    except (ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    if problem_kind(problem) == "homogeneous":
        print("warning: purely homogeneous systems contract toward the "
              "origin under Newton; use a mixed problem unless the "
              "contraction itself is under test", file=sys.stderr)
    if isinstance(problem, InhomogeneousSystem) and cfg.backend != "classical":
        print("error: encoded pipeline for inhomogeneous systems is "
              "experimental; use --backend classical", file=sys.stderr)
        return EXIT_USAGE
    if note:
        print(f"note: {note}", file=sys.stderr)
    trace, ledger, dominant = _run_solver(problem, cfg)
    if cfg.trace:
        _atomic_write(cfg.trace, trace.to_csv())
    else:
        sys.stdout.write(trace.to_csv())
    if cfg.report:
        _atomic_write(cfg.report, _report_text(problem, cfg, ledger, dominant))
    if trace.halted:
        print(f"halted: {trace.halted}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _cmd_resources(args) -> int:
    cfg = RunConfig.from_args(args)
    try:
        problem, _ = _load_problem(cfg.problem)
    except (ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    if isinstance(problem, InhomogeneousSystem) and cfg.backend != "classical":
        print("error: use --backend classical for inhomogeneous problems",
              file=sys.stderr)
        return EXIT_USAGE
    trace, ledger, dominant = _run_solver(problem, cfg)
    text = _report_text(problem, cfg, ledger, dominant)
    if args.out:
        _atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_NUMERIC if trace.halted else EXIT_OK


_SUITES = ("appendixA", "appendixB", "euler", "gradient", "scaling")


def _cmd_check(args) -> int:
    names = [s for s in args.suite.split(",") if s]
    if not names:
        print("error: empty suite selector", file=sys.stderr)
        return EXIT_USAGE
    if names == ["all"]:
        names = list(_SUITES)
    for name in names:
        if name not in _SUITES:
            print(f"error: unknown suite {name!r}", file=sys.stderr)
            return EXIT_USAGE
    try:
        problem = parse_problem_file(args.problem)
    except (ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    rng = np.random.default_rng(args.seed)
    ok = True
    for name in names:
        passed, detail = _run_check(name, problem, rng)
        ok = ok and passed
        print(f"CHECK {name} {'PASS' if passed else 'FAIL'} {detail}")
    return EXIT_OK if ok else EXIT_CHECK


def _homogeneous_part(problem):
    if isinstance(problem, PolynomialSystem):
        return problem
    if isinstance(problem, MixedSystem):
        return problem.nonlinear
    return None


def _run_check(name: str, problem, rng) -> tuple[bool, str]:
    nl = _homogeneous_part(problem)
    if name == "appendixA":
        if nl is None:
            return True, "no homogeneous part"
        lhs = nl.p * nl.max_norm()
        rhs = np.sqrt(nl.n)
        return lhs <= rhs + 1e-9, f"p*max||A|| = {lhs:.6g} vs sqrt(n) = {rhs:.6g}"
    if name == "appendixB":
        if nl is None:
            return True, "no homogeneous part"
        worst = 0.0
        bound_ref = np.sqrt(nl.n) * nl.max_norm()
        for _ in range(20):
            x = rng.normal(size=nl.n)
            x *= rng.uniform(0.1, 1.0) / np.linalg.norm(x)
            fn = np.linalg.norm(evaluate(nl, x))
            bound = bound_ref * np.linalg.norm(x) ** (2 * nl.p)
            worst = max(worst, fn - bound)
        return worst <= 1e-9, f"max ||F|| excess over bound = {worst:.3g}"
    if name == "euler":
        if nl is None:
            return True, "no homogeneous part"
        worst = 0.0
        for _ in range(20):
            x = rng.normal(size=nl.n)
            defect = euler_check(nl, x)
            rel = defect / max(1.0, np.linalg.norm(evaluate(nl, x)))
            worst = max(worst, rel)
        return worst <= 1e-10, f"max relative Euler defect = {worst:.3g}"
    if name == "gradient":
        return _check_gradient(problem, rng)
    if name == "scaling":
        if nl is None:
            return True, "no homogeneous part"
        worst = 0.0
        for _ in range(10):
            x = rng.normal(size=nl.n)
            lam = rng.uniform(0.2, 2.0)
            lhs = evaluate(nl, lam * x)
            rhs = lam ** (2 * nl.p) * evaluate(nl, x)
            worst = max(worst, np.linalg.norm(lhs - rhs)
                        / max(1.0, np.linalg.norm(rhs)))
        return worst <= 1e-10, f"max relative scaling defect = {worst:.3g}"
    raise InputError(f"unknown check {name}")


def _check_gradient(problem, rng) -> tuple[bool, str]:
    h = 1e-5
    worst = 0.0
    if isinstance(problem, InhomogeneousSystem):
        for g in problem.equations:
            x = rng.uniform(-1.0, 1.0, problem.n)
            grad = gradient_inhomogeneous(g, x)
            fd = np.zeros(problem.n)
            from .poly_system import eval_inhomogeneous
            for k in range(problem.n):
                e = np.zeros(problem.n)
                e[k] = h
                fd[k] = (eval_inhomogeneous(g, x + e)
                         - eval_inhomogeneous(g, x - e)) / (2 * h)
            worst = max(worst, np.linalg.norm(grad - fd)
                        / max(1.0, np.linalg.norm(fd)))
        return worst <= 1e-6, f"max relative FD gap = {worst:.3g}"
    nl = _homogeneous_part(problem)
    if nl is None:
        return True, "no homogeneous part"
    for i in range(nl.n):
        x = rng.uniform(-1.0, 1.0, nl.n)
        grad = gradient_md(nl, i, x)
        fd = np.zeros(nl.n)
        for k in range(nl.n):
            e = np.zeros(nl.n)
            e[k] = h
            fd[k] = (evaluate(nl, x + e)[i] - evaluate(nl, x - e)[i]) / (2 * h)
        worst = max(worst, np.linalg.norm(grad - fd)
                    / max(1.0, np.linalg.norm(fd)))
    return worst <= 1e-6, f"max relative FD gap = {worst:.3g}"


def _cmd_gen_lv(args) -> int:
    params = LvParams(args.alpha, args.beta, args.gamma, args.delta,
                      args.dt, args.steps, args.v0, args.p0, args.scale)
    ms = lv_discretize(params)
    write_problem_file(ms, args.out)
    guess = lv_default_guess(params)
    _atomic_write(args.out + ".x0", "\n".join(f"{v:.17g}" for v in guess) + "\n")
    return EXIT_OK


def _cmd_gen_gpe(args) -> int:
    rng = np.random.default_rng(args.psi_seed)
    psi = rng.uniform(-0.5, 0.5, args.nx) + 1j * rng.uniform(-0.5, 0.5, args.nx)
    params = GpeParams(args.nx, args.hbar2m, args.g,
                       np.full(args.nx, args.vconst), args.dt, args.dx, psi,
                       args.scale)
    ms = gpe_discretize(params)
    write_problem_file(ms, args.out)
    guess = gpe_default_guess(params)
    _atomic_write(args.out + ".x0", "\n".join(f"{v:.17g}" for v in guess) + "\n")
    return EXIT_OK


def _cmd_gen_random(args) -> int:
    system = random_system(args.n, args.p, args.s, args.seed)
    write_problem_file(system, args.out)
    return EXIT_OK


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "check":
            return _cmd_check(args)
        if args.command == "gen-lv":
            return _cmd_gen_lv(args)
        if args.command == "gen-gpe":
            return _cmd_gen_gpe(args)
        if args.command == "gen-random":
            return _cmd_gen_random(args)
        if args.command == "resources":
            return _cmd_resources(args)
        raise InputError(f"unknown command {args.command}")
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvariantViolationError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except (SingularJacobianError, DegenerateReferenceError,
            ConditioningError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (InputError, QnlsError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
