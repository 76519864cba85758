"""Command line entry point: ``immersed-rt run`` and ``immersed-rt verify``."""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import verify as suites
from .analysis import check_doubling, convergence_table, solve_problem, divergence_defect
from .assembly import METHODS
from .exceptions import AssumptionViolation, ConfigError, NonConvergence, SingularSystem
from .problems import PROBLEMS, get_problem
from .solver import BACKENDS, RESIDUAL_TOL

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_ASSUMPTION, EXIT_SOLVER = 0, 1, 2, 3, 4
PATCH_TOL = 1e-9

log = logging.getLogger("immersed_rt")


@dataclass
class RunConfig:
    problem: str = "example1"
    method: str = "immersed"
    eta: float = 1.0
    N: list = field(default_factory=lambda: [8, 16, 32, 64])
    r0: float | None = None
    beta_plus: float | None = None
    beta_minus: float | None = None
    out: str | None = None
    seed: int = 0
    tol: float = RESIDUAL_TOL
    backend: str = "direct"

    def validate(self) -> "RunConfig":
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}; choose from {sorted(PROBLEMS)}")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}")
        if self.backend not in BACKENDS:
            raise ConfigError(f"backend must be one of {BACKENDS}")
        if not (self.eta >= 0 and math.isfinite(self.eta)):
            raise ConfigError("eta must be a finite number >= 0")
        if self.r0 is not None and not 0 < self.r0 < 1:
            raise ConfigError("r0 must lie in (0, 1)")
        for name in ("beta_plus", "beta_minus"):
            v = getattr(self, name)
            if v is not None and not (v > 0 and math.isfinite(v)):
                raise ConfigError(f"{name.replace('_', '-')} must be positive")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        try:
            check_doubling(self.N)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self


_CASTS = {f.name: f.type for f in fields(RunConfig)}


def _parse_N(value) -> list:
    if isinstance(value, (list, tuple)):
        items = [str(v) for v in value]
    else:
        items = [value]
    out = []
    for item in items:
        for tok in str(item).replace(",", " ").split():
            try:
                out.append(int(tok))
            except ValueError:
                raise ConfigError(f"N entries must be integers, got {tok!r}") from None
    return out


def _coerce(key: str, value):
    if key == "N":
        return _parse_N(value)
    kind = _CASTS[key]
    try:
        if "float" in kind:
            return float(value)
        if "int" in kind:
            return int(value)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {value!r}") from None
    return str(value)


def read_config(path) -> dict:
    """key = value lines; '#' starts a comment; dashes in keys are accepted."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _CASTS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value)
    return out


def build_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if args.config:
        values.update(read_config(args.config))
    for key in _CASTS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = _coerce(key, v)
    return RunConfig(**values).validate()


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="immersed-rt", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="convergence study for one problem and method")
    run.add_argument("--config", help="key = value file; flags override it")
    run.add_argument("--problem", choices=sorted(PROBLEMS))
    run.add_argument("--method", choices=METHODS)
    run.add_argument("--eta", type=float)
    run.add_argument("--N", nargs="+", help="mesh sizes, e.g. --N 8 16 32 or --N 8,16,32")
    run.add_argument("--r0", type=float)
    run.add_argument("--beta-plus", dest="beta_plus", type=float, help="beta_tilde on the outer side")
    run.add_argument("--beta-minus", dest="beta_minus", type=float, help="beta_tilde on the inner side")
    run.add_argument("--out", help="CSV path; the text table is written next to it with suffix .txt")
    run.add_argument("--seed", type=int)
    run.add_argument("--tol", type=float, help="relative residual tolerance of the solver")
    run.add_argument("--backend", choices=BACKENDS)

    ver = sub.add_parser("verify", help="run a property suite")
    ver.add_argument("--suite", required=True, choices=suites.SUITES + ("all",))
    ver.add_argument("--seed", type=int, default=42)
    ver.add_argument("--N", type=int)
    ver.add_argument("--r0", type=float)
    ver.add_argument("--out", help="write the JSON summary here as well")
    return parser


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def cmd_run(cfg: RunConfig) -> int:
    problem = get_problem(cfg.problem, cfg.r0, cfg.beta_plus, cfg.beta_minus)
    report = convergence_table(problem, cfg.method, cfg.eta, cfg.N, cfg.backend)
    table = report.to_table()
    print(table)
    if cfg.out:
        out = Path(cfg.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(report.to_csv(), encoding="utf-8")
        out.with_suffix(".txt").write_text(table + "\n", encoding="utf-8")
    if cfg.problem == "patch":
        system, solution = solve_problem(problem, cfg.N[0], cfg.method, cfg.eta, cfg.backend)
        worst = max(report.column("err_p"))
        div = divergence_defect(solution, system)
        ok = worst <= PATCH_TOL and div <= PATCH_TOL
        print(f"{'PASS' if ok else 'FAIL'}: patch test max err_p = {worst:.3E}, divergence defect = {div:.3E}")
        return EXIT_OK if ok else EXIT_FAIL
    return EXIT_OK


def cmd_verify(args) -> int:
    names = suites.SUITES if args.suite == "all" else (args.suite,)
    results = [_plain(suites.run_suite(n, seed=args.seed, N=args.N, r0=args.r0)) for n in names]
    payload = results[0] if len(results) == 1 else dict(suite="all", passed=all(r["passed"] for r in results),
                                                        results=results)
    text = json.dumps(payload, indent=2, sort_keys=True)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    if any(r.get("error") == "AssumptionViolation" for r in results):
        return EXIT_ASSUMPTION
    return EXIT_OK if payload["passed"] else EXIT_FAIL


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        if args.command == "verify":
            return cmd_verify(args)
        return cmd_run(build_config(args))
    except (ConfigError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AssumptionViolation as exc:
        print(f"assumption violated: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except (SingularSystem, NonConvergence) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
