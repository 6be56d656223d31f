"""Command-line front end and problem-file parser.

Problem file grammar (one ``key = value`` per line, ``#`` starts a comment)::

    initial_value = 1
    forcing = 0                       # number, constant(v), piecewise([b..], [v..]) or table([x..], [y..])
    history = constant(1)
    term.coefficient = 1              # starts a new delay term
    term.delay = 1/3                  # number or lag(d): h(t) = t - d;  table([t..], [h..])
    impulses.points = [1/3, 2/3, 1]   # or impulses.period = 1/3 with impulses.count = 30
    impulses.multipliers = 1/6        # list, or one number used for every point
    impulses.jumps = 0                # list or number; defaults to zeros

Numbers may be written as fractions ``a/b``.
"""

from __future__ import annotations

import argparse
import math
import re
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import analysis, expansion, fundamental, representation
from .integrator import MeshOptions, _write_csv, solve
from .model import (
    DelayTerm,
    DeviationDescriptor,
    FunctionDescriptor,
    ImpulseSchedule,
    ProblemSpec,
    SpecError,
    validate,
)

__all__ = ["ProblemFileError", "parse_problem_file", "parse_grid", "RunConfig", "run", "main"]

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

VERIFY_KINDS = ("lemma1", "theorem5", "representation", "positivity", "estimate")


class ProblemFileError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}" if line is not None else message)


_CALL = re.compile(r"^([a-z_]+)\s*\((.*)\)$", re.S)


def _number(text: str, line: int) -> float:
    text = text.strip()
    try:
        if "/" in text:
            return float(Fraction(text.replace(" ", "")))
        return float(text)
    except (ValueError, ZeroDivisionError):
        raise ProblemFileError(f"malformed number {text!r}", line) from None


def _split_args(text: str, line: int) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
            if depth < 0:
                raise ProblemFileError("unbalanced brackets", line)
        if ch == "," and depth == 0:
            parts.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    if depth != 0:
        raise ProblemFileError("unbalanced brackets", line)
    tail = "".join(cur).strip()
    if tail or parts:
        parts.append(tail)
    return parts


def _list(text: str, line: int) -> list[float]:
    text = text.strip()
    if not (text.startswith("[") and text.endswith("]")):
        raise ProblemFileError(f"expected a list [..], got {text!r}", line)
    inner = text[1:-1].strip()
    if not inner:
        return []
    return [_number(p, line) for p in _split_args(inner, line)]


def _list_or_scalar(text: str, line: int):
    return _list(text, line) if text.strip().startswith("[") else _number(text, line)


def _function(text: str, line: int) -> FunctionDescriptor:
    m = _CALL.match(text.strip())
    if not m:
        return FunctionDescriptor.constant(_number(text, line))
    name, args = m.group(1), _split_args(m.group(2), line)
    if name == "constant" and len(args) == 1:
        return FunctionDescriptor.constant(_number(args[0], line))
    if name == "piecewise" and len(args) == 2:
        return FunctionDescriptor.piecewise(_list(args[0], line), _list(args[1], line))
    if name == "table" and len(args) == 2:
        return FunctionDescriptor.tabulated(_list(args[0], line), _list(args[1], line))
    raise ProblemFileError(f"unknown function form {text.strip()!r}", line)


def _deviation(text: str, line: int) -> DeviationDescriptor:
    m = _CALL.match(text.strip())
    if not m:
        return DeviationDescriptor.lag(_number(text, line))
    name, args = m.group(1), _split_args(m.group(2), line)
    if name == "lag" and len(args) == 1:
        return DeviationDescriptor.lag(_number(args[0], line))
    if name == "table" and len(args) == 2:
        return DeviationDescriptor.tabulated(_list(args[0], line), _list(args[1], line))
    raise ProblemFileError(f"unknown delay form {text.strip()!r}", line)


_SCALAR_KEYS = {
    "initial_value",
    "forcing",
    "history",
    "impulses.points",
    "impulses.multipliers",
    "impulses.jumps",
    "impulses.period",
    "impulses.count",
}


def parse_problem_file(text: str) -> ProblemSpec:
    """Parse problem-file text into a validated :class:`ProblemSpec`.

    Errors carry the offending line number where one can be assigned.
    """
    values: dict[str, tuple[str, int]] = {}
    terms: list[dict] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ProblemFileError(f"expected 'key = value', got {body!r}", lineno)
        key, value = (p.strip() for p in body.split("=", 1))
        if not value:
            raise ProblemFileError(f"empty value for {key!r}", lineno)
        if key == "term.coefficient":
            terms.append({"coefficient": (value, lineno)})
        elif key == "term.delay":
            if not terms or "delay" in terms[-1]:
                raise ProblemFileError("term.delay must follow a term.coefficient line", lineno)
            terms[-1]["delay"] = (value, lineno)
        elif key in _SCALAR_KEYS:
            if key in values:
                raise ProblemFileError(f"duplicate key {key!r}", lineno)
            values[key] = (value, lineno)
        else:
            raise ProblemFileError(f"unknown key {key!r}", lineno)

    if "initial_value" not in values:
        raise ProblemFileError("missing initial_value")
    lines: dict[str, int] = {k: ln for k, (_, ln) in values.items()}

    built_terms = []
    for i, term in enumerate(terms):
        if "delay" not in term:
            raise ProblemFileError(f"term {i + 1} has no term.delay", term["coefficient"][1])
        coef = _function(*term["coefficient"])
        dev = _deviation(*term["delay"])
        lines[f"terms[{i}].coefficient"] = term["coefficient"][1]
        lines[f"terms[{i}].delay"] = term["delay"][1]
        built_terms.append(DelayTerm(coef, dev))

    def get(key, parse, default):
        if key not in values:
            return default
        return parse(*values[key])

    initial = get("initial_value", _number, 0.0)
    forcing = get("forcing", _function, FunctionDescriptor.zero())
    history = get("history", _function, FunctionDescriptor.zero())

    if "impulses.points" in values and "impulses.period" in values:
        raise ProblemFileError("give impulses.points or impulses.period, not both", lines["impulses.period"])
    if "impulses.period" in values:
        period = get("impulses.period", _number, None)
        if "impulses.count" not in values:
            raise ProblemFileError("impulses.period needs impulses.count", lines["impulses.period"])
        count = get("impulses.count", _number, 0)
        if count != int(count) or count < 0:
            raise ProblemFileError("impulses.count must be a nonnegative integer", lines["impulses.count"])
        points = [j * period for j in range(1, int(count) + 1)]
        lines["impulses.points"] = lines["impulses.period"]
    else:
        points = get("impulses.points", _list, [])

    def broadcast(key, default):
        v = get(key, _list_or_scalar, default)
        return [v] * len(points) if isinstance(v, float) else v

    multipliers = broadcast("impulses.multipliers", 1.0)
    jumps = broadcast("impulses.jumps", 0.0)
    spec = ProblemSpec(tuple(built_terms), forcing, history, initial, ImpulseSchedule(points, multipliers, jumps))
    try:
        return validate(spec)
    except SpecError as err:
        first = err.errors[0]
        line = lines.get(first.field)
        if line is None and first.field.startswith("impulses"):
            line = lines.get("impulses.points")
        raise ProblemFileError("; ".join(str(e) for e in err.errors), line) from err


def parse_grid(text: str) -> np.ndarray:
    """``start:stop:step`` into an inclusive grid."""
    try:
        a, b, h = (_number(p, None) for p in text.split(":"))
    except ValueError:
        raise ValueError(f"grid must look like start:stop:step, got {text!r}") from None
    if not h > 0 or b < a:
        raise ValueError(f"grid needs step > 0 and stop >= start, got {text!r}")
    n = int(math.floor((b - a) / h + 1e-9))
    return a + h * np.arange(n + 1)


@dataclass(frozen=True)
class RunConfig:
    command: str
    problem: Path
    horizon: float
    kind: str | None = None
    base_step: float = 1e-3
    quadrature_step: float = 1e-2
    tolerance: float = 1e-6
    out: Path | None = None
    seed: int = 0
    grid: str | None = None
    trials: int = 50
    depth: int = 3

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError("horizon must be > 0")
        if not (self.base_step > 0 and self.quadrature_step > 0):
            raise ValueError("steps must be > 0")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be > 0")


def _emit_lines(lines, out=None):
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if out is not None:
        Path(out).write_text(text)


def _csv_target(cfg):
    return cfg.out if cfg.out is not None else sys.stdout


def _run_fundamental(cfg, spec, options, impulsive):
    if cfg.grid is None:
        horizon_spec = spec if impulsive else spec.without_impulses()
        sol = fundamental.fundamental_solution(horizon_spec, cfg.horizon, options)
        sol.to_csv(_csv_target(cfg))
        return EXIT_OK
    grid = parse_grid(cfg.grid)
    s_values = [s for s in grid if s < cfg.horizon]
    table = fundamental.fundamental_table(spec, s_values, cfg.horizon, impulsive=impulsive, options=options)
    table.to_csv(_csv_target(cfg), t_values=[t for t in grid if t <= cfg.horizon])
    return EXIT_OK


def _default_grid(cfg, points=10):
    if cfg.grid is not None:
        return parse_grid(cfg.grid)
    return np.linspace(0.0, cfg.horizon, points + 1)[:-1]


def _start_grid(cfg):
    """Start times s must lie in [0, horizon) for a column to exist."""
    return [s for s in _default_grid(cfg) if 0.0 <= s < cfg.horizon]


def _time_grid(cfg):
    return [t for t in _default_grid(cfg) if 0.0 <= t <= cfg.horizon]


def _verify(cfg, spec, options):
    kind = cfg.kind
    status = EXIT_OK
    if kind == "positivity":
        step = parse_grid(cfg.grid)[1] - parse_grid(cfg.grid)[0] if cfg.grid else 1e-2
        res = analysis.positivity_test(spec, cfg.horizon, step)
        _emit_lines(
            [
                f"verdict = {res.verdict}",
                f"max_functional = {res.max_value!r}",
                f"at_t = {res.argmax!r}",
                f"threshold_1_over_e = {res.threshold!r}",
                f"relation = {res.max_value!r} {'<=' if res.passed else '>'} 1/e",
            ]
        )
        return EXIT_OK if res.passed else EXIT_FAIL
    if kind == "lemma1":
        triples = fundamental.random_triples(cfg.trials, 0.0, cfg.horizon, cfg.seed)
        rep = fundamental.check_lemma1(spec, triples, cfg.tolerance, options, cfg.horizon)
        _emit_lines(rep.as_lines(), cfg.out)
        return EXIT_OK if rep.passed else EXIT_FAIL
    if kind == "theorem5":
        rows = expansion.expansion_rows(spec, _time_grid(cfg), _start_grid(cfg), cfg.horizon, options)
        worst = max((r[-1] for r in rows), default=0.0)
        if cfg.out is not None:
            expansion.write_expansion_csv(cfg.out, rows)
        ok = worst <= cfg.tolerance
        _emit_lines([f"status = {'pass' if ok else 'fail'}", f"pairs = {len(rows)}", f"max_abs_error = {worst!r}"])
        return EXIT_OK if ok else EXIT_FAIL
    if kind == "representation":
        targets = parse_grid(cfg.grid) if cfg.grid else None
        rows = representation.representation_rows(spec, cfg.horizon, options, cfg.quadrature_step, targets)
        worst = max(r[-1] for r in rows)
        if cfg.out is not None:
            representation.write_representation_csv(cfg.out, rows)
        ok = worst <= cfg.tolerance
        _emit_lines([f"status = {'pass' if ok else 'fail'}", f"targets = {len(rows)}", f"residual = {worst!r}"])
        return EXIT_OK if ok else EXIT_FAIL
    if kind == "estimate":
        lines = []
        try:
            r2 = analysis.theorem2_report(spec, cfg.horizon, options)
            v2 = analysis.verify_exponential_estimate(spec, r2, cfg.horizon, options=options, tolerance=cfg.tolerance)
            r3 = analysis.theorem3_report(spec, cfg.horizon, options)
            v3 = analysis.verify_exponential_estimate(
                spec, r3, cfg.horizon, _start_grid(cfg), options, cfg.tolerance
            )
        except analysis.HypothesesNotMet as err:
            _emit_lines(["status = hypotheses-not-met", f"reason = {err}"], cfg.out)
            return EXIT_FAIL
        for tag, rep, ver in (("X", r2, v2), ("G", r3, v3)):
            lines += [f"[{tag}]", *rep.as_lines(), *ver.as_lines()]
            status = status if ver.passed else EXIT_FAIL
        _emit_lines(lines, cfg.out)
        return status
    raise ValueError(f"unknown verify kind {kind!r}")


def run(cfg: RunConfig) -> int:
    """Execute one command; returns the process exit status."""
    try:
        spec = parse_problem_file(Path(cfg.problem).read_text())
    except OSError as err:
        print(f"error: cannot read problem file: {err}", file=sys.stderr)
        return EXIT_USAGE
    except ProblemFileError as err:
        print(f"error: {cfg.problem}: {err}", file=sys.stderr)
        return EXIT_USAGE
    options = MeshOptions(cfg.base_step, cfg.depth)

    if cfg.command == "solve":
        solve(spec, cfg.horizon, options).to_csv(_csv_target(cfg))
        return EXIT_OK
    if cfg.command == "fundamental":
        return _run_fundamental(cfg, spec, options, impulsive=True)
    if cfg.command == "cauchy":
        return _run_fundamental(cfg, spec, options, impulsive=False)
    if cfg.command == "expand":
        rows = expansion.expansion_rows(spec, _time_grid(cfg), _start_grid(cfg), cfg.horizon, options)
        expansion.write_expansion_csv(_csv_target(cfg), rows)
        return EXIT_OK
    if cfg.command == "verify":
        return _verify(cfg, spec, options)
    if cfg.command == "probe":
        res = analysis.input_probe(
            spec.homogeneous(0.0), cfg.kind, cfg.trials, cfg.horizon, cfg.seed, options
        )
        _emit_lines(res.as_lines())
        if cfg.out is not None:
            _write_csv(cfg.out, ["trial", "sup_abs", "tail_sup", "P0", "lambda0"], res.trial_rows())
        return EXIT_OK if res.verdict else EXIT_FAIL
    raise ValueError(f"unknown command {cfg.command!r}")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--problem", required=True, type=Path, help="problem file")
    common.add_argument("--horizon", required=True, type=float, help="final time")
    common.add_argument("--step", type=float, default=1e-3, help="integration base step")
    common.add_argument("--quad-step", type=float, default=1e-2, help="quadrature step")
    common.add_argument("--tol", type=float, default=1e-6, help="verification tolerance")
    common.add_argument("--out", type=Path, default=None, help="output path (CSV or report)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--grid", default=None, help="grid as start:stop:step")
    common.add_argument("--trials", type=int, default=50)
    common.add_argument("--depth", type=int, default=3, help="breakpoint propagation depth")

    parser = argparse.ArgumentParser(
        prog="impulsive-dde", description="Scalar linear impulsive delay equations."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="solve and write t,x,is_impulse,left_limit")
    sub.add_parser("fundamental", parents=[common], help="X(t), or G(t,s) columns with --grid")
    sub.add_parser("cauchy", parents=[common], help="C(t,s) of the equation without impulses")
    sub.add_parser("expand", parents=[common], help="G from C via the subset expansion")
    v = sub.add_parser("verify", parents=[common], help="run one verification")
    v.add_argument("kind", choices=VERIFY_KINDS)
    p = sub.add_parser("probe", parents=[common], help="randomised input probes")
    p.add_argument("kind", choices=analysis.PROBE_CLASSES)
    return parser


def main(argv=None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig(
            command=args.command,
            problem=args.problem,
            horizon=args.horizon,
            kind=getattr(args, "kind", None),
            base_step=args.step,
            quadrature_step=args.quad_step,
            tolerance=args.tol,
            out=args.out,
            seed=args.seed,
            grid=args.grid,
            trials=args.trials,
            depth=args.depth,
        )
        return run(cfg)
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
