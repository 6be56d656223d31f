"""Fundamental solution X(t), fundamental functions G(t, s) and C(t, s)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .integrator import MeshOptions, PiecewiseSolution, _write_csv, integrate
from .model import ImpulseSchedule, ProblemSpec, validate

__all__ = [
    "fundamental_solution",
    "fundamental_function",
    "cauchy_function",
    "FundamentalTable",
    "fundamental_table",
    "Lemma1Report",
    "check_lemma1",
    "random_triples",
]


def _zero_history(q, side="right"):
    return 0.0


def _column(spec: ProblemSpec, s: float, horizon: float, impulses: ImpulseSchedule, options):
    if not 0.0 <= s < horizon:
        raise ValueError(f"s must lie in [0, horizon), got s={s}, horizon={horizon}")
    hom = spec.homogeneous()
    return integrate(
        hom,
        horizon,
        start=s,
        initial_value=1.0,
        history=_zero_history,
        impulses=impulses.homogeneous(),
        options=options,
    )


def fundamental_solution(
    spec: ProblemSpec, horizon: float, options: MeshOptions | None = None
) -> PiecewiseSolution:
    """X(t) = G(t, 0): homogeneous equation, zero history, x(0) = 1."""
    validate(spec)
    return _column(spec, 0.0, horizon, spec.impulses, options)


def fundamental_function(
    spec: ProblemSpec, s: float, horizon: float, options: MeshOptions | None = None
) -> PiecewiseSolution:
    """Column G(., s) on [s, horizon]; jumps fire only at tau_j > s.

    The returned solution evaluates to 0 below ``s``.
    """
    validate(spec)
    return _column(spec, float(s), horizon, spec.impulses, options)


def cauchy_function(
    spec: ProblemSpec, s: float, horizon: float, options: MeshOptions | None = None
) -> PiecewiseSolution:
    """Column C(., s) of the equation with its impulse schedule removed."""
    validate(spec)
    return _column(spec, float(s), horizon, ImpulseSchedule(), options)


@dataclass(eq=False)
class FundamentalTable:
    """Columns of G (``impulsive=True``) or C sampled for several start times."""

    s_values: np.ndarray
    columns: list
    impulsive: bool = True
    _index: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.s_values = np.asarray(self.s_values, dtype=float)
        self._index = {float(s): k for k, s in enumerate(self.s_values)}

    def column(self, s: float) -> PiecewiseSolution:
        try:
            return self.columns[self._index[float(s)]]
        except KeyError:
            raise KeyError(f"no column computed for s={s}") from None

    def __call__(self, t: float, s: float, side: str = "right") -> float:
        if t < s:
            return 0.0
        return float(self.column(s)(t, side))

    def rows(self, t_values: Iterable[float] | None = None):
        """(s, t, value) triples; mesh nodes of each column if no t grid is given."""
        for s, col in zip(self.s_values, self.columns):
            ts = col.t if t_values is None else [t for t in t_values if s <= t <= col.end]
            for t in ts:
                yield float(s), float(t), float(col(t))

    def to_csv(self, path_or_file, t_values=None) -> None:
        _write_csv(path_or_file, ["s", "t", "value"], self.rows(t_values))


def fundamental_table(
    spec: ProblemSpec,
    s_values: Sequence[float],
    horizon: float,
    *,
    impulsive: bool = True,
    options: MeshOptions | None = None,
) -> FundamentalTable:
    validate(spec)
    impulses = spec.impulses if impulsive else ImpulseSchedule()
    cols = [_column(spec, float(s), horizon, impulses, options) for s in s_values]
    return FundamentalTable(np.asarray(s_values, dtype=float), cols, impulsive)


@dataclass
class Lemma1Report:
    """Outcome of the two-sided product inequality check.

    ``status`` is one of ``"pass"``, ``"fail"`` or ``"hypotheses-not-met"``.
    The hypotheses (nonnegative coefficients, G >= 0, X > 0) are checked on
    the computed mesh only, so every verdict is grid-relative.
    """

    status: str
    n_triples: int
    tolerance: float
    max_product_excess: float = -math.inf
    max_ratio_deficit: float = -math.inf
    violations: list = field(default_factory=list)
    reason: str = ""

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def as_lines(self) -> list[str]:
        lines = [
            f"status = {self.status}",
            f"triples = {self.n_triples}",
            f"tolerance = {self.tolerance!r}",
            f"max_product_excess = {self.max_product_excess!r}",
            f"max_ratio_deficit = {self.max_ratio_deficit!r}",
        ]
        if self.reason:
            lines.append(f"reason = {self.reason}")
        return lines


def random_triples(n: int, lo: float, hi: float, seed: int = 0) -> list[tuple[float, float, float]]:
    """``n`` sorted triples (s, zeta, t) drawn uniformly from [lo, hi]."""
    rng = np.random.default_rng(seed)
    draws = np.sort(rng.uniform(lo, hi, size=(n, 3)), axis=1)
    return [tuple(map(float, row)) for row in draws]


def _nonnegative_coefficients(spec: ProblemSpec, horizon: float) -> bool:
    return all(term.coefficient.minimum(0.0, horizon) >= 0.0 for term in spec.terms)


def check_lemma1(
    spec: ProblemSpec,
    triples: Sequence[tuple[float, float, float]],
    tolerance: float = 1e-8,
    options: MeshOptions | None = None,
    horizon: float | None = None,
) -> Lemma1Report:
    """Check G(t,s) <= G(t,z) G(z,s) and G(t,s) >= X(t)/X(s) on each triple.

    Triples must satisfy ``s <= z <= t``; ``s = 0`` and ``s = z`` are
    accepted (both inequalities then hold with equality).
    """
    validate(spec)
    triples = [tuple(map(float, tr)) for tr in triples]
    for s, z, t in triples:
        if not 0.0 <= s <= z <= t:
            raise ValueError(f"triple must satisfy 0 <= s <= zeta <= t, got {(s, z, t)}")
    if horizon is None:
        horizon = max((t for _, _, t in triples), default=1.0)
    horizon = max(horizon, max((t for _, _, t in triples), default=0.0))
    report = Lemma1Report("pass", len(triples), tolerance)

    if not _nonnegative_coefficients(spec, horizon):
        report.status = "hypotheses-not-met"
        report.reason = "some coefficient A_i takes negative values"
        return report

    starts = sorted({0.0, *(s for s, _, _ in triples), *(z for _, z, _ in triples)})
    starts = [s for s in starts if s < horizon]
    cols = {s: _column(spec, s, horizon, spec.impulses, options) for s in starts}
    X = cols[0.0]
    if np.min(X.x) <= 0.0 or np.min(X.x_left) <= 0.0:
        report.status = "hypotheses-not-met"
        report.reason = "fundamental solution X is not positive on the grid"
        return report
    for s, col in cols.items():
        if min(np.min(col.x), np.min(col.x_left)) < -tolerance:
            report.status = "hypotheses-not-met"
            report.reason = f"G(., {s!r}) takes negative values on the grid"
            return report

    def G(t, s):
        if t < s:
            return 0.0
        if t == s or s >= horizon:
            return 1.0
        return float(cols[s](t))

    for s, z, t in triples:
        g_ts = G(t, s)
        excess = g_ts - G(t, z) * G(z, s)
        deficit = X(t) / X(s) - g_ts
        report.max_product_excess = max(report.max_product_excess, excess)
        report.max_ratio_deficit = max(report.max_ratio_deficit, deficit)
        if excess > tolerance or deficit > tolerance:
            report.violations.append((s, z, t, excess, deficit))
    if report.violations:
        report.status = "fail"
    return report
