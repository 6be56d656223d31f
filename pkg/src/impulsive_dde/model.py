"""Problem definition types for scalar linear impulsive delay equations.

The equation handled throughout the package is

    x'(t) + sum_i A_i(t) x(h_i(t)) = r(t),   t >= 0,
    x(xi) = phi(xi),                          xi < 0,
    x(tau_j) = B_j x(tau_j - 0) + alpha_j,

with x right-continuous at the impulse points.  Coefficients, forcing and
history are given by :class:`FunctionDescriptor` objects; deviating
arguments by :class:`DeviationDescriptor` objects.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "FunctionDescriptor",
    "DeviationDescriptor",
    "DelayTerm",
    "ImpulseSchedule",
    "ProblemSpec",
    "HypothesisReport",
    "Violation",
    "SpecError",
    "validate",
    "check_hypotheses",
]


def _floats(values: Iterable[float]) -> tuple[float, ...]:
    return tuple(float(v) for v in values)


def _strictly_increasing(values: Sequence[float]) -> bool:
    return all(b > a for a, b in zip(values, values[1:]))


def _segment_integral(x0, x1, y0, y1, part):
    """Exact integral of the linear segment (x0, y0)-(x1, y1)."""
    width = x1 - x0
    if width <= 0.0:
        return 0.0
    if part == "raw":
        return 0.5 * (y0 + y1) * width
    if part == "pos":
        if y0 >= 0.0 and y1 >= 0.0:
            return 0.5 * (y0 + y1) * width
        if y0 <= 0.0 and y1 <= 0.0:
            return 0.0
        # one sign change: keep the positive triangle
        root = x0 + width * y0 / (y0 - y1)
        if y0 > 0.0:
            return 0.5 * y0 * (root - x0)
        return 0.5 * y1 * (x1 - root)
    if part == "abs":
        return _segment_integral(x0, x1, y0, y1, "pos") + _segment_integral(
            x0, x1, -y0, -y1, "pos"
        )
    raise ValueError(f"unknown integrand part {part!r}")


@dataclass(frozen=True)
class FunctionDescriptor:
    """A real function of time that can be evaluated reproducibly.

    Three kinds are supported:

    ``constant``
        ``data = (value,)``.
    ``piecewise``
        ``data = (breaks, values)`` with ``len(values) == len(breaks) + 1``;
        the function equals ``values[k]`` on ``[breaks[k-1], breaks[k])``
        (right-continuous).
    ``tabulated``
        ``data = (xs, ys)``; linear interpolation between samples and
        constant extrapolation outside ``[xs[0], xs[-1]]``.

    Use the classmethod constructors rather than building ``data`` by hand.
    """

    kind: str
    data: tuple

    @classmethod
    def constant(cls, value: float) -> "FunctionDescriptor":
        return cls("constant", (float(value),))

    @classmethod
    def piecewise(cls, breaks: Sequence[float], values: Sequence[float]) -> "FunctionDescriptor":
        return cls("piecewise", (_floats(breaks), _floats(values)))

    @classmethod
    def tabulated(cls, xs: Sequence[float], ys: Sequence[float]) -> "FunctionDescriptor":
        return cls("tabulated", (_floats(xs), _floats(ys)))

    @classmethod
    def zero(cls) -> "FunctionDescriptor":
        return cls.constant(0.0)

    def structural_errors(self) -> list[str]:
        if self.kind == "constant":
            if len(self.data) != 1 or not math.isfinite(self.data[0]):
                return ["constant must be a single finite value"]
            return []
        if self.kind == "piecewise":
            breaks, values = self.data
            errors = []
            if len(values) != len(breaks) + 1:
                errors.append("piecewise needs exactly one more value than breakpoints")
            if not _strictly_increasing(breaks):
                errors.append("piecewise breakpoints not strictly increasing")
            if not all(map(math.isfinite, breaks + values)):
                errors.append("piecewise data must be finite")
            return errors
        if self.kind == "tabulated":
            xs, ys = self.data
            errors = []
            if len(xs) == 0 or len(xs) != len(ys):
                errors.append("tabulated abscissae and values must be nonempty and of equal length")
            if not _strictly_increasing(xs):
                errors.append("tabulated abscissae not strictly increasing")
            if not all(map(math.isfinite, xs + ys)):
                errors.append("tabulated data must be finite")
            return errors
        return [f"unknown function kind {self.kind!r}"]

    @property
    def is_zero(self) -> bool:
        if self.kind == "constant":
            return self.data[0] == 0.0
        return all(v == 0.0 for v in self.data[1])

    def __call__(self, t: float, side: str = "right") -> float:
        """Evaluate at a scalar time; ``side='left'`` gives the left limit."""
        kind = self.kind
        if kind == "constant":
            return self.data[0]
        if kind == "piecewise":
            breaks, values = self.data
            if side == "left":
                return values[bisect_left(breaks, t)]
            return values[bisect_right(breaks, t)]
        xs, ys = self.data
        if t <= xs[0]:
            return ys[0]
        if t >= xs[-1]:
            return ys[-1]
        k = bisect_right(xs, t) - 1
        w = (t - xs[k]) / (xs[k + 1] - xs[k])
        return ys[k] + w * (ys[k + 1] - ys[k])

    def evaluate(self, t) -> np.ndarray:
        """Vectorised right-continuous evaluation."""
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            return np.full(t.shape, self.data[0])
        if self.kind == "piecewise":
            breaks, values = self.data
            idx = np.searchsorted(np.asarray(breaks), t, side="right")
            return np.asarray(values)[idx]
        xs, ys = self.data
        return np.interp(t, xs, ys)

    def breakpoints(self, a: float = -math.inf, b: float = math.inf) -> list[float]:
        """Points in the open interval (a, b) where the function or its slope jumps."""
        if self.kind == "constant":
            return []
        return [x for x in self.data[0] if a < x < b]

    def segments(self, a: float, b: float) -> list[tuple[float, float, float, float]]:
        """Linear pieces ``(x0, x1, y0, y1)`` covering ``[a, b]`` exactly."""
        if b <= a:
            return []
        cuts = [a, *self.breakpoints(a, b), b]
        out = []
        for x0, x1 in zip(cuts, cuts[1:]):
            if self.kind == "piecewise":
                v = self(0.5 * (x0 + x1))
                out.append((x0, x1, v, v))
            else:
                out.append((x0, x1, self(x0, "right"), self(x1, "left")))
        return out

    def integral(self, a: float, b: float, part: str = "raw") -> float:
        """Exact integral over ``[a, b]`` of f, |f| (``part='abs'``) or max(f, 0) (``'pos'``)."""
        if b <= a:
            return 0.0
        return sum(_segment_integral(x0, x1, y0, y1, part) for x0, x1, y0, y1 in self.segments(a, b))

    def sup_abs(self, a: float = -math.inf, b: float = math.inf) -> float:
        if self.kind == "constant":
            return abs(self.data[0])
        if self.kind == "piecewise":
            breaks, values = self.data
            lo = bisect_right(breaks, a) if math.isfinite(a) else 0
            hi = bisect_left(breaks, b) if math.isfinite(b) else len(breaks)
            return max(abs(v) for v in values[lo : hi + 1])
        xs, ys = self.data
        vals = [abs(y) for x, y in zip(xs, ys) if a <= x <= b]
        if math.isfinite(a):
            vals.append(abs(self(a)))
        if math.isfinite(b):
            vals.append(abs(self(b)))
        return max(vals) if vals else max(abs(ys[0]), abs(ys[-1]))

    def minimum(self, a: float, b: float) -> float:
        """Infimum over ``[a, b]``."""
        return min(min(y0, y1) for _, _, y0, y1 in self.segments(a, b)) if b > a else self(a)


@dataclass(frozen=True)
class DeviationDescriptor:
    """Deviating argument h(t) <= t.

    ``lag`` kind: ``h(t) = t - d`` with ``data = (d,)``.
    ``tabulated`` kind: ``data = (ts, hs)``, linear interpolation between
    samples; outside the table the lag at the nearest end is continued
    (``h(t) = t - (t_end - h_end)``).  Tabulated values must be
    nondecreasing so breakpoint preimages are well defined.
    """

    kind: str
    data: tuple

    @classmethod
    def lag(cls, d: float) -> "DeviationDescriptor":
        return cls("lag", (float(d),))

    @classmethod
    def tabulated(cls, ts: Sequence[float], hs: Sequence[float]) -> "DeviationDescriptor":
        return cls("tabulated", (_floats(ts), _floats(hs)))

    def structural_errors(self) -> list[str]:
        if self.kind == "lag":
            d = self.data[0]
            if not math.isfinite(d) or d < 0.0:
                return [f"constant lag must be finite and >= 0, got {d}"]
            return []
        if self.kind == "tabulated":
            ts, hs = self.data
            errors = []
            if len(ts) == 0 or len(ts) != len(hs):
                errors.append("tabulated deviation needs nonempty equal-length tables")
                return errors
            if not _strictly_increasing(ts):
                errors.append("tabulated deviation abscissae not strictly increasing")
            bad = [t for t, h in zip(ts, hs) if h > t]
            if bad:
                errors.append(f"deviation has h(t) > t at t = {bad[0]}")
            if any(b < a for a, b in zip(hs, hs[1:])):
                errors.append("tabulated deviation values must be nondecreasing")
            return errors
        return [f"unknown deviation kind {self.kind!r}"]

    @property
    def constant_lag(self) -> float | None:
        return self.data[0] if self.kind == "lag" else None

    def __call__(self, t: float) -> float:
        if self.kind == "lag":
            return t - self.data[0]
        ts, hs = self.data
        if t <= ts[0]:
            return t - (ts[0] - hs[0])
        if t >= ts[-1]:
            return t - (ts[-1] - hs[-1])
        k = bisect_right(ts, t) - 1
        w = (t - ts[k]) / (ts[k + 1] - ts[k])
        return hs[k] + w * (hs[k + 1] - hs[k])

    def _lags(self, a, b):
        pts = [a, b, *(t for t in self.data[0] if a < t < b)]
        return [t - self(t) for t in pts]

    def max_lag(self, a: float, b: float) -> float:
        """sup of t - h(t) over [a, b]; piecewise linear so checked at vertices."""
        if self.kind == "lag":
            return self.data[0]
        return max(self._lags(a, b))

    def min_lag(self, a: float, b: float) -> float:
        if self.kind == "lag":
            return self.data[0]
        return min(self._lags(a, b))

    def is_identity(self) -> bool:
        if self.kind == "lag":
            return self.data[0] == 0.0
        ts, hs = self.data
        return all(t == h for t, h in zip(ts, hs))

    def preimage(self, b: float) -> float | None:
        """Smallest xi with h(xi) = b, or None if h never reaches b."""
        if self.kind == "lag":
            return b + self.data[0]
        ts, hs = self.data
        # left extrapolation: slope 1
        if b <= hs[0]:
            return b + (ts[0] - hs[0])
        for k in range(len(ts) - 1):
            if hs[k] <= b <= hs[k + 1]:
                if hs[k + 1] == hs[k]:
                    return ts[k]
                return ts[k] + (b - hs[k]) * (ts[k + 1] - ts[k]) / (hs[k + 1] - hs[k])
        return b + (ts[-1] - hs[-1])

    def breakpoints(self, a: float = -math.inf, b: float = math.inf) -> list[float]:
        if self.kind == "lag":
            return []
        return [t for t in self.data[0] if a < t < b]


@dataclass(frozen=True)
class DelayTerm:
    """One term ``A(t) x(h(t))`` of the delay sum."""

    coefficient: FunctionDescriptor
    delay: DeviationDescriptor


@dataclass(frozen=True)
class ImpulseSchedule:
    """Impulse points with multipliers B_j and additive jumps alpha_j."""

    points: tuple[float, ...] = ()
    multipliers: tuple[float, ...] = ()
    jumps: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "points", _floats(self.points))
        object.__setattr__(self, "multipliers", _floats(self.multipliers))
        jumps = [0.0] * len(self.points) if self.jumps is None else self.jumps
        object.__setattr__(self, "jumps", _floats(jumps))

    @classmethod
    def periodic(cls, period: float, count: int, multiplier: float, jump: float = 0.0):
        """``tau_j = j * period`` for ``j = 1..count`` with equal B_j and alpha_j."""
        return cls(
            tuple(j * period for j in range(1, count + 1)),
            (multiplier,) * count,
            (jump,) * count,
        )

    def __len__(self) -> int:
        return len(self.points)

    def structural_errors(self) -> list[tuple[str, str]]:
        errors = []
        if not _strictly_increasing(self.points):
            errors.append(("impulses.points", "points not strictly increasing"))
        if self.points and self.points[0] <= 0.0:
            errors.append(("impulses.points", "impulse points must be > 0"))
        if len(self.multipliers) != len(self.points):
            errors.append(("impulses.multipliers", "multipliers length differs from points"))
        if len(self.jumps) != len(self.points):
            errors.append(("impulses.jumps", "jumps length differs from points"))
        if not all(map(math.isfinite, self.points + self.multipliers + self.jumps)):
            errors.append(("impulses", "impulse data must be finite"))
        return errors

    def indices_in(self, a: float, b: float) -> range:
        """Indices j (0-based) with a < tau_j <= b."""
        return range(bisect_right(self.points, a), bisect_right(self.points, b))

    def homogeneous(self) -> "ImpulseSchedule":
        return ImpulseSchedule(self.points, self.multipliers, (0.0,) * len(self.points))

    def truncated(self, horizon: float) -> "ImpulseSchedule":
        n = bisect_right(self.points, horizon)
        return ImpulseSchedule(self.points[:n], self.multipliers[:n], self.jumps[:n])


@dataclass(frozen=True)
class ProblemSpec:
    """Full description of one impulsive delay problem."""

    terms: tuple[DelayTerm, ...] = ()
    forcing: FunctionDescriptor = field(default_factory=FunctionDescriptor.zero)
    history: FunctionDescriptor = field(default_factory=FunctionDescriptor.zero)
    initial_value: float = 0.0
    impulses: ImpulseSchedule = field(default_factory=ImpulseSchedule)

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "initial_value", float(self.initial_value))

    @property
    def m(self) -> int:
        return len(self.terms)

    @property
    def has_delay(self) -> bool:
        return any(not term.delay.is_identity() for term in self.terms)

    def homogeneous(self, initial_value: float = 1.0) -> "ProblemSpec":
        """Zero forcing, zero history and zero additive jumps."""
        return replace(
            self,
            forcing=FunctionDescriptor.zero(),
            history=FunctionDescriptor.zero(),
            initial_value=initial_value,
            impulses=self.impulses.homogeneous(),
        )

    def without_impulses(self) -> "ProblemSpec":
        return replace(self, impulses=ImpulseSchedule())


@dataclass(frozen=True)
class Violation:
    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.field}: {self.message}"


class SpecError(ValueError):
    """Raised by :func:`validate`; ``errors`` lists every violation found."""

    def __init__(self, errors: list[Violation]):
        self.errors = list(errors)
        super().__init__("; ".join(str(e) for e in self.errors))


def validate(spec: ProblemSpec) -> ProblemSpec:
    """Return ``spec`` unchanged if structurally sound, else raise :class:`SpecError`.

    All violations are collected before raising.
    """
    errors: list[Violation] = []
    for i, term in enumerate(spec.terms):
        errors += [Violation(f"terms[{i}].coefficient", m) for m in term.coefficient.structural_errors()]
        errors += [Violation(f"terms[{i}].delay", m) for m in term.delay.structural_errors()]
    errors += [Violation("forcing", m) for m in spec.forcing.structural_errors()]
    errors += [Violation("history", m) for m in spec.history.structural_errors()]
    if not math.isfinite(spec.initial_value):
        errors.append(Violation("initial_value", "must be finite"))
    errors += [Violation(f, m) for f, m in spec.impulses.structural_errors()]
    if errors:
        raise SpecError(errors)
    return spec


@dataclass(frozen=True)
class HypothesisReport:
    """Empirical check of the standing hypotheses over ``[0, horizon]``.

    The constants are extrema over the horizon only; they say nothing about
    behaviour beyond it.  ``Q`` uses every unit interval starting at 0,
    ``Q_from_one`` only those starting at k >= 1.
    """

    horizon: float
    verdicts: dict
    rho: float
    sigma: float
    M: float
    delta: float
    Q: float
    Q_from_one: float
    notes: tuple[str, ...] = ()

    def as_lines(self) -> list[str]:
        lines = [f"horizon = {self.horizon!r}"]
        lines += [f"{k} = {'pass' if v else 'fail'}" for k, v in self.verdicts.items()]
        for name in ("rho", "sigma", "M", "delta", "Q", "Q_from_one"):
            lines.append(f"{name} = {getattr(self, name)!r}")
        lines += [f"note = {n}" for n in self.notes]
        return lines


def check_hypotheses(spec: ProblemSpec, horizon: float) -> HypothesisReport:
    """Evaluate hypotheses a1..a9 on ``[0, horizon]``."""
    if not horizon > 0:
        raise ValueError(f"horizon must be > 0, got {horizon}")
    validate(spec)
    imp = spec.impulses.truncated(horizon)
    notes = []

    verdicts = {"a1": True, "a2": True, "a3": True, "a4": True}
    for term in spec.terms:
        verdicts["a2"] &= math.isfinite(term.coefficient.sup_abs(0.0, horizon))
    verdicts["a2"] &= math.isfinite(spec.forcing.sup_abs(0.0, horizon))
    verdicts["a2"] &= all(map(math.isfinite, imp.multipliers))
    verdicts["a3"] = all(term.delay.min_lag(0.0, horizon) >= 0.0 for term in spec.terms)
    verdicts["a4"] = math.isfinite(spec.history.sup_abs(-math.inf, 0.0))

    M = max((abs(b) for b in imp.multipliers), default=0.0)
    verdicts["a5"] = math.isfinite(M)

    if imp.points:
        full_gaps = np.diff((0.0,) + imp.points)
        rho = float(full_gaps.min())
        sigma = float(max(full_gaps.max(), horizon - imp.points[-1]))
    else:
        rho = sigma = math.inf
        notes.append("no impulse points within horizon")
    verdicts["a6"] = rho > 0.0
    verdicts["a7"] = bool(imp.points)

    # a8: a lag still growing at the horizon end is treated as unbounded.
    delta = max((t.delay.max_lag(0.0, horizon) for t in spec.terms), default=0.0)
    first_half = max((t.delay.max_lag(0.0, 0.5 * horizon) for t in spec.terms), default=0.0)
    verdicts["a8"] = delta <= first_half
    if not verdicts["a8"]:
        notes.append("lag keeps growing over the horizon; delay treated as unbounded")

    def unit_masses(k0):
        out = [0.0]
        k = k0
        while k < horizon:
            hi = min(k + 1.0, horizon)
            for term in spec.terms:
                out.append(term.coefficient.integral(float(k), hi, "abs"))
            k += 1
        return max(out)

    Q = unit_masses(0)
    Q_from_one = unit_masses(1)
    verdicts["a9"] = math.isfinite(Q)
    return HypothesisReport(horizon, verdicts, rho, sigma, M, delta, Q, Q_from_one, tuple(notes))
