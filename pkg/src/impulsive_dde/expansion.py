"""Impulsive fundamental function rebuilt from the non-impulsive one.

Three routes are provided for G(t, s) given a C(t, s) evaluator and the
impulse schedule:

* :func:`expansion_G` sums over every nonempty ordered subset of the
  impulse indices between s and t (exponential cost, used as an oracle);
* :func:`recursion_G` adds one impulse layer at a time (quadratic cost);
* :func:`ode_product_G` is the product formula valid only without delay.

Impulse indices are 1-based in the public helpers, matching the usual
``tau_1 < tau_2 < ...`` numbering.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from itertools import combinations
from typing import Callable

from .fundamental import cauchy_function, fundamental_function
from .integrator import MeshOptions, _write_csv
from .model import ImpulseSchedule, ProblemSpec, validate

__all__ = [
    "SubsetChain",
    "CauchyEvaluator",
    "enumerate_chains",
    "locate",
    "expansion_G",
    "recursion_G",
    "ode_product_G",
    "expansion_rows",
    "MAX_ENUMERATED_IMPULSES",
]

MAX_ENUMERATED_IMPULSES = 20


@dataclass(frozen=True)
class SubsetChain:
    indices: tuple[int, ...]

    def __post_init__(self):
        if not self.indices:
            raise ValueError("chain must be nonempty")
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise ValueError("chain indices must be strictly increasing")

    @property
    def first(self) -> int:
        return self.indices[0]

    @property
    def last(self) -> int:
        return self.indices[-1]

    @property
    def pairs(self) -> list[tuple[int, int]]:
        """Consecutive pairs (n_i, n_{i-1}), ..., (n_2, n_1); empty for a singleton."""
        idx = self.indices
        return [(idx[p], idx[p - 1]) for p in range(len(idx) - 1, 0, -1)]


def enumerate_chains(k: int, l: int) -> list[SubsetChain]:
    """All 2**(l-k+1) - 1 nonempty subsets of {k..l}, by size then lexicographically."""
    if not 1 <= k <= l:
        raise ValueError(f"need 1 <= k <= l, got k={k}, l={l}")
    pool = range(k, l + 1)
    return [SubsetChain(c) for size in range(1, l - k + 2) for c in combinations(pool, size)]


class CauchyEvaluator:
    """Queryable C(t, s) with C(u, u) = 1 and C(u, v) = 0 for u < v.

    Backed either by numerical columns of ``spec`` (solved lazily and
    memoised per start time) or by an explicit ``function(t, s)``.
    """

    def __init__(
        self,
        spec: ProblemSpec | None = None,
        horizon: float | None = None,
        options: MeshOptions | None = None,
        *,
        function: Callable[[float, float], float] | None = None,
        has_delay: bool | None = None,
    ):
        if (spec is None) == (function is None):
            raise ValueError("give exactly one of spec or function")
        if spec is not None:
            validate(spec)
            if horizon is None:
                raise ValueError("horizon is required with a spec")
        self.spec = spec
        self.horizon = horizon
        self.options = options
        self.function = function
        if has_delay is None:
            has_delay = spec.has_delay if spec is not None else False
        self.has_delay = has_delay
        self._columns: dict[float, object] = {}
        self.evaluations = 0

    def column(self, s: float):
        col = self._columns.get(s)
        if col is None:
            col = cauchy_function(self.spec, s, self.horizon, self.options)
            self._columns[s] = col
        return col

    def __call__(self, t: float, s: float) -> float:
        t = float(t)
        s = float(s)
        if t < s:
            return 0.0
        if t == s:
            return 1.0
        self.evaluations += 1
        if self.function is not None:
            return float(self.function(t, s))
        return float(self.column(s)(t))


def locate(impulses: ImpulseSchedule, t: float, s: float) -> tuple[int, int]:
    """1-based (k, l) with tau_{k-1} <= s < tau_k and tau_l <= t < tau_{l+1}.

    ``k > l`` means no impulse lies in (s, t].
    """
    if t < s:
        raise ValueError(f"need t >= s, got t={t}, s={s}")
    if s < 0:
        raise ValueError(f"s inside the history region is not supported (s={s})")
    pts = impulses.points
    return bisect_right(pts, s) + 1, bisect_right(pts, t)


def expansion_G(C: CauchyEvaluator, impulses: ImpulseSchedule, t: float, s: float) -> float:
    """G(t, s) by summing over all ordered subset chains of the impulses in (s, t]."""
    k, l = locate(impulses, t, s)
    total = C(t, s)
    if k > l:
        return total
    if l - k + 1 > MAX_ENUMERATED_IMPULSES:
        raise ValueError(
            f"{l - k + 1} impulses in (s, t]; enumeration is capped at {MAX_ENUMERATED_IMPULSES}"
        )
    tau = (None,) + impulses.points
    B = (None,) + impulses.multipliers
    for chain in enumerate_chains(k, l):
        term = C(t, tau[chain.last])
        for hi, lo in chain.pairs:
            term *= (B[hi] - 1.0) * C(tau[hi], tau[lo])
        term *= (B[chain.first] - 1.0) * C(tau[chain.first], s)
        total += term
    return total


def recursion_G(C: CauchyEvaluator, impulses: ImpulseSchedule, t: float, s: float) -> float:
    """G(t, s) by adding impulse layers one at a time.

    Layer q turns the function with impulses k..q-1 into the one with
    impulses k..q:  F_q(u) = F_{q-1}(u) + C(u, tau_q) (B_q - 1) F_{q-1}(tau_q).
    Only the values at the remaining impulse points and at t are tracked.
    """
    k, l = locate(impulses, t, s)
    if k > l:
        return C(t, s)
    tau = impulses.points
    B = impulses.multipliers
    # 0-based positions k-1..l-1, then t
    targets = [tau[q] for q in range(k - 1, l)] + [t]
    vals = [C(u, s) for u in targets]
    for pos, q in enumerate(range(k - 1, l)):
        before = vals[pos]
        factor = (B[q] - 1.0) * before
        for j in range(pos, len(targets)):
            vals[j] += C(targets[j], tau[q]) * factor
    return vals[-1]


def ode_product_G(C: CauchyEvaluator, impulses: ImpulseSchedule, t: float, s: float) -> float:
    """Product formula for equations without delay.

    Refused when the evaluator reports a genuine delay: the product form
    does not hold for delay equations in general.
    """
    if C.has_delay:
        raise ValueError("product formula is only valid for equations without delay")
    k, l = locate(impulses, t, s)
    if k > l:
        return C(t, s)
    tau = (None,) + impulses.points
    B = (None,) + impulses.multipliers
    value = C(t, tau[l])
    for j in range(l, k, -1):
        value *= B[j] * C(tau[j], tau[j - 1])
    return value * B[k] * C(tau[k], s)


def expansion_rows(spec: ProblemSpec, t_values, s_values, horizon: float, options: MeshOptions | None = None):
    """Comparison rows (t, s, G_direct, G_expansion, G_recursion, abs_error) for t >= s.

    ``abs_error`` is the larger deviation of the two reconstructions from
    the direct impulsive solve.
    """
    validate(spec)
    C = CauchyEvaluator(spec.without_impulses(), horizon, options)
    rows = []
    for s in s_values:
        direct = fundamental_function(spec, float(s), horizon, options)
        for t in t_values:
            if t < s:
                continue
            g_dir = float(direct(t))
            g_exp = expansion_G(C, spec.impulses, t, s)
            g_rec = recursion_G(C, spec.impulses, t, s)
            err = max(abs(g_exp - g_dir), abs(g_rec - g_dir))
            rows.append((float(t), float(s), g_dir, g_exp, g_rec, err))
    return rows


def write_expansion_csv(path_or_file, rows) -> None:
    _write_csv(path_or_file, ["t", "s", "G_direct", "G_expansion", "G_recursion", "abs_error"], rows)
