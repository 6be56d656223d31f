"""Variation-of-constants representation and its cross-check against direct solves.

For a target time t the solution is reassembled as

    X(t) x(0) + int_0^t G(t,s) r(s) ds
              - sum_i int_0^t G(t,s) A_i(s) phi(h_i(s)) ds
              + sum_{0 < tau_j <= t} G(t, tau_j) alpha_j,

with phi(z) taken as 0 for z >= 0.  Integrals use composite Simpson on
pieces whose ends are every point where the integrand in s can lose
smoothness: impulse points (G jumps there), coefficient and forcing
breaks, the switch-off points of phi(h_i(s)), and backward delay images
t - d, tau_j - d, ... of all of these.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .fundamental import _column
from .integrator import _MERGE_RTOL, MeshOptions, _write_csv, solve
from .model import ProblemSpec, validate

__all__ = [
    "RepresentationInput",
    "evaluate_representation",
    "representation_terms",
    "representation_rows",
    "representation_residual",
    "split_points",
]


@dataclass(frozen=True)
class RepresentationInput:
    spec: ProblemSpec
    target_times: tuple[float, ...]
    quadrature_step: float = 1e-2
    options: MeshOptions = field(default_factory=MeshOptions)

    def __post_init__(self):
        object.__setattr__(self, "target_times", tuple(float(t) for t in self.target_times))
        if not self.quadrature_step > 0:
            raise ValueError("quadrature_step must be > 0")
        if any(t < 0 for t in self.target_times):
            raise ValueError("target times must be >= 0")


def split_points(spec: ProblemSpec, t: float, depth: int) -> list[float]:
    """Sorted piece ends in [0, t] for the s-integrals at target time t."""
    seeds = {0.0, t}
    seeds.update(p for p in spec.impulses.points if 0.0 < p < t)
    seeds.update(spec.forcing.breakpoints(0.0, t))
    for term in spec.terms:
        seeds.update(term.coefficient.breakpoints(0.0, t))
        seeds.update(term.delay.breakpoints(0.0, t))

    known = set(seeds)
    frontier = set(seeds)
    for _ in range(depth):
        images = set()
        for p in frontier:
            for term in spec.terms:
                q = term.delay(p)
                if 0.0 < q < p and q not in known:
                    images.add(q)
        known |= images
        frontier = images

    for b in [0.0, *spec.history.breakpoints(-math.inf, 0.0)]:
        for term in spec.terms:
            xi = term.delay.preimage(b)
            if xi is not None and 0.0 < xi < t:
                known.add(xi)

    tol = _MERGE_RTOL * max(1.0, t)
    out: list[float] = []
    for p in sorted(known):
        if out and p - out[-1] <= tol:
            continue
        out.append(p)
    out[-1] = t
    return out


def _simpson_nodes(a: float, b: float, step: float) -> np.ndarray:
    n = max(2, 2 * math.ceil((b - a) / (2 * step) - 1e-9))
    return np.linspace(a, b, n + 1)


def _simpson_weights(n_nodes: int, width: float) -> np.ndarray:
    w = np.ones(n_nodes)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (width / (n_nodes - 1) / 3.0)


class _Kernel:
    """G(t, s) from memoised columns, with one-sided limits in s."""

    def __init__(self, spec: ProblemSpec, horizon: float, options: MeshOptions):
        self.spec = spec
        self.horizon = horizon
        self.options = options
        self.cols: dict[float, object] = {}
        self.points = spec.impulses.points
        self.tol = _MERGE_RTOL * max(1.0, horizon)

    def _impulse_index(self, s: float) -> int | None:
        j = bisect_left(self.points, s - self.tol)
        if j < len(self.points) and abs(self.points[j] - s) <= self.tol:
            return j
        return None

    def __call__(self, t: float, s: float, side: str = "right") -> float:
        j = self._impulse_index(s)
        if j is not None:
            s = self.points[j]
        scale = self.spec.impulses.multipliers[j] if (side == "left" and j is not None) else 1.0
        if t < s:
            return 0.0
        if t - s <= self.tol:
            return scale
        col = self.cols.get(s)
        if col is None:
            col = _column(self.spec, s, self.horizon, self.spec.impulses, self.options)
            self.cols[s] = col
        return scale * float(col(t))


def _history_factor(spec: ProblemSpec, s: float, side: str, tol: float) -> float:
    """sum_i A_i(s) phi(h_i(s)) with phi switched off for arguments >= 0."""
    total = 0.0
    for term in spec.terms:
        z = term.delay(s)
        if abs(z) <= tol:
            z = 0.0
        active = z <= 0.0 if side == "left" else z < 0.0
        if active:
            total += term.coefficient(s, side) * spec.history(z, "left" if z == 0.0 else side)
    return total


def representation_terms(inp: RepresentationInput) -> dict[str, np.ndarray]:
    """The four summands of the representation at each target time.

    Keys: ``initial``, ``forcing``, ``history`` (already negated) and ``jumps``.
    """
    spec = validate(inp.spec)
    imp = spec.impulses
    targets = inp.target_times
    horizon = max(targets, default=0.0)
    if imp.points:
        gap = min(b - a for a, b in zip((0.0,) + imp.points, imp.points))
        if inp.quadrature_step > gap:
            raise ValueError(
                f"quadrature_step {inp.quadrature_step} exceeds the smallest impulse gap {gap}"
            )
    out = {k: np.zeros(len(targets)) for k in ("initial", "forcing", "history", "jumps")}
    if horizon <= 0.0:
        out["initial"][:] = spec.initial_value
        return out

    K = _Kernel(spec, horizon, inp.options)
    tol = K.tol
    need_history = not spec.history.is_zero and spec.m > 0
    need_forcing = not spec.forcing.is_zero
    for n, t in enumerate(targets):
        out["initial"][n] = K(t, 0.0) * spec.initial_value
        out["jumps"][n] = sum(
            K(t, imp.points[j]) * imp.jumps[j] for j in imp.indices_in(0.0, t) if imp.jumps[j] != 0.0
        )
        if t == 0.0 or not (need_forcing or need_history):
            continue
        cuts = split_points(spec, t, inp.options.propagation_depth)
        f_int = 0.0
        h_int = 0.0
        for a, b in zip(cuts, cuts[1:]):
            s_nodes = _simpson_nodes(a, b, inp.quadrature_step)
            w = _simpson_weights(len(s_nodes), b - a)
            last = len(s_nodes) - 1
            for k, s in enumerate(s_nodes):
                side = "left" if k == last else "right"
                g = K(t, float(s), side)
                if g == 0.0:
                    continue
                if need_forcing:
                    f_int += w[k] * g * spec.forcing(s, side)
                if need_history:
                    h_int += w[k] * g * _history_factor(spec, float(s), side, tol)
        out["forcing"][n] = f_int
        out["history"][n] = -h_int
    return out


def evaluate_representation(inp: RepresentationInput) -> np.ndarray:
    """Solution values at ``inp.target_times`` rebuilt from the fundamental function."""
    parts = representation_terms(inp)
    return parts["initial"] + parts["forcing"] + parts["history"] + parts["jumps"]


def representation_rows(
    spec: ProblemSpec,
    horizon: float,
    options: MeshOptions | None = None,
    quadrature_step: float = 1e-2,
    target_times: Sequence[float] | None = None,
):
    """Rows (t, direct, representation, abs_error)."""
    options = options or MeshOptions()
    if target_times is None:
        target_times = np.linspace(0.0, horizon, 11)
    direct = solve(spec, horizon, options)
    rep = evaluate_representation(RepresentationInput(spec, tuple(target_times), quadrature_step, options))
    rows = []
    for t, r in zip(target_times, rep):
        d = float(direct(float(t)))
        rows.append((float(t), d, float(r), abs(d - float(r))))
    return rows


def representation_residual(
    spec: ProblemSpec,
    horizon: float,
    options: MeshOptions | None = None,
    quadrature_step: float = 1e-2,
    target_times: Sequence[float] | None = None,
) -> float:
    """max |representation - direct solve| over the target grid (11 points by default)."""
    return max(r[-1] for r in representation_rows(spec, horizon, options, quadrature_step, target_times))


def write_representation_csv(path_or_file, rows) -> None:
    _write_csv(path_or_file, ["t", "direct", "representation", "abs_error"], rows)
