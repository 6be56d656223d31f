"""Method-of-steps integration on a breakpoint-aligned mesh.

Every impulse point and every delay image of a known discontinuity (up to
``propagation_depth`` generations) is a mesh node, so the classical RK4
step never straddles a point where the solution or one of its low
derivatives jumps.  Delayed values are read back through a cubic Hermite
interpolant built from node values and node derivatives; each mesh
interval keeps its own one-sided end data, so a jump at a node is never
smeared across it.
"""

from __future__ import annotations

import csv
import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .model import FunctionDescriptor, ImpulseSchedule, ProblemSpec, validate

__all__ = ["MeshOptions", "Mesh", "PiecewiseSolution", "build_mesh", "solve", "integrate"]

# relative distance below which two breakpoints are considered the same node
_MERGE_RTOL = 1e-12


@dataclass(frozen=True)
class MeshOptions:
    base_step: float = 1e-3
    propagation_depth: int = 3

    def __post_init__(self):
        if not self.base_step > 0:
            raise ValueError(f"base_step must be > 0, got {self.base_step}")
        if self.propagation_depth < 0:
            raise ValueError("propagation_depth must be >= 0")


@dataclass(frozen=True)
class Mesh:
    """Strictly increasing integration nodes.

    ``is_break[n]`` marks nodes that came from a discontinuity (start,
    impulse point, coefficient break or a delay image of one) rather than
    from uniform refinement.
    """

    nodes: np.ndarray
    is_break: np.ndarray
    base_step: float

    def __len__(self) -> int:
        return len(self.nodes)


def _merge(points: Sequence[float], preferred: set[float], scale: float) -> list[float]:
    """Sort and collapse near-duplicates, keeping preferred (exact) values."""
    tol = _MERGE_RTOL * max(1.0, scale)
    out: list[float] = []
    for p in sorted(points):
        if out and p - out[-1] <= tol:
            if p in preferred and out[-1] not in preferred:
                out[-1] = p
            continue
        out.append(p)
    return out


def _seed_breakpoints(spec: ProblemSpec, start: float, horizon: float, impulses: ImpulseSchedule):
    seeds = {start}
    seeds.update(p for p in impulses.points if start < p <= horizon)
    for term in spec.terms:
        seeds.update(term.coefficient.breakpoints(start, horizon))
        seeds.update(term.delay.breakpoints(start, horizon))
    seeds.update(spec.forcing.breakpoints(start, horizon))
    return seeds


def build_mesh(
    spec: ProblemSpec,
    horizon: float,
    base_step: float = 1e-3,
    propagation_depth: int = 3,
    *,
    start: float = 0.0,
    impulses: ImpulseSchedule | None = None,
    history_breaks: Sequence[float] = (),
) -> Mesh:
    """Breakpoint-aligned mesh on ``[start, horizon]``.

    Breakpoints are ``start``, ``horizon``, impulse points in
    ``(start, horizon]``, coefficient/forcing breaks, and the solutions
    xi of ``h_i(xi) = b`` for every known breakpoint b, iterated
    ``propagation_depth`` times.  Each gap is then split uniformly so no
    spacing exceeds ``base_step`` (nor the smallest positive constant lag).
    """
    if not horizon > start:
        raise ValueError(f"horizon must exceed start ({start}), got {horizon}")
    if not base_step > 0:
        raise ValueError(f"base_step must be > 0, got {base_step}")
    impulses = spec.impulses if impulses is None else impulses

    seeds = _seed_breakpoints(spec, start, horizon, impulses)
    frontier = set(seeds) | {b for b in history_breaks if b < start}
    known = set(seeds)
    for _ in range(propagation_depth):
        images = set()
        for b in frontier:
            for term in spec.terms:
                xi = term.delay.preimage(b)
                if xi is not None and xi > b and start < xi < horizon and xi not in known:
                    images.add(xi)
        if not images:
            break
        known |= images
        frontier = images

    preferred = {start, horizon, *(p for p in impulses.points if start < p <= horizon)}
    breaks = _merge([*known, horizon], preferred, horizon)
    breaks = [b for b in breaks if start <= b <= horizon]

    step = base_step
    lags = [t.delay.constant_lag for t in spec.terms]
    positive = [d for d in lags if d is not None and d > 0.0]
    if positive:
        step = min(step, min(positive))

    nodes = [breaks[0]]
    flags = [True]
    for a, b in zip(breaks, breaks[1:]):
        n = max(1, math.ceil((b - a) / step - 1e-9))
        nodes.extend(a + (b - a) * k / n for k in range(1, n))
        flags.extend([False] * (n - 1))
        nodes.append(b)
        flags.append(True)
    return Mesh(np.asarray(nodes), np.asarray(flags, dtype=bool), base_step)


def _hermite(a, b, y0, m0, y1, m1, q):
    h = b - a
    th = (q - a) / h
    th2 = th * th
    th3 = th2 * th
    return (
        (2 * th3 - 3 * th2 + 1) * y0
        + (th3 - 2 * th2 + th) * h * m0
        + (-2 * th3 + 3 * th2) * y1
        + (th3 - th2) * h * m1
    )


@dataclass(frozen=True, eq=False)
class PiecewiseSolution:
    """Right-continuous solution sampled on a mesh.

    ``x`` holds right-continuous node values, ``x_left`` the left limits
    (they differ only at impulse nodes), and ``dx``/``dx_left`` the
    matching one-sided derivatives used by the Hermite interpolant.
    Queries below ``start`` go to ``history``.
    """

    mesh: Mesh
    x: np.ndarray
    x_left: np.ndarray
    dx: np.ndarray
    dx_left: np.ndarray
    impulse_mask: np.ndarray
    history: Callable[[float, str], float]
    start: float

    @property
    def t(self) -> np.ndarray:
        return self.mesh.nodes

    @property
    def values(self) -> np.ndarray:
        return self.x

    @property
    def impulse_times(self) -> np.ndarray:
        return self.t[self.impulse_mask]

    @property
    def left_limits(self) -> np.ndarray:
        """x(tau_j - 0) for each impulse node, aligned with :attr:`impulse_times`."""
        return self.x_left[self.impulse_mask]

    @property
    def end(self) -> float:
        return float(self.t[-1])

    def value_at(self, q: float, side: str = "right") -> float:
        t = self.t
        tol = _MERGE_RTOL * max(1.0, abs(t[-1]))
        j = int(np.searchsorted(t, q - tol))
        if j < len(t) and t[j] - q <= tol:
            q = float(t[j])
        if q < self.start or (q == self.start and side == "left"):
            return self.history(q, side)
        if q > t[-1]:
            raise ValueError(f"query {q} beyond computed range [.., {t[-1]}]")
        if side == "left":
            i = int(np.searchsorted(t, q, side="left")) - 1
        else:
            if q == t[-1]:
                return float(self.x[-1])
            i = int(np.searchsorted(t, q, side="right")) - 1
        if i < 0:
            return float(self.x[0])
        return _hermite(t[i], t[i + 1], self.x[i], self.dx[i], self.x_left[i + 1], self.dx_left[i + 1], q)

    def __call__(self, q, side: str = "right"):
        """Evaluate at a scalar or an array of times."""
        if np.ndim(q) == 0:
            return self.value_at(float(q), side)
        return np.array([self.value_at(float(v), side) for v in np.ravel(q)]).reshape(np.shape(q))

    def rows(self):
        """(t, x, is_impulse, left_limit-or-None) per node."""
        for ti, xi, imp, xl in zip(self.t, self.x, self.impulse_mask, self.x_left):
            yield float(ti), float(xi), bool(imp), (float(xl) if imp else None)

    def to_csv(self, path_or_file) -> None:
        _write_csv(
            path_or_file,
            ["t", "x", "is_impulse", "left_limit"],
            ([t, x, int(imp), "" if xl is None else xl] for t, x, imp, xl in self.rows()),
        )


def format_value(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def _write_csv(path_or_file, header, rows) -> None:
    def dump(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_value(v) for v in row])

    if hasattr(path_or_file, "write"):
        dump(path_or_file)
    else:
        with open(path_or_file, "w", newline="") as fh:
            dump(fh)


def _history_callable(descriptor: FunctionDescriptor):
    if descriptor.kind == "constant":
        c = descriptor.data[0]
        return lambda q, side="right": c
    return lambda q, side="right": descriptor(q, side)


def integrate(
    spec: ProblemSpec,
    horizon: float,
    *,
    start: float = 0.0,
    initial_value: float | None = None,
    history: Callable[[float, str], float] | None = None,
    history_breaks: Sequence[float] = (),
    impulses: ImpulseSchedule | None = None,
    forcing: FunctionDescriptor | None = None,
    options: MeshOptions | None = None,
) -> PiecewiseSolution:
    """Integrate on ``[start, horizon]`` with explicit start data.

    Lower-level entry point used by :func:`solve` and the fundamental
    function routines.  Only impulses with ``start < tau <= horizon`` fire.
    """
    options = options or MeshOptions()
    impulses = spec.impulses if impulses is None else impulses
    forcing = spec.forcing if forcing is None else forcing
    x0 = spec.initial_value if initial_value is None else float(initial_value)
    if history is None:
        history = _history_callable(spec.history)
        history_breaks = spec.history.breakpoints(-math.inf, start)

    mesh = build_mesh(
        spec,
        horizon,
        options.base_step,
        options.propagation_depth,
        start=start,
        impulses=impulses,
        history_breaks=history_breaks,
    )
    nodes = mesh.nodes.tolist()
    is_break = mesh.is_break.tolist()
    N = len(nodes)

    jump_at: dict[int, tuple[float, float]] = {}
    for j in impulses.indices_in(start, horizon):
        tau = impulses.points[j]
        n = bisect_left(nodes, tau)
        if n >= N or nodes[n] != tau:
            raise RuntimeError(f"impulse point {tau} not aligned with mesh")
        jump_at[n] = (impulses.multipliers[j], impulses.jumps[j])

    xr = [0.0] * N
    xl = [0.0] * N
    dr = [0.0] * N
    dl = [0.0] * N

    terms = []
    for term in spec.terms:
        c = term.coefficient
        dev = term.delay
        terms.append(
            (
                c.data[0] if c.kind == "constant" else None,
                c,
                dev.constant_lag,
                dev,
            )
        )
    r_const = forcing.data[0] if forcing.kind == "constant" else None

    snap = _MERGE_RTOL * max(1.0, abs(horizon))

    def delayed(q, side, n, ts, ys):
        # q <= ts always; n is the index of the interval being stepped
        j = bisect_left(nodes, q - snap)
        if j < N and nodes[j] - q <= snap:
            q = nodes[j]
        if q < start or (q == start and side == "left"):
            return history(q, side)
        tn = nodes[n]
        if q > tn or (q == tn and side != "left"):
            if ts == tn:
                return xr[n]
            # quadratic through (tn, xr[n]) with slope dr[n] and (ts, ys)
            u = q - tn
            w = ts - tn
            m0 = dr[n]
            return xr[n] + m0 * u + (ys - xr[n] - m0 * w) * (u / w) * (u / w)
        if side == "left":
            i = bisect_left(nodes, q) - 1
        else:
            i = bisect_right(nodes, q) - 1
        a = nodes[i]
        b = nodes[i + 1]
        h = b - a
        th = (q - a) / h
        th2 = th * th
        th3 = th2 * th
        return (
            (2 * th3 - 3 * th2 + 1) * xr[i]
            + (th3 - 2 * th2 + th) * h * dr[i]
            + (3 * th2 - 2 * th3) * xl[i + 1]
            + (th3 - th2) * h * dl[i + 1]
        )

    def rhs(t, y, side, n):
        acc = r_const if r_const is not None else forcing(t, side)
        for a_const, coeff, lag, dev in terms:
            a = a_const if a_const is not None else coeff(t, side)
            if a == 0.0:
                continue
            q = t - lag if lag is not None else dev(t)
            acc -= a * delayed(q, side, n, t, y)
        return acc

    xr[0] = xl[0] = x0
    dr[0] = rhs(start, x0, "right", 0)
    dl[0] = dr[0]
    for n in range(N - 1):
        t0 = nodes[n]
        t1 = nodes[n + 1]
        h = t1 - t0
        y0 = xr[n]
        k1 = dr[n]
        tm = t0 + 0.5 * h
        k2 = rhs(tm, y0 + 0.5 * h * k1, "right", n)
        k3 = rhs(tm, y0 + 0.5 * h * k2, "right", n)
        k4 = rhs(t1, y0 + h * k3, "left", n)
        y1 = y0 + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        xl[n + 1] = y1
        dl[n + 1] = rhs(t1, y1, "left", n)
        jump = jump_at.get(n + 1)
        if jump is not None:
            xr[n + 1] = jump[0] * y1 + jump[1]
            dr[n + 1] = rhs(t1, xr[n + 1], "right", n + 1)
        else:
            xr[n + 1] = y1
            dr[n + 1] = rhs(t1, y1, "right", n + 1) if is_break[n + 1] else dl[n + 1]

    mask = np.zeros(N, dtype=bool)
    mask[list(jump_at)] = True
    return PiecewiseSolution(
        mesh,
        np.asarray(xr),
        np.asarray(xl),
        np.asarray(dr),
        np.asarray(dl),
        mask,
        history,
        float(start),
    )


def solve(spec: ProblemSpec, horizon: float, options: MeshOptions | None = None) -> PiecewiseSolution:
    """Solve the impulsive problem on ``[0, horizon]``.

    >>> from impulsive_dde.model import ProblemSpec
    >>> sol = solve(ProblemSpec(initial_value=1.0), 1.0)
    >>> float(sol(0.5))
    1.0
    """
    validate(spec)
    if not horizon > 0:
        raise ValueError(f"horizon must be > 0, got {horizon}")
    return integrate(spec, horizon, options=options)
