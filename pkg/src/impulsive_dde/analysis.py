"""Quantitative checks: positivity certificate, decay constants and input probes.

All quantities that the theory defines as suprema over the half-line are
estimated on a finite horizon here.  Reports carry that horizon so a
verification step can be run self-consistently on the same range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .fundamental import _column
from .integrator import MeshOptions, integrate
from .model import (
    FunctionDescriptor,
    ImpulseSchedule,
    ProblemSpec,
    check_hypotheses,
    validate,
)

__all__ = [
    "HypothesesNotMet",
    "PositivityResult",
    "positivity_functional",
    "positivity_test",
    "estimate_k",
    "decay_exponent",
    "EstimateReport",
    "exponential_constants",
    "theorem3_constants",
    "theorem2_report",
    "theorem3_report",
    "gronwall_bound",
    "VerificationResult",
    "verify_exponential_estimate",
    "induction_bound_holds",
    "fit_decay",
    "ProbeResult",
    "input_probe",
    "solution_bound",
]

INV_E = math.exp(-1.0)
K_FLOOR_EPS = 1e-9


class HypothesesNotMet(RuntimeError):
    """A sign hypothesis needed by the estimate fails on the computed grid."""


@dataclass(frozen=True)
class PositivityResult:
    verdict: str  # "pass" or "inconclusive"
    max_value: float
    argmax: float
    threshold: float = INV_E

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"


def positivity_functional(spec: ProblemSpec, t: float) -> float:
    """sum_i int_{max(h_i(t), 0)}^{t} max(A_i(s), 0) ds."""
    total = 0.0
    for term in spec.terms:
        lo = max(term.delay(t), 0.0)
        total += term.coefficient.integral(lo, t, "pos")
    return total


def positivity_test(spec: ProblemSpec, horizon: float, grid_step: float = 1e-2) -> PositivityResult:
    """Sufficient test for C(t, s) > 0: the functional stays <= 1/e on the grid.

    Failure only means the test is inconclusive.
    """
    validate(spec)
    n = max(1, math.ceil(horizon / grid_step - 1e-9))
    grid = np.linspace(0.0, horizon, n + 1)
    values = np.array([positivity_functional(spec, float(t)) for t in grid])
    i = int(np.argmax(values))
    vmax = float(values[i])
    return PositivityResult("pass" if vmax <= INV_E else "inconclusive", vmax, float(grid[i]))


def _impulse_columns(spec, horizon, options):
    imp = spec.impulses.truncated(horizon)
    cols = [_column(spec, tau, horizon, spec.impulses, options) for tau in imp.points if tau < horizon]
    return imp, cols


def _check_sign(sol, what):
    if min(np.min(sol.x), np.min(sol.x_left)) < 0.0:
        raise HypothesesNotMet(f"{what} takes negative values on the computed grid")


def estimate_k(
    spec: ProblemSpec,
    horizon: float,
    t_grid: Sequence[float] | None = None,
    options: MeshOptions | None = None,
) -> float:
    """Horizon-limited estimate of sup_t sum_{0 < tau_i <= t} G(t, tau_i), floored at 1 + eps.

    The sum is evaluated on ``t_grid`` together with every impulse point
    (where the sup is typically attained).  Raises :class:`HypothesesNotMet`
    if X or any G(., tau_i) is negative on the computed mesh.
    """
    validate(spec)
    X = _column(spec, 0.0, horizon, spec.impulses, options)
    _check_sign(X, "X")
    if np.min(X.x) <= 0.0:
        raise HypothesesNotMet("X is not positive on the computed grid")
    imp, cols = _impulse_columns(spec, horizon, options)
    for tau, col in zip(imp.points, cols):
        _check_sign(col, f"G(., {tau!r})")
    if not imp.points:
        return 1.0 + K_FLOOR_EPS
    if t_grid is None:
        t_grid = np.linspace(0.0, horizon, max(2, int(round(horizon / 1e-2)) + 1))
    ts = np.union1d(np.asarray(t_grid, dtype=float), np.asarray(imp.points))
    best = 0.0
    for t in ts:
        total = 0.0
        for tau, col in zip(imp.points, cols):
            if tau > t:
                break
            total += 1.0 if t == tau else float(col(t))
        if imp.points[-1] == horizon and t == horizon:
            total += 1.0
        best = max(best, total)
    return max(best, 1.0 + K_FLOOR_EPS)


def decay_exponent(k: float, sigma: float) -> float:
    """nu = ln(k / (k - 1)) / sigma."""
    if not k > 1:
        raise ValueError(f"k must exceed 1, got {k}")
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    return math.log(k / (k - 1.0)) / sigma


@dataclass(frozen=True)
class EstimateReport:
    """Constants of an exponential estimate |.| <= N exp(-nu (t - s))."""

    k: float
    nu: float
    N: float
    provenance: str  # "theorem-2", "theorem-3" or "fitted"
    horizon: float | None = None
    sigma: float | None = None

    def as_lines(self) -> list[str]:
        return [f"{name} = {getattr(self, name)!r}" for name in ("provenance", "k", "nu", "N", "sigma", "horizon")]


def exponential_constants(k: float, sigma: float, X_tau1: float, boundary_sup: float) -> EstimateReport:
    """Constants for |X(t)| <= N exp(-nu t).

    ``boundary_sup`` must be sup over [0, tau_1] of exp(nu t) X(t), computed
    with ``nu = decay_exponent(k, sigma)``.
    """
    nu = decay_exponent(k, sigma)
    N = max(X_tau1 * k**3 / (k - 1.0) ** 2, boundary_sup)
    return EstimateReport(k, nu, N, "theorem-2", sigma=sigma)


def theorem3_constants(k: float, sigma: float, M: float, Q: float, m: int) -> EstimateReport:
    """Constants for |G(t, s)| <= N exp(-nu (t - s))."""
    if M < 0 or Q < 0 or m < 0:
        raise ValueError("M, Q and m must be nonnegative")
    nu = decay_exponent(k, sigma)
    growth = (1.0 + M) * math.exp(m * Q * sigma)
    N = max(growth * k**3 / (k - 1.0) ** 2, (1.0 + M) * math.exp(sigma * (nu + m * Q)))
    return EstimateReport(k, nu, N, "theorem-3", sigma=sigma)


def theorem2_report(
    spec: ProblemSpec, horizon: float, options: MeshOptions | None = None, t_grid=None
) -> EstimateReport:
    """k, nu, N for the fundamental solution, all estimated on [0, horizon]."""
    k = estimate_k(spec, horizon, t_grid, options)
    hyp = check_hypotheses(spec, horizon)
    if not hyp.verdicts["a7"]:
        raise HypothesesNotMet("no impulse points in the horizon; sigma undefined")
    nu = decay_exponent(k, hyp.sigma)
    X = _column(spec, 0.0, horizon, spec.impulses, options)
    tau1 = spec.impulses.points[0]
    mask = X.t <= tau1
    weights = np.exp(nu * X.t[mask])
    boundary = float(max(np.max(weights * X.x[mask]), np.max(weights * X.x_left[mask])))
    report = exponential_constants(k, hyp.sigma, float(X(tau1)), boundary)
    return replace(report, horizon=horizon)


def theorem3_report(
    spec: ProblemSpec, horizon: float, options: MeshOptions | None = None, t_grid=None
) -> EstimateReport:
    k = estimate_k(spec, horizon, t_grid, options)
    hyp = check_hypotheses(spec, horizon)
    if not hyp.verdicts["a7"]:
        raise HypothesesNotMet("no impulse points in the horizon; sigma undefined")
    report = theorem3_constants(k, hyp.sigma, hyp.M, hyp.Q, spec.m)
    return replace(report, horizon=horizon)


def gronwall_bound(spec: ProblemSpec, s: float, t: float) -> float:
    """(1 + |B_p|) exp(int_s^t sum_i |A_i|) for s <= t inside one impulse interval.

    tau_p is the first impulse point >= t (and > s); |B_p| is taken as 0
    when there is none.  Raises if an impulse point lies strictly between
    s and t.
    """
    if t < s:
        raise ValueError(f"need s <= t, got s={s}, t={t}")
    imp = spec.impulses
    inside = [p for p in imp.points if s < p < t]
    if inside:
        raise ValueError(f"s={s} and t={t} straddle impulse point {inside[0]}")
    following = [j for j, p in enumerate(imp.points) if p >= t and p > s]
    b = abs(imp.multipliers[following[0]]) if following else 0.0
    mass = sum(term.coefficient.integral(s, t, "abs") for term in spec.terms)
    return (1.0 + b) * math.exp(mass)


@dataclass(frozen=True)
class VerificationResult:
    passed: bool
    worst_margin: float
    worst_at: tuple
    checked: int

    def as_lines(self) -> list[str]:
        return [
            f"status = {'pass' if self.passed else 'fail'}",
            f"worst_margin = {self.worst_margin!r}",
            f"worst_at = {self.worst_at!r}",
            f"points = {self.checked}",
        ]


def verify_exponential_estimate(
    spec: ProblemSpec,
    report: EstimateReport,
    horizon: float,
    grid: Sequence[float] | None = None,
    options: MeshOptions | None = None,
    tolerance: float = 1e-8,
) -> VerificationResult:
    """Check the estimate at every grid point (and every mesh node).

    theorem-2 / fitted reports are checked as |X(t)| <= N exp(-nu t);
    theorem-3 reports as |G(t, s)| <= N exp(-nu (t - s)) for each s in
    ``grid`` and t on the column mesh.  ``worst_margin`` is the smallest
    bound minus observed value; the check passes when it is >= -tolerance.
    """
    validate(spec)
    worst = (math.inf, ())
    count = 0

    def scan(col, s):
        nonlocal worst, count
        for values in (col.x, col.x_left):
            margin = report.N * np.exp(-report.nu * (col.t - s)) - np.abs(values)
            i = int(np.argmin(margin))
            count += len(margin)
            if margin[i] < worst[0]:
                worst = (float(margin[i]), (float(col.t[i]), float(s)))

    if report.provenance == "theorem-3":
        s_values = grid if grid is not None else np.linspace(0.0, horizon, 11)[:-1]
        for s in s_values:
            if s < horizon:
                scan(_column(spec, float(s), horizon, spec.impulses, options), float(s))
    else:
        X = _column(spec, 0.0, horizon, spec.impulses, options)
        scan(X, 0.0)
        if grid is not None:
            ts = np.asarray(grid, dtype=float)
            vals = np.abs(X(ts))
            margin = report.N * np.exp(-report.nu * ts) - vals
            i = int(np.argmin(margin))
            count += len(ts)
            if margin[i] < worst[0]:
                worst = (float(margin[i]), (float(ts[i]), 0.0))
    return VerificationResult(worst[0] >= -tolerance, worst[0], worst[1], count)


def induction_bound_holds(X_at_impulses: Sequence[float], k: float, rtol: float = 1e-10) -> bool:
    """X(tau_i) <= X(tau_1) (k-1)^(i-1) / k^(i-2) for every listed impulse index i >= 2."""
    x1 = X_at_impulses[0]
    for i, xi in enumerate(X_at_impulses[1:], start=2):
        bound = x1 * (k - 1.0) ** (i - 1) / k ** (i - 2)
        if xi > bound * (1.0 + rtol):
            return False
    return True


def fit_decay(samples, floor: float = 1e-12) -> tuple[float, float]:
    """Least-squares fit of ln|value| = ln N - nu t; returns (N_fit, nu_fit).

    Samples with |value| below ``floor`` are dropped.
    """
    data = np.asarray(samples, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2:
        raise ValueError("samples must be (t, value) pairs")
    t, v = data[:, 0], np.abs(data[:, 1])
    keep = v > max(floor, 1e-300)
    if keep.sum() < 2:
        raise ValueError("fewer than two samples above the floor")
    slope, intercept = np.polyfit(t[keep], np.log(v[keep]), 1)
    return float(math.exp(intercept)), float(-slope)


@dataclass
class ProbeResult:
    input_class: str
    trials: int
    seed: int
    horizon: float
    sup_abs: np.ndarray
    tail_sup: np.ndarray
    fits: list = field(default_factory=list)
    verdict: bool = True
    label: str = ""

    def as_lines(self) -> list[str]:
        lines = [
            f"class = {self.input_class}",
            f"trials = {self.trials}",
            f"seed = {self.seed}",
            f"horizon = {self.horizon!r}",
            f"max_sup_abs = {float(np.max(self.sup_abs)) if len(self.sup_abs) else 0.0!r}",
            f"max_tail_sup = {float(np.max(self.tail_sup)) if len(self.tail_sup) else 0.0!r}",
        ]
        if self.fits:
            lines.append(f"min_fitted_lambda = {min(f[1] for f in self.fits)!r}")
        lines.append(f"verdict = {self.label}")
        return lines

    def trial_rows(self):
        for n in range(self.trials):
            fit = self.fits[n] if self.fits else (float("nan"), float("nan"))
            yield n, float(self.sup_abs[n]), float(self.tail_sup[n]), fit[0], fit[1]


PROBE_CLASSES = ("bounded", "vanishing", "exponential")


def _random_inputs(spec, cls, rng, horizon, P, lam, table_step):
    """Forcing descriptor, jump list, initial value and history constant for one trial."""
    imp = spec.impulses
    n_units = max(1, math.ceil(horizon))
    c_units = rng.uniform(-1.0, 1.0, n_units + 1)
    c_jumps = rng.uniform(-1.0, 1.0, len(imp))
    x0 = float(rng.uniform(-1.0, 1.0))
    phi = float(rng.uniform(-1.0, 1.0))
    if cls == "bounded":
        forcing = FunctionDescriptor.piecewise(np.arange(1, n_units + 1, dtype=float), c_units)
        jumps = c_jumps
    else:
        ts = np.arange(0.0, horizon + table_step, table_step)
        c = c_units[np.minimum(ts.astype(int), n_units)]
        if cls == "vanishing":
            forcing = FunctionDescriptor.tabulated(ts, c / (ts + 1.0))
            jumps = c_jumps / (np.arange(1, len(imp) + 1) + 1.0)
        else:
            forcing = FunctionDescriptor.tabulated(ts, P * c * np.exp(-lam * ts))
            jumps = P * c_jumps * np.exp(-lam * np.arange(1, len(imp) + 1))
    impulses = ImpulseSchedule(imp.points, imp.multipliers, tuple(jumps))
    return forcing, impulses, x0, phi


def input_probe(
    spec: ProblemSpec,
    input_class: str,
    trials: int = 50,
    horizon: float = 20.0,
    seed: int = 0,
    options: MeshOptions | None = None,
    *,
    P: float = 1.0,
    lam: float = 0.5,
    decay_ratio: float = 0.5,
    table_step: float = 0.25,
    zero_inputs: bool = False,
) -> ProbeResult:
    """Solve with randomised inputs of one class and summarise the behaviour.

    ``bounded``: |alpha_j|, |r| <= 1.  ``vanishing``: alpha_n = c_n / (n+1),
    r(t) = c(t) / (t+1).  ``exponential``: |alpha_n| <= P e^{-lam n},
    |r(t)| <= P e^{-lam t}.  The initial value and a constant history are
    drawn from [-1, 1].  For the exponential class a decay fit is made on
    the tail envelope sup_{u >= t} |x(u)|.  ``zero_inputs`` replaces every
    input by zero (sanity baseline).
    """
    if input_class not in PROBE_CLASSES:
        raise ValueError(f"input class must be one of {PROBE_CLASSES}, got {input_class!r}")
    validate(spec)
    imp = spec.impulses.truncated(horizon)
    base = replace(spec, impulses=imp)
    rng = np.random.default_rng(seed)
    sup_abs = np.zeros(trials)
    tail_sup = np.zeros(trials)
    head_sup = np.zeros(trials)
    fits = []
    for n in range(trials):
        forcing, impulses, x0, phi = _random_inputs(base, input_class, rng, horizon, P, lam, table_step)
        if zero_inputs:
            forcing, impulses, x0, phi = FunctionDescriptor.zero(), imp.homogeneous(), 0.0, 0.0
        trial_spec = replace(
            base,
            forcing=forcing,
            history=FunctionDescriptor.constant(phi),
            initial_value=x0,
            impulses=impulses,
        )
        sol = integrate(trial_spec, horizon, options=options)
        vals = np.maximum(np.abs(sol.x), np.abs(sol.x_left))
        sup_abs[n] = float(np.max(vals))
        tail = sol.t >= 0.8 * horizon
        head = sol.t <= 0.2 * horizon
        tail_sup[n] = float(np.max(vals[tail]))
        head_sup[n] = float(np.max(vals[head]))
        if input_class == "exponential":
            envelope = np.maximum.accumulate(vals[::-1])[::-1]
            stride = max(1, len(sol.t) // 200)
            pts = np.column_stack([sol.t[::stride], envelope[::stride]])
            try:
                fits.append(fit_decay(pts))
            except ValueError:
                fits.append((0.0, math.inf))

    finite = bool(np.all(np.isfinite(sup_abs)))
    if input_class == "bounded":
        verdict, label = finite, "bounded" if finite else "unbounded"
    elif input_class == "vanishing":
        ok = finite and bool(np.all(tail_sup <= decay_ratio * np.maximum(head_sup, 1e-300) + 1e-300))
        verdict, label = ok, "decaying" if ok else "not-decaying"
    else:
        ok = finite and all(f[1] > 0 for f in fits)
        verdict, label = ok, "exponentially-decaying" if ok else "not-exponentially-decaying"
    return ProbeResult(input_class, trials, seed, horizon, sup_abs, tail_sup, fits, verdict, label)


def solution_bound(
    report: EstimateReport,
    k: float,
    *,
    sup_r: float,
    sup_alpha: float,
    x0: float,
    sup_phi: float = 0.0,
    sup_A_near_zero: float = 0.0,
    delta: float = 0.0,
    m: int = 0,
) -> float:
    """Bound on |x(t)| implied by the representation and |G| <= N e^{-nu (t-s)}.

    N |x0| + N sup|r| / nu + k sup|alpha| + m sup|A| sup|phi| (N / nu) e^{nu delta}.
    """
    N, nu = report.N, report.nu
    return (
        N * abs(x0)
        + N * sup_r / nu
        + k * sup_alpha
        + m * sup_A_near_zero * sup_phi * (N / nu) * math.exp(nu * delta)
    )
