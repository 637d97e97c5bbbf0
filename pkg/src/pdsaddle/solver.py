"""The two primal-dual iterations with stepsize validation and tracing.

Dual-first (relaxation on the dual variable):

    y_{n+1} = prox_{tau g*}(y_n + tau L x_n)
    ybar    = y_{n+1} + theta (y_{n+1} - y_n)
    x_{n+1} = prox_{sigma f}(x_n - sigma L* ybar)

Primal-first swaps the roles; the relaxation then extrapolates x.

Solvers enforce the base predicates (sigma*rho < 1, sqrt(sigma*tau)*||L|| <
1, theta in [0,1]) strictly; the sharper per-regime predicates that back the
convergence theory are checked, stored in the trace metadata, and enforced
only by the theory-side constants (radius_report, rate_constant_B).
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from .errors import ProxUnavailable, StepsizeViolation
from .saddle import SaddleProblem, dist_to_set, gap_H

TRACE_HEADER = "n,dist,H,eps,objective,residual"


@dataclass(frozen=True)
class StepConfig:
    """Stepsizes (sigma, tau) and relaxation theta in [0, 1]."""

    sigma: float
    tau: float
    theta: float = 0.0


@dataclass(frozen=True)
class StepCheck:
    """Outcome of validate_steps: per-predicate failures with their margins."""

    ok: bool
    failures: tuple  # of (predicate name, amount by which it fails)


def validate_steps(cfg: StepConfig, rho: float, norm_L: float, regime: str) -> StepCheck:
    """Check the base and per-regime stepsize predicates (all strict).

    Regimes: "dual-first" needs sigma*rho + theta*sqrt(sigma*tau)*||L|| < 1,
    "primal-first" needs sigma*rho + sqrt(sigma*tau)*||L|| < 1, both on top
    of the base predicates.
    """
    if regime not in ("dual-first", "primal-first"):
        raise ValueError(f"unknown regime {regime!r}")
    fails = []
    if not cfg.sigma > 0:
        fails.append(("sigma > 0", -cfg.sigma))
    if not cfg.tau > 0:
        fails.append(("tau > 0", -cfg.tau))
    if not 0.0 <= cfg.theta <= 1.0:
        fails.append(("theta in [0,1]", max(-cfg.theta, cfg.theta - 1.0)))
    if fails:
        return StepCheck(False, tuple(fails))
    rt = float(np.sqrt(cfg.sigma * cfg.tau) * norm_L)
    sr = cfg.sigma * rho
    if not sr < 1.0:
        fails.append(("sigma*rho < 1", sr - 1.0))
    if not rt < 1.0:
        fails.append(("sqrt(sigma*tau)*||L|| < 1", rt - 1.0))
    if regime == "dual-first":
        v = sr + cfg.theta * rt
        if not v < 1.0:
            fails.append(("sigma*rho + theta*sqrt(sigma*tau)*||L|| < 1", v - 1.0))
    else:
        v = sr + rt
        if not v < 1.0:
            fails.append(("sigma*rho + sqrt(sigma*tau)*||L|| < 1", v - 1.0))
    return StepCheck(not fails, tuple(fails))


_REGIME_PREDICATES = frozenset([
    "sigma*rho + theta*sqrt(sigma*tau)*||L|| < 1",
    "sigma*rho + sqrt(sigma*tau)*||L|| < 1",
])


def _base_failures(check: StepCheck):
    return tuple(f for f in check.failures if f[0] not in _REGIME_PREDICATES)


@dataclass
class TraceRow:
    """One iterate: columns are None when the quantity is not computable.

    ``eps`` on row k is dist(y_{k-1}, subdiff g(L x_k)), the inexactness of
    the step that produced x_k.
    """

    n: int
    x: np.ndarray
    y: np.ndarray
    dist: Optional[float] = None
    H: Optional[float] = None
    eps: Optional[float] = None
    objective: Optional[float] = None
    residual: Optional[float] = None
    xbar: Optional[np.ndarray] = None
    ybar: Optional[np.ndarray] = None


def _fmt(v: Optional[float]) -> str:
    return "" if v is None else format(float(v), ".17g")


def format_trace_row(row: TraceRow) -> str:
    return ",".join([str(row.n), _fmt(row.dist), _fmt(row.H), _fmt(row.eps),
                     _fmt(row.objective), _fmt(row.residual)])


class IterateTrace:
    """Per-iteration records plus run metadata.

    Row 0 is the initial point, so a run of N iterations has N+1 rows. CSV
    serialization pins the header ``n,dist,H,eps,objective,residual`` with
    17-significant-digit floats, '.' decimals and LF line endings; vectors
    stay in memory only.
    """

    def __init__(self, metadata: Optional[dict] = None):
        self.rows: List[TraceRow] = []
        self.metadata: dict = dict(metadata or {})

    @property
    def iterations(self) -> int:
        return max(len(self.rows) - 1, 0)

    def final(self):
        r = self.rows[-1]
        return r.x, r.y

    def dists(self) -> np.ndarray:
        return np.array([np.nan if r.dist is None else r.dist for r in self.rows])

    def column(self, name: str) -> np.ndarray:
        return np.array([np.nan if getattr(r, name) is None else getattr(r, name)
                         for r in self.rows])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write(TRACE_HEADER + "\n")
            for row in self.rows:
                fh.write(format_trace_row(row) + "\n")

    def write_metadata(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            for key in sorted(self.metadata):
                fh.write(f"{key}={self.metadata[key]}\n")


@dataclass(frozen=True)
class StoppingRules:
    """Halt at whichever rule fires first; None disables a rule."""

    max_iters: Optional[int] = None
    residual_tol: Optional[float] = None
    dist_tol: Optional[float] = None


def stopping(trace: IterateTrace, rules: Optional[StoppingRules]) -> Optional[str]:
    """Reason to halt based on the last recorded row, or None to continue."""
    if rules is None or not trace.rows:
        return None
    row = trace.rows[-1]
    if rules.max_iters is not None and trace.iterations >= rules.max_iters:
        return "max_iters"
    if (rules.residual_tol is not None and row.residual is not None
            and row.residual <= rules.residual_tol):
        return "residual_tol"
    if (rules.dist_tol is not None and row.dist is not None
            and row.dist <= rules.dist_tol):
        return "dist_tol"
    return None


def epsilon_monitor(problem: SaddleProblem, y_prev: np.ndarray,
                    x_next: np.ndarray) -> float:
    """eps_n = dist(y_n, subdiff g(L x_{n+1})), evaluated after the primal update."""
    if problem.g is None or not problem.g.has_subdiff:
        raise ProxUnavailable("epsilon monitor needs g with a subdifferential oracle")
    box = problem.g.subdiff(problem.L.apply(x_next))
    return box.distance(y_prev)


def _prepare(problem: SaddleProblem, cfg: StepConfig, z0, regime: str,
             seed, metadata: Optional[dict]):
    check = validate_steps(cfg, problem.f.rho, problem.L.norm_bound, regime)
    base_fails = _base_failures(check)
    if base_fails:
        detail = "; ".join(f"{name} fails by {amt:.3g}" for name, amt in base_fails)
        raise StepsizeViolation(detail)
    # dual-side prox validity, checked once up front like the primal one
    if problem.gstar is not None and problem.gstar.rho > 0:
        if not cfg.tau * problem.gstar.rho < 1:
            raise StepsizeViolation(
                f"tau*rho(g*) = {cfg.tau * problem.gstar.rho:.6g} >= 1")
    if problem.gstar is None and problem.g is not None and problem.g.rho != 0.0:
        raise ValueError("dual update via the Moreau identity needs convex g")

    x = np.atleast_1d(np.asarray(z0[0], dtype=float)).copy()
    y = np.atleast_1d(np.asarray(z0[1], dtype=float)).copy()
    if x.size != problem.L.in_dim or y.size != problem.L.out_dim:
        raise ValueError("z0 dimensions inconsistent with L")
    fx = problem.f.eval(x)
    if not np.isfinite(fx):
        raise ValueError("x0 lies outside dom f")

    meta = dict(metadata or {})
    meta.update({
        "regime": regime,
        "sigma": cfg.sigma, "tau": cfg.tau, "theta": cfg.theta,
        "seed": seed if seed is not None else "",
        "regime_predicate_ok": check.ok,
    })
    if not check.ok:
        meta["regime_predicate_failures"] = "; ".join(
            f"{name} by {amt:.6g}" for name, amt in check.failures)
    return x, y, IterateTrace(meta)


def _record(trace: IterateTrace, problem: SaddleProblem, n, x, y,
            x_prev=None, y_prev=None, eps=None, xbar=None, ybar=None,
            hooks=None) -> TraceRow:
    dist = H = None
    if problem.saddle_set:
        dist = dist_to_set((x, y), problem.saddle_set)
        if problem.gstar is not None:
            H = gap_H(problem, x, y)
    objective = problem.objective(x)
    residual = None
    if x_prev is not None:
        residual = float(np.sqrt(np.sum((x - x_prev) ** 2) + np.sum((y - y_prev) ** 2)))
    row = TraceRow(n=n, x=x.copy(), y=y.copy(), dist=dist, H=H, eps=eps,
                   objective=objective, residual=residual, xbar=xbar, ybar=ybar)
    trace.rows.append(row)
    if hooks is not None:
        hooks(row)
    return row


def _monitor_eps(problem: SaddleProblem, y_prev, x_next) -> Optional[float]:
    if problem.g is not None and problem.g.has_subdiff:
        return epsilon_monitor(problem, y_prev, x_next)
    return None


def solve_dual_first(problem: SaddleProblem, cfg: StepConfig, z0, iters: int,
                     hooks: Optional[Callable[[TraceRow], None]] = None,
                     rules: Optional[StoppingRules] = None,
                     store_relaxed: bool = False, seed=None,
                     metadata: Optional[dict] = None) -> IterateTrace:
    """Run the dual-update-first iteration for ``iters`` steps (or until a rule fires)."""
    t0 = time.perf_counter()
    x, y, trace = _prepare(problem, cfg, z0, "dual-first", seed, metadata)
    sigma, tau, theta = cfg.sigma, cfg.tau, cfg.theta
    L = problem.L
    _record(trace, problem, 0, x, y, hooks=hooks)
    for n in range(1, iters + 1):
        y_new = problem.dual_prox(tau, y + tau * L.apply(x))
        ybar = y_new + theta * (y_new - y)
        x_new = problem.f.prox(sigma, x - sigma * L.adjoint(ybar))
        eps = _monitor_eps(problem, y, x_new)
        _record(trace, problem, n, x_new, y_new, x, y, eps=eps,
                ybar=ybar if store_relaxed else None, hooks=hooks)
        x, y = x_new, y_new
        reason = stopping(trace, rules)
        if reason is not None:
            trace.metadata["stop_reason"] = reason
            break
    trace.metadata.setdefault("stop_reason", "iters")
    trace.metadata["iterations"] = trace.iterations
    trace.metadata["wall_time_s"] = round(time.perf_counter() - t0, 6)
    return trace


def solve_primal_first(problem: SaddleProblem, cfg: StepConfig, z0, iters: int,
                       hooks: Optional[Callable[[TraceRow], None]] = None,
                       rules: Optional[StoppingRules] = None,
                       store_relaxed: bool = False, seed=None,
                       metadata: Optional[dict] = None) -> IterateTrace:
    """Run the primal-update-first iteration (relaxation on x)."""
    t0 = time.perf_counter()
    x, y, trace = _prepare(problem, cfg, z0, "primal-first", seed, metadata)
    sigma, tau, theta = cfg.sigma, cfg.tau, cfg.theta
    L = problem.L
    _record(trace, problem, 0, x, y, hooks=hooks)
    for n in range(1, iters + 1):
        x_new = problem.f.prox(sigma, x - sigma * L.adjoint(y))
        eps = _monitor_eps(problem, y, x_new)
        xbar = x_new + theta * (x_new - x)
        y_new = problem.dual_prox(tau, y + tau * L.apply(xbar))
        _record(trace, problem, n, x_new, y_new, x, y, eps=eps,
                xbar=xbar if store_relaxed else None, hooks=hooks)
        x, y = x_new, y_new
        reason = stopping(trace, rules)
        if reason is not None:
            trace.metadata["stop_reason"] = reason
            break
    trace.metadata.setdefault("stop_reason", "iters")
    trace.metadata["iterations"] = trace.iterations
    trace.metadata["wall_time_s"] = round(time.perf_counter() - t0, 6)
    return trace
