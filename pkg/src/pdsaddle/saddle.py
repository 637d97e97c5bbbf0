"""Lagrangian and gap-function analytics.

Houses the saddle-point problem bundle, the duality gap G, the modified gap
H (infimum over the known saddle set), grid-based inf-sharpness
verification, and the convergence constants (A, A1, ball radius, rate B,
E_n bounds, feasibility intervals).

Grid scans evaluate in a vectorized pass whose result is bit-identical to a
sequential scan in x-major order; ties resolve to the lowest linear index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import OutOfBall, ProxUnavailable, StepsizeViolation
from .operators import LinearMap
from .prox import ProxFunction, prox_conjugate

Point = np.ndarray
PointPair = Tuple[np.ndarray, np.ndarray]


def _pair(z) -> PointPair:
    x, y = z
    return (np.atleast_1d(np.asarray(x, dtype=float)),
            np.atleast_1d(np.asarray(y, dtype=float)))


@dataclass
class SaddleProblem:
    """Bundle (f, g, L) with optional known solution sets.

    Either ``gstar`` (the conjugate, with its own prox) or ``g`` must be
    given; when only ``g`` is known the dual prox goes through the Moreau
    identity. ``saddle_set`` lists known saddle points (x*, y*);
    ``primal_solutions`` lists known minimizers of f + g(L.).
    """

    f: ProxFunction
    L: LinearMap
    gstar: Optional[ProxFunction] = None
    g: Optional[ProxFunction] = None
    saddle_set: Optional[List[PointPair]] = None
    primal_solutions: Optional[List[np.ndarray]] = None
    dual_solutions: Optional[List[np.ndarray]] = None
    gap_warnings: int = field(default=0, compare=False)

    def __post_init__(self):
        if self.gstar is None and self.g is None:
            raise ValueError("need g or gstar")
        if self.f.dim is not None and self.f.dim != self.L.in_dim:
            raise ValueError("f dimension inconsistent with L")
        for dual in (self.gstar, self.g):
            if dual is not None and dual.dim is not None and dual.dim != self.L.out_dim:
                raise ValueError("dual function dimension inconsistent with L")
        if self.saddle_set is not None:
            self.saddle_set = [_pair(z) for z in self.saddle_set]
            for xs, ys in self.saddle_set:
                if xs.size != self.L.in_dim or ys.size != self.L.out_dim:
                    raise ValueError("saddle point dimensions inconsistent with L")
        if self.primal_solutions is not None:
            self.primal_solutions = [np.atleast_1d(np.asarray(x, dtype=float))
                                     for x in self.primal_solutions]

    def dual_prox(self, tau: float, v: np.ndarray) -> np.ndarray:
        if self.gstar is not None and self.gstar.has_prox:
            return self.gstar.prox(tau, v)
        if self.g is not None and self.g.has_prox:
            return prox_conjugate(self.g, tau, v)
        raise ProxUnavailable("no dual prox available")

    def objective(self, x: np.ndarray) -> Optional[float]:
        """Primal value f(x) + g(Lx); None when g is not known."""
        if self.g is None:
            return None
        return self.f.eval(x) + self.g.eval(self.L.apply(x))


def lagrangian(p: SaddleProblem, x, y) -> float:
    """L(x, y) = f(x) + <Lx, y> - g*(y); infinities propagate.

    f = +inf dominates (+inf returned); otherwise g* = +inf gives -inf.
    """
    if p.gstar is None:
        raise ProxUnavailable("g* values are needed for the Lagrangian")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.size != p.L.in_dim or y.size != p.L.out_dim:
        raise ValueError("dimension mismatch")
    fx = p.f.eval(x)
    if np.isinf(fx) and fx > 0:
        return np.inf
    gy = p.gstar.eval(y)
    if np.isinf(gy) and gy > 0:
        return -np.inf
    return fx + float(np.dot(p.L.apply(x), y)) - gy


def dist_to_set(z: PointPair, members: Sequence[PointPair]) -> float:
    """Product-norm distance sqrt(|x-x̄|² + |y-ȳ|²) to the nearest member."""
    if not members:
        raise ValueError("empty set")
    x, y = _pair(z)
    best = np.inf
    for xs, ys in members:
        d = np.sqrt(np.sum((x - np.atleast_1d(xs)) ** 2)
                    + np.sum((y - np.atleast_1d(ys)) ** 2))
        best = min(best, float(d))
    return best


def gap_H(p: SaddleProblem, x, y) -> float:
    """Modified gap: min over the saddle set of L(x, ȳ) - L(x̄, y).

    Nonnegative for a correct saddle set; values below -1e-12 increment
    ``p.gap_warnings`` (they indicate a mis-specified set) and the result is
    clamped at 0.
    """
    if not p.saddle_set:
        raise ValueError("gap_H needs a nonempty saddle_set")
    vals = [lagrangian(p, x, ys) - lagrangian(p, xs, y) for xs, ys in p.saddle_set]
    h = min(vals)
    if h < -1e-12:
        p.gap_warnings += 1
    return max(h, 0.0)


# ---------------------------------------------------------------------------
# grid machinery (scalar x, scalar y problems)

def _scalar_parts(p: SaddleProblem):
    if (p.L.scalar is not None and p.L.in_dim == 1 and p.L.out_dim == 1
            and p.gstar is not None
            and p.f.eval_elementwise is not None
            and p.gstar.eval_elementwise is not None):
        return p.f.eval_elementwise, p.gstar.eval_elementwise, float(p.L.scalar)
    return None


def grid_axis(lo: float, hi: float, step: float) -> np.ndarray:
    """Inclusive uniform grid; symmetric boxes with step dividing the span hit 0."""
    count = int(round((hi - lo) / step)) + 1
    return np.linspace(lo, hi, max(count, 2))


def _norm_box(domain_box):
    b = np.asarray(domain_box, dtype=float)
    if b.shape == (2,):
        return (float(b[0]), float(b[1])), (float(b[0]), float(b[1]))
    if b.shape == (2, 2):
        return (float(b[0, 0]), float(b[0, 1])), (float(b[1, 0]), float(b[1, 1]))
    raise ValueError("domain_box must be (lo, hi) or ((xlo, xhi), (ylo, yhi))")


def gap_H_grid(p: SaddleProblem, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """H on the grid xs × ys, H[i, j] = H(xs[i], ys[j]); clamped at 0."""
    if not p.saddle_set:
        raise ValueError("gap_H needs a nonempty saddle_set")
    parts = _scalar_parts(p)
    if parts is None:
        H = np.array([[gap_H(p, xv, yv) for yv in ys] for xv in xs])
        return H
    fe, ge, l = parts
    best = None
    for xbar, ybar in p.saddle_set:
        xb, yb = float(xbar[0]), float(ybar[0])
        u = fe(xs) + l * yb * xs - float(ge(np.asarray(yb))) - float(fe(np.asarray(xb)))
        w = ge(ys) - l * xb * ys
        T = u[:, None] + w[None, :]
        best = T if best is None else np.minimum(best, T)
    neg = int(np.count_nonzero(best < -1e-12))
    if neg:
        p.gap_warnings += neg
    return np.maximum(best, 0.0)


def _dist_grid(p: SaddleProblem, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    best = None
    for xbar, ybar in p.saddle_set:
        xb, yb = float(xbar[0]), float(ybar[0])
        D = np.sqrt((xs - xb)[:, None] ** 2 + (ys - yb)[None, :] ** 2)
        best = D if best is None else np.minimum(best, D)
    return best


def gap_G(p: SaddleProblem, x, y, domain_box, grid_step: float) -> float:
    """Grid-approximated duality gap sup over the box of L(x, ŷ) - L(x̂, y).

    Only supported for scalar-by-scalar problems; the reported value
    underestimates the true supremum by at most the grid resolution when the
    maximizers lie in the box.
    """
    parts = _scalar_parts(p)
    if parts is None:
        raise ValueError("gap_G is unsupported beyond scalar problems (dimension > 2)")
    fe, ge, l = parts
    (xlo, xhi), (ylo, yhi) = _norm_box(domain_box)
    xhat = grid_axis(xlo, xhi, grid_step)
    yhat = grid_axis(ylo, yhi, grid_step)
    xv = float(np.atleast_1d(x)[0])
    yv = float(np.atleast_1d(y)[0])
    a = float(np.max(l * xv * yhat - ge(yhat)))
    d = float(np.max(-l * xhat * yv - fe(xhat)))
    return float(fe(np.asarray(xv))) + float(ge(np.asarray(yv))) + a + d


def gap_G_grid(p: SaddleProblem, xs: np.ndarray, ys: np.ndarray,
               domain_box, grid_step: float) -> np.ndarray:
    """gap_G evaluated on the grid xs × ys (shared sup grid over the box)."""
    parts = _scalar_parts(p)
    if parts is None:
        raise ValueError("gap_G is unsupported beyond scalar problems (dimension > 2)")
    fe, ge, l = parts
    (xlo, xhi), (ylo, yhi) = _norm_box(domain_box)
    xhat = grid_axis(xlo, xhi, grid_step)
    yhat = grid_axis(ylo, yhi, grid_step)
    a = np.max(l * xs[:, None] * yhat[None, :] - ge(yhat)[None, :], axis=1)
    d = np.max(-l * xhat[None, :] * ys[:, None] - fe(xhat)[None, :], axis=1)
    return (fe(xs) + a)[:, None] + (ge(ys) + d)[None, :]


@dataclass(frozen=True)
class SharpnessReport:
    """Result of a grid scan of H(z) - mu * dist(z, S)."""

    mu: float
    min_value: float
    witness: Tuple[float, float]
    inf_sharp: bool
    grid_step: float


def verify_inf_sharpness(p: SaddleProblem, mu: float, domain_box,
                         grid_step: float, tol: float = 1e-9) -> SharpnessReport:
    """Scan H - mu*dist on the box; inf-sharp there iff the minimum >= -tol."""
    xs, ys, V = sharpness_grid(p, mu, domain_box, grid_step)
    idx = int(np.argmin(V))  # first minimum in x-major order
    i, j = np.unravel_index(idx, V.shape)
    mn = float(V[i, j])
    return SharpnessReport(mu=float(mu), min_value=mn,
                           witness=(float(xs[i]), float(ys[j])),
                           inf_sharp=bool(mn >= -tol), grid_step=float(grid_step))


def sharpness_grid(p: SaddleProblem, mu: float, domain_box, grid_step: float):
    """Grid values of H - mu*dist; returns (xs, ys, V) with V[i,j] at (xs[i], ys[j])."""
    if not p.saddle_set:
        raise ValueError("sharpness scan needs a nonempty saddle_set")
    (xlo, xhi), (ylo, yhi) = _norm_box(domain_box)
    xs = grid_axis(xlo, xhi, grid_step)
    ys = grid_axis(ylo, yhi, grid_step)
    V = gap_H_grid(p, xs, ys) - mu * _dist_grid(p, xs, ys)
    return xs, ys, V


def verify_saddle_points(p: SaddleProblem, domain_box, grid_step: float) -> float:
    """Max violation of the saddle inequality over a probe grid.

    For each listed (x*, y*) checks L(x*, y) <= L(x*, y*) <= L(x, y*) on the
    grid; returns the worst violation (<= tol means the set is consistent).
    """
    if not p.saddle_set:
        raise ValueError("no saddle_set to verify")
    (xlo, xhi), (ylo, yhi) = _norm_box(domain_box)
    xs = grid_axis(xlo, xhi, grid_step)
    ys = grid_axis(ylo, yhi, grid_step)
    worst = -np.inf
    parts = _scalar_parts(p)
    for xbar, ybar in p.saddle_set:
        mid = lagrangian(p, xbar, ybar)
        if parts is not None:
            fe, ge, l = parts
            xb, yb = float(xbar[0]), float(ybar[0])
            ly = fe(np.asarray(xb)) + l * xb * ys - ge(ys)     # L(x*, y)
            lx = fe(xs) + l * xs * yb - ge(np.asarray(yb))     # L(x, y*)
            worst = max(worst, float(np.max(ly) - mid), float(mid - np.min(lx)))
        else:
            for yv in ys:
                worst = max(worst, lagrangian(p, xbar, [yv]) - mid)
            for xv in xs:
                worst = max(worst, mid - lagrangian(p, [xv], ybar))
    return worst


# ---------------------------------------------------------------------------
# convergence constants

@dataclass(frozen=True)
class RadiusReport:
    """Stepsize-derived constants certifying local convergence.

    A governs the dual-first iteration, A1 the primal-first one;
    ``ball_radius`` = mu / (max{1/(2σ), 1/(2τ)} - A_regime) is the certified
    starting ball around the saddle set.
    """

    sigma: float
    tau: float
    theta: float
    rho: float
    mu: float
    norm_L: float
    regime: str
    A: float
    A1: float
    ball_radius: float

    @property
    def A_regime(self) -> float:
        return self.A if self.regime == "dual-first" else self.A1


def radius_report(rho: float, mu: float, norm_L: float, sigma: float, tau: float,
                  theta: float, regime: str) -> RadiusReport:
    """Compute A (or A1) and the convergence-ball radius for the regime.

    Raises StepsizeViolation unless the regime's stepsize predicate holds
    strictly.
    """
    if regime not in ("dual-first", "primal-first"):
        raise ValueError(f"unknown regime {regime!r}")
    if mu <= 0:
        raise ValueError("mu must be positive")
    if sigma <= 0 or tau <= 0:
        raise StepsizeViolation("sigma and tau must be positive")
    if not 0.0 <= theta <= 1.0:
        raise StepsizeViolation("theta must lie in [0, 1]")
    rt = np.sqrt(sigma * tau) * norm_L
    if not (sigma * rho < 1.0 and rt < 1.0):
        raise StepsizeViolation("base predicates sigma*rho < 1, sqrt(sigma*tau)*||L|| < 1 fail")
    if regime == "dual-first" and not sigma * rho + theta * rt < 1.0:
        raise StepsizeViolation("dual-first predicate sigma*rho + theta*sqrt(sigma*tau)*||L|| < 1 fails")
    if regime == "primal-first" and not sigma * rho + rt < 1.0:
        raise StepsizeViolation("primal-first predicate sigma*rho + sqrt(sigma*tau)*||L|| < 1 fails")

    A = min((1.0 - rt) / (2.0 * tau), (1.0 - sigma * rho - theta * rt) / (2.0 * sigma))
    A1 = min((1.0 - theta * rt) / (2.0 * tau), (1.0 - sigma * rho - rt) / (2.0 * sigma))
    a_reg = A if regime == "dual-first" else A1
    denom = max(1.0 / (2.0 * sigma), 1.0 / (2.0 * tau)) - a_reg
    if denom <= 0:
        raise StepsizeViolation("nonpositive radius denominator")
    return RadiusReport(sigma=sigma, tau=tau, theta=theta, rho=rho, mu=mu,
                        norm_L=norm_L, regime=regime, A=float(A), A1=float(A1),
                        ball_radius=float(mu / denom))


def rate_constant_B(report: RadiusReport, mu: float, dist0: float,
                    sigma: float, tau: float) -> float:
    """Linear-rate constant B = max{1/(2σ),1/(2τ)} / (A_regime + mu/dist0).

    Requires dist0 < ball_radius, which guarantees B in (0, 1); dist0 = 0
    returns 0.
    """
    if dist0 < 0:
        raise ValueError("dist0 must be nonnegative")
    if dist0 >= report.ball_radius:
        raise OutOfBall(f"dist0 = {dist0:.6g} >= ball radius {report.ball_radius:.6g}")
    if dist0 == 0.0:
        return 0.0
    return float(max(1.0 / (2.0 * sigma), 1.0 / (2.0 * tau))
                 / (report.A_regime + mu / dist0))


@dataclass(frozen=True)
class EpsilonBounds:
    """Feasibility and distance bounds under primal-only sharpness.

    ``feasible`` is the strict inequality mu² στ > (σρ + sqrt(στ)||L||) ε²;
    E_minus/E_plus bracket the invariant distance band (None when the
    discriminant is negative).
    """

    feasible: bool
    E_plus: Optional[float]
    E_minus: Optional[float]


def epsilon_bounds(mu: float, rho: float, norm_L: float, sigma: float, tau: float,
                   eps_n: float) -> EpsilonBounds:
    s = sigma * rho + np.sqrt(sigma * tau) * norm_L
    if s <= 0:
        raise ValueError("sigma*rho + sqrt(sigma*tau)*||L|| must be positive")
    feasible = bool(mu * mu * sigma * tau > s * eps_n * eps_n)
    disc = mu * mu - eps_n * eps_n * s / (sigma * tau)
    if disc < 0 and feasible:
        disc = 0.0  # the two boundary formulations disagree only by float dust
    if disc < 0:
        return EpsilonBounds(feasible=False, E_plus=None, E_minus=None)
    root = np.sqrt(disc)
    return EpsilonBounds(feasible=feasible,
                         E_plus=float(sigma * (mu + root) / s),
                         E_minus=float(sigma * (mu - root) / s))


def feasible_sigma_interval(rho: float, mu: float, norm_L: float, tau: float,
                            eps_n: float, lo: float = 1e-6, hi: float = 0.999,
                            tol: float = 1e-6) -> Optional[Tuple[float, float]]:
    """Bisect the sigma interval on which the primal-sharpness run is covered.

    The condition is the conjunction of epsilon_bounds feasibility and the
    primal-first stepsize predicate sigma*rho + sqrt(sigma*tau)*||L|| < 1.
    Returns (sigma_lo, sigma_hi) to within tol, or None when no sigma in
    [lo, hi] qualifies.
    """

    def ok(sig: float) -> bool:
        if sig <= 0:
            return False
        s = sig * rho + np.sqrt(sig * tau) * norm_L
        if not s < 1.0:
            return False
        return epsilon_bounds(mu, rho, norm_L, sig, tau, eps_n).feasible

    grid = np.linspace(lo, hi, 2001)
    flags = [ok(s) for s in grid]
    if not any(flags):
        return None
    first = flags.index(True)
    last = len(flags) - 1 - flags[::-1].index(True)

    def bisect(bad: float, good: float) -> float:
        while abs(good - bad) > tol:
            mid = 0.5 * (bad + good)
            if ok(mid):
                good = mid
            else:
                bad = mid
        return good

    left = grid[first] if first == 0 else bisect(grid[first - 1], grid[first])
    right = grid[last] if last == len(grid) - 1 else bisect(grid[last + 1], grid[last])
    return float(left), float(right)


def reduce_fully_weakly_convex(f: ProxFunction, g: ProxFunction,
                               L: LinearMap) -> Tuple[ProxFunction, ProxFunction]:
    """Shift g's weak convexity onto f: F = f - (ρg/2)||L.||², G = g + (ρg/2)||.||².

    F's modulus becomes rho_f + rho_g * ||L||²; G is convex with its prox
    obtained from g's by an exact quadratic merge. F's prox is available
    only for scalar L (the quadratic then stays isotropic).
    """
    rho_g = g.rho
    if rho_g == 0.0:
        return f, g

    def F_eval(x):
        Lx = L.apply(np.atleast_1d(np.asarray(x, dtype=float)))
        return f.eval(x) - 0.5 * rho_g * float(np.sum(Lx * Lx))

    F_prox = None
    if L.scalar is not None and f.has_prox:
        c2 = float(L.scalar) ** 2

        def F_prox(gamma, v):
            d = 1.0 - gamma * rho_g * c2
            if d <= 0:
                raise StepsizeViolation("quadratic merge degenerate: gamma too large")
            return f.prox(gamma / d, v / d)

    F = ProxFunction(F_eval, rho=f.rho + rho_g * L.norm_bound ** 2, prox=F_prox,
                     name=f"reduced({f.name})", dim=f.dim)

    def G_eval(y):
        y = np.asarray(y, dtype=float)
        return g.eval(y) + 0.5 * rho_g * float(np.sum(y * y))

    G_prox = None
    if g.has_prox:
        def G_prox(gamma, v):
            scale = 1.0 + gamma * rho_g
            return g.prox(gamma / scale, v / scale)

    G = ProxFunction(G_eval, rho=0.0, prox=G_prox, name=f"convexified({g.name})",
                     dim=g.dim)
    return F, G


def gap_weak_convexity_check(p: SaddleProblem, rho_f: float, samples: int,
                             seed: int, domain_box=(-3.0, 3.0),
                             grid_step: float = 0.05) -> float:
    """Max violation of the joint weak-convexity inequality for gap_G.

    Samples (z1, z2, lambda) in the box (endpoints lambda in {0, 1} are
    included) and evaluates the interpolation inequality with modulus rho_f
    in the product norm; the returned maximum should sit at float-noise
    level because each side shares the same sup grid.
    """
    (xlo, xhi), (ylo, yhi) = _norm_box(domain_box)
    rng = np.random.default_rng(seed)

    def G(z):
        return gap_G(p, [z[0]], [z[1]], domain_box, grid_step)

    worst = -np.inf
    for k in range(samples):
        z1 = np.array([rng.uniform(xlo, xhi), rng.uniform(ylo, yhi)])
        z2 = np.array([rng.uniform(xlo, xhi), rng.uniform(ylo, yhi)])
        lam = 0.0 if k % 97 == 13 else 1.0 if k % 97 == 29 else rng.uniform()
        mid = lam * z1 + (1.0 - lam) * z2
        g1, g2, gm = G(z1), G(z2), G(mid)
        if not (np.isfinite(g1) and np.isfinite(g2) and np.isfinite(gm)):
            continue
        bound = (lam * g1 + (1.0 - lam) * g2
                 + lam * (1.0 - lam) * 0.5 * rho_f * float(np.sum((z1 - z2) ** 2)))
        worst = max(worst, gm - bound)
    return worst
