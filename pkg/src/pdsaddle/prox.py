"""Function oracles: values, weak-convexity moduli, proximal maps.

Every function here is a ``ProxFunction`` carrying its weak-convexity
modulus ``rho``; the prox is guarded by the validity condition
``gamma * rho < 1`` and raises ``StepsizeViolation`` outside it. Closed
forms are cross-checked in the tests against ``brute_force_prox``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ProxUnavailable, StepsizeViolation


@dataclass(frozen=True)
class IntervalBox:
    """Axis-aligned box [lo, hi] used as a subdifferential descriptor.

    A singleton subdifferential is the degenerate box lo == hi.
    """

    lo: np.ndarray
    hi: np.ndarray

    def distance(self, p: np.ndarray) -> float:
        p = np.asarray(p, dtype=float)
        return float(np.linalg.norm(np.clip(p, self.lo, self.hi) - p))

    def contains(self, p: np.ndarray, tol: float = 0.0) -> bool:
        return self.distance(p) <= tol


class ProxFunction:
    """Oracle bundle (value, modulus, prox, optional subdifferential).

    ``eval`` maps a point (scalar or 1-D array) to an extended real.
    ``eval_elementwise``, when present, evaluates the scalar version of the
    function on whole arrays at once; the grid scans in ``saddle`` use it.
    Instances are immutable in spirit: do not mutate after construction.
    """

    def __init__(self, eval: Callable, rho: float, prox: Optional[Callable] = None,
                 subdiff: Optional[Callable] = None,
                 eval_elementwise: Optional[Callable] = None,
                 name: str = "", dim: Optional[int] = None):
        self.eval = eval
        self.rho = float(rho)
        self._prox = prox
        self._subdiff = subdiff
        self.eval_elementwise = eval_elementwise
        self.name = name
        self.dim = dim

    def __call__(self, x):
        return self.eval(x)

    def __repr__(self):
        return f"ProxFunction({self.name or 'anonymous'}, rho={self.rho})"

    def prox(self, gamma: float, v):
        """Proximal point argmin_u eval(u) + ||u - v||^2 / (2*gamma).

        Only defined for gamma > 0 with gamma*rho < 1 (strict); outside that
        region the subproblem may be nonconvex and the map multivalued.
        """
        if not gamma > 0:
            raise StepsizeViolation(f"gamma must be positive, got {gamma}")
        if self.rho > 0 and not gamma * self.rho < 1:
            raise StepsizeViolation(
                f"gamma*rho = {gamma * self.rho:.6g} >= 1 for {self.name or 'function'}")
        if self._prox is None:
            raise ProxUnavailable(f"no proximal map for {self.name or 'function'}")
        v = np.asarray(v, dtype=float)
        return self._prox(float(gamma), v)

    def subdiff(self, x) -> IntervalBox:
        if self._subdiff is None:
            raise ProxUnavailable(f"no subdifferential oracle for {self.name or 'function'}")
        return self._subdiff(np.asarray(x, dtype=float))

    @property
    def has_prox(self) -> bool:
        return self._prox is not None

    @property
    def has_subdiff(self) -> bool:
        return self._subdiff is not None


def _soft(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _l1_subdiff(x):
    s = np.sign(x)
    lo = np.where(x == 0.0, -1.0, s)
    hi = np.where(x == 0.0, 1.0, s)
    return IntervalBox(lo, hi)


def abs_value() -> ProxFunction:
    """f(x) = |x| (scalar); prox is the soft threshold."""
    return ProxFunction(
        eval=lambda x: float(np.sum(np.abs(x))),
        rho=0.0,
        prox=lambda g, v: _soft(v, g),
        subdiff=_l1_subdiff,
        eval_elementwise=np.abs,
        name="abs", dim=1)


def l1_norm(dim: int) -> ProxFunction:
    """f(x) = sum_i |x_i|; componentwise soft threshold; exact subdiff box."""
    return ProxFunction(
        eval=lambda x: float(np.sum(np.abs(x))),
        rho=0.0,
        prox=lambda g, v: _soft(v, g),
        subdiff=_l1_subdiff,
        eval_elementwise=np.abs,
        name="l1", dim=dim)


def quad_fit(b, weight: float = 1.0) -> ProxFunction:
    """f(x) = (weight/2) ||x - b||^2 with its affine prox and singleton subdiff."""
    if weight <= 0:
        raise ValueError("weight must be positive")
    b = np.asarray(b, dtype=float)
    w = float(weight)

    def subdiff(x):
        gval = w * (x - b)
        return IntervalBox(gval, gval.copy())

    elementwise = None
    if b.ndim == 0:
        bs = float(b)
        elementwise = lambda t: 0.5 * w * (t - bs) ** 2

    return ProxFunction(
        eval=lambda x: 0.5 * w * float(np.sum((x - b) ** 2)),
        rho=0.0,
        prox=lambda g, v: (v + g * w * b) / (1.0 + g * w),
        subdiff=subdiff,
        eval_elementwise=elementwise,
        name="quad_fit")


def quad_fit_conjugate(b, weight: float = 1.0) -> ProxFunction:
    """Convex conjugate of quad_fit: g*(y) = ||y||^2/(2w) + <b, y>.

    For weight 1 its prox is the (v - gamma*b)/(1 + gamma) dual update used
    by the least-squares data term.
    """
    if weight <= 0:
        raise ValueError("weight must be positive")
    b = np.asarray(b, dtype=float)
    w = float(weight)

    def subdiff(y):
        gval = y / w + b
        return IntervalBox(gval, gval.copy())

    elementwise = None
    if b.ndim == 0:
        bs = float(b)
        elementwise = lambda t: 0.5 * t * t / w + bs * t

    return ProxFunction(
        eval=lambda y: 0.5 * float(np.sum(y * y)) / w + float(np.sum(b * y)),
        rho=0.0,
        prox=lambda g, v: w * (v - g * b) / (g + w),
        subdiff=subdiff,
        eval_elementwise=elementwise,
        name="quad_fit*")


def abs_norm_sq_shift(c: float) -> ProxFunction:
    """f(x) = | ||x||^2 - c | for c > 0; 2-weakly convex.

    Prox (valid for 2*gamma < 1): shrink by 1/(1+2g) outside the widened
    sphere, expand by 1/(1-2g) inside the narrowed one, snap radially onto
    the sqrt(c) sphere in between. At x = 0 the radial snap is singular and
    the zero vector is returned (deterministic choice among the optimal
    directions); for valid gamma the origin in fact always lands in the
    expansion case.
    """
    if c <= 0:
        raise ValueError("c must be positive")
    c = float(c)

    def ev(x):
        x = np.asarray(x, dtype=float)
        return float(abs(np.sum(x * x) - c))

    def px(g, v):
        r2 = float(np.sum(v * v))
        if r2 > (1.0 + 2.0 * g) ** 2 * c:
            return v / (1.0 + 2.0 * g)
        if r2 < (1.0 - 2.0 * g) ** 2 * c:
            return v / (1.0 - 2.0 * g)
        r = np.sqrt(r2)
        if r == 0.0:
            return np.zeros_like(v)
        return np.sqrt(c) * v / r

    return ProxFunction(ev, 2.0, px, name=f"abs_norm_sq_shift({c})")


def _prox_abs_quad_core(s, v, a, b):
    """Vectorized prox of |(u-a)(u-b)| (a <= b elementwise), stepsize s < 1/2.

    Candidates per coordinate: the two branch minimizers clipped to their
    validity regions plus the kinks a, b. Ties broken toward the candidate
    nearest v, then by candidate order (outer, inner, a, b).
    """
    v = np.asarray(v, dtype=float)
    a = np.broadcast_to(np.asarray(a, dtype=float), v.shape)
    b = np.broadcast_to(np.asarray(b, dtype=float), v.shape)

    q_out = (v + s * (a + b)) / (1.0 + 2.0 * s)
    ok_out = (q_out <= a) | (q_out >= b)
    q_in = (v - s * (a + b)) / (1.0 - 2.0 * s)
    ok_in = (q_in >= a) & (q_in <= b)

    U = np.stack([q_out, q_in, a, b])
    O = np.abs((U - a) * (U - b)) + (U - v) ** 2 / (2.0 * s)
    O[0] = np.where(ok_out, O[0], np.inf)
    O[1] = np.where(ok_in, O[1], np.inf)

    min_o = O.min(axis=0)
    D = np.where(O == min_o, np.abs(U - v), np.inf)
    pick = D.argmin(axis=0)
    return np.take_along_axis(U, pick[None, ...], axis=0)[0]


def abs_quadratic(a: float, b: float) -> ProxFunction:
    """f(x) = |(x-a)(x-b)| (scalar, a < b); 2-weakly convex; exact prox."""
    if not a < b:
        raise ValueError("need a < b")
    a, b = float(a), float(b)

    def ev(x):
        x = np.asarray(x, dtype=float)
        return float(np.sum(np.abs((x - a) * (x - b))))

    return ProxFunction(
        eval=ev,
        rho=2.0,
        prox=lambda s, v: _prox_abs_quad_core(s, v, a, b),
        eval_elementwise=lambda t: np.abs((t - a) * (t - b)),
        name=f"abs_quadratic({a:.4g},{b:.4g})", dim=1)


def abs_plus_square_well(c: float) -> ProxFunction:
    """f(x) = |x| + |x^2 - c| (scalar, c > 0); 2-weakly convex.

    Prox by branch enumeration over the four smooth pieces cut at
    -sqrt(c), 0, sqrt(c).
    """
    if c <= 0:
        raise ValueError("c must be positive")
    rc = float(np.sqrt(c))

    def fval(t):
        return abs(t) + abs(t * t - c)

    # pieces (lo, hi, quadratic sign s2, linear sign s1): f = s1*t + s2*(t^2 - c)
    pieces = ((-np.inf, -rc, 1.0, -1.0), (-rc, 0.0, -1.0, -1.0),
              (0.0, rc, -1.0, 1.0), (rc, np.inf, 1.0, 1.0))
    kinks = (-rc, 0.0, rc)

    def prox_scalar(s, v):
        best, bobj, bdist = None, np.inf, np.inf
        for u in kinks:
            o = fval(u) + (u - v) ** 2 / (2.0 * s)
            d = abs(u - v)
            if o < bobj or (o == bobj and d < bdist):
                best, bobj, bdist = u, o, d
        for lo, hi, s2, s1 in pieces:
            u = (v - s * s1) / (1.0 + 2.0 * s * s2)
            if lo <= u <= hi:
                o = fval(u) + (u - v) ** 2 / (2.0 * s)
                d = abs(u - v)
                if o < bobj or (o == bobj and d < bdist):
                    best, bobj, bdist = u, o, d
        return best

    def px(s, v):
        flat = np.asarray(v, dtype=float).ravel()
        out = np.array([prox_scalar(s, t) for t in flat])
        return out.reshape(np.shape(v)) if np.ndim(v) else float(out[0])

    return ProxFunction(
        eval=lambda x: float(np.sum(np.abs(x)) + np.sum(np.abs(np.square(x) - c))),
        rho=2.0,
        prox=px,
        eval_elementwise=lambda t: np.abs(t) + np.abs(t * t - c),
        name=f"abs_plus_square_well({c})", dim=1)


def linf_ball_indicator(num_pairs: int, radius: float = 1.0) -> ProxFunction:
    """Indicator of the pointwise l-inf ball over paired field components.

    The argument stacks the two components: y = (y1, y2) each of length
    ``num_pairs``; the constraint is hypot(y1_k, y2_k) <= radius for every k.
    The prox is the pointwise projection, independent of gamma.
    """
    m = int(num_pairs)

    def ev(y):
        y = np.asarray(y, dtype=float)
        r = np.hypot(y[:m], y[m:])
        return 0.0 if np.all(r <= radius + 1e-12) else np.inf

    def px(g, y):
        y1, y2 = y[:m], y[m:]
        scale = np.maximum(1.0, np.hypot(y1, y2) / radius)
        return np.concatenate([y1 / scale, y2 / scale])

    return ProxFunction(ev, 0.0, px, name="linf_ball", dim=2 * m)


def group_l1(num_pairs: int) -> ProxFunction:
    """Isotropic group-l1 norm over paired field components: sum_k hypot(y1_k, y2_k)."""
    m = int(num_pairs)

    def ev(y):
        y = np.asarray(y, dtype=float)
        return float(np.sum(np.hypot(y[:m], y[m:])))

    def px(g, y):
        y1, y2 = y[:m], y[m:]
        r = np.hypot(y1, y2)
        shrink = np.maximum(0.0, 1.0 - g / np.where(r > 0, r, 1.0))
        return np.concatenate([y1 * shrink, y2 * shrink])

    return ProxFunction(ev, 0.0, px, name="group_l1", dim=2 * m)


def shifted_l1(x0, weight: float = 1.0) -> ProxFunction:
    """f(x) = weight * ||x - x0||_1; translated soft threshold."""
    if weight <= 0:
        raise ValueError("weight must be positive")
    x0 = np.asarray(x0, dtype=float)
    w = float(weight)
    return ProxFunction(
        eval=lambda x: w * float(np.sum(np.abs(x - x0))),
        rho=0.0,
        prox=lambda g, v: x0 + _soft(v - x0, g * w),
        name="shifted_l1")


def elementwise_sq_l1(x0, weight: float = 1.0) -> ProxFunction:
    """f(x) = weight * sum_i |x_i^2 - x0_i^2|; modulus 2*weight.

    Per coordinate this is |(x - |x0_i|)(x + |x0_i|)|, solved by the same
    branch enumeration as abs_quadratic; x0_i = 0 degenerates to the pure
    quadratic branch x -> v/(1 + 2*gamma).
    """
    if weight <= 0:
        raise ValueError("weight must be positive")
    x0 = np.asarray(x0, dtype=float)
    w = float(weight)
    aa, bb = -np.abs(x0), np.abs(x0)
    return ProxFunction(
        eval=lambda x: w * float(np.sum(np.abs(np.square(x) - np.square(x0)))),
        rho=2.0 * w,
        prox=lambda g, v: _prox_abs_quad_core(g * w, v, aa, bb),
        name="elementwise_sq_l1")


def scale_function(f: ProxFunction, weight: float) -> ProxFunction:
    """weight * f, with prox via prox_{gamma*(w f)} = prox-of-f at stepsize gamma*w."""
    if weight <= 0:
        raise ValueError("weight must be positive")
    w = float(weight)
    elementwise = None
    if f.eval_elementwise is not None:
        fe = f.eval_elementwise
        elementwise = lambda t: w * fe(t)
    return ProxFunction(
        eval=lambda x: w * f.eval(x),
        rho=w * f.rho,
        prox=(lambda g, v: f.prox(g * w, v)) if f.has_prox else None,
        eval_elementwise=elementwise,
        name=f"{w:g}*{f.name}", dim=f.dim)


def plus_quadratic(f: ProxFunction, weight: float, center) -> ProxFunction:
    """f(x) + (weight/2) ||x - center||^2, prox by exact quadratic merge.

    The two quadratic terms of the prox subproblem combine into a single one
    with stepsize gamma' = gamma/(1 + gamma*weight) at a shifted point, so
    the composite prox reduces to f's. The declared modulus stays f.rho
    (adding a convex quadratic never increases it), and gamma' < gamma keeps
    the inner call valid whenever the outer gate passes.
    """
    if weight <= 0:
        raise ValueError("weight must be positive")
    w = float(weight)
    center = np.asarray(center, dtype=float)

    def px(g, v):
        scale = 1.0 + g * w
        return f.prox(g / scale, (v + g * w * center) / scale)

    return ProxFunction(
        eval=lambda x: f.eval(x) + 0.5 * w * float(np.sum((x - center) ** 2)),
        rho=f.rho,
        prox=px if f.has_prox else None,
        name=f"{f.name}+quad", dim=f.dim)


def prox_conjugate(g: ProxFunction, gamma: float, v):
    """Prox of the conjugate g* via the Moreau identity (convex g only).

    prox_{gamma g*}(v) = v - gamma * prox_{g/gamma}(v/gamma), where the inner
    prox uses stepsize 1/gamma.
    """
    if g.rho != 0.0:
        raise ValueError("conjugate prox requires a convex function (rho = 0)")
    if not gamma > 0:
        raise StepsizeViolation(f"gamma must be positive, got {gamma}")
    v = np.asarray(v, dtype=float)
    return v - gamma * g.prox(1.0 / gamma, v / gamma)


def brute_force_prox(f: Callable, gamma: float, v: float, lo: float, hi: float,
                     tol: float = 1e-10) -> float:
    """Global scalar prox by dense grid plus golden-section refinement.

    Intended as an independent oracle for the closed forms: reliable for
    piecewise-smooth f with a handful of pieces on [lo, hi]. ``f`` may be
    vectorized (numpy expression) or a plain scalar callable.
    """
    if lo >= hi:
        raise ValueError("need lo < hi")
    if not gamma > 0:
        raise StepsizeViolation(f"gamma must be positive, got {gamma}")

    xs = np.linspace(lo, hi, 4097)
    try:
        fv = np.asarray(f(xs), dtype=float)
        if fv.shape != xs.shape:
            raise TypeError
    except Exception:
        fv = np.array([float(f(t)) for t in xs])
    obj = fv + (xs - v) ** 2 / (2.0 * gamma)

    # local minima of the sampled objective (grid restarts), endpoints included
    interior = np.where((obj[1:-1] <= obj[:-2]) & (obj[1:-1] <= obj[2:]))[0] + 1
    starts = set(interior.tolist()) | {0, len(xs) - 1, int(np.argmin(obj))}

    def scalar_obj(t):
        try:
            return float(f(np.asarray(t))) + (t - v) ** 2 / (2.0 * gamma)
        except Exception:
            return float(f(t)) + (t - v) ** 2 / (2.0 * gamma)

    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    best_x, best_o = None, np.inf
    for i in sorted(starts):
        a = xs[max(i - 1, 0)]
        b = xs[min(i + 1, len(xs) - 1)]
        c, d = b - invphi * (b - a), a + invphi * (b - a)
        fc, fd = scalar_obj(c), scalar_obj(d)
        while b - a > tol:
            if fc <= fd:
                b, d, fd = d, c, fc
                c = b - invphi * (b - a)
                fc = scalar_obj(c)
            else:
                a, c, fc = c, d, fd
                d = a + invphi * (b - a)
                fd = scalar_obj(d)
        x = 0.5 * (a + b)
        o = scalar_obj(x)
        if o < best_o or (o == best_o and abs(x - v) < abs(best_x - v)):
            best_x, best_o = x, o
    return float(best_x)
