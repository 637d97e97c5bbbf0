"""Linear operators with adjoints and operator-norm estimates.

Vectors are 1-D float arrays. Images are stored row-major; the discrete
gradient stacks the vertical-difference field on top of the horizontal one,
so ``grad_map(n)`` maps length ``n*n`` vectors to length ``2*n*n`` vectors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True)
class LinearMap:
    """A bounded linear operator together with its adjoint.

    ``norm_bound`` is a conservative estimate of the operator norm; stepsize
    conditions downstream rely on it never underestimating the true norm by
    more than ~1e-6 relative. ``scalar`` is set when the map is
    multiplication by a single number, which unlocks closed-form reductions.
    Instances are immutable and safe to share; apply/adjoint are pure.
    """

    in_dim: int
    out_dim: int
    apply: Callable[[np.ndarray], np.ndarray]
    adjoint: Callable[[np.ndarray], np.ndarray]
    norm_bound: float
    scalar: Optional[float] = None


def matrix_map(A: np.ndarray, norm_iters: int = 200, norm_seed: int = 0) -> LinearMap:
    """Wrap a dense matrix as a LinearMap; adjoint is the transpose."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.size == 0:
        raise ValueError("matrix_map needs a nonempty 2-D matrix")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix entries must be finite")
    m, n = A.shape
    At = A.T.copy()
    lm = LinearMap(n, m, lambda x: A @ x, lambda y: At @ y, norm_bound=0.0)
    nb = power_iteration(lm, norm_iters, seed=norm_seed)
    return LinearMap(n, m, lm.apply, lm.adjoint, norm_bound=nb)


def scalar_map(c: float, dim: int = 1) -> LinearMap:
    """Multiplication by the number ``c`` on R^dim (self-adjoint up to sign)."""
    c = float(c)
    return LinearMap(dim, dim, lambda x: c * x, lambda y: c * y,
                     norm_bound=abs(c), scalar=c)


def identity_map(dim: int) -> LinearMap:
    return scalar_map(1.0, dim)


def grad_map(n: int) -> LinearMap:
    """Forward-difference image gradient with zero last row/column.

    Component 1 holds vertical differences x[i+1,j]-x[i,j] (zero at i=n-1),
    component 2 horizontal ones (zero at j=n-1). The adjoint is minus the
    backward-difference divergence, so summation by parts
    <grad x, y> + <x, div y> = 0 holds exactly.
    """
    if n < 1:
        raise ValueError("side length must be >= 1")
    n2 = n * n

    def apply(x):
        u = np.asarray(x, dtype=float).reshape(n, n)
        d1 = np.zeros((n, n))
        d2 = np.zeros((n, n))
        if n > 1:
            d1[:-1, :] = u[1:, :] - u[:-1, :]
            d2[:, :-1] = u[:, 1:] - u[:, :-1]
        return np.concatenate([d1.ravel(), d2.ravel()])

    def adjoint(y):
        return -divergence(y, n)

    # classic spectral bound for the forward-difference gradient
    return LinearMap(n2, 2 * n2, apply, adjoint, norm_bound=np.sqrt(8.0))


def divergence(y: np.ndarray, n: int) -> np.ndarray:
    """Discrete divergence (backward differences, boundary truncation)."""
    n2 = n * n
    y = np.asarray(y, dtype=float)
    if y.shape != (2 * n2,):
        raise ValueError("divergence expects a stacked 2-field of length 2*n*n")
    if n == 1:
        return np.zeros(1)
    y1 = y[:n2].reshape(n, n)
    y2 = y[n2:].reshape(n, n)
    d = np.zeros((n, n))
    d[0, :] += y1[0, :]
    d[1:-1, :] += y1[1:-1, :] - y1[:-2, :]
    d[-1, :] -= y1[-2, :]
    d[:, 0] += y2[:, 0]
    d[:, 1:-1] += y2[:, 1:-1] - y2[:, :-2]
    d[:, -1] -= y2[:, -2]
    return d.ravel()


def gaussian_blur_map(n: int, std: float) -> LinearMap:
    """Separable Gaussian blur, truncated at radius ceil(3*std), zero padding.

    The 1-D kernel is normalized to sum 1 and applied along both axes via a
    banded matrix, so the map is self-adjoint (symmetric kernel) and its
    operator norm is at most 1 (Young's inequality).
    """
    if std <= 0:
        raise ValueError("std must be positive")
    r = int(np.ceil(3.0 * std))
    t = np.arange(-r, r + 1, dtype=float)
    k = np.exp(-0.5 * (t / std) ** 2)
    k /= k.sum()

    # M[i, j] = k[i - j + r] for |i - j| <= r: 1-D zero-padded convolution
    idx = np.arange(n)
    off = idx[:, None] - idx[None, :]
    M = np.where(np.abs(off) <= r, k[np.clip(off + r, 0, 2 * r)], 0.0)

    def apply(x):
        u = np.asarray(x, dtype=float).reshape(n, n)
        return (M @ u @ M.T).ravel()

    return LinearMap(n * n, n * n, apply, apply, norm_bound=1.0)


def power_iteration(lin_map: LinearMap, iters: int = 200, *, seed: int,
                    return_history: bool = False):
    """Estimate the operator norm by power iteration on L*L.

    Deterministic given the seed. Rayleigh estimates are nondecreasing across
    iterations; the returned value is the last estimate times (1 + 1e-6) so
    that downstream strict conditions of the form sqrt(sigma*tau)*||L|| < 1
    stay conservative. A zero map returns 0.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(lin_map.in_dim)
    v /= np.linalg.norm(v)
    history = []
    est = 0.0
    for _ in range(iters):
        w = lin_map.adjoint(lin_map.apply(v))
        lam = float(v @ w)  # Rayleigh quotient of L*L at unit v
        est = float(np.sqrt(max(lam, 0.0)))
        history.append(est)
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            est = 0.0
            history[-1] = 0.0
            break
        v = w / nw
    value = est * (1.0 + 1e-6)
    if return_history:
        return value, history
    return value


@dataclass(frozen=True)
class ImageGrid:
    """Square grayscale image: side length n, n*n row-major pixels in [0,1]."""

    n: int
    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels, dtype=float).ravel()
        if p.size != self.n * self.n:
            raise ValueError("pixel count must equal n*n")
        if not np.all(np.isfinite(p)):
            raise ValueError("pixel values must be finite")
        object.__setattr__(self, "pixels", p)

    @classmethod
    def from_array(cls, a: np.ndarray, rescale: bool = False) -> "ImageGrid":
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("image must be square")
        if rescale:
            lo, hi = a.min(), a.max()
            a = (a - lo) / (hi - lo) if hi > lo else np.zeros_like(a)
        return cls(a.shape[0], a.ravel())

    def to_matrix(self) -> np.ndarray:
        return self.pixels.reshape(self.n, self.n)
