"""Builders for the desk-scale experiments.

Covers the two 1-D saddle examples, sparse recovery with an l1 or
weakly-convex data-fidelity-plus-sphere model, Gaussian deblurring, and the
five total-variation denoising models, plus noise recipes, a deterministic
phantom, PSNR, and portable graymap IO.

Randomness: every builder takes one seed and derives independent child
streams (data vs noise) from it via ``numpy.random.SeedSequence``, so runs
are reproducible across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from .operators import ImageGrid, gaussian_blur_map, grad_map, matrix_map, scalar_map
from .prox import (abs_norm_sq_shift, abs_plus_square_well, abs_value,
                   elementwise_sq_l1, group_l1, l1_norm, linf_ball_indicator,
                   plus_quadratic, quad_fit, quad_fit_conjugate, scale_function,
                   shifted_l1)
from .saddle import SaddleProblem, epsilon_bounds, radius_report
from .solver import (IterateTrace, StepConfig, StoppingRules, solve_dual_first,
                     solve_primal_first, validate_steps)

StartDraw = Callable[[np.random.Generator], Tuple[np.ndarray, np.ndarray]]


@dataclass
class ExperimentSpec:
    """A named, runnable experiment: problem + defaults + start policies."""

    name: str
    problem: SaddleProblem
    config: StepConfig
    regime: str
    iters: int
    start_policies: Dict[str, StartDraw]
    default_start: str
    mu: Optional[float] = None
    regime_ok: bool = True
    metrics: Tuple[str, ...] = ()
    extras: dict = field(default_factory=dict)

    def draw_start(self, seed: int, start: Optional[str] = None):
        name = start or self.default_start
        if name not in self.start_policies:
            raise ValueError(f"unknown start policy {name!r}; "
                             f"have {sorted(self.start_policies)}")
        rng = np.random.default_rng(seed)
        return self.start_policies[name](rng)

    def run(self, seed: int, start: Optional[str] = None,
            iters: Optional[int] = None, config: Optional[StepConfig] = None,
            hooks=None, rules: Optional[StoppingRules] = None) -> IterateTrace:
        z0 = self.draw_start(seed, start)
        cfg = config or self.config
        solve = solve_dual_first if self.regime == "dual-first" else solve_primal_first
        meta = {"experiment": self.name, "start_policy": start or self.default_start}
        return solve(self.problem, cfg, z0, iters or self.iters, hooks=hooks,
                     rules=rules, seed=seed, metadata=meta)


def _zeros_start(nx: int, ny: int) -> StartDraw:
    return lambda rng: (np.zeros(nx), np.zeros(ny))


def _box_start(half_width: float) -> StartDraw:
    return lambda rng: (rng.uniform(-half_width, half_width, 1),
                        rng.uniform(-half_width, half_width, 1))


def example_abs_bilinear() -> ExperimentSpec:
    """1-D saddle problem |x| + x*y - |y|; inf-sharp with constant 1.

    Defaults tau=0.25, sigma=0.75, theta=1, 2001 iterations, random starts
    in [-10, 10]^2; both prox maps are soft thresholds and the iterates hit
    the saddle point (0, 0) exactly after a few steps.
    """
    problem = SaddleProblem(f=abs_value(), gstar=abs_value(), L=scalar_map(1.0),
                            saddle_set=[(np.zeros(1), np.zeros(1))])
    return ExperimentSpec(
        name="example3", problem=problem,
        config=StepConfig(sigma=0.75, tau=0.25, theta=1.0),
        regime="dual-first", iters=2001,
        start_policies={"random": _box_start(10.0), "zeros": _zeros_start(1, 1)},
        default_start="random", mu=1.0)


def example_wc_quartic() -> ExperimentSpec:
    """1-D weakly convex saddle problem with f = g* = |t| + |t^2 - 2|.

    Defaults tau=0.25, sigma=0.35, theta=1, mu=0.9, modulus 2. The "inside"
    start policy samples the 0.3199 half-width box and rejects the rare
    draws whose distance to (0, 0) reaches the certified ball radius (the
    box corners poke ~2e-3 past it), so the linear-rate constant B is
    defined for every accepted start; "outside" samples [-10, 10]^2.
    """
    fun = abs_plus_square_well(2.0)
    problem = SaddleProblem(f=fun, gstar=abs_plus_square_well(2.0), L=scalar_map(1.0),
                            saddle_set=[(np.zeros(1), np.zeros(1))])
    cfg = StepConfig(sigma=0.35, tau=0.25, theta=1.0)
    report = radius_report(rho=fun.rho, mu=0.9, norm_L=1.0, sigma=cfg.sigma,
                           tau=cfg.tau, theta=cfg.theta, regime="dual-first")
    ball = report.ball_radius

    def inside(rng: np.random.Generator):
        while True:
            x0 = rng.uniform(-0.3199, 0.3199, 1)
            y0 = rng.uniform(-0.3199, 0.3199, 1)
            if np.hypot(x0[0], y0[0]) < ball:
                return x0, y0

    return ExperimentSpec(
        name="example4", problem=problem, config=cfg, regime="dual-first",
        iters=2001,
        start_policies={"inside": inside, "outside": _box_start(10.0),
                        "zeros": _zeros_start(1, 1)},
        default_start="inside", mu=0.9,
        extras={"radius_report": report, "paper_box": 0.3199})


def make_noise(kind: str, param: float, seed, dim: int) -> np.ndarray:
    """Noise recipes: gaussian(eps), uniform_scaled(scale), constant(c).

    gaussian draws eps * N(0,1); uniform_scaled draws scale * U[-0.1, 0.1);
    constant fills with c. Deterministic given the seed.
    """
    rng = np.random.default_rng(seed)
    if kind == "gaussian":
        return param * rng.standard_normal(dim)
    if kind == "uniform_scaled":
        return param * rng.uniform(-0.1, 0.1, dim)
    if kind == "constant":
        return np.full(dim, float(param))
    raise ValueError(f"unknown noise kind {kind!r}")


def _conservative_tau(sigma: float, norm_bound: float) -> float:
    # min{0.99, 1/(||A||^2 sigma)} with one extra safety factor on the norm so
    # the strict check sqrt(sigma*tau)*norm_bound < 1 passes with real margin
    nb = norm_bound * (1.0 + 1e-6)
    return min(0.99, 1.0 / (sigma * nb * nb))


def _l1_spec(weakly_convex: bool, n: int, m: int, density: float,
             delta_mode: str, seed: int) -> ExperimentSpec:
    if n < 1 or m < 1:
        raise ValueError("n and m must be >= 1")
    if not 0.0 < density <= 1.0:
        raise ValueError("density must lie in (0, 1]")
    if delta_mode not in ("constant", "uniform"):
        raise ValueError("delta_mode must be 'constant' or 'uniform'")

    ss_data, ss_noise = np.random.SeedSequence(seed).spawn(2)
    rng = np.random.default_rng(ss_data)
    A = rng.standard_normal((m, n))
    k = max(1, int(round(density * n)))
    x_true = np.zeros(n)
    x_true[rng.choice(n, size=k, replace=False)] = rng.uniform(0.0, 1.0, k)

    # close top singular values on Gaussian matrices: give power iteration room
    Amap = matrix_map(A, norm_iters=600)
    Ax = Amap.apply(x_true)
    if delta_mode == "constant":
        delta = make_noise("constant", 0.1, ss_noise, m)
    else:
        delta = make_noise("uniform_scaled", float(np.linalg.norm(Ax)), ss_noise, m)
    b = Ax + delta

    sigma = 0.1
    tau = _conservative_tau(sigma, Amap.norm_bound)
    cfg = StepConfig(sigma=sigma, tau=tau, theta=1.0)

    if weakly_convex:
        f = abs_norm_sq_shift(float(x_true @ x_true))
        name = "l1wc"
    else:
        f = l1_norm(n)
        name = "l1"
    problem = SaddleProblem(f=f, g=quad_fit(b, 1.0), gstar=quad_fit_conjugate(b, 1.0),
                            L=Amap, primal_solutions=[x_true])

    # warm start distance per the primal-sharpness bound (mu=0.99, rho=2, eps0^2=1e-7)
    eb = epsilon_bounds(mu=0.99, rho=2.0, norm_L=Amap.norm_bound, sigma=sigma,
                        tau=tau, eps_n=np.sqrt(1e-7))
    e0 = eb.E_plus if eb.E_plus is not None else 0.0
    x_warm = e0 * x_true / np.linalg.norm(x_true)

    check = validate_steps(cfg, f.rho, Amap.norm_bound, "primal-first")
    return ExperimentSpec(
        name=name, problem=problem, config=cfg, regime="primal-first", iters=5000,
        start_policies={"zeros": _zeros_start(n, m),
                        "warm": lambda rng: (x_warm.copy(), np.zeros(m))},
        default_start="zeros", mu=0.99, regime_ok=check.ok,
        extras={"x_true": x_true, "b": b, "E0_plus": e0, "delta_mode": delta_mode})


def l1_convex(n: int = 300, m: int = 200, density: float = 0.1,
              delta_mode: str = "constant", seed: int = 0) -> ExperimentSpec:
    """Sparse recovery min ||x||_1 + 0.5||Ax - b||^2 at desk scale."""
    return _l1_spec(False, n, m, density, delta_mode, seed)


def l1_weakly_convex(n: int = 300, m: int = 200, density: float = 0.1,
                     delta_mode: str = "constant", seed: int = 0) -> ExperimentSpec:
    """Sphere-constrained variant min | ||x||^2 - ||x*||^2 | + 0.5||Ax - b||^2.

    Sharp but weakly convex (modulus 2); the paper's stepsizes put it
    outside the primal-first theory predicate, which is recorded in
    ``regime_ok`` rather than blocking the run.
    """
    return _l1_spec(True, n, m, density, delta_mode, seed)


def deblur_spec(image: ImageGrid, std: float = 4.0, eps_noise: float = 0.01,
                seed: int = 0, model: str = "wc") -> ExperimentSpec:
    """Gaussian deblurring with an l1 (convex) or energy-shell (wc) prior."""
    if model not in ("convex", "wc"):
        raise ValueError("model must be 'convex' or 'wc'")
    n = image.n
    n2 = n * n
    Amap = gaussian_blur_map(n, std)
    blurred = Amap.apply(image.pixels)
    noise = make_noise("gaussian", eps_noise, np.random.SeedSequence(seed).spawn(1)[0], n2)
    b = blurred + noise

    if model == "wc":
        f = abs_norm_sq_shift(float(image.pixels @ image.pixels))
    else:
        f = l1_norm(n2)
    problem = SaddleProblem(f=f, g=quad_fit(b, 1.0), gstar=quad_fit_conjugate(b, 1.0),
                            L=Amap)
    sigma = 0.1
    cfg = StepConfig(sigma=sigma, tau=_conservative_tau(sigma, Amap.norm_bound), theta=1.0)
    check = validate_steps(cfg, f.rho, Amap.norm_bound, "primal-first")
    return ExperimentSpec(
        name=f"deblur-{model}", problem=problem, config=cfg, regime="primal-first",
        iters=1000,
        start_policies={"zeros": _zeros_start(n2, n2)}, default_start="zeros",
        regime_ok=check.ok, metrics=("psnr",),
        extras={"image": image, "b": b, "degraded": ImageGrid(n, np.clip(b, 0.0, 1.0))})


TV_MODELS = ("convex", "wc1", "wc2", "wc3", "wc4")


def tv_spec(image: ImageGrid, model: str, lam: Optional[float] = None,
            noise_sigma: float = 0.1, seed: int = 0,
            wc1_target: Optional[float] = None) -> ExperimentSpec:
    """Total-variation denoising; the dual prox is the pointwise disc projection.

    Models: convex (lam/2)||x-b||^2, wc1 lam*| ||x||^2 - target |,
    wc2 | ||x||^2 - ||x0||^2 | + (lam/2)||x-b||^2, wc3 ||x-x0||_1 + quad,
    wc4 ||x^2 - x0^2||_1 + quad, all plus ||grad x||_1. lam defaults to 8
    (wc1: 1). wc1's scalar energy target defaults to ||b||^2 so the model
    still sees the noisy data. Stepsizes default to sigma = 0.1 for the
    convex-modulus models and 0.05 for the modulus-2 ones, which keeps the
    primal-first predicate satisfied at ||grad|| <= sqrt(8).
    """
    if model not in TV_MODELS:
        raise ValueError(f"unknown TV model {model!r}; have {TV_MODELS}")
    n = image.n
    n2 = n * n
    x0 = image.pixels
    noise = make_noise("gaussian", noise_sigma,
                       np.random.SeedSequence(seed).spawn(1)[0], n2)
    b = x0 + noise

    L = grad_map(n)
    if model == "convex":
        lam = 8.0 if lam is None else lam
        f = quad_fit(b, lam)
    elif model == "wc1":
        lam = 1.0 if lam is None else lam
        target = float(b @ b) if wc1_target is None else float(wc1_target)
        f = scale_function(abs_norm_sq_shift(target), lam)
    elif model == "wc2":
        lam = 8.0 if lam is None else lam
        f = plus_quadratic(abs_norm_sq_shift(float(x0 @ x0)), lam, b)
    elif model == "wc3":
        lam = 8.0 if lam is None else lam
        f = plus_quadratic(shifted_l1(x0), lam, b)
    else:
        lam = 8.0 if lam is None else lam
        f = plus_quadratic(elementwise_sq_l1(x0), lam, b)

    problem = SaddleProblem(f=f, gstar=linf_ball_indicator(n2), g=group_l1(n2), L=L)
    sigma = 0.1 if f.rho == 0.0 else 0.05
    cfg = StepConfig(sigma=sigma, tau=_conservative_tau(sigma, L.norm_bound), theta=1.0)
    check = validate_steps(cfg, f.rho, L.norm_bound, "primal-first")
    return ExperimentSpec(
        name=f"tv-{model}", problem=problem, config=cfg, regime="primal-first",
        iters=2000,
        start_policies={"zeros": _zeros_start(n2, 2 * n2)}, default_start="zeros",
        regime_ok=check.ok, metrics=("psnr",),
        extras={"image": image, "b": b, "lam": lam,
                "degraded": ImageGrid(n, np.clip(b, 0.0, 1.0))})


def psnr(ref: ImageGrid, test: ImageGrid) -> float:
    """Peak signal-to-noise ratio in dB for [0,1] images; capped at 99.0."""
    if ref.n != test.n:
        raise ValueError("image sizes differ")
    mse = float(np.mean((ref.pixels - test.pixels) ** 2))
    if mse == 0.0:
        return 99.0
    return min(10.0 * np.log10(1.0 / mse), 99.0)


def phantom(n: int) -> ImageGrid:
    """Deterministic piecewise-constant test image on a zero background."""
    img = np.zeros((n, n))
    img[n // 8: n // 2, n // 8: n // 2] = 0.85
    img[5 * n // 8: 7 * n // 8, n // 6: n // 2] = 0.45
    yy, xx = np.mgrid[0:n, 0:n]
    img[(yy - n / 3.0) ** 2 + (xx - 3.0 * n / 4.0) ** 2 <= (n / 6.0) ** 2] = 0.65
    return ImageGrid(n, img.ravel())


class PgmError(ValueError):
    """Malformed portable graymap; carries the byte offset of the defect."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


def _pgm_tokens(data: bytes):
    """Yield (token, offset) skipping whitespace and # comments."""
    i = 0
    while i < len(data):
        c = data[i:i + 1]
        if c.isspace():
            i += 1
            continue
        if c == b"#":
            while i < len(data) and data[i:i + 1] not in (b"\n", b""):
                i += 1
            continue
        j = i
        while j < len(data) and not data[j:j + 1].isspace():
            j += 1
        yield data[i:j], i, j
        i = j


def read_pgm(path) -> ImageGrid:
    """Load a P2 (ASCII) or P5 (binary, maxval <= 255) graymap, scaled to [0,1]."""
    with open(path, "rb") as fh:
        data = fh.read()
    toks = _pgm_tokens(data)

    def next_token(what):
        try:
            return next(toks)
        except StopIteration:
            raise PgmError(f"unexpected end of file reading {what}", len(data)) from None

    magic, off, _ = next_token("magic number")
    if magic not in (b"P2", b"P5"):
        raise PgmError(f"unsupported magic {magic!r}", off)

    header = []
    for what in ("width", "height", "maxval"):
        tok, off, end = next_token(what)
        try:
            header.append(int(tok))
        except ValueError:
            raise PgmError(f"bad {what} {tok!r}", off) from None
        if header[-1] <= 0:
            raise PgmError(f"nonpositive {what}", off)
    w, h, maxval = header

    if magic == b"P5":
        if maxval > 255:
            raise PgmError("two-byte P5 not supported", off)
        start = end + 1  # single whitespace after maxval
        raw = data[start:start + w * h]
        if len(raw) < w * h:
            raise PgmError("truncated pixel data", start + len(raw))
        values = np.frombuffer(raw, dtype=np.uint8).astype(float)
    else:
        values = np.empty(w * h)
        for k in range(w * h):
            tok, off, end = next_token("pixel")
            try:
                values[k] = int(tok)
            except ValueError:
                raise PgmError(f"bad pixel {tok!r}", off) from None
    if np.any(values > maxval):
        raise PgmError("pixel exceeds maxval", len(data))
    if w != h:
        raise PgmError(f"non-square image {w}x{h} not supported", 0)
    return ImageGrid(w, values / float(maxval))


def write_pgm(path, image: ImageGrid, binary: bool = True) -> None:
    """Save as P5 (default) or P2 with maxval 255; values clamped to [0,1]."""
    q = np.rint(np.clip(image.pixels, 0.0, 1.0) * 255.0).astype(np.uint8)
    n = image.n
    if binary:
        with open(path, "wb") as fh:
            fh.write(f"P5\n{n} {n}\n255\n".encode("ascii"))
            fh.write(q.tobytes())
    else:
        with open(path, "w", newline="\n") as fh:
            fh.write(f"P2\n{n} {n}\n255\n")
            for row in q.reshape(n, n):
                fh.write(" ".join(str(int(v)) for v in row) + "\n")
