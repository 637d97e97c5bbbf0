"""Command-line surface: run experiments, scan sharpness, restore images.

Exit codes: 0 success, 2 stepsize violation, 3 I/O error (including
malformed PGM, reported with its byte offset), 4 unknown experiment or
example name. Randomized commands require an explicit --seed. Every run
writes its metadata sidecar before streaming results, so a crashed run
leaves a parseable partial trace.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import os
import sys
from typing import Optional

import numpy as np

from .errors import StepsizeViolation
from .operators import scalar_map
from .problems import (ExperimentSpec, PgmError, deblur_spec, example_abs_bilinear,
                       example_wc_quartic, l1_convex, l1_weakly_convex, phantom,
                       psnr, read_pgm, tv_spec, write_pgm)
from .prox import abs_plus_square_well, abs_value, quad_fit
from .saddle import SaddleProblem, sharpness_grid, verify_inf_sharpness
from .solver import TRACE_HEADER, StepConfig, format_trace_row, validate_steps
from .operators import ImageGrid

SOLVE_EXPERIMENTS = ("example3", "example4", "l1", "l1wc")
SHARPNESS_EXAMPLES = ("example1", "example2", "example3", "example4")


def _sharpness_problem(name: str) -> SaddleProblem:
    zero = [(np.zeros(1), np.zeros(1))]
    if name == "example1":
        return SaddleProblem(f=abs_value(), gstar=abs_value(), L=scalar_map(0.0),
                             saddle_set=zero)
    if name == "example2":
        return SaddleProblem(f=abs_value(), gstar=quad_fit(0.0, 0.25),
                             L=scalar_map(1.0), saddle_set=zero)
    if name == "example3":
        return SaddleProblem(f=abs_value(), gstar=abs_value(), L=scalar_map(1.0),
                             saddle_set=zero)
    if name == "example4":
        return SaddleProblem(f=abs_plus_square_well(1.0),
                             gstar=abs_plus_square_well(1.0),
                             L=scalar_map(1.0), saddle_set=zero)
    raise KeyError(name)


_SHARPNESS_BOX = {"example1": 5.0, "example2": 1.0, "example3": 3.0, "example4": 3.0}


def load_config(path) -> dict:
    """Plain key=value file; '#' comments and blank lines ignored."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def _coerce(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            continue
    return text


def _apply_config(args: argparse.Namespace) -> None:
    if not getattr(args, "config", None):
        return
    for key, value in load_config(args.config).items():
        if hasattr(args, key) and getattr(args, key) is None:
            setattr(args, key, _coerce(value))


def _merged_config(spec: ExperimentSpec, args) -> StepConfig:
    return StepConfig(
        sigma=spec.config.sigma if args.sigma is None else args.sigma,
        tau=spec.config.tau if args.tau is None else args.tau,
        theta=spec.config.theta if args.theta is None else args.theta)


def _validate_or_die(cfg: StepConfig, rho: float, norm_L: float, regime: str) -> None:
    check = validate_steps(cfg, rho, norm_L, regime)
    if check.ok:
        return
    base = [f for f in check.failures
            if f[0] in ("sigma > 0", "tau > 0", "theta in [0,1]",
                        "sigma*rho < 1", "sqrt(sigma*tau)*||L|| < 1")]
    for name, amount in check.failures:
        tag = "violated" if (name, amount) in base else "theory predicate not met"
        print(f"stepsize check: {name} {tag} (by {amount:.4g})", file=sys.stderr)
    if base:
        raise StepsizeViolation("; ".join(name for name, _ in base))


def _stream_run(spec: ExperimentSpec, seed: int, start: Optional[str],
                iters: Optional[int], cfg: StepConfig, out_path: str):
    meta_path = out_path + ".meta"
    z0 = spec.draw_start(seed, start)
    # sidecar first so a crashed run still identifies itself
    with open(meta_path, "w", newline="\n") as fh:
        fh.write(f"experiment={spec.name}\nseed={seed}\n")
        fh.write(f"start_policy={start or spec.default_start}\n")
        fh.write(f"regime={spec.regime}\nsigma={cfg.sigma}\ntau={cfg.tau}\n")
        fh.write(f"theta={cfg.theta}\niters={iters or spec.iters}\n")
    from .solver import solve_dual_first, solve_primal_first
    solve = solve_dual_first if spec.regime == "dual-first" else solve_primal_first
    with open(out_path, "w", newline="\n") as fh:
        fh.write(TRACE_HEADER + "\n")
        trace = solve(spec.problem, cfg, z0, iters or spec.iters,
                      hooks=lambda row: fh.write(format_trace_row(row) + "\n"),
                      seed=seed,
                      metadata={"experiment": spec.name,
                                "start_policy": start or spec.default_start})
    trace.write_metadata(meta_path)
    return trace


def cmd_solve(args) -> int:
    if args.experiment not in SOLVE_EXPERIMENTS:
        print(f"unknown experiment {args.experiment!r}; known: "
              f"{', '.join(SOLVE_EXPERIMENTS)}", file=sys.stderr)
        return 4
    if args.experiment == "example3":
        spec = example_abs_bilinear()
    elif args.experiment == "example4":
        spec = example_wc_quartic()
    else:
        maker = l1_convex if args.experiment == "l1" else l1_weakly_convex
        spec = maker(n=args.n if args.n is not None else 300,
                     m=args.m if args.m is not None else 200,
                     density=args.density if args.density is not None else 0.1,
                     delta_mode=args.delta or "constant",
                     seed=args.seed)
    if args.start is not None and args.start not in spec.start_policies:
        print(f"unknown start policy {args.start!r}; known: "
              f"{', '.join(sorted(spec.start_policies))}", file=sys.stderr)
        return 4
    cfg = _merged_config(spec, args)
    _validate_or_die(cfg, spec.problem.f.rho, spec.problem.L.norm_bound, spec.regime)

    out = args.out or "trace.csv"
    k = args.starts if args.starts is not None else 1
    if k <= 1:
        trace = _stream_run(spec, args.seed, args.start, args.iters, cfg, out)
        traces = [(out, trace)]
    else:
        stem, ext = os.path.splitext(out)
        jobs = [(i, args.seed + i, f"{stem}_{i:03d}{ext}") for i in range(k)]
        with concurrent.futures.ThreadPoolExecutor(max_workers=min(k, 8)) as pool:
            futs = {pool.submit(_stream_run, spec, s, args.start, args.iters, cfg, p): p
                    for _, s, p in jobs}
            traces = [(futs[f], f.result()) for f in concurrent.futures.as_completed(futs)]
    for path, trace in traces:
        last = trace.rows[-1]
        bits = [f"rows={len(trace.rows)}"]
        if last.dist is not None:
            bits.append(f"final_dist={last.dist:.6g}")
        if last.objective is not None:
            bits.append(f"final_objective={last.objective:.6g}")
        print(f"{path}: " + " ".join(bits))
    if args.fig and len(traces) == 1:
        os.makedirs(args.fig, exist_ok=True)
        from .report import fig_trace
        x_true = spec.extras.get("x_true")
        for p in fig_trace(traces[0][1], args.fig, spec.name, x_true=x_true):
            print(f"figure: {p}")
    return 0


def cmd_sharpness(args) -> int:
    if args.example not in SHARPNESS_EXAMPLES:
        print(f"unknown example {args.example!r}; known: "
              f"{', '.join(SHARPNESS_EXAMPLES)}", file=sys.stderr)
        return 4
    problem = _sharpness_problem(args.example)
    half = args.box if args.box is not None else _SHARPNESS_BOX[args.example]
    step = args.step if args.step is not None else 0.01
    xs, ys, V = sharpness_grid(problem, args.mu, (-half, half), step)
    report = verify_inf_sharpness(problem, args.mu, (-half, half), step)
    if args.out:
        with open(args.out, "w", newline="\n") as fh:
            fh.write("x,y,value\n")
            for i, xv in enumerate(xs):
                for j, yv in enumerate(ys):
                    fh.write(f"{xv:.17g},{yv:.17g},{V[i, j]:.17g}\n")
    print(f"min={report.min_value:.17g} witness=({report.witness[0]:.17g},"
          f"{report.witness[1]:.17g}) inf_sharp={'yes' if report.inf_sharp else 'no'}")
    if args.fig:
        os.makedirs(args.fig, exist_ok=True)
        from .report import fig_contour
        p = os.path.join(args.fig, f"{args.example}_mu{args.mu:g}_contour.png")
        fig_contour(xs, ys, V, p, title=f"H - {args.mu:g}*dist")
        print(f"figure: {p}")
    return 0


DEBLUR_MODELS = ("convex", "wc")


def cmd_image(args) -> int:
    from .problems import TV_MODELS
    known = DEBLUR_MODELS if args.task == "deblur" else TV_MODELS
    if args.model is not None and args.model not in known:
        print(f"unknown model {args.model!r} for {args.task}; known: "
              f"{', '.join(known)}", file=sys.stderr)
        return 4
    original = read_pgm(args.input)
    if args.task == "deblur":
        spec = deblur_spec(original, std=args.std if args.std is not None else 4.0,
                           eps_noise=args.eps if args.eps is not None else 0.01,
                           seed=args.seed, model=args.model or "wc")
    else:
        spec = tv_spec(original, model=args.model or "convex", lam=args.lam,
                       noise_sigma=args.noise if args.noise is not None else 0.1,
                       seed=args.seed, wc1_target=args.wc1_target)
    cfg = _merged_config(spec, args)
    _validate_or_die(cfg, spec.problem.f.rho, spec.problem.L.norm_bound, spec.regime)

    if args.trace:
        trace = _stream_run(spec, args.seed, None, args.iters, cfg, args.trace)
    else:
        trace = spec.run(args.seed, iters=args.iters, config=cfg)
    x_final, _ = trace.final()
    restored = ImageGrid(original.n, np.clip(x_final, 0.0, 1.0))
    write_pgm(args.output, restored, binary=True)

    degraded = spec.extras["degraded"]
    p_noisy = psnr(original, degraded)
    p_out = psnr(original, restored)
    model = args.model or ("wc" if args.task == "deblur" else "convex")
    print(f"model={model} psnr_noisy={p_noisy:.4f} psnr_out={p_out:.4f}")
    if args.fig:
        os.makedirs(args.fig, exist_ok=True)
        from .report import fig_image_panel, fig_trace
        p = os.path.join(args.fig, f"{spec.name}_panel.png")
        fig_image_panel(p, [(original, "original"),
                            (degraded, f"input ({p_noisy:.2f} dB)"),
                            (restored, f"restored ({p_out:.2f} dB)")])
        print(f"figure: {p}")
        for fp in fig_trace(trace, args.fig, spec.name):
            print(f"figure: {fp}")
    return 0


def cmd_phantom(args) -> int:
    write_pgm(args.output, phantom(args.n if args.n is not None else 64),
              binary=not args.ascii)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pdsaddle",
        description="Primal-dual experiments for weakly convex composite problems")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key=value file; flags override file values")
        p.add_argument("--fig", help="directory for rendered figures")

    p = sub.add_parser("solve", help="run a named experiment, write a trace CSV")
    p.add_argument("experiment", help=f"one of: {', '.join(SOLVE_EXPERIMENTS)}")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--iters", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--start", help="start policy name (experiment-specific)")
    p.add_argument("--starts", type=int, help="fan out k runs with seeds seed..seed+k-1")
    p.add_argument("--n", type=int, help="signal dimension (l1 experiments)")
    p.add_argument("--m", type=int, help="measurement count (l1 experiments)")
    p.add_argument("--density", type=float, help="sparsity density (l1 experiments)")
    p.add_argument("--delta", choices=("constant", "uniform"), help="l1 noise recipe")
    p.add_argument("--out", help="trace CSV path (default trace.csv)")
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sharpness", help="scan H - mu*dist on a box, emit contour data")
    p.add_argument("example", help=f"one of: {', '.join(SHARPNESS_EXAMPLES)}")
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--box", type=float, help="half-width of the square scan box")
    p.add_argument("--step", type=float, help="grid step (default 0.01)")
    p.add_argument("--out", help="CSV path for x,y,value rows")
    common(p)
    p.set_defaults(func=cmd_sharpness)

    p = sub.add_parser("image", help="deblur or TV-denoise a PGM image")
    p.add_argument("task", choices=("deblur", "tv"))
    p.add_argument("input", help="input PGM (P2 or P5)")
    p.add_argument("output", help="output PGM (P5)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--model", help="deblur: convex|wc; tv: convex|wc1|wc2|wc3|wc4")
    p.add_argument("--lambda", dest="lam", type=float, help="data-term weight")
    p.add_argument("--noise", type=float, help="tv: gaussian noise level (default 0.1)")
    p.add_argument("--eps", type=float, help="deblur: noise level (default 0.01)")
    p.add_argument("--std", type=float, help="deblur: blur standard deviation (default 4)")
    p.add_argument("--iters", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--wc1-target", dest="wc1_target", type=float,
                   help="scalar energy target for the wc1 model (default ||b||^2)")
    p.add_argument("--trace", help="also write the iteration trace CSV here")
    common(p)
    p.set_defaults(func=cmd_image)

    p = sub.add_parser("phantom", help="write the built-in piecewise-constant phantom")
    p.add_argument("output")
    p.add_argument("--n", type=int, help="side length (default 64)")
    p.add_argument("--ascii", action="store_true", help="write P2 instead of P5")
    p.set_defaults(func=cmd_phantom)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _apply_config(args)
        return args.func(args)
    except StepsizeViolation as exc:
        print(f"stepsize violation: {exc}", file=sys.stderr)
        return 2
    except PgmError as exc:
        print(f"image error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
