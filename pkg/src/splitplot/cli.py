"""Command-line interface: ``splitplot test|simulate|fp-table|limit``.

Exit codes: 0 success, 2 input or infeasibility error, 1 internal error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .design import as_projection
from .engine import TEST_NAMES, kf_quantile, run_test
from .exceptions import InfeasibleDesignError, SplitPlotError
from .io import (
    dumps_json,
    load_sim_config,
    parse_covariance,
    read_dataset,
    report_dict,
    sim_table_csv,
)
from .kron import f_p_exact, spectrum_tvt
from .limits import approximation_error, classify_regime
from .plotting import line_plot_svg
from .simulation import (
    ALTERNATIVES,
    WORKERS_ENV,
    SimConfig,
    default_workers,
    estimate_rejection_rate,
    reference_sample_sizes,
)

HYPOTHESES = ("interaction", "group", "time", "grand-mean")


def parse_int_list(text: str) -> list[int]:
    """``"2..12"``, ``"2,4,8"`` or ``"5"``; ranges are inclusive."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..", 1)
            lo_i, hi_i = int(lo), int(hi)
            if hi_i < lo_i:
                raise argparse.ArgumentTypeError(f"empty range {part!r}")
            out.extend(range(lo_i, hi_i + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def parse_float_list(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _int_list(text: str) -> list[int]:
    try:
        return parse_int_list(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of integers: {text!r}")


def _sizes_for(a: int, n: list[int] | None) -> tuple[int, ...]:
    if n is None:
        return reference_sample_sizes(a)
    if len(n) < a:
        raise SplitPlotError(f"--n lists {len(n)} sizes but a = {a}")
    return tuple(n[:a])


def _write(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


# --- subcommands ----------------------------------------------------------


def cmd_test(args) -> int:
    dataset = read_dataset(args.data)
    result = run_test(dataset, args.hypothesis, alpha=args.alpha,
                      upsilon=args.upsilon, seed=args.seed)
    tr = result.traces
    print(f"design: a={dataset.design.a} d={dataset.design.d} n={list(dataset.design.n)}")
    print(f"hypothesis: {result.hypothesis}  alpha={result.alpha}  seed={result.seed}")
    print(f"A1={tr.a1:.6g}  A2={tr.a2:.6g}  C1*={tr.c1:.6g}")
    print(f"Q={result.q:.6g}  W={result.w:.6f}  f_hat={result.f_hat:.6g}  "
          f"p={result.p_value:.4g}")
    for name in TEST_NAMES:
        verdict = "reject" if result.decisions[name] else "retain"
        print(f"  {name:<9} critical={result.critical[name]:.6f}  {verdict}")
    if args.json:
        Path(args.json).write_text(dumps_json(report_dict(result, dataset, args.upsilon)),
                                   encoding="utf-8")
    return 0


def _inline_configs(args) -> list[SimConfig]:
    missing = [flag for flag, val in (("--a", args.a), ("--d", args.d)) if val is None]
    if missing:
        raise SplitPlotError(f"simulate needs --config or {' and '.join(missing)}")
    deltas = args.delta_grid or [0.0]
    alt = args.alt or ("null" if deltas == [0.0] else "trend")
    configs = []
    for a in args.a:
        configs.append(SimConfig(
            n=_sizes_for(a, args.n),
            d=args.d,
            covariance=parse_covariance(args.cov, args.d),
            hypothesis=args.hypothesis,
            alternative=alt,
            deltas=tuple(deltas),
            alpha=args.alpha,
            reps=args.reps,
            upsilon=args.upsilon,
            seed=args.seed,
        ))
    return configs


def _sim_svg(results) -> str:
    first = results[0].config
    title = f"{first.hypothesis}, {first.alternative}, d={first.d}, {first.covariance.spec()}"
    if len(results) == 1:
        res = results[0]
        series = {name: (res.config.deltas, res.rates[:, j]) for j, name in enumerate(TEST_NAMES)}
        return line_plot_svg(series, xlabel="delta", ylabel="rejection rate",
                             title=title, hline=first.alpha)
    if len(first.deltas) == 1:
        xs = [r.config.a for r in results]
        series = {name: (xs, [r.rates[0, j] for r in results]) for j, name in enumerate(TEST_NAMES)}
        return line_plot_svg(series, xlabel="a (number of groups)", ylabel="rejection rate",
                             title=title, hline=first.alpha)
    j = TEST_NAMES.index("phi_star")
    series = {f"a={r.config.a}": (r.config.deltas, r.rates[:, j]) for r in results}
    return line_plot_svg(series, xlabel="delta", ylabel="rejection rate (phi_star)",
                         title=title, hline=first.alpha)


def cmd_simulate(args) -> int:
    configs = [load_sim_config(args.config)] if args.config else _inline_configs(args)
    workers = args.workers or default_workers()
    results = []
    for cfg in configs:
        res = estimate_rejection_rate(cfg, workers=workers)
        results.append(res)
        print(f"a={cfg.a} d={cfg.d}: {cfg.reps} reps in {res.elapsed:.1f}s", file=sys.stderr)
    _write(sim_table_csv(results, with_a=len(results) > 1), args.out)
    if args.svg:
        Path(args.svg).write_text(_sim_svg(results), encoding="utf-8")
    return 0


def cmd_fp_table(args) -> int:
    lines = ["d,a,f_p,tau_p"]
    for d in args.d:
        cov = parse_covariance(args.cov, d)
        for a in args.a:
            pair = as_projection(args.hypothesis, a, d)
            f, tau = f_p_exact(pair.T_W, pair.T_S, cov.matrix, _sizes_for(a, args.n))
            lines.append(f"{d},{a},{f:.10g},{tau:.10f}")
    _write("\n".join(lines) + "\n", args.out)
    return 0


def cmd_limit(args) -> int:
    n = _sizes_for(args.a, args.n)
    cov = parse_covariance(args.cov, args.d)
    pair = as_projection(args.hypothesis, args.a, args.d)
    spec = spectrum_tvt(pair.T_W, pair.T_S, cov.matrix, n)
    report = classify_regime(spec.betas)
    f_p, tau_p = f_p_exact(pair.T_W, pair.T_S, cov.matrix, n)
    rows = approximation_error(spec.betas, f_p, args.alpha_grid,
                               m_samples=args.samples, seed=args.seed)
    print(f"design: a={args.a} d={args.d} n={list(n)} cov={cov.spec()} "
          f"hypothesis={args.hypothesis}")
    print(f"beta1={report.beta1:.6f}  r_effective={report.r_effective}  regime={report.tag}"
          + ("  (near threshold)" if report.boundary else ""))
    print(f"f_P={f_p:.6g}  tau_P={tau_p:.6f}")
    print(f"{'alpha':>7} {'mixture':>10} {'se':>8} {'K_fP':>10} {'gap':>9}")
    for row in rows:
        print(f"{row.alpha:>7.3f} {row.mixture_quantile:>10.4f} {row.mixture_se:>8.4f} "
              f"{row.kf_quantile:>10.4f} {row.gap:>+9.4f}")
    if args.json:
        doc = {
            "version": __version__,
            "a": args.a, "d": args.d, "n": list(n), "covariance": cov.spec(),
            "hypothesis": args.hypothesis,
            "beta1": report.beta1, "r_effective": report.r_effective, "regime": report.tag,
            "f_p": f_p, "tau_p": tau_p, "samples": args.samples, "seed": args.seed,
            "quantiles": [
                {"alpha": r.alpha, "mixture": r.mixture_quantile, "se": r.mixture_se,
                 "kf": r.kf_quantile, "gap": r.gap} for r in rows
            ],
        }
        Path(args.json).write_text(dumps_json(doc), encoding="utf-8")
    return 0


# --- parser ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="splitplot",
        description="Quadratic-form tests for high-dimensional split-plot designs.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("test", help="test a hypothesis on a wide CSV dataset")
    p.add_argument("--data", required=True, help="CSV with header group,t1,...,td")
    p.add_argument("--hypothesis", choices=HYPOTHESES, default="interaction")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--upsilon", type=float, default=0.05, help="subsampling fraction for C1*")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", help="write a JSON report here")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("simulate", help="Monte Carlo rejection rates",
                       epilog=f"Default worker count comes from ${WORKERS_ENV} (else 1).")
    p.add_argument("--config", help="JSON experiment description")
    p.add_argument("--a", type=_int_list, help="group counts, e.g. 4 or 2..12")
    p.add_argument("--d", type=int)
    p.add_argument("--n", type=_int_list, help="group sizes (default: reference vector)")
    p.add_argument("--cov", default="ar:0.6", help="ar:<rho>, cs:<rho> or identity")
    p.add_argument("--hypothesis", choices=HYPOTHESES, default="interaction")
    p.add_argument("--alt", choices=ALTERNATIVES)
    p.add_argument("--delta-grid", type=parse_float_list)
    p.add_argument("--reps", type=int, default=2000)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--upsilon", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="CSV destination (default stdout)")
    p.add_argument("--svg", help="write a line plot here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fp-table", help="exact tau_P = 1/f_P for known covariance")
    p.add_argument("--d", type=_int_list, default=[5, 50, 200, 600])
    p.add_argument("--a", type=_int_list, default=list(range(2, 13)))
    p.add_argument("--cov", default="ar:0.6")
    p.add_argument("--n", type=_int_list)
    p.add_argument("--hypothesis", choices=HYPOTHESES, default="interaction")
    p.add_argument("--out")
    p.set_defaults(func=cmd_fp_table)

    p = sub.add_parser("limit", help="limit regime and K_f approximation error")
    p.add_argument("--a", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--n", type=_int_list)
    p.add_argument("--cov", default="ar:0.6")
    p.add_argument("--hypothesis", choices=HYPOTHESES, default="interaction")
    p.add_argument("--alpha-grid", type=parse_float_list, default=[0.01, 0.05, 0.1])
    p.add_argument("--samples", type=int, default=20000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json")
    p.set_defaults(func=cmd_limit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except InfeasibleDesignError as exc:
        print(f"error: infeasible design: {exc}", file=sys.stderr)
        return 2
    except (SplitPlotError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
