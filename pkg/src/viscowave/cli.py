"""Command-line entry points.

    viscowave run CONFIG [--out DIR] [--svg]
    viscowave sweep SWEEP [--out DIR] [--jobs N] [--save-traces]
    viscowave threshold CONFIG [--out DIR] [--empirical LO HI] [--param P]
    viscowave check CONFIG [--quick]
    viscowave plot TRACE_CSV [--out FILE]

Exit codes: 0 success, 1 configuration/usage error, 2 run classified
unstable (overflow; the partial trace is still flushed).  Sweep points run
concurrently up to --jobs (default from VISCOWAVE_JOBS); results are
assembled in grid order regardless of scheduling.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, analysis, diagnostics, output, simulate
from .config import ConfigError, load_sim_config, load_sweep_spec


def _out_dir(args) -> Path:
    out = Path(getattr(args, "out", None) or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def cmd_run(args) -> int:
    try:
        cfg, outputs = load_sim_config(args.config)
    except ConfigError as exc:
        return _fail(str(exc))
    code = 0
    try:
        trace = simulate.run(cfg)
    except simulate.Blowup as b:
        trace = b.partial_trace
        code = 2
        print(f"unstable: overflow at t={b.time:g}; flushing partial trace")
    table = diagnostics.evaluate_trace(trace)
    out = _out_dir(args)
    csv_path = output.write_trace_csv(trace, out / outputs["csv"], table)
    print(f"wrote {csv_path} ({trace.n_samples} samples)")
    svg_name = outputs["svg"] or ("energy.svg" if args.svg else None)
    if svg_name:
        from .plotting import save_energy_svg

        series = {name: getattr(table, name) for name in ("e", "E_script", "E_mod", "L")}
        svg_path = save_energy_svg(out / svg_name, table.t, series, trace.metadata())
        print(f"wrote {svg_path}")
    return code


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def _sweep_tasks(spec, out: Path, save_traces: bool):
    grids = [axis[1] for axis in spec.axes]
    names = [axis[0] for axis in spec.axes]
    tasks = []
    shape = [len(g) for g in grids]
    total = int(np.prod(shape))
    for idx in range(total):
        rem, coords = idx, []
        for size in reversed(shape):
            coords.append(rem % size)
            rem //= size
        coords = coords[::-1]
        values = [grids[k][coords[k]] for k in range(len(grids))]
        trace_path = str(out / f"trace_{idx:04d}.csv") if save_traces else None
        tasks.append((idx, names, values, spec.template, spec.fit_window, trace_path))
    return tasks


def _sweep_point(task):
    """Executed in worker processes; must stay importable at module level."""
    idx, names, values, template, fit_window, trace_path = task
    cfg = template
    try:
        for name, value in zip(names, values):
            cfg = analysis.apply_parameter(cfg, name, value)
    except analysis.AnalysisError as exc:
        return (idx, values, "error", math.nan, math.nan, math.nan, str(exc))
    blowup_time = math.nan
    try:
        trace = simulate.run(cfg)
    except simulate.Blowup as b:
        trace = b.partial_trace
        blowup_time = b.time
    table = diagnostics.evaluate_trace(trace)
    if trace_path is not None:
        output.write_trace_csv(trace, trace_path, table)
    if not math.isnan(blowup_time):
        return (idx, values, "unstable", math.nan, math.nan, blowup_time, "")
    window = fit_window or (0.25 * cfg.t_end, cfg.t_end)
    try:
        fit = analysis.fit_log_linear(table.t, table.E_mod, window)
    except analysis.NonPositiveEnergy:
        return (idx, values, "stable", math.inf, 1.0, math.nan, "")
    except analysis.AnalysisError as exc:
        return (idx, values, "error", math.nan, math.nan, math.nan, str(exc))
    outcome = "unstable" if (fit.lambda_est < 0.0 and fit.r2 >= 0.9) else "stable"
    return (idx, values, outcome, fit.lambda_est, fit.r2, math.nan, "")


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("VISCOWAVE_JOBS", "1")))
    except ValueError:
        return 1


def cmd_sweep(args) -> int:
    try:
        spec = load_sweep_spec(args.sweep)
    except ConfigError as exc:
        return _fail(str(exc))
    out = _out_dir(args)
    tasks = _sweep_tasks(spec, out, args.save_traces)
    jobs = args.jobs if args.jobs is not None else default_jobs()
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_point, tasks))
    else:
        results = [_sweep_point(t) for t in tasks]

    names = [axis[0] for axis in spec.axes]
    columns = ["index"] + names + ["outcome", "lambda_est", "r2", "blowup_time"]
    rows = [(idx, *values, outcome, lam, r2, bt)
            for idx, values, outcome, lam, r2, bt, _err in results]
    for idx, values, outcome, *_rest, err in results:
        if outcome == "error":
            print(f"point {idx} {dict(zip(names, values))}: {err}", file=sys.stderr)
    window = spec.fit_window or (0.25 * spec.template.t_end, spec.template.t_end)
    meta = {
        "template_hash": spec.template.hash(),
        "dt": spec.template.dt,
        "m": spec.template.m,
        "quadrature_panels": spec.template.panels,
        "axes": "; ".join(f"{n}[{len(v)}]" for n, v in spec.axes),
        "fit_window": f"{output.fmt(window[0])}..{output.fmt(window[1])}",
    }
    path = output.write_results_csv(rows, columns, meta, out / spec.results_name)
    print(f"wrote {path} ({len(rows)} points)")
    return 0


# ---------------------------------------------------------------------------
# threshold
# ---------------------------------------------------------------------------

_CLOSURE_NOTE = (
    "delta1=l/4; C1=max(1, mu^2 C*^2/l); C2=(1-l)C*^2/l; C3=(1-l)/4; "
    "C4=g(0)C*^2/4; C5=mu^2(1-l)C*^2/4; C6=C3+C5; C7=C4; delta2, eps2 at half "
    "their sup; eps1, xi at window midpoints; exp(sigma tau)=sqrt(k1/k2)"
)


def cmd_threshold(args) -> int:
    try:
        cfg, outputs = load_sim_config(args.config)
    except ConfigError as exc:
        return _fail(str(exc))
    if not cfg.kernel.present:
        return _fail("threshold requires a memory kernel (kernel = \"none\" has no accumulated mass)")
    mu = abs(cfg.mu2)
    try:
        params = analysis.select_params(cfg.kernel, cfg.domain, cfg.tau, cfg.lyap_t0, mu)
        a_star = analysis.theoretical_threshold(cfg.kernel, cfg.domain, cfg.tau, cfg.lyap_t0)
    except analysis.InfeasibleConstants as exc:
        return _fail(str(exc))
    c = params.constants
    entries = [
        ("kernel.alpha", cfg.kernel.alpha),
        ("kernel.beta", cfg.kernel.beta),
        ("l", params.l),
        ("zeta", cfg.kernel.zeta),
        ("c_star", params.c_star),
        ("tau", params.tau),
        ("t0", params.t0),
        ("g0", params.g0),
        ("mu", mu),
        ("delta1", c.delta1),
        ("C1", c.C1),
        ("C2", c.C2),
        ("C3", c.C3),
        ("C4", c.C4),
        ("C5", c.C5),
        ("C6", c.C6),
        ("C7", c.C7),
        ("delta2", params.delta2),
        ("eps1", params.eps1),
        ("eps2", params.eps2),
        ("sigma", params.sigma),
        ("xi", params.xi),
        ("k1", params.k1),
        ("k2", params.k2),
        ("a", params.a),
        ("a_star", a_star),
        ("closure", f'"{_CLOSURE_NOTE}"'),
    ]
    rows = params.inequality_rows(mu)
    empirical = None
    if args.empirical is not None:
        lo, hi = args.empirical
        try:
            mu_star, audit = analysis.empirical_threshold(cfg, (lo, hi), param=args.param)
        except analysis.SameClassAtEndpoints as exc:
            return _fail(str(exc))
        empirical = (mu_star, audit)
        entries.append((f"empirical.{args.param}_star", mu_star))
        for i, point in enumerate(audit):
            entries.append(
                (
                    f"empirical.audit.{i}",
                    f'"{args.param}={output.fmt(point.value)} {point.outcome} '
                    f'lambda={output.fmt(point.lambda_est)} r2={output.fmt(point.r2)} '
                    f'blowup={output.fmt(point.blowup_time)}"',
                )
            )
    meta = {
        "config_hash": cfg.hash(),
        "dt": cfg.dt,
        "m": cfg.m,
        "quadrature_panels": cfg.panels,
        "t0": cfg.lyap_t0,
    }
    out = _out_dir(args)
    path = output.write_certificate(out / outputs["certificate"], meta, entries, rows)
    print(f"certified threshold a = {params.a!r}, self-consistent a_star = {a_star!r}")
    if empirical is not None:
        print(f"empirical {args.param}_star = {empirical[0]!r} ({len(empirical[1])} classifications)")
    print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------

def _check_lines(cfg):
    """Run the invariant suite; yields (name, ok, detail)."""
    base = replace(cfg, sample_every=1)
    try:
        trace = simulate.run(base)
    except simulate.Blowup as b:
        yield ("completes", False, f"overflow at t={b.time:g}; invariants not evaluable")
        return
    table = diagnostics.evaluate_trace(trace)

    worst = float(table.g_circ.min())
    yield ("memory_mismatch_nonnegative", worst >= -1e-10, f"min (g o grad u) = {worst:.3e}")

    if cfg.kernel.present:
        worst_d = float((-cfg.kernel.zeta * table.g_circ).max())
        yield ("memory_mismatch_derivative_nonpositive", worst_d <= 1e-10,
               f"max (g' o grad u) = {worst_d:.3e}")

    worst_margin = float(table.comparison_margin.min())
    yield ("comparison_inequality", worst_margin >= -1e-10, f"min margin = {worst_margin:.3e}")

    if cfg.mu2 == 0.0 and cfg.mu1 == 0.0 and not cfg.kernel.present:
        # purely conservative: the discrete energy only wobbles at O(dt^2)
        scale = max(table.e[0], 1e-300)
        drift = float(np.max(np.abs(table.e - table.e[0])) / scale)
        yield ("energy_conservation", drift <= 1e-4, f"max relative drift = {drift:.3e}")
    elif cfg.mu2 == 0.0 and cfg.mu1 >= 0.0:
        incr = float(np.diff(table.E_script).max()) if trace.n_samples > 1 else 0.0
        yield ("history_energy_monotone", incr <= 1e-10, f"max increment = {incr:.3e}")

    pb = diagnostics.prior_bound(trace, table)
    yield ("prior_growth_envelope", pb.ok, f"C = {pb.C:.6g}, worst margin = {pb.worst_margin:.3e}")

    eq = diagnostics.equivalence_margins(trace, table)
    if eq.beta1 > 0.0:
        yield ("lyapunov_energy_equivalence", eq.ok,
               f"beta1={eq.beta1:.6g} beta2={eq.beta2:.6g} "
               f"worst lower/upper = {eq.worst_lower:.3e}/{eq.worst_upper:.3e}")
    else:
        yield ("lyapunov_energy_equivalence", True,
               "lower constant degenerate (beta1 clipped to 0); reported only")

    _, r1 = diagnostics.energy_identity_residual(trace, table)
    trace2 = simulate.run(replace(base, m=2 * base.m))
    _, r2 = diagnostics.energy_identity_residual(trace2)
    m1, m2 = float(np.max(np.abs(r1))), float(np.max(np.abs(r2)))
    if m1 < 1e-12:
        yield ("energy_identity_convergence", True, f"residual at noise floor ({m1:.3e})")
    else:
        factor = m1 / m2 if m2 > 0 else math.inf
        yield ("energy_identity_convergence", factor >= 1.5,
               f"max residual {m1:.3e} -> {m2:.3e} under dt halving (factor {factor:.2f})")


def cmd_check(args) -> int:
    try:
        cfg, _outputs = load_sim_config(args.config)
    except ConfigError as exc:
        return _fail(str(exc))
    failures = 0
    for name, ok, detail in _check_lines(cfg):
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        failures += 0 if ok else 1
    return 1 if failures else 0


# ---------------------------------------------------------------------------
# plot
# ---------------------------------------------------------------------------

def cmd_plot(args) -> int:
    try:
        meta, columns = output.read_trace_csv(args.trace)
    except (OSError, ValueError) as exc:
        return _fail(str(exc))
    target = Path(args.out) if args.out else Path(args.trace).with_suffix(".svg")
    target.parent.mkdir(parents=True, exist_ok=True)
    from .plotting import save_energy_svg

    series = {name: columns[name] for name in ("e", "E_script", "E_mod", "L") if name in columns}
    path = save_energy_svg(target, columns["t"], series, meta)
    print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="viscowave",
        description="simulate and analyze a viscoelastic wave equation with delayed velocity feedback",
    )
    parser.add_argument("--version", action="version", version=f"viscowave {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="integrate one scenario and write its trace CSV")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (default: current directory)")
    p.add_argument("--svg", action="store_true", help="also render the energy chart")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a parameter grid and classify each point")
    p.add_argument("sweep")
    p.add_argument("--out", help="output directory")
    p.add_argument("--jobs", type=int, default=None,
                   help="concurrent simulations (default: VISCOWAVE_JOBS or 1)")
    p.add_argument("--save-traces", action="store_true",
                   help="write trace_<index>.csv for every grid point")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("threshold", help="emit the certified feedback-size threshold")
    p.add_argument("config")
    p.add_argument("--out", help="output directory")
    p.add_argument("--empirical", nargs=2, type=float, metavar=("LO", "HI"),
                   help="also bisect the empirical stability threshold in this bracket")
    p.add_argument("--param", default="mu2", help="parameter for --empirical (default mu2)")
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("check", help="run the invariant suite; nonzero exit on violation")
    p.add_argument("config")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("plot", help="render an existing trace CSV to SVG")
    p.add_argument("trace")
    p.add_argument("--out", help="output SVG path (default: trace name with .svg)")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    return args.func(args)


def console_main():
    sys.exit(main())


if __name__ == "__main__":
    console_main()
