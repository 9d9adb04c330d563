"""Command-line front end.

Subcommands read an experiment config (see :mod:`essrate.config`) and write
CSV data plus a ``key = value`` summary.  Exit status is 0 on success, 1 for
configuration problems and 2 for numerical failures.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np

from . import analysis, config as cfgmod
from .csvio import read_csv, trajectory_columns, trajectory_rows, write_csv
from .errors import EssRateError, NumericalError
from .integrator import Trajectory, integrate
from .rescaling import check_equivalence, proper_verdict, transform
from .stability import domain_boundary, get_tableau, stability_polynomial

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2


def _header(command: str, cfg: cfgmod.ExperimentConfig | None = None, extra: dict | None = None) -> list[str]:
    lines = [f"essrate {command}"]
    if cfg is not None:
        lines += [f"{k} = {v}" for k, v in sorted(cfg.to_mapping().items())]
    for k, v in sorted((extra or {}).items()):
        lines.append(f"{k} = {v}")
    return lines


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, tuple, np.ndarray)):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


def _write_summary(prefix: str, summary: dict) -> str:
    text = "".join(f"{k} = {_fmt(v)}\n" for k, v in summary.items())
    path = Path(f"{prefix}_summary.txt")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return text


def fit_rate(t, gap, model: str = "auto", envelope: str = "none", window_fraction: float = 0.5):
    """Rate fit on the positive-gap samples with t > 0, after an optional envelope."""
    t = np.asarray(t, dtype=float)
    g = analysis.ENVELOPES[envelope](gap)
    keep = (t > 0) & (g > 0)
    t, g = t[keep], g[keep]
    if model == "power":
        return analysis.fit_power_rate(t, g, window_fraction)
    if model == "exponential":
        return analysis.fit_exponential_rate(t, g, window_fraction)
    return analysis.select_rate_model(t, g, window_fraction)


def _rate_summary(fit, prefix: str = "rate") -> dict:
    return {
        f"{prefix}.model": fit.model,
        f"{prefix}.exponent": fit.exponent,
        f"{prefix}.prefactor_log": fit.prefactor_log,
        f"{prefix}.window": f"{fit.window[0]}:{fit.window[1]}",
        f"{prefix}.r_squared": fit.r_squared,
    }


def _simulate(cfg: cfgmod.ExperimentConfig) -> tuple[cfgmod.ExperimentConfig, Trajectory, dict]:
    problem = cfg.build_problem()
    cfg = cfg.resolve(problem)
    tableau = cfg.tableau.build()
    traj = integrate(
        problem, tableau, cfg.controller, cfg.t0, cfg.y0, cfg.stop,
        divergence_limit=cfg.divergence_limit, stall_limit=cfg.stall_limit,
    )
    summary = {
        "problem": problem.name,
        "tableau": tableau.name,
        "controller": cfg.controller.describe(),
        "steps": traj.n_steps,
        "t_final": traj.t[-1],
        "y_final": traj.y[-1],
        "gap_final": traj.gap[-1],
        "rho_final": traj.rho[-1],
    }
    if cfg.analysis.model != "none":
        try:
            fit = fit_rate(traj.t, traj.gap, cfg.analysis.model, cfg.analysis.envelope,
                           cfg.analysis.window_fraction)
            summary.update(_rate_summary(fit))
        except EssRateError as exc:
            summary["rate.error"] = str(exc)
    return cfg, traj, summary


def _write_trajectory(cfg, traj, path):
    write_csv(path, trajectory_columns(traj.y.shape[1]), trajectory_rows(traj), _header("simulate", cfg))


def cmd_simulate(cfg: cfgmod.ExperimentConfig, out=sys.stdout) -> int:
    cfg, traj, summary = _simulate(cfg)
    _write_trajectory(cfg, traj, f"{cfg.output_prefix}_trajectory.csv")
    out.write(_write_summary(cfg.output_prefix, summary))
    return EXIT_OK


def cmd_theorem4(cfg: cfgmod.ExperimentConfig, out=sys.stdout) -> int:
    r = cfg.build_rescaling()
    if r is None:
        raise cfgmod.ConfigError("theorem4 needs a rescaling section (the clock of the proper representative)")
    cfg, traj, summary = _simulate(cfg)
    report = analysis.theorem4_diagnostic(traj, r, cfg.analysis.k0)
    _write_trajectory(cfg, traj, f"{cfg.output_prefix}_trajectory.csv")
    k = np.arange(1, report.alpha_gap.size)
    write_csv(
        f"{cfg.output_prefix}_theorem4.csv",
        ["k", "alpha_gap", "ratio"],
        zip(k, report.alpha_gap[1:], report.ratios),
        _header("theorem4", cfg),
    )
    summary.update({
        "theorem4.rescaling": r.label,
        "theorem4.k0": report.k0,
        "theorem4.ratio_sup": report.ratio_sup,
        "theorem4.tail_slope": report.tail_slope,
    })
    if traj.capped and traj.n_steps >= analysis.MIN_SAMPLES:
        summary["step_law.exponent"] = analysis.step_law_fit(traj, cfg.analysis.window_fraction)
    out.write(_write_summary(cfg.output_prefix, summary))
    return EXIT_OK


def cmd_rescale_check(cfg: cfgmod.ExperimentConfig, out=sys.stdout) -> int:
    r = cfg.build_rescaling()
    if r is None:
        raise cfgmod.ConfigError("rescale-check needs a rescaling section")
    p1 = cfg.build_problem()
    p2 = cfg.target.build() if cfg.target is not None else transform(p1, r)
    y0 = cfg.y0 if cfg.y0 is not None else tuple([1.0] * p1.dim)
    rep = check_equivalence(p1, p2, r, y0, cfg.check.checkpoints, cfg.check.tol,
                            t0=cfg.check.t0, h_ref=cfg.check.h_ref)
    write_csv(
        f"{cfg.output_prefix}_equivalence.csv",
        ["t", "alpha", "deviation"],
        ((t, r.alpha(t), d) for t, d in zip(rep.checkpoints, rep.deviations)),
        _header("rescale-check", cfg),
    )
    summary = {
        "p1": p1.name,
        "p2": p2.name,
        "rescaling": r.label,
        "max_deviation": rep.max_deviation,
        "tol": cfg.check.tol,
        "pass": rep.passed,
    }
    out.write(_write_summary(cfg.output_prefix, summary))
    return EXIT_OK


def cmd_proper_check(cfg: cfgmod.ExperimentConfig, out=sys.stdout) -> int:
    problem = cfg.build_problem()
    pr = cfg.proper
    verdict = proper_verdict(problem, pr.t_lo, pr.t_hi, pr.n_samples, pr.kappa, pr.source,
                             y0=cfg.y0, t_start=pr.t_start, theta=pr.theta)
    write_csv(f"{cfg.output_prefix}_proper.csv", ["t", "rho"], verdict.samples, _header("proper-check", cfg))
    summary = {
        "problem": problem.name,
        "is_proper": verdict.is_proper,
        "rho_min": verdict.rho_min,
        "rho_max": verdict.rho_max,
        "ratio": verdict.ratio,
        "kappa": verdict.kappa,
        "source": verdict.source,
        "note": "one sampled solution; properness for every solution is not established",
    }
    out.write(_write_summary(cfg.output_prefix, summary))
    return EXIT_OK


def cmd_domain(tableau_name: str, rays: int, out_path: str | None, cfg=None, out=sys.stdout) -> int:
    tableau = cfg.tableau.build() if cfg is not None else get_tableau(tableau_name)
    R = stability_polynomial(tableau)
    pts = domain_boundary(R, rays)
    rows = [(theta, z.real, z.imag) for theta, z in pts]
    header = _header("domain", cfg, {"tableau": tableau.name, "rays": rays,
                                     "stability_polynomial": ", ".join(str(c) for c in R.coeffs)})
    if out_path is None:
        out.write("\n".join(f"# {h}" for h in header) + "\ntheta,re,im\n")
        out.write("".join(f"{_fmt(a)},{_fmt(b)},{_fmt(c)}\n" for a, b, c in rows))
    else:
        write_csv(out_path, ["theta", "re", "im"], rows, header)
    return EXIT_OK


def cmd_rate(path: str, model: str, envelope: str, window: float, out=sys.stdout) -> int:
    cols = read_csv(path)
    if "t" not in cols or "gap" not in cols:
        raise cfgmod.ConfigError(f"{path}: needs columns t and gap")
    fit = fit_rate(cols["t"], cols["gap"], model, envelope, window)
    out.write("".join(f"{k} = {_fmt(v)}\n" for k, v in _rate_summary(fit).items()))
    return EXIT_OK


def _run_cell(text: str) -> dict:
    cfg = cfgmod.loads(text)
    try:
        cfg, traj, summary = _simulate(cfg)
    except NumericalError as exc:
        return {"status": "numerical-error", "message": str(exc)}
    except EssRateError as exc:
        return {"status": "config-error", "message": str(exc)}
    path = f"{cfg.output_prefix}_trajectory.csv"
    _write_trajectory(cfg, traj, path)
    _write_summary(cfg.output_prefix, summary)
    row = {"status": "ok", "steps": traj.n_steps, "t_final": traj.t[-1], "gap_final": traj.gap[-1],
           "trajectory": path}
    if "rate.model" in summary:
        row["rate_model"] = summary["rate.model"]
        row["rate_exponent"] = summary["rate.exponent"]
    r = cfg.build_rescaling()
    if r is not None and traj.n_steps >= 2:
        rep = analysis.theorem4_diagnostic(traj, r, min(cfg.analysis.k0, traj.n_steps - 1))
        row["ratio_sup"] = rep.ratio_sup
        row["tail_slope"] = rep.tail_slope
    return row


def cmd_sweep(cfg: cfgmod.ExperimentConfig, out=sys.stdout) -> int:
    if cfg.sweep is None:
        raise cfgmod.ConfigError("sweep needs sweep.key and sweep.values")
    sw = cfg.sweep
    base = cfg
    cells = []
    for value in sw.values:
        cell = base.with_value(sw.key, value)
        cell = cell.with_value("output.prefix", f"{base.output_prefix}_{sw.key}={value}")
        cells.append((value, cell.dumps()))
    if sw.jobs > 1:
        with ProcessPoolExecutor(max_workers=sw.jobs) as pool:
            results = list(pool.map(_run_cell, [text for _, text in cells]))
    else:
        results = [_run_cell(text) for _, text in cells]
    fields = ["cell", "value", "status", "steps", "t_final", "gap_final", "rate_model",
              "rate_exponent", "ratio_sup", "tail_slope", "trajectory", "message"]
    rows = []
    for i, ((value, _), res) in enumerate(zip(cells, results)):
        rows.append([i, value] + [res.get(f, "") for f in fields[2:]])
    write_csv(f"{base.output_prefix}_index.csv", fields, rows, _header("sweep", base))
    failed = sum(1 for r in results if r["status"] != "ok")
    out.write(f"cells = {len(cells)}\nfailed = {failed}\nindex = {base.output_prefix}_index.csv\n")
    return EXIT_NUMERICAL if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="essrate", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "rescale-check", "proper-check", "theorem4", "sweep"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", help="override output.prefix")
    p = sub.add_parser("domain")
    p.add_argument("--tableau", default="rk4")
    p.add_argument("--rays", type=int, default=360)
    p.add_argument("--config", help="take the (possibly inline) tableau from a config")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p = sub.add_parser("rate")
    p.add_argument("--csv", required=True, help="trajectory CSV")
    p.add_argument("--model", choices=["auto", "power", "exponential"], default="auto")
    p.add_argument("--envelope", choices=sorted(analysis.ENVELOPES), default="none")
    p.add_argument("--window", type=float, default=0.5)
    return parser


COMMANDS = {
    "simulate": cmd_simulate,
    "rescale-check": cmd_rescale_check,
    "proper-check": cmd_proper_check,
    "theorem4": cmd_theorem4,
    "sweep": cmd_sweep,
}


def run(argv: Sequence[str] | None = None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    args = build_parser().parse_args(argv)
    try:
        if args.command == "domain":
            cfg = cfgmod.load(args.config) if args.config else None
            return cmd_domain(args.tableau, args.rays, args.out, cfg, out)
        if args.command == "rate":
            return cmd_rate(args.csv, args.model, args.envelope, args.window, out)
        cfg = cfgmod.load(args.config)
        if args.out:
            cfg = cfg.with_value("output.prefix", args.out)
        return COMMANDS[args.command](cfg, out)
    except NumericalError as exc:
        err.write(f"essrate: numerical failure: {exc}\n")
        return EXIT_NUMERICAL
    except (EssRateError, ValueError, OSError) as exc:
        err.write(f"essrate: {exc}\n")
        return EXIT_CONFIG


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
