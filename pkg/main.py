#!/usr/bin/env python3
"""npl-lab - CLI Entry Point.

Usage:
    python main.py solve --config FILE [options]            # Solve the Dirichlet problem
    python main.py exponent --config FILE [options]         # Growth / non-degeneracy fits
    python main.py verify-profiles [SELECTOR] [options]     # Residual checks of closed-form profiles
    python main.py reference-exponents [--p ...] [--theta ...]
    python main.py residual-check --config FILE [--solution PATH]

Common Options:
    --config PATH         Experiment configuration (INI sections)
    --out DIR             Output directory for artifacts
    --threads N           Worker threads for residual evaluation (default: 1)
    --seed N              Seed for Hoelder pair sampling (default: 0)
    --log-dir DIR         Run log directory (default: ./logs)
    --verbose             Debug logging

Exit status:
    0 success, 1 numerical failure, 2 configuration error

Examples:
    # Affine sanity check
    python main.py solve --config configs/affine.ini

    # Critical growth exponent at the interior minimum
    python main.py exponent --config configs/critical_growth.ini --threads 8

    # All profile oracles
    python main.py verify-profiles all --out out/profiles
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Tuple

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent))

from core.errors import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, ConfigError, LabError  # noqa: E402

logger = logging.getLogger("npl_lab")

BANNER = "=" * 70


def _banner(title: str) -> None:
    print("\n" + BANNER)
    print(f"  {title}")
    print(BANNER)


def _app():
    from core.config import build_config

    return build_config(Path(__file__).resolve().parent)


def _load(args):
    from core.config import load_experiment_config

    if not args.config:
        raise ConfigError("--config is required for this command", "config")
    return load_experiment_config(_app().resolve_config(args.config))


def _output_dir(args, config=None) -> Path:
    if args.out:
        return Path(args.out)
    if config is not None and config.output.directory:
        directory = Path(config.output.directory)
        return directory if directory.is_absolute() else config.path.parent / directory
    stem = config.path.stem if config is not None else args.command
    return Path("out") / stem


def _run_logger(args):
    from run_logging.run_logger import RunLogger

    log_dir = Path(args.log_dir) if args.log_dir else _app().log_dir
    return RunLogger(log_dir, args.command)


def _solve(experiment, out_dir: Path, run_logger, run_id: int) -> Tuple[object, object]:
    """Solve (plain or bracketed) and write solution, report and iteration log."""
    from core.config import config_summary
    from core.experiment import bracket_fields
    from run_logging.artifacts import save_solution, write_iteration_log, write_solve_report
    from solver.dirichlet import perron_bracket, solve_dirichlet
    from solver.metrics_logger import TensorboardLogger

    config = experiment.config
    tensorboard = TensorboardLogger(run_logger.run_dir(run_id) / "tensorboard", enabled=config.output.tensorboard)
    tensorboard.log_text("config", "\n".join(config_summary(config)))

    def on_sweep(iteration: int, residual: float, dt_min: float) -> None:
        run_logger.log_sweep(run_id, iteration, residual, dt_min)
        tensorboard.log_sweep(iteration, residual, dt_min)

    try:
        bracket = bracket_fields(experiment)
        if bracket is None:
            u, report = solve_dirichlet(experiment.spec, experiment.grid, experiment.solver, on_sweep=on_sweep)
        else:
            print(f"🔒 Perron bracket: {config.solver.bracket}")
            u, report = perron_bracket(
                experiment.spec, experiment.grid, experiment.solver, bracket[0], bracket[1], on_sweep=on_sweep
            )
    finally:
        tensorboard.close()
    logger.debug("tensorboard: %s", tensorboard.get_stats())
    run_logger.log_report(run_id, "solve", report)

    save_solution(u, out_dir)
    write_solve_report(
        out_dir / "report.json",
        report,
        extra={
            "problem": {
                "p": experiment.spec.p,
                "theta": experiment.spec.theta,
                "sigma": experiment.spec.sigma,
                "m": experiment.spec.m,
                "henon_mode": experiment.spec.henon_mode,
            },
            "grid": experiment.grid.metadata(),
            "envelope": experiment.solver.envelope.name,
            "degeneracy": experiment.solver.degeneracy,
            "upwind": experiment.solver.upwind,
            "boundary_eval": experiment.solver.boundary_eval,
            "bracket": config.solver.bracket,
            "profile": config.profile.name,
        },
    )
    write_iteration_log(out_dir / "iterations.txt", report)
    return u, report


def _dead_core(experiment, u, out_dir: Path) -> Optional[Dict[str, object]]:
    """dead_core.json for Henon problems; exact ball count when the profile fixes the core."""
    from analysis.regularity import ball_node_count, positivity_report
    from run_logging.artifacts import write_dead_core

    profile = experiment.profile
    henon_profile = profile is not None and profile.name.startswith("henon")
    if not (experiment.spec.henon_mode or henon_profile):
        return None
    tol = experiment.config.analysis.positivity_tol or 1e-10
    report = positivity_report(u, tol)
    exact = None
    if henon_profile:
        exact = ball_node_count(experiment.grid, profile.extras["x0"], float(profile.params["r"]))
    write_dead_core(out_dir / "dead_core.json", report, experiment.grid, exact)
    return {"dead_core_count": report.dead_core_count, "exact_ball_count": exact}


def _print_report(report) -> None:
    marker = "✅" if report.converged else "⚠️ "
    print(f"{marker} iterations={report.iterations:,} residual={report.final_residual:.3e} converged={report.converged}")
    for flag in report.flags:
        print(f"   ⚠️  {flag}")


def cmd_solve(args) -> int:
    """Solve the configured Dirichlet problem and write its artifacts."""
    from core.config import config_summary
    from core.experiment import build_experiment

    config = _load(args)
    experiment = build_experiment(config, workers=args.threads)
    out_dir = _output_dir(args, config)

    _banner("🧮 NPL-LAB - Dirichlet Solve")
    print("\n📋 Configuration:")
    for line in config_summary(config):
        print(f"   {line}")
    print(f"   Output: {out_dir}")
    print()

    run_logger = _run_logger(args)
    run_id = run_logger.start_run(config.path, args.threads)
    print("🚀 Solving...")
    u, report = _solve(experiment, out_dir, run_logger, run_id)
    outcome: Dict[str, object] = {"final_residual": report.final_residual, "converged": report.converged}
    dead_core = _dead_core(experiment, u, out_dir)
    if dead_core:
        outcome.update(dead_core)
        print(f"📊 Dead core: {dead_core['dead_core_count']} nodes (exact ball: {dead_core['exact_ball_count']})")
    run_logger.finish_run(run_id, outcome)

    _print_report(report)
    print(f"✅ Artifacts written to {out_dir}")
    return EXIT_OK if report.converged else EXIT_NUMERICAL


def _exponent_field(args, experiment, out_dir: Path, run_logger, run_id: int):
    """The field to fit: a fresh solve, the profile sampled on the grid, or a stored solution."""
    from core.errors import ArtifactError
    from lattice.grid import sample
    from run_logging.artifacts import load_solution

    config = experiment.config
    source = config.analysis.source
    if source == "inline":
        print("🚀 Solving inline...")
        u, report = _solve(experiment, out_dir, run_logger, run_id)
        _print_report(report)
        _dead_core(experiment, u, out_dir)
        return u, report
    if source == "profile":
        if experiment.profile is None:
            raise ConfigError("source = profile needs a [profile] entry", "source")
        return sample(experiment.profile.value, experiment.grid, tag=experiment.profile.name), None

    path = Path(source)
    if not path.is_absolute():
        path = config.path.parent / path
    u = load_solution(path)
    if not u.grid.same_as(experiment.grid):
        raise ArtifactError(f"solution {path} lives on a different grid than the configuration")
    print(f"📂 Loaded solution from {path}")
    return u, None


def _target_exponent(experiment) -> float:
    config = experiment.config
    if config.analysis.target is not None:
        return float(config.analysis.target)
    profile = experiment.profile
    if profile is not None and "gamma" in profile.extras:
        return float(profile.extras["gamma"])
    spec = experiment.spec
    m = spec.m if spec.henon_mode else 0.0
    return (2.0 + spec.theta + config.analysis.weight_alpha) / (1.0 + spec.theta - m)


def cmd_exponent(args) -> int:
    """Fit growth and non-degeneracy exponents around x0."""
    from analysis.growth import growth_exponent, nondegeneracy_curve, regularity_hypotheses, regularity_scale
    from analysis.regularity import holder_gradient_seminorm
    from core.experiment import build_experiment, resolve_x0
    from run_logging.artifacts import write_fit, write_json

    config = _load(args)
    experiment = build_experiment(config, workers=args.threads)
    out_dir = _output_dir(args, config)
    analysis = config.analysis
    csv = "csv" in config.output.formats

    _banner("📈 NPL-LAB - Exponent Fit")
    run_logger = _run_logger(args)
    run_id = run_logger.start_run(config.path, args.threads)
    u, report = _exponent_field(args, experiment, out_dir, run_logger, run_id)

    x0 = resolve_x0(u, analysis.x0)
    target = _target_exponent(experiment)
    spec = experiment.spec
    hypotheses = regularity_hypotheses(spec.theta, spec.sigma, spec.m if spec.henon_mode else 0.0, analysis.weight_alpha)
    extra = {"x0": x0, "source": analysis.source, "hypotheses": hypotheses}
    print(f"📍 x0 = {[round(float(v), 6) for v in x0]}  radii = {list(analysis.radii)}")

    outcome: Dict[str, object] = {"target": target}
    summary: Optional[Tuple[float, str]] = None
    if analysis.mode in ("growth", "both"):
        fit = growth_exponent(u, x0, analysis.radii)
        fit.target = target
        write_fit(out_dir, "growth", fit, dict(extra, delta=abs(fit.exponent - target)), csv=csv)
        outcome["growth_exponent"] = fit.exponent
        summary = (fit.exponent, "growth")
    if analysis.mode in ("nondegeneracy", "both"):
        curve = nondegeneracy_curve(u, x0, analysis.radii, target)
        write_fit(out_dir, "nondegeneracy", curve, dict(extra, delta=abs(curve.exponent - target)), csv=csv)
        outcome["nondegeneracy_constant"] = curve.constant
        print(f"📊 non-degeneracy constant min sup(u - u(x0))/r^{target:g} = {curve.constant:.6g}")
        if summary is None:
            summary = (curve.exponent, "nondegeneracy")

    if analysis.alpha is not None:
        radius = analysis.subdomain_radius or 0.5 * experiment.grid.domain.radius
        seminorm = holder_gradient_seminorm(u, analysis.alpha, (x0, radius), seed=args.seed)
        scale = regularity_scale(u, spec.rho_field, spec.f_field, spec.theta, spec.sigma)
        write_json(
            out_dir / "regularity.json",
            {
                "kind": "gradient_holder",
                "alpha": analysis.alpha,
                "subdomain": {"center": x0, "radius": radius},
                "seed": args.seed,
                "seminorm": seminorm,
                "scale": scale,
                "normalized": seminorm / scale if scale > 0 else None,
            },
        )
        print(f"📊 [Du]_C^{analysis.alpha:g} = {seminorm:.6g} (normalized {seminorm / scale if scale > 0 else float('nan'):.6g})")

    if report is not None:
        outcome["final_residual"] = report.final_residual
    run_logger.finish_run(run_id, outcome)

    exponent, kind = summary
    print(f"exponent={exponent:.6f} target={target:.6f} delta={abs(exponent - target):.6f}")
    print(f"✅ {kind} fit written to {out_dir}")
    if report is not None and not report.converged:
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_verify_profiles(args) -> int:
    """Residual orders of the closed-form profiles between h = 1/64 and h = 1/128."""
    from analysis.profile_checks import verify_profiles
    from run_logging.artifacts import write_verdicts

    out_dir = Path(args.out) if args.out else Path("out") / "verify_profiles"
    _banner("🔍 NPL-LAB - Profile Verification")
    verdicts = verify_profiles(args.selector, workers=args.threads)
    write_verdicts(out_dir, verdicts)

    for verdict in verdicts:
        marker = "✅" if verdict.verdict == "PASS" else "⚠️ "
        order = "n/a" if verdict.order is None else f"{verdict.order:.3f}"
        residuals = ", ".join(f"{r:.3e}" for r in verdict.sup_residuals)
        print(f"{marker} {verdict.profile:<18} {verdict.verdict:<12} order={order:<8} sup|res|=[{residuals}]")
    print(f"\n📊 Report: {out_dir / 'verify_profiles.json'}")
    return EXIT_OK


def cmd_reference_exponents(args) -> int:
    """Closed-form exponent table for every (p, theta) pair."""
    from pde.profiles import reference_exponents
    from run_logging.artifacts import reference_frame, write_csv

    out_dir = Path(args.out) if args.out else Path("out")
    rows = [reference_exponents(p, theta) for p in args.p for theta in args.theta]
    frame = reference_frame(rows)
    path = write_csv(out_dir / "reference_exponents.csv", frame)

    _banner("📐 NPL-LAB - Reference Exponents")
    print(frame.to_string(index=False))
    flagged = sorted({row.p for row in rows if not row.planar_meaningful})
    if flagged:
        print(f"\n⚠️  alpha_sharp / alpha_star are only meaningful for p > 2 (flagged: {flagged})")
    print(f"\n✅ Table written to {path}")
    return EXIT_OK


def cmd_residual_check(args) -> int:
    """Residual of a stored solution under all three envelope modes."""
    import numpy as np

    from analysis.growth import regularity_scale
    from analysis.regularity import holder_gradient_seminorm
    from core.errors import ArtifactError
    from core.experiment import build_experiment
    from pde.operators import Regularized, SubEnvelope, SuperEnvelope, residual
    from run_logging.artifacts import load_solution, write_json

    config = _load(args)
    experiment = build_experiment(config, workers=args.threads)
    out_dir = _output_dir(args, config)
    path = Path(args.solution) if args.solution else out_dir / "solution.bin"
    u = load_solution(path)
    if not u.grid.same_as(experiment.grid):
        raise ArtifactError(f"solution {path} lives on a different grid than the configuration")

    _banner("🧪 NPL-LAB - Residual Check")
    nodes = experiment.grid.interior
    norms: Dict[str, float] = {}
    for mode in (Regularized(), SubEnvelope(), SuperEnvelope()):
        res = residual(u, experiment.spec, mode, degeneracy="central", workers=args.threads)
        norms[mode.name] = float(np.max(np.abs(res.values[nodes]))) if nodes.size else 0.0
        print(f"   {mode.name:<14} sup|res| = {norms[mode.name]:.6e}")

    payload: Dict[str, object] = {"kind": "residual_check", "solution": path.name, "sup_residual": norms}
    if config.analysis.alpha is not None:
        spec = experiment.spec
        center = experiment.grid.center
        radius = config.analysis.subdomain_radius or 0.5 * experiment.grid.domain.radius
        seminorm = holder_gradient_seminorm(u, config.analysis.alpha, (center, radius), seed=args.seed)
        scale = regularity_scale(u, spec.rho_field, spec.f_field, spec.theta, spec.sigma)
        payload["gradient_holder"] = {
            "alpha": config.analysis.alpha,
            "seed": args.seed,
            "seminorm": seminorm,
            "scale": scale,
            "normalized": seminorm / scale if scale > 0 else None,
        }
        print(f"   [Du]_C^{config.analysis.alpha:g} / scale = {seminorm / scale if scale > 0 else float('nan'):.6e}")
    write_json(out_dir / "residual_check.json", payload)
    print(f"\n✅ Written {out_dir / 'residual_check.json'}")
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "exponent": cmd_exponent,
    "verify-profiles": cmd_verify_profiles,
    "reference-exponents": cmd_reference_exponents,
    "residual-check": cmd_residual_check,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=str, default=None, help='Experiment configuration file')
    common.add_argument('--out', type=str, default=None, help='Output directory for artifacts')
    common.add_argument('--threads', type=int, default=1, help='Worker threads (default: 1)')
    common.add_argument('--seed', type=int, default=0, help='Pair-sampling seed (default: 0)')
    common.add_argument('--log-dir', type=str, default=None, help='Run log directory (default: ./logs)')
    common.add_argument('--verbose', action='store_true', help='Debug logging')

    parser = argparse.ArgumentParser(
        description="npl-lab - normalized p-Laplacian numerical laboratory",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__,
    )
    subparsers = parser.add_subparsers(dest='command', help='Command to run')

    subparsers.add_parser('solve', parents=[common], help='Solve the Dirichlet problem')
    subparsers.add_parser('exponent', parents=[common], help='Growth / non-degeneracy exponent fits')

    verify_parser = subparsers.add_parser('verify-profiles', parents=[common], help='Check closed-form profiles')
    verify_parser.add_argument('selector', nargs='?', default='all',
                               help='henon, henon-absorption, henon-calibrated, nonuniqueness, power, '
                                    'barrier-nondeg, barrier-hopf or all (default: all)')

    reference_parser = subparsers.add_parser('reference-exponents', parents=[common],
                                             help='Closed-form exponent table')
    reference_parser.add_argument('--p', type=float, nargs='+', default=[1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 10.0],
                                  help='Values of p (> 1)')
    reference_parser.add_argument('--theta', type=float, nargs='+', default=[1.0],
                                  help='Values of theta (> 0)')

    check_parser = subparsers.add_parser('residual-check', parents=[common],
                                         help='Residual of a stored solution under all envelopes')
    check_parser.add_argument('--solution', type=str, default=None,
                              help='Solution artifact (.bin or .json); default <out>/solution.bin')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return EXIT_CONFIG

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    if args.threads < 1:
        print("❌ --threads must be >= 1")
        return EXIT_CONFIG

    try:
        return COMMANDS[args.command](args)
    except LabError as exc:
        print(f"❌ {type(exc).__name__}: {exc}")
        logger.debug("command %s failed", args.command, exc_info=True)
        return exc.exit_code
    except OSError as exc:
        print(f"❌ I/O error: {exc}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
