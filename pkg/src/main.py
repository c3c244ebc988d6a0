"""Main entry point for the application"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from src.campaign import compare_metrics, compare_random, evaluate_batch, run_campaign
from src.errors import AmbientMismatch, ConfigError, GrassfieldError, ModelEvaluationError, OutsideSimplex
from src.grassmann import (
    MetricKind,
    distance_equidim,
    distance_infinite,
    principal_angles,
)
from src.interpolation import MODES, predict
from src.models import build_model
from src.refinement import subspace_distance, vertex_error
from src.results import ResultsWriter, load_decompositions, load_mesh
from src.run_config import load_run_config, load_saved_run_config
from src.snapshot import FieldSnapshot, RankPolicy, decompose, reconstruct
from src.snapshot_storage import read_snapshot, write_snapshot

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MODEL = 3
EXIT_OUTSIDE = 4


def banner(title: str):
    print("=" * 60)
    print(title)
    print("=" * 60)
    print()


def cmd_run(args) -> int:
    """Run an adaptive campaign and write its results directory"""
    overrides = list(args.set or [])
    if args.jobs is not None:
        overrides.append(f"jobs={args.jobs}")
    config = load_run_config(args.config, overrides)
    output_dir = Path(args.output) if args.output else config.output_dir
    verbose = not args.quiet

    if verbose:
        banner("grassfield - Adaptive Grassmann Sampling")
        print("Step 1: Building model...")
    model = build_model(config.model)
    if verbose:
        print(f"[INFO] Model: {config.model.kind}, field {config.model.n_f}x{config.model.m_f}")
        print()
        print("Step 2: Running campaign...")
    result = run_campaign(model, config.campaign, verbose=verbose)
    if verbose:
        print()
        print(f"Step 3: Writing results to {output_dir}...")
    summary = ResultsWriter(output_dir, verbose=verbose).save_run(result, config, html=args.html)

    if verbose:
        print()
        banner("SUMMARY")
        print(f"Stop reason: {summary['stop_reason']}")
        print(f"Levels: {summary['n_levels']}")
        print(f"Model evaluations: {summary['n_evaluations']}")
        print(f"Simplices: {summary['n_simplices']}")
        print(f"Mean element distance: {summary['initial_mean_distance']:.6g} -> {summary['final_mean_distance']:.6g}")
        if summary["budget_exhausted"]:
            print("[WARNING] Evaluation budget exhausted before convergence")
        print()
    return EXIT_OK


def cmd_distance(args) -> int:
    """Principal angles and distances between the left subspaces of two snapshots"""
    policy = RankPolicy.parse(args.rank)
    snapshot_a, snapshot_b = read_snapshot(args.file_a), read_snapshot(args.file_b)
    if snapshot_a.shape != snapshot_b.shape:
        raise AmbientMismatch(
            f"Field shapes differ: {snapshot_a.shape[0]}x{snapshot_a.shape[1]} "
            f"and {snapshot_b.shape[0]}x{snapshot_b.shape[1]}"
        )
    a = decompose(snapshot_a, policy)
    b = decompose(snapshot_b, policy)
    angles = principal_angles(a.left, b.left).angles
    print(f"Ranks: {a.rank} and {b.rank} (ambient dimension {a.left.ambient_dim})")
    print("Principal angles: " + " ".join(f"{theta:.12g}" for theta in angles))
    if not args.all:
        value = subspace_distance(args.metric, a.left, b.left, policy, scaled_procrustes=args.scaled)
        print(f"{MetricKind.parse(args.metric).value} distance: {value:.12g}")
        return EXIT_OK

    print(f"{'metric':<12}{'G(p,n)':>20}{'G(inf,inf)':>20}")
    for kind in MetricKind:
        for scaled in ((False, True) if kind is MetricKind.PROCRUSTES else (False,)):
            name = kind.value + (" x2" if scaled else "")
            infinite = distance_infinite(kind, a.left, b.left, scaled_procrustes=scaled)
            if a.rank == b.rank:
                equal = f"{distance_equidim(kind, a.left, b.left, scaled_procrustes=scaled):.12g}"
            else:
                equal = "n/a"
            print(f"{name:<12}{equal:>20}{infinite:>20.12g}")
    return EXIT_OK


def cmd_interpolate(args) -> int:
    """Interpolated field at a new parameter point from a finished run"""
    results_dir = Path(args.results_dir)
    config = load_saved_run_config(results_dir)
    if config is None:
        raise ConfigError(f"no run configuration in {results_dir}", key="results_dir")
    campaign = config.campaign
    mode = args.mode or campaign.interpolation_mode

    mesh = load_mesh(results_dir)
    decompositions = load_decompositions(results_dir, campaign.rank_policy)
    xi = np.asarray(args.xi, dtype=np.float64)
    if xi.size != mesh.n_d:
        raise ConfigError(f"expected {mesh.n_d} coordinates, got {xi.size}", key="xi")

    simplex_id, weights, predicted = predict(mesh, decompositions, xi, mode=mode)
    field = reconstruct(predicted)
    output = Path(args.output) if args.output else results_dir / "interpolated.gfld"
    write_snapshot(output, FieldSnapshot(field, xi))
    print(f"Simplex: {simplex_id} (vertices {list(mesh.vertex_ids(simplex_id))})")
    print("Weights: " + " ".join(f"{w:.6g}" for w in weights))
    print(f"Rank: {predicted.rank}")
    print(f"[SUCCESS] Interpolated field written to {output}")

    if args.verify:
        truth = evaluate_batch(build_model(config.model), [xi], verbose=False)[0]
        actual = decompose(truth, campaign.rank_policy)
        theta = vertex_error(actual, predicted, campaign.metric, campaign.rank_policy, campaign.scaled_procrustes)
        error = float(np.linalg.norm(truth.field - field))
        norm = float(np.linalg.norm(truth.field))
        print(f"Average principal angle: {theta:.6g}")
        print(f"Frobenius error: {error:.6g} (relative {error / norm if norm else 0.0:.3g})")
    return EXIT_OK


def cmd_compare_random(args) -> int:
    """Adaptive campaign against a random design of equal size"""
    overrides = list(args.set or []) + [f"budget={args.n}"]
    if args.jobs is not None:
        overrides.append(f"jobs={args.jobs}")
    config = load_run_config(args.config, overrides)
    output_dir = Path(args.output) if args.output else config.output_dir
    verbose = not args.quiet

    if verbose:
        banner("grassfield - Adaptive vs Random Sampling")
    model = build_model(config.model)
    adaptive = run_campaign(model, config.campaign, verbose=verbose)
    writer = ResultsWriter(output_dir, verbose=verbose)
    writer.save_run(adaptive, config)
    adaptive_report, random_report = compare_random(model, config.campaign, verbose=verbose, adaptive=adaptive)
    summary = writer.save_comparison(adaptive_report, random_report)

    if verbose:
        print()
        banner("SUMMARY")
        for label in (adaptive_report.label, random_report.label):
            stats = summary[label]
            print(
                f"{label:<10} simplices {stats['n_simplices']:>5}  "
                f"theta {stats['theta_mean']:.4g} +/- {stats['theta_std']:.3g}  "
                f"frobenius {stats['frobenius_mean']:.4g} +/- {stats['frobenius_std']:.3g}"
            )
        print()
    return EXIT_OK


def cmd_compare_metrics(args) -> int:
    """Level-1 rankings and convergence histories under each metric"""
    overrides = list(args.set or [])
    if args.jobs is not None:
        overrides.append(f"jobs={args.jobs}")
    config = load_run_config(args.config, overrides)
    output_dir = Path(args.output) if args.output else config.output_dir
    verbose = not args.quiet

    if verbose:
        banner("grassfield - Metric Comparison")
    comparison = compare_metrics(build_model(config.model), config.campaign, verbose=verbose)
    ResultsWriter(output_dir, verbose=verbose).save_metric_comparison(comparison)
    if verbose:
        print()
        for row in comparison.correlations.itertuples():
            print(f"Spearman {row.metric_a} vs {row.metric_b}: {row.spearman:.4f}")
    return EXIT_OK


def cmd_export_mesh(args) -> int:
    """Re-export the mesh tables of a finished run (optionally as an HTML figure)"""
    results_dir = Path(args.results_dir)
    mesh = load_mesh(results_dir)
    output_dir = Path(args.output) if args.output else results_dir
    ResultsWriter(output_dir).save_mesh(mesh, html=args.html)
    print(f"[SUCCESS] Exported {mesh.n_points} points and {mesh.n_simplices} simplices to {output_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Adaptive sampling of parameter spaces driven by Grassmann-manifold distances"
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    run = subparsers.add_parser("run", help="Run an adaptive campaign")
    run.add_argument("config", help="Run configuration (JSON)")
    run.add_argument("--set", action="append", metavar="KEY=VALUE", help="Override a configuration entry")
    run.add_argument("--jobs", type=int, default=None, help="Parallel model evaluations")
    run.add_argument("--output", default=None, help="Results directory (overrides output_dir)")
    run.add_argument("--html", action="store_true", help="Also write HTML figures")
    run.add_argument("--quiet", action="store_true", help="Suppress progress output")
    run.set_defaults(handler=cmd_run)

    distance = subparsers.add_parser("distance", help="Distance between two snapshot files")
    distance.add_argument("file_a")
    distance.add_argument("file_b")
    distance.add_argument("--metric", default="grassmann", choices=[k.value for k in MetricKind])
    distance.add_argument("--rank", default="tolerance", help="tolerance[:scale] | absolute:<tol> | global:<r>")
    distance.add_argument("--scaled", action="store_true", help="Factor-2 Procrustes convention")
    distance.add_argument("--all", action="store_true", help="Print every metric in both conventions")
    distance.set_defaults(handler=cmd_distance)

    interpolate = subparsers.add_parser("interpolate", help="Interpolate a field from a finished run")
    interpolate.add_argument("results_dir")
    interpolate.add_argument("xi", type=float, nargs="+", help="Parameter point in the unit cube")
    interpolate.add_argument("--verify", action="store_true", help="Evaluate the model and report the error")
    interpolate.add_argument("--output", default=None, help="Output snapshot file (.gfld or .csv)")
    interpolate.add_argument("--mode", default=None, choices=list(MODES))
    interpolate.set_defaults(handler=cmd_interpolate)

    compare = subparsers.add_parser("compare-random", help="Adaptive vs random design of equal size")
    compare.add_argument("config")
    compare.add_argument("n", type=int, help="Evaluation budget")
    compare.add_argument("--set", action="append", metavar="KEY=VALUE")
    compare.add_argument("--jobs", type=int, default=None)
    compare.add_argument("--output", default=None)
    compare.add_argument("--quiet", action="store_true")
    compare.set_defaults(handler=cmd_compare_random)

    metrics = subparsers.add_parser("compare-metrics", help="Same campaign under every metric")
    metrics.add_argument("config")
    metrics.add_argument("--set", action="append", metavar="KEY=VALUE")
    metrics.add_argument("--jobs", type=int, default=None)
    metrics.add_argument("--output", default=None)
    metrics.add_argument("--quiet", action="store_true")
    metrics.set_defaults(handler=cmd_compare_metrics)

    export = subparsers.add_parser("export-mesh", help="Export the mesh of a finished run")
    export.add_argument("results_dir")
    export.add_argument("--output", default=None)
    export.add_argument("--html", action="store_true")
    export.set_defaults(handler=cmd_export_mesh)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, dispatch to a subcommand and map failures to exit codes"""
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as e:
        print(f"[ERROR] Configuration error: {e}")
        return EXIT_CONFIG
    except ModelEvaluationError as e:
        where = f" at xi={e.xi}" if e.xi is not None else ""
        print(f"[ERROR] Model evaluation failed{where}: {e}")
        return EXIT_MODEL
    except OutsideSimplex as e:
        print(f"[ERROR] {e}")
        return EXIT_OUTSIDE
    except GrassfieldError as e:
        print(f"[ERROR] {type(e).__name__}: {e}")
        return EXIT_CONFIG
    except KeyboardInterrupt:
        print("\n[INFO] Interrupted by user")
        return 130


if __name__ == "__main__":
    sys.exit(main())
