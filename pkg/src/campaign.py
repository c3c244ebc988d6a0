"""Adaptive sampling campaign and its comparisons

A campaign starts from the hypercube corners plus the centroid, scores every
element by the sum of pairwise subspace distances of its vertex snapshots,
refines the elements above the α-quantile, measures the interpolation error
at each new sample and stops once every element is converged, the evaluation
budget is spent, or the level limit is reached.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats
from tqdm import tqdm

from src.config import DUPLICATE_TOL
from src.errors import (
    BudgetExhausted,
    ModelEvaluationError,
    NonPositiveSingular,
    SingularProduct,
)
from src.grassmann import MetricKind
from src.interpolation import predict
from src.mesh import SimplexMesh, initial_design
from src.refinement import (
    CampaignConfig,
    ConvergenceTracker,
    ElementScore,
    VertexErrorRecord,
    element_score,
    mean_element_distance,
    select_for_refinement,
    vertex_error,
)
from src.snapshot import FieldSnapshot, SnapshotDecomposition, decompose, reconstruct

STOP_CONVERGED = "converged"
STOP_BUDGET = "budget_exhausted"
STOP_MAX_LEVELS = "max_levels"


@dataclass
class LevelRecord:
    """What happened at one refinement level"""

    level: int
    n_elements: int
    mean_distance: float
    n_converged: int
    selected: List[int] = field(default_factory=list)
    new_point_ids: List[int] = field(default_factory=list)
    new_points: List[List[float]] = field(default_factory=list)
    thetas: List[float] = field(default_factory=list)

    def to_event(self) -> Dict:
        return {
            "event": "level",
            "level": self.level,
            "n_e": self.n_elements,
            "mean_distance": self.mean_distance,
            "n_converged": self.n_converged,
            "refined": self.selected,
            "new_points": [
                {"id": pid, "xi": xi, "theta": theta}
                for pid, xi, theta in zip(self.new_point_ids, self.new_points, self.thetas)
            ],
        }


@dataclass
class CampaignResult:
    config: CampaignConfig
    mesh: SimplexMesh
    snapshots: Dict[int, FieldSnapshot]
    decompositions: Dict[int, SnapshotDecomposition]
    point_levels: Dict[int, int]
    errors: Dict[int, VertexErrorRecord]
    level_scores: List[List[ElementScore]]
    level_flags: List[np.ndarray]
    levels: List[LevelRecord]
    events: List[Dict]
    stop_reason: str = STOP_MAX_LEVELS

    @property
    def n_evaluations(self) -> int:
        return len(self.snapshots)

    @property
    def mean_distances(self) -> List[float]:
        return [record.mean_distance for record in self.levels]

    @property
    def added_point_ids(self) -> List[int]:
        return [pid for pid, level in sorted(self.point_levels.items()) if level > 0]


def evaluate_batch(
    model,
    points: Sequence[Sequence[float]],
    jobs: int = 1,
    verbose: bool = True,
    desc: str = "Evaluating model",
) -> List[FieldSnapshot]:
    """
    Evaluate the model at every point, up to `jobs` at a time.

    Results keep the order of `points`. Any failure, including an all-zero
    field, is raised as a ModelEvaluationError carrying the offending point.
    """

    def run_one(xi):
        try:
            snapshot = model.evaluate(xi)
        except ModelEvaluationError as e:
            if e.xi is None:
                e.xi = [float(x) for x in xi]
            raise
        except Exception as e:
            raise ModelEvaluationError(f"Model evaluation failed at {list(map(float, xi))}: {e}", xi=xi)
        if not np.any(snapshot.field):
            raise ModelEvaluationError(f"Model returned a zero field at {list(map(float, xi))}", xi=xi)
        return snapshot

    points = [np.asarray(p, dtype=np.float64) for p in points]
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = pool.map(run_one, points)
        return list(tqdm(results, total=len(points), desc=desc, unit="eval", disable=not verbose, leave=False))


def is_duplicate(
    point: np.ndarray,
    known: np.ndarray,
    pending: Sequence[np.ndarray] = (),
    tol: float = DUPLICATE_TOL,
) -> bool:
    """True when `point` lies within `tol` of a mesh point or of an earlier sample of the same level"""
    candidates = np.vstack([known] + [np.reshape(p, (1, -1)) for p in pending])
    return bool(np.min(np.linalg.norm(candidates - point, axis=1)) <= tol)


def score_mesh(
    mesh: SimplexMesh, decompositions: Dict[int, SnapshotDecomposition], config: CampaignConfig
) -> List[ElementScore]:
    return [
        element_score(
            [decompositions[v] for v in mesh.vertex_ids(k)],
            config.metric,
            config.rank_policy,
            simplex_id=k,
            scaled_procrustes=config.scaled_procrustes,
        )
        for k in range(mesh.n_simplices)
    ]


def estimate_vertex_error(
    mesh: SimplexMesh,
    decompositions: Dict[int, SnapshotDecomposition],
    simplex_id: int,
    point: np.ndarray,
    actual: SnapshotDecomposition,
    config: CampaignConfig,
) -> float:
    """θ̃ at a new sample, interpolated from the element it was drawn in; π/2 when no chart exists"""
    try:
        _, _, predicted = predict(
            mesh, decompositions, point, simplex_id=simplex_id, mode=config.interpolation_mode
        )
    except (SingularProduct, NonPositiveSingular):
        return math.pi / 2
    return vertex_error(actual, predicted, config.metric, config.rank_policy, config.scaled_procrustes)


def _jitter_event(mesh: SimplexMesh, level: int) -> Dict:
    return {"event": "jitter", "level": level, "n_points": mesh.n_points}


def run_campaign(
    model,
    config: CampaignConfig,
    verbose: bool = True,
    raise_on_budget: bool = False,
) -> CampaignResult:
    """
    Run the adaptive campaign.

    Each level scores the current mesh, updates the convergence flags and
    refines the selected elements in simplex-id order. The scores of the
    terminal mesh are recorded as a final level without refinements.

    Args:
        model: object with `evaluate(xi) -> FieldSnapshot`
        config: validated campaign settings
        verbose: print progress lines and bars
        raise_on_budget: raise BudgetExhausted (with the result attached) instead
            of returning when the budget runs out

    Returns:
        CampaignResult with `stop_reason` set
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    policy = config.rank_policy

    mesh = initial_design(config.n_d)
    events: List[Dict] = [_jitter_event(mesh, 0)] if mesh.jittered else []

    if verbose:
        print(f"[INFO] Initial design: {mesh.n_points} points, {mesh.n_simplices} simplices")
    snapshots = dict(enumerate(evaluate_batch(model, mesh.points, config.jobs, verbose, "Initial design")))
    decompositions = {pid: decompose(snapshot, policy) for pid, snapshot in snapshots.items()}
    point_levels = {pid: 0 for pid in snapshots}

    result = CampaignResult(
        config=config,
        mesh=mesh,
        snapshots=snapshots,
        decompositions=decompositions,
        point_levels=point_levels,
        errors={},
        level_scores=[],
        level_flags=[],
        levels=[],
        events=events,
    )
    tracker = ConvergenceTracker(config.theta_ref)

    level = 1
    progress = tqdm(total=config.max_levels, desc="Refinement levels", unit="level", disable=not verbose)
    while True:
        scores = score_mesh(mesh, decompositions, config)
        flags = tracker.update(mesh, result.errors, level, scores)
        record = LevelRecord(
            level=level,
            n_elements=mesh.n_simplices,
            mean_distance=mean_element_distance(scores),
            n_converged=int(flags.sum()),
        )
        result.level_scores.append(scores)
        result.level_flags.append(flags)
        result.levels.append(record)

        remaining = config.budget - len(snapshots)
        if flags.all():
            result.stop_reason = STOP_CONVERGED
        elif level > config.max_levels:
            result.stop_reason = STOP_MAX_LEVELS
        elif remaining <= 0:
            result.stop_reason = STOP_BUDGET
        else:
            result.stop_reason = ""
        if result.stop_reason:
            events.append(record.to_event())
            break

        converged_ids = np.flatnonzero(flags).tolist()
        selected = select_for_refinement(scores, config.alpha, converged_ids)
        if not selected:
            candidates = [k for k in range(len(scores)) if not flags[k]]
            selected = [max(candidates, key=lambda k: (scores[k].total, -k))]
        selected = sorted(selected)[:remaining]

        # every evaluated sample becomes a mesh point
        sampled, new_points = [], []
        for simplex_id in selected:
            point = mesh.sample_refinement_point(simplex_id, rng)
            if is_duplicate(point, mesh.points, new_points):
                if verbose:
                    print(
                        f"[WARNING] Skipping sample {point.tolist()} in element {simplex_id}: "
                        "coincides with a known point"
                    )
                continue
            sampled.append(simplex_id)
            new_points.append(point)
        selected = sampled
        new_snapshots = evaluate_batch(model, new_points, config.jobs, verbose, f"Level {level}")

        inserted_mesh = mesh
        for simplex_id, point, snapshot in zip(selected, new_points, new_snapshots):
            actual = decompose(snapshot, policy)
            theta = estimate_vertex_error(mesh, decompositions, simplex_id, point, actual, config)
            inserted_mesh = inserted_mesh.insert_point(point)
            point_id = inserted_mesh.n_points - 1
            snapshots[point_id] = snapshot
            decompositions[point_id] = actual
            point_levels[point_id] = level
            result.errors[point_id] = VertexErrorRecord(point_id, theta, level)
            record.selected.append(simplex_id)
            record.new_point_ids.append(point_id)
            record.new_points.append([float(x) for x in point])
            record.thetas.append(theta)
            if inserted_mesh.jittered:
                events.append(_jitter_event(inserted_mesh, level))

        if verbose:
            print(
                f"[INFO] Level {level}: {record.n_elements} elements, d = {record.mean_distance:.6g}, "
                f"refined {len(record.selected)}, converged {record.n_converged}"
            )
        events.append(record.to_event())
        mesh = inserted_mesh
        result.mesh = mesh
        level += 1
        progress.update(1)
    progress.close()

    result.mesh = mesh
    if verbose:
        print(
            f"[SUCCESS] Campaign stopped ({result.stop_reason}) after {len(result.levels)} levels "
            f"and {result.n_evaluations} evaluations"
        )
    if raise_on_budget and result.stop_reason == STOP_BUDGET:
        raise BudgetExhausted(f"Evaluation budget of {config.budget} exhausted", partial=result)
    return result


@dataclass
class MeshErrorReport:
    """Interpolation errors measured at the centroid of every element of one mesh"""

    label: str
    mesh: SimplexMesh
    frame: pd.DataFrame

    def summary(self) -> Dict:
        return {
            "n_points": self.mesh.n_points,
            "n_simplices": self.mesh.n_simplices,
            "theta_mean": float(self.frame["theta"].mean()),
            "theta_std": float(self.frame["theta"].std(ddof=0)),
            "frobenius_mean": float(self.frame["frobenius_error"].mean()),
            "frobenius_std": float(self.frame["frobenius_error"].std(ddof=0)),
        }


def centroid_errors(
    model,
    mesh: SimplexMesh,
    decompositions: Dict[int, SnapshotDecomposition],
    snapshots: Dict[int, FieldSnapshot],
    config: CampaignConfig,
    label: str,
    verbose: bool = True,
) -> MeshErrorReport:
    """θ̃ and Frobenius error of the interpolant at each simplex centroid"""
    centroids = [mesh.centroid(k) for k in range(mesh.n_simplices)]
    truths = evaluate_batch(model, centroids, config.jobs, verbose, f"Centroids ({label})")
    rows = []
    for simplex_id, (centroid, truth) in enumerate(zip(centroids, truths)):
        actual = decompose(truth, config.rank_policy)
        try:
            _, _, predicted = predict(
                mesh, decompositions, centroid, simplex_id=simplex_id, mode=config.interpolation_mode
            )
            theta = vertex_error(actual, predicted, config.metric, config.rank_policy, config.scaled_procrustes)
            estimate = reconstruct(predicted)
        except (SingularProduct, NonPositiveSingular):
            theta = math.pi / 2
            estimate = np.mean([snapshots[v].field for v in mesh.vertex_ids(simplex_id)], axis=0)
        error = float(np.linalg.norm(truth.field - estimate))
        norm = float(np.linalg.norm(truth.field))
        row = {"simplex_id": simplex_id}
        row.update({f"xi_{j + 1}": float(x) for j, x in enumerate(centroid)})
        row.update({
            "volume": mesh.volume(simplex_id),
            "theta": theta,
            "frobenius_error": error,
            "relative_error": error / norm if norm > 0 else 0.0,
        })
        rows.append(row)
    return MeshErrorReport(label, mesh, pd.DataFrame(rows))


def random_design(n_d: int, n_points: int, rng: np.random.Generator) -> np.ndarray:
    """Hypercube corners followed by uniform random points, `n_points` in total"""
    corners = initial_design(n_d).points[: 2 ** n_d]
    extra = rng.random((max(n_points - corners.shape[0], 0), n_d))
    return np.vstack([corners, extra])


def compare_random(
    model,
    config: CampaignConfig,
    verbose: bool = True,
    adaptive: Optional[CampaignResult] = None,
) -> Tuple[MeshErrorReport, MeshErrorReport]:
    """
    Adaptive campaign against a uniform random design with the same number of
    model evaluations, both judged at their simplex centroids.
    """
    if adaptive is None:
        adaptive = run_campaign(model, config, verbose=verbose)
    n_points = adaptive.n_evaluations
    if verbose:
        print(f"[INFO] Random design with {n_points} points")

    rng = np.random.default_rng([config.seed, 1])
    points = random_design(config.n_d, n_points, rng)
    mesh = SimplexMesh(points)
    snapshots = dict(enumerate(evaluate_batch(model, points, config.jobs, verbose, "Random design")))
    decompositions = {pid: decompose(s, config.rank_policy) for pid, s in snapshots.items()}

    adaptive_report = centroid_errors(
        model, adaptive.mesh, adaptive.decompositions, adaptive.snapshots, config, "adaptive", verbose
    )
    random_report = centroid_errors(model, mesh, decompositions, snapshots, config, "random", verbose)
    return adaptive_report, random_report


@dataclass
class MetricComparison:
    results: Dict[str, CampaignResult]
    rankings: pd.DataFrame
    correlations: pd.DataFrame


def compare_metrics(model, config: CampaignConfig, verbose: bool = True) -> MetricComparison:
    """
    Same campaign under every metric with identical seeds; level-1 element
    rankings are compared by Spearman rank correlation.
    """
    results = {}
    for kind in MetricKind:
        if verbose:
            print(f"[INFO] Running campaign with the {kind.value} metric")
        results[kind.value] = run_campaign(model, replace(config, metric=kind), verbose=verbose)

    first = next(iter(results.values()))
    rankings = pd.DataFrame({"simplex_id": np.arange(len(first.level_scores[0]))})
    for name, result in results.items():
        rankings[name] = [score.total for score in result.level_scores[0]]

    rows = []
    names = list(results)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            rho, _ = stats.spearmanr(rankings[a], rankings[b])
            rows.append({"metric_a": a, "metric_b": b, "spearman": float(rho)})
    return MetricComparison(results, rankings, pd.DataFrame(rows))
