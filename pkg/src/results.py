"""Results directory: CSV tables, JSON summary, NDJSON audit log and HTML figures"""

import json
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
import plotly.graph_objects as go

from src.campaign import STOP_BUDGET, CampaignResult, MeshErrorReport, MetricComparison
from src.config import (
    AUDIT_LOG,
    CONVERGENCE_CSV,
    CONVERGENCE_HTML,
    ERRORS_CSV,
    MESH_HTML,
    MESH_POINTS_CSV,
    MESH_SIMPLICES_CSV,
    RUN_CONFIG_JSON,
    SAMPLES_CSV,
    SCORES_CSV,
    SUMMARY_JSON,
    SUMMARY_SCHEMA_VERSION,
)
from src.errors import MalformedSnapshot
from src.mesh import SimplexMesh
from src.run_config import RunConfig, save_run_config
from src.snapshot import RankPolicy, SnapshotDecomposition, decompose
from src.snapshot_storage import SnapshotStore


class ResultsWriter:
    """Writes the outputs of a run into one directory"""

    def __init__(self, output_dir: Path, verbose: bool = True):
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.verbose = verbose

    def _log(self, message: str):
        if self.verbose:
            print(message)

    def _write_csv(self, frame: pd.DataFrame, name: str) -> Path:
        path = self.output_dir / name
        self._log(f"Saving {name}...")
        frame.to_csv(path, index=False, encoding="utf-8")
        return path

    def _write_json(self, data: Dict, name: str) -> Path:
        path = self.output_dir / name
        self._log(f"Saving {name}...")
        with open(path, "w", encoding="utf-8") as f:
            json.dump(data, f, indent=2, default=str)
        return path

    @staticmethod
    def samples_frame(result: CampaignResult, run_config: Optional[RunConfig] = None) -> pd.DataFrame:
        mesh = result.mesh
        frame = mesh.point_frame()
        frame["level_added"] = [result.point_levels[pid] for pid in range(mesh.n_points)]
        frame["rank"] = [result.decompositions[pid].rank for pid in range(mesh.n_points)]
        frame["theta"] = [
            result.errors[pid].theta if pid in result.errors else np.nan for pid in range(mesh.n_points)
        ]
        param_map = run_config.model.param_map() if run_config is not None else None
        if param_map is not None:
            physical = np.array([param_map(p) for p in mesh.points])
            for j in range(physical.shape[1]):
                frame[f"physical_{j + 1}"] = physical[:, j]
        return frame

    @staticmethod
    def scores_frame(result: CampaignResult) -> pd.DataFrame:
        rows = []
        for record, scores, flags in zip(result.levels, result.level_scores, result.level_flags):
            selected = set(record.selected)
            for score in scores:
                rows.append({
                    "level": record.level,
                    "simplex_id": score.simplex_id,
                    "score": score.total,
                    "converged": bool(flags[score.simplex_id]),
                    "selected": score.simplex_id in selected,
                })
        return pd.DataFrame(rows, columns=["level", "simplex_id", "score", "converged", "selected"])

    @staticmethod
    def errors_frame(result: CampaignResult) -> pd.DataFrame:
        rows = []
        for pid in sorted(result.errors):
            record = result.errors[pid]
            row = {"point_id": pid, "level": record.level, "theta": record.theta}
            row.update({f"xi_{j + 1}": float(x) for j, x in enumerate(result.mesh.points[pid])})
            rows.append(row)
        columns = ["point_id", "level", "theta"] + [f"xi_{j + 1}" for j in range(result.mesh.n_d)]
        return pd.DataFrame(rows, columns=columns)

    @staticmethod
    def convergence_frame(result: CampaignResult) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "level": record.level,
                    "n_elements": record.n_elements,
                    "mean_distance": record.mean_distance,
                    "n_converged": record.n_converged,
                    "n_refined": len(record.selected),
                }
                for record in result.levels
            ],
            columns=["level", "n_elements", "mean_distance", "n_converged", "n_refined"],
        )

    @staticmethod
    def summary(result: CampaignResult, run_config: Optional[RunConfig] = None) -> Dict:
        distances = result.mean_distances
        return {
            "schema_version": SUMMARY_SCHEMA_VERSION,
            "stop_reason": result.stop_reason,
            "budget_exhausted": result.stop_reason == STOP_BUDGET,
            "n_levels": len(result.levels),
            "n_evaluations": result.n_evaluations,
            "n_points": result.mesh.n_points,
            "n_simplices": result.mesh.n_simplices,
            "initial_mean_distance": distances[0] if distances else None,
            "final_mean_distance": distances[-1] if distances else None,
            "jitter_events": sum(1 for e in result.events if e.get("event") == "jitter"),
            "config": run_config.to_dict() if run_config is not None else result.config.to_dict(),
        }

    def save_audit(self, events: List[Dict]) -> Path:
        path = self.output_dir / AUDIT_LOG
        self._log(f"Saving {AUDIT_LOG}...")
        with open(path, "w", encoding="utf-8") as f:
            for event in events:
                f.write(json.dumps(event, default=float) + "\n")
        return path

    def save_mesh(self, mesh: SimplexMesh, point_levels: Optional[Dict[int, int]] = None, html: bool = False):
        self._write_csv(mesh.point_frame(), MESH_POINTS_CSV)
        self._write_csv(mesh.simplex_frame(), MESH_SIMPLICES_CSV)
        if html:
            path = self.output_dir / MESH_HTML
            self._log(f"Saving mesh figure to {MESH_HTML}...")
            mesh_figure(mesh, point_levels).write_html(str(path))

    def save_run(self, result: CampaignResult, run_config: Optional[RunConfig] = None, html: bool = False) -> Dict:
        """Write every output of a finished campaign and return the summary"""
        self._write_csv(self.samples_frame(result, run_config), SAMPLES_CSV)
        self.save_mesh(result.mesh, result.point_levels, html=html)
        self._write_csv(self.scores_frame(result), SCORES_CSV)
        self._write_csv(self.errors_frame(result), ERRORS_CSV)
        self._write_csv(self.convergence_frame(result), CONVERGENCE_CSV)
        self.save_audit(result.events)

        store = SnapshotStore(self.output_dir)
        self._log(f"Saving {len(result.snapshots)} snapshots...")
        store.save_all(result.snapshots)

        if run_config is not None:
            save_run_config(run_config, self.output_dir / RUN_CONFIG_JSON)
        if html:
            self._log(f"Saving convergence figure to {CONVERGENCE_HTML}...")
            convergence_figure(result).write_html(str(self.output_dir / CONVERGENCE_HTML))

        summary = self.summary(result, run_config)
        self._write_json(summary, SUMMARY_JSON)
        return summary

    def save_comparison(self, adaptive: MeshErrorReport, random: MeshErrorReport) -> Dict:
        self._write_csv(adaptive.frame, f"centroid_errors_{adaptive.label}.csv")
        self._write_csv(random.frame, f"centroid_errors_{random.label}.csv")
        summary = {
            "schema_version": SUMMARY_SCHEMA_VERSION,
            adaptive.label: adaptive.summary(),
            random.label: random.summary(),
        }
        self._write_json(summary, "comparison.json")
        return summary

    def save_metric_comparison(self, comparison: MetricComparison) -> Dict:
        self._write_csv(comparison.rankings, "metric_scores.csv")
        self._write_csv(comparison.correlations, "metric_correlations.csv")
        history = pd.DataFrame(
            [
                {"metric": name, "level": record.level, "mean_distance": record.mean_distance}
                for name, result in comparison.results.items()
                for record in result.levels
            ]
        )
        self._write_csv(history, "metric_convergence.csv")
        summary = {
            "schema_version": SUMMARY_SCHEMA_VERSION,
            "spearman": comparison.correlations.to_dict(orient="records"),
        }
        self._write_json(summary, "metric_comparison.json")
        return summary


def mesh_figure(mesh: SimplexMesh, point_levels: Optional[Dict[int, int]] = None) -> go.Figure:
    """Triangulation edges and samples coloured by the level that added them"""
    coords = mesh.points if mesh.n_d > 1 else np.column_stack([mesh.points[:, 0], np.zeros(mesh.n_points)])
    coords = coords[:, :2]
    edge_x, edge_y = [], []
    for row in mesh.simplices:
        for a in range(len(row)):
            for b in range(a + 1, len(row)):
                edge_x += [coords[row[a], 0], coords[row[b], 0], None]
                edge_y += [coords[row[a], 1], coords[row[b], 1], None]
    levels = [point_levels.get(pid, 0) if point_levels else 0 for pid in range(mesh.n_points)]

    fig = go.Figure()
    fig.add_trace(go.Scatter(x=edge_x, y=edge_y, mode="lines", line=dict(color="lightgray", width=1), name="edges"))
    fig.add_trace(go.Scatter(
        x=coords[:, 0],
        y=coords[:, 1],
        mode="markers",
        marker=dict(size=6, color=levels, colorscale="Viridis", showscale=True, colorbar=dict(title="level")),
        text=[f"point {pid}, level {lvl}" for pid, lvl in enumerate(levels)],
        name="samples",
    ))
    fig.update_layout(
        title_text=f"Parameter-space mesh ({mesh.n_points} points, {mesh.n_simplices} simplices)",
        xaxis_title="xi_1",
        yaxis_title="xi_2" if mesh.n_d > 1 else "",
        font_size=12,
        height=800,
    )
    return fig


def convergence_figure(result: CampaignResult) -> go.Figure:
    levels = [record.level for record in result.levels]
    fig = go.Figure(data=[go.Scatter(x=levels, y=result.mean_distances, mode="lines+markers")])
    fig.update_layout(
        title_text="Mean element distance per level",
        xaxis_title="level",
        yaxis_title="mean element distance",
        font_size=12,
    )
    return fig


def load_mesh(results_dir: Path) -> SimplexMesh:
    results_dir = Path(results_dir)
    points = results_dir / MESH_POINTS_CSV
    simplices = results_dir / MESH_SIMPLICES_CSV
    if not points.exists() or not simplices.exists():
        raise MalformedSnapshot(f"No mesh tables in {results_dir}")
    return SimplexMesh.from_frames(pd.read_csv(points), pd.read_csv(simplices))


def load_decompositions(results_dir: Path, policy: RankPolicy) -> Dict[int, SnapshotDecomposition]:
    store = SnapshotStore(results_dir)
    return {pid: decompose(store.load(pid), policy) for pid in store.point_ids()}
