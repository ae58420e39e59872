"""Monte Carlo harness for simulated user alignment error.

The user model is deliberately simple: each viewpoint contributes a noisy
observation of the true virtual-to-real transform whose translation noise
is anisotropic, inflated by a depth multiplier along that view's ray
(depth is what people misjudge; lateral placement is what they see well).
Multiple simultaneous views fuse by information weighting, so adding a
second viewpoint at a different direction collapses the depth uncertainty
toward the lateral level. Rotation noise is isotropic and fuses by the
rotation mean.

Every figure this module emits is a simulation; reports carry an explicit
``simulated`` marker so nobody mistakes them for measured human data.
"""
from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .camera import ObserverPose, viewing_direction
from .errors import EmptyInput, IoFailure, NoViews, SchemaError
from .manifold import (
    RigidTransform,
    Rotation,
    geodesic_distance,
    rotation_mean,
    so3_exp,
    transform_mean,
)
from .triangulate import pair_misalignment

EXPERIMENT_SCHEMA = "experiment/v1"
REPORT_SCHEMA = "experiment-report/v1"
PERCENTILES = (5.0, 25.0, 50.0, 75.0, 95.0)


@dataclass(frozen=True)
class NoiseModel:
    """Per-view alignment noise: lateral sigma, depth multiplier, rotation sigma."""

    sigma_lateral_mm: float = 5.0
    depth_multiplier: float = 3.0
    sigma_rotation_deg: float = 2.0

    def __post_init__(self):
        if self.sigma_lateral_mm < 0 or self.sigma_rotation_deg < 0:
            raise ValueError("noise sigmas must be nonnegative")
        if self.depth_multiplier < 1:
            raise ValueError("depth multiplier must be >= 1")

    def to_doc(self) -> dict:
        return {"sigma_lateral_mm": self.sigma_lateral_mm,
                "depth_multiplier": self.depth_multiplier,
                "sigma_rotation_deg": self.sigma_rotation_deg}

    @classmethod
    def from_doc(cls, doc: dict) -> "NoiseModel":
        return cls(float(doc.get("sigma_lateral_mm", 5.0)),
                   float(doc.get("depth_multiplier", 3.0)),
                   float(doc.get("sigma_rotation_deg", 2.0)))


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    trials: int
    seed: int
    views: int
    averaging: int
    truth: RigidTransform
    observer_poses: tuple
    label: str = "experiment"

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.views < 1:
            raise ValueError("views must be >= 1")
        if self.averaging < 1:
            raise ValueError("averaging count must be >= 1")
        poses = tuple(self.observer_poses)
        if len(poses) < self.views:
            raise ValueError(f"need >= {self.views} observer poses, have {len(poses)}")
        object.__setattr__(self, "observer_poses", poses)


def sample_user_alignment(truth: RigidTransform, views, noise: NoiseModel,
                          rng) -> RigidTransform:
    """Draw one simulated interactive alignment of the virtual robot.

    Each view observes the truth with translation covariance
    sigma^2 (I + (k^2 - 1) d d^T) for its world-frame viewing direction d;
    the returned translation is the information-weighted fusion of the
    per-view observations and the rotation is the mean of the per-view
    rotation samples.
    """
    views = list(views)
    if not views:
        raise NoViews("alignment sampling needs at least one observer view")
    sigma = noise.sigma_lateral_mm
    k = noise.depth_multiplier
    sigma_rot = np.deg2rad(noise.sigma_rotation_deg)
    infos = []
    weighted = []
    rotations = []
    for pose in views:
        d = viewing_direction(pose)
        t_noise_draw = rng.standard_normal(3)
        r_noise_draw = rng.standard_normal(3)
        if sigma > 0:
            # sigma*n laterally plus an extra (k-1)*sigma along the ray
            t_obs = truth.translation + sigma * t_noise_draw \
                + sigma * (k - 1.0) * float(t_noise_draw @ d) * d
            info = (np.eye(3) - (1.0 - 1.0 / k**2) * np.outer(d, d)) / sigma**2
            infos.append(info)
            weighted.append(info @ t_obs)
        if sigma_rot > 0:
            rotations.append(truth.rotation @ so3_exp(r_noise_draw * sigma_rot))
    if sigma > 0:
        t_fused = np.linalg.solve(np.sum(infos, axis=0), np.sum(weighted, axis=0))
    else:
        t_fused = truth.translation
    r_fused = rotation_mean(rotations) if rotations else truth.rotation
    return RigidTransform(r_fused, t_fused)


def _stats_doc(values: np.ndarray) -> dict:
    doc = {
        "mean": float(values.mean()),
        "std": float(values.std()),
        "min": float(values.min()),
        "max": float(values.max()),
    }
    for p in PERCENTILES:
        doc[f"p{p:g}"] = float(np.percentile(values, p))
    return doc


@dataclass(frozen=True, eq=False)
class ExperimentReport:
    """Per-trial error rows plus the aggregates recomputable from them.

    Row columns: signed translation error x/y/z (mm), translation L2 (mm),
    geodesic rotation error (deg).
    """

    label: str
    trials: int
    seed: int
    views: int
    averaging: int
    noise: NoiseModel
    rows: np.ndarray

    def __post_init__(self):
        rows = np.array(self.rows, dtype=float)
        if rows.ndim != 2 or rows.shape[1] != 5 or rows.shape[0] < 1:
            raise ValueError("rows must be a non-empty (trials, 5) array")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @property
    def translation_table(self):
        # per-axis |error| mean/std plus their L2 combinations
        return pair_misalignment(np.zeros_like(self.rows[:, :3]), self.rows[:, :3])

    @property
    def translation_l2(self) -> np.ndarray:
        return self.rows[:, 3]

    @property
    def rotation_deg(self) -> np.ndarray:
        return self.rows[:, 4]

    def to_doc(self) -> dict:
        table = self.translation_table
        return {
            "schema": REPORT_SCHEMA,
            "simulated": True,
            "label": self.label,
            "trials": self.trials,
            "seed": self.seed,
            "views": self.views,
            "averaging": self.averaging,
            "noise": self.noise.to_doc(),
            "per_axis_mm": table.to_doc(),
            "translation_l2_mm": _stats_doc(self.translation_l2),
            "rotation_deg": _stats_doc(self.rotation_deg),
            "rows": [list(row) for row in self.rows],
        }

    def table_row(self) -> list:
        """One summary-table row: label then per-axis (mean, std) pairs and L2s."""
        t = self.translation_table
        return [
            f"{self.label} [simulated]",
            t.mean_mm[0], t.std_mm[0],
            t.mean_mm[1], t.std_mm[1],
            t.mean_mm[2], t.std_mm[2],
            t.l2_mean_mm, t.l2_std_mm,
        ]


TABLE_HEADER = [
    "alignment_method",
    "mean_tx_mm", "std_tx_mm",
    "mean_ty_mm", "std_ty_mm",
    "mean_tz_mm", "std_tz_mm",
    "l2_mean_mm", "l2_std_mm",
]


def run_alignment_experiment(cfg: ExperimentConfig, noise: NoiseModel,
                             workers: int = 1) -> ExperimentReport:
    """Run seeded trials; each trial averages ``cfg.averaging`` sampled
    alignments and scores the result against the ground truth.

    Trials use independently spawned RNG streams, so serial and parallel
    execution produce identical rows.
    """
    views = cfg.observer_poses[:cfg.views]
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.trials)

    def run_trial(index: int):
        rng = np.random.default_rng(seeds[index])
        samples = [sample_user_alignment(cfg.truth, views, noise, rng)
                   for _ in range(cfg.averaging)]
        estimate = transform_mean(samples)
        dt = estimate.translation - cfg.truth.translation
        rot_deg = np.rad2deg(geodesic_distance(estimate.rotation, cfg.truth.rotation))
        return [dt[0], dt[1], dt[2], float(np.linalg.norm(dt)), rot_deg]

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run_trial, range(cfg.trials)))
    else:
        rows = [run_trial(i) for i in range(cfg.trials)]
    return ExperimentReport(
        label=cfg.label, trials=cfg.trials, seed=cfg.seed, views=cfg.views,
        averaging=cfg.averaging, noise=noise, rows=np.asarray(rows),
    )


def format_table_csv(reports) -> str:
    """Delimited per-axis summary table, one row per report."""
    reports = list(reports)
    if not reports:
        raise EmptyInput("refusing to format an empty report table")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TABLE_HEADER)
    for report in reports:
        row = report.table_row()
        writer.writerow([row[0]] + [repr(float(v)) for v in row[1:]])
    return buf.getvalue()


def emit_report(reports, out_dir, formats=("csv", "json")) -> list:
    """Write the summary table and/or full structured report; returns paths."""
    reports = [reports] if isinstance(reports, ExperimentReport) else list(reports)
    if not reports:
        raise EmptyInput("refusing to emit an empty report")
    out_dir = Path(out_dir)
    written = []
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        if "csv" in formats:
            path = out_dir / "report.csv"
            path.write_text(format_table_csv(reports), encoding="utf-8")
            written.append(path)
        if "json" in formats:
            path = out_dir / "report.json"
            doc = {"schema": REPORT_SCHEMA, "simulated": True,
                   "reports": [r.to_doc() for r in reports]}
            path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                            encoding="utf-8")
            written.append(path)
    except OSError as exc:
        raise IoFailure(f"cannot write report under {out_dir}: {exc}") from exc
    return written


# --- experiment documents ---

def experiment_from_doc(doc: dict):
    """Parse an experiment file into (base kwargs, conditions, noise)."""
    if doc.get("schema") != EXPERIMENT_SCHEMA:
        raise SchemaError(f"unsupported experiment schema {doc.get('schema')!r}")
    try:
        truth = RigidTransform.from_doc(doc["truth"])
        poses = tuple(RigidTransform.from_doc(p) for p in doc["observer_poses"])
        noise = NoiseModel.from_doc(doc.get("noise", {}))
        base = {"trials": int(doc["trials"]), "seed": int(doc["seed"]),
                "truth": truth, "observer_poses": poses}
        conditions = [
            {"label": str(c["label"]), "views": int(c["views"]),
             "averaging": int(c.get("averaging", 1))}
            for c in doc.get("conditions", [{"label": "default", "views": 1}])
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed experiment document: {exc}") from exc
    return base, conditions, noise


def load_experiment(path):
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read experiment file {path}: {exc}") from exc
    return experiment_from_doc(doc)


# --- bootstrap helpers for statistical acceptance ---

def bootstrap_statistic(values, statistic, n_resamples: int = 1000,
                        seed: int = 0) -> np.ndarray:
    """Statistic over independent resamples-with-replacement of ``values``."""
    values = np.asarray(values, dtype=float)
    rng = np.random.default_rng(seed)
    out = np.empty(n_resamples)
    n = len(values)
    for i in range(n_resamples):
        out[i] = statistic(values[rng.integers(0, n, size=n)])
    return out


def bootstrap_difference_quantile(a, b, statistic, q: float,
                                  n_resamples: int = 1000, seed: int = 0) -> float:
    """Quantile of statistic(a*) - statistic(b*) over paired resamples."""
    sa = bootstrap_statistic(a, statistic, n_resamples, seed)
    sb = bootstrap_statistic(b, statistic, n_resamples, seed + 1)
    return float(np.quantile(sa - sb, q))


def bootstrap_ratio_quantile(a, b, statistic, q: float,
                             n_resamples: int = 1000, seed: int = 0) -> float:
    """Quantile of statistic(a*) / statistic(b*) over paired resamples."""
    sa = bootstrap_statistic(a, statistic, n_resamples, seed)
    sb = bootstrap_statistic(b, statistic, n_resamples, seed + 1)
    return float(np.quantile(sa / sb, q))
