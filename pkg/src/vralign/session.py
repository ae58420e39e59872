"""Interactive alignment session: trials, averaged registration, guidance.

The session is the workflow state machine: record N interactive alignment
trials, freeze their mean as the registration, evaluate it against landmark
pairs, then plan and score joint-by-joint set-up of a target configuration.
Everything a session touches serializes into one self-contained document so
any run can be replayed offline.

Timestamps come from an injected clock (milliseconds since session start)
so scripted runs are deterministic.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    LengthMismatch,
    NotFinalized,
    NoTrials,
    SchemaError,
    SessionFinalized,
)
from .manifold import RigidTransform, geodesic_distance, transform_mean
from .mesh import SceneMesh
from .robot import (
    JointConfig,
    RobotDescription,
    joint_config_error,
    robot_from_doc,
    robot_to_doc,
)
from .triangulate import Landmark, MisalignmentReport, pair_misalignment

SESSION_SCHEMA = "alignment-session/v1"
SUGGESTED_TRIALS = 3  # protocol default; the session itself accepts any N >= 1


def monotonic_ms_clock():
    """Default wall clock: milliseconds since first call."""
    t0 = time.monotonic()

    def clock() -> float:
        return (time.monotonic() - t0) * 1000.0

    return clock


@dataclass(frozen=True, eq=False)
class AlignmentTrial:
    index: int
    transform: RigidTransform
    config: JointConfig
    mirror_count: int
    start_ms: float
    end_ms: float

    def __post_init__(self):
        if self.end_ms < self.start_ms:
            raise ValueError("trial end must not precede its start")


@dataclass(frozen=True, eq=False)
class RegistrationResult:
    mean: RigidTransform
    rotation_deviations_rad: np.ndarray
    translation_deviations_mm: np.ndarray
    trial_count: int

    def __post_init__(self):
        rot = np.array(self.rotation_deviations_rad, dtype=float).reshape(-1)
        tra = np.array(self.translation_deviations_mm, dtype=float).reshape(-1)
        if np.any(rot < 0) or np.any(tra < 0):
            raise ValueError("deviations are nonnegative by construction")
        if self.trial_count < 1:
            raise ValueError("a registration needs at least one trial")
        rot.setflags(write=False)
        tra.setflags(write=False)
        object.__setattr__(self, "rotation_deviations_rad", rot)
        object.__setattr__(self, "translation_deviations_mm", tra)

    def to_doc(self) -> dict:
        return {
            "mean": self.mean.to_doc(),
            "rotation_deviations_rad": list(self.rotation_deviations_rad),
            "translation_deviations_mm": list(self.translation_deviations_mm),
            "trial_count": self.trial_count,
        }


@dataclass
class GuidanceStep:
    joint_index: int
    target_deg: float
    done: bool = False


@dataclass
class GuidancePlan:
    """Ordered joint-by-joint steps toward a target configuration."""

    target: JointConfig
    steps: list
    created_ms: float = 0.0

    def __post_init__(self):
        indices = [s.joint_index for s in self.steps]
        if sorted(indices) != list(range(len(self.target))):
            raise ValueError("plan must visit every joint exactly once")

    @classmethod
    def for_target(cls, target: JointConfig, created_ms: float = 0.0) -> "GuidancePlan":
        steps = [GuidanceStep(j, float(a)) for j, a in enumerate(target.angles_deg)]
        return cls(target=target, steps=steps, created_ms=created_ms)

    def mark_done(self, joint_index: int) -> None:
        for step in self.steps:
            if step.joint_index == joint_index:
                step.done = True
                return
        raise IndexError(f"no step for joint {joint_index}")

    @property
    def complete(self) -> bool:
        return all(step.done for step in self.steps)

    def to_doc(self) -> dict:
        return {
            "target_deg": list(self.target.angles_deg),
            "steps": [{"joint_index": s.joint_index, "target_deg": s.target_deg,
                       "done": s.done} for s in self.steps],
            "created_ms": self.created_ms,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "GuidancePlan":
        plan = cls(
            target=JointConfig(np.array(doc["target_deg"], dtype=float)),
            steps=[GuidanceStep(int(s["joint_index"]), float(s["target_deg"]),
                                bool(s["done"])) for s in doc["steps"]],
            created_ms=float(doc.get("created_ms", 0.0)),
        )
        return plan


class AlignmentSession:
    """Single-operator alignment workflow over one robot and scene.

    Mutations are meant to be serialized by the owning service; reads hand
    out immutable values.
    """

    def __init__(self, robot: RobotDescription, mesh: SceneMesh | None = None,
                 clock=None, robot_ref: str = "", suggested_trials: int = SUGGESTED_TRIALS):
        self.robot = robot
        self.mesh = mesh
        self.robot_ref = robot_ref
        self.suggested_trials = int(suggested_trials)
        self._clock = clock if clock is not None else monotonic_ms_clock()
        self._last_ms = 0.0
        self.created_ms = self._now()
        self.trials: list[AlignmentTrial] = []
        self.registration: RegistrationResult | None = None
        self.finalized_ms: float | None = None
        self.landmark_pairs: list[dict] = []
        self.evaluations: list[MisalignmentReport] = []
        self.plan: GuidancePlan | None = None
        self.scores: list[dict] = []

    def _now(self) -> float:
        t = float(self._clock())
        if t <= self._last_ms:
            t = self._last_ms + 1e-3  # keep timestamps strictly increasing
        self._last_ms = t
        return t

    @property
    def finalized(self) -> bool:
        return self.registration is not None

    def record_trial(self, transform: RigidTransform, config,
                     mirror_count: int = 0) -> AlignmentTrial:
        """Append one interactive alignment estimate.

        The trial spans the interval since the previous trial (or session
        start), which is what a wall-clock alignment-time column records.
        """
        if self.finalized:
            raise SessionFinalized("cannot record trials after finalize")
        if not isinstance(config, JointConfig):
            config = JointConfig(np.asarray(config, dtype=float))
        if len(config) != self.robot.joint_count:
            raise LengthMismatch(
                f"config has {len(config)} angles for a {self.robot.joint_count}-joint robot")
        start = self.trials[-1].end_ms if self.trials else self.created_ms
        trial = AlignmentTrial(
            index=len(self.trials),
            transform=transform,
            config=config,
            mirror_count=int(mirror_count),
            start_ms=start,
            end_ms=self._now(),
        )
        self.trials.append(trial)
        return trial

    def finalize_registration(self) -> RegistrationResult:
        """Freeze the mean transform over all trials; idempotent."""
        if self.registration is not None:
            return self.registration
        if not self.trials:
            raise NoTrials("record at least one trial before finalizing")
        mean = transform_mean([t.transform for t in self.trials])
        rot_dev = np.array([
            geodesic_distance(mean.rotation, t.transform.rotation) for t in self.trials
        ])
        tra_dev = np.array([
            float(np.linalg.norm(t.transform.translation - mean.translation))
            for t in self.trials
        ])
        self.registration = RegistrationResult(
            mean=mean,
            rotation_deviations_rad=rot_dev,
            translation_deviations_mm=tra_dev,
            trial_count=len(self.trials),
        )
        self.finalized_ms = self._now()
        return self.registration

    def evaluate_registration(self, real_landmarks, virtual_landmarks) -> MisalignmentReport:
        """Apply the frozen registration to the virtual landmarks and score."""
        if not self.finalized:
            raise NotFinalized("finalize the registration before evaluating")
        real = [lm if isinstance(lm, Landmark) else Landmark(lm, source="real")
                for lm in real_landmarks]
        virtual = [lm if isinstance(lm, Landmark) else Landmark(lm, source="virtual")
                   for lm in virtual_landmarks]
        if len(real) != len(virtual):
            raise LengthMismatch(f"{len(real)} real vs {len(virtual)} virtual landmarks")
        mapped = [self.registration.mean.apply(lm.position) for lm in virtual]
        report = pair_misalignment([lm.position for lm in real], mapped)
        self.landmark_pairs.append({
            "real": [list(lm.position) for lm in real],
            "virtual": [list(lm.position) for lm in virtual],
        })
        self.evaluations.append(report)
        return report

    def make_guidance_plan(self, target) -> GuidancePlan:
        """Base-to-tip steps toward a given (already planned) configuration."""
        if not self.finalized:
            raise NotFinalized("finalize the registration before planning set-up")
        if not isinstance(target, JointConfig):
            target = JointConfig(np.asarray(target, dtype=float))
        if len(target) != self.robot.joint_count:
            raise LengthMismatch(
                f"target has {len(target)} angles for a {self.robot.joint_count}-joint robot")
        self.plan = GuidancePlan.for_target(target, created_ms=self._now())
        return self.plan

    def score_execution(self, actual) -> "JointErrorSummaryLike":
        """Joint errors of the executed configuration against the plan target."""
        if self.plan is None:
            raise NotFinalized("make a guidance plan before scoring execution")
        if not isinstance(actual, JointConfig):
            actual = JointConfig(np.asarray(actual, dtype=float))
        summary = joint_config_error(self.plan.target, actual)
        self.scores.append({
            "actual_deg": list(actual.angles_deg),
            "summary": summary.to_doc(),
            "elapsed_ms": self._now() - self.plan.created_ms,
        })
        return summary

    # --- persistence ---

    def to_document(self) -> dict:
        return {
            "schema": SESSION_SCHEMA,
            "robot_ref": self.robot_ref,
            "robot": robot_to_doc(self.robot),
            "mesh": {"triangles": self.mesh.triangles.tolist()} if self.mesh else None,
            "suggested_trials": self.suggested_trials,
            "created_ms": self.created_ms,
            "finalized_ms": self.finalized_ms,
            "trials": [
                {
                    "index": t.index,
                    "transform": t.transform.to_doc(),
                    "config_deg": list(t.config.angles_deg),
                    "mirror_count": t.mirror_count,
                    "start_ms": t.start_ms,
                    "end_ms": t.end_ms,
                }
                for t in self.trials
            ],
            "registration": self.registration.to_doc() if self.registration else None,
            "landmark_pairs": self.landmark_pairs,
            "evaluations": [r.to_doc() for r in self.evaluations],
            "plan": self.plan.to_doc() if self.plan else None,
            "scores": self.scores,
        }

    def save(self, path) -> None:
        Path(path).write_text(
            json.dumps(self.to_document(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8")

    @classmethod
    def from_document(cls, doc: dict, clock=None) -> "AlignmentSession":
        if doc.get("schema") != SESSION_SCHEMA:
            raise SchemaError(f"unsupported session schema {doc.get('schema')!r}")
        robot = robot_from_doc(doc["robot"])
        mesh = SceneMesh(np.array(doc["mesh"]["triangles"], dtype=float)) \
            if doc.get("mesh") else None
        session = cls(robot, mesh=mesh, clock=clock if clock is not None else (lambda: 0.0),
                      robot_ref=str(doc.get("robot_ref", "")),
                      suggested_trials=int(doc.get("suggested_trials", SUGGESTED_TRIALS)))
        session.created_ms = float(doc.get("created_ms", 0.0))
        for rec in doc.get("trials", []):
            session.trials.append(AlignmentTrial(
                index=int(rec["index"]),
                transform=RigidTransform.from_doc(rec["transform"]),
                config=JointConfig(np.array(rec["config_deg"], dtype=float)),
                mirror_count=int(rec["mirror_count"]),
                start_ms=float(rec["start_ms"]),
                end_ms=float(rec["end_ms"]),
            ))
        if session.trials:
            session._last_ms = max(session._last_ms, session.trials[-1].end_ms)
        reg = doc.get("registration")
        if reg is not None:
            session.registration = RegistrationResult(
                mean=RigidTransform.from_doc(reg["mean"]),
                rotation_deviations_rad=np.array(reg["rotation_deviations_rad"], dtype=float),
                translation_deviations_mm=np.array(reg["translation_deviations_mm"], dtype=float),
                trial_count=int(reg["trial_count"]),
            )
            session.finalized_ms = doc.get("finalized_ms")
        session.landmark_pairs = [dict(p) for p in doc.get("landmark_pairs", [])]
        session.evaluations = [MisalignmentReport.from_doc(r)
                               for r in doc.get("evaluations", [])]
        if doc.get("plan"):
            session.plan = GuidancePlan.from_doc(doc["plan"])
        session.scores = [dict(s) for s in doc.get("scores", [])]
        return session

    @classmethod
    def load(cls, path, clock=None) -> "AlignmentSession":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise SchemaError(f"cannot read session file {path}: {exc}") from exc
        return cls.from_document(doc, clock=clock)


def replay_document(doc: dict) -> dict:
    """Recompute every derived result in a session document from its raw inputs.

    Returns ``{"registration": ..., "evaluations": [...], "scores": [...]}``
    computed afresh from the stored trials, landmark pairs, and plan; the
    caller compares against the stored results to confirm a faithful replay.
    """
    session = AlignmentSession.from_document(doc)
    out: dict = {"registration": None, "evaluations": [], "scores": []}
    replica = AlignmentSession(session.robot, mesh=session.mesh, clock=lambda: 0.0,
                               robot_ref=session.robot_ref,
                               suggested_trials=session.suggested_trials)
    for trial in session.trials:
        replica.record_trial(trial.transform, trial.config, trial.mirror_count)
    if session.registration is not None:
        out["registration"] = replica.finalize_registration().to_doc()
        for pair in session.landmark_pairs:
            report = replica.evaluate_registration(pair["real"], pair["virtual"])
            out["evaluations"].append(report.to_doc())
    if session.plan is not None:
        replica.registration = replica.registration or session.registration
        replica.plan = GuidancePlan.for_target(session.plan.target)
        for rec in session.scores:
            summary = joint_config_error(session.plan.target,
                                         np.array(rec["actual_deg"], dtype=float))
            out["scores"].append(summary.to_doc())
    return out
