"""Workbench service: scene state, verb dispatch, and the WebSocket API.

One service instance owns one alignment exercise: a simulated "real" robot
placed at a ground-truth pose held server-side, a user-driven virtual robot,
any number of frozen mirror viewports, and the alignment session. All
mutations pass through one lock and bump a monotonically increasing scene
revision; reads hand out the immutable snapshot built by the last mutation.

The ground-truth pose is never part of the scene payload while the
alignment is running — clients receive the real robot only as rendered
reference geometry — and is revealed after finalize for scoring.
"""
from __future__ import annotations

import asyncio
import json
import threading
from importlib import resources
from pathlib import Path

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles

from .camera import (
    CameraIntrinsics,
    camera_center,
    gaze_distance,
    mirror_intrinsics,
    mirror_pose,
    mirror_projection,
    observer_projection,
    viewing_direction,
)
from .errors import (
    BindFailure,
    IndexOutOfRange,
    NotFinalized,
    SchemaError,
    SessionFinalized,
    WorkbenchError,
)
from .manifold import RigidTransform, so3_exp
from .mesh import SceneMesh
from .robot import JointConfig, forward_kinematics, load_robot, robot_from_doc, robot_to_doc
from .session import AlignmentSession, replay_document
from .triangulate import Ray

PROTOCOL = "workbench/1"
CONFIG_SCHEMA = "workbench-config/v1"

MUTATING_VERBS = frozenset({
    "set_observer", "set_config", "nudge_virtual", "set_virtual",
    "add_mirror", "remove_mirror", "record_trial", "finalize", "evaluate",
    "plan", "mark_step", "score", "set_actual_config", "load_session",
})
READ_VERBS = frozenset({"hello", "get_scene", "get_robot", "project", "save_session"})


class UnknownVerb(WorkbenchError):
    """Request named a verb the service does not expose."""


def fixture_path(name: str) -> Path:
    return Path(str(resources.files("vralign") / "fixtures" / name))


class ServiceConfig:
    """Scene set-up for one workbench instance."""

    def __init__(self, robot, mesh, truth_pose, truth_config_deg, virtual_pose,
                 intrinsics, observer_pose, viewport=(960, 720), robot_ref="robot"):
        self.robot = robot
        self.mesh = mesh
        self.truth_pose = truth_pose
        self.truth_config_deg = np.asarray(truth_config_deg, dtype=float)
        self.virtual_pose = virtual_pose
        self.intrinsics = intrinsics
        self.observer_pose = observer_pose
        self.viewport = (int(viewport[0]), int(viewport[1]))
        self.robot_ref = robot_ref

    @classmethod
    def from_file(cls, path) -> "ServiceConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise SchemaError(f"cannot read workbench config {path}: {exc}") from exc
        if doc.get("schema") != CONFIG_SCHEMA:
            raise SchemaError(f"unsupported workbench config schema {doc.get('schema')!r}")
        base = path.parent

        def resolve(name):
            p = Path(name)
            return p if p.is_absolute() else base / p

        robot_spec = doc["robot"]
        if isinstance(robot_spec, str):
            robot = load_robot(resolve(robot_spec))
            robot_ref = robot_spec
        else:
            robot = robot_from_doc(robot_spec)
            robot_ref = robot.name
        mesh_spec = doc["mesh"]
        if isinstance(mesh_spec, str):
            mesh = SceneMesh.load(resolve(mesh_spec))
        else:
            mesh = SceneMesh(np.array(mesh_spec["triangles"], dtype=float))
        viewport = doc.get("viewport", {"width": 960, "height": 720})
        return cls(
            robot=robot,
            mesh=mesh,
            truth_pose=RigidTransform.from_doc(doc["truth_pose"]),
            truth_config_deg=doc["truth_config_deg"],
            virtual_pose=RigidTransform.from_doc(doc["virtual_pose"]),
            intrinsics=CameraIntrinsics.from_doc(doc["intrinsics"]),
            observer_pose=RigidTransform.from_doc(doc["observer_pose"]),
            viewport=(viewport["width"], viewport["height"]),
            robot_ref=robot_ref,
        )


def robot_segments(desc, world_pose: RigidTransform, config_deg) -> list:
    """Wireframe polylines for a robot placed at ``world_pose``: the skeleton
    through the link origins plus a short z-axis tick per link."""
    poses = [world_pose @ p for p in forward_kinematics(desc, config_deg)]
    base = world_pose @ desc.base
    skeleton = [list(base.translation)] + [list(p.translation) for p in poses]
    segments = [skeleton]
    for p in poses:
        tip = p.translation + 25.0 * (p.rotation.matrix.T @ np.array([0.0, 0.0, 1.0]))
        segments.append([list(p.translation), list(tip)])
    return segments


class Workbench:
    """Verb dispatcher over one scene + session; transport-agnostic."""

    def __init__(self, config: ServiceConfig, clock=None):
        self.config = config
        self._lock = threading.RLock()
        self.revision = 0
        self.virtual_pose = config.virtual_pose
        self.config_deg = np.array(config.truth_config_deg, dtype=float)
        self.actual_config_deg = np.array(config.truth_config_deg, dtype=float)
        self.observer_pose = config.observer_pose
        self.mirrors: list[dict] = []
        self._next_mirror_id = 1
        self.session = AlignmentSession(config.robot, mesh=config.mesh, clock=clock,
                                        robot_ref=config.robot_ref)
        self._snapshot: dict = {}
        self._rebuild_snapshot()

    # --- snapshot construction ---

    def _camera_doc(self, K: CameraIntrinsics, pose: RigidTransform, role: str) -> dict:
        proj = observer_projection(K, pose, role=role)
        return {
            "intrinsics": K.to_doc(),
            "pose": pose.to_doc(),
            "projection": [list(row) for row in proj.matrix],
            "center": list(camera_center(pose)),
            "viewing_direction": list(viewing_direction(pose)),
        }

    def _rebuild_snapshot(self) -> None:
        cfg = self.config
        finalized = self.session.finalized
        real_config = self.actual_config_deg if finalized else self.config_deg
        mirrors = []
        for m in self.mirrors:
            doc = self._camera_doc(mirror_intrinsics(cfg.intrinsics),
                                   mirror_pose(m["pose"], m["d_mm"]), "mirror")
            doc["id"] = m["id"]
            doc["d_mm"] = m["d_mm"]
            doc["observer_pose"] = m["pose"].to_doc()
            mirrors.append(doc)
        snapshot = {
            "revision": self.revision,
            "status": "finalized" if finalized else "aligning",
            "viewport": {"width": cfg.viewport[0], "height": cfg.viewport[1]},
            "observer": self._camera_doc(cfg.intrinsics, self.observer_pose, "observer"),
            "mirrors": mirrors,
            "virtual": {
                "pose": self.virtual_pose.to_doc(),
                "config_deg": list(self.config_deg),
            },
            "config_deg": list(self.config_deg),
            "actual_config_deg": list(self.actual_config_deg) if finalized else None,
            "real_segments": robot_segments(cfg.robot, cfg.truth_pose, real_config),
            "virtual_segments": robot_segments(cfg.robot, self.virtual_pose,
                                               self.config_deg),
            "truth_pose": cfg.truth_pose.to_doc() if finalized else None,
            "session": {
                "trials": len(self.session.trials),
                "finalized": finalized,
                "suggested_trials": self.session.suggested_trials,
                "registration": (self.session.registration.to_doc()
                                 if finalized else None),
                "plan": self.session.plan.to_doc() if self.session.plan else None,
                "evaluations": [r.to_doc() for r in self.session.evaluations],
                "scores": list(self.session.scores),
            },
        }
        self._snapshot = snapshot

    # --- verb handlers ---

    def handle(self, verb: str, payload: dict):
        """Dispatch one verb; returns (response payload, mutated flag)."""
        payload = payload or {}
        if verb in READ_VERBS:
            return getattr(self, f"_verb_{verb}")(payload), False
        if verb in MUTATING_VERBS:
            with self._lock:
                result = getattr(self, f"_verb_{verb}")(payload)
                self.revision += 1
                self._rebuild_snapshot()
                return result, True
        raise UnknownVerb(f"unknown verb {verb!r}")

    def _verb_hello(self, payload):
        requested = payload.get("protocol", PROTOCOL)
        if requested != PROTOCOL:
            raise WorkbenchError(f"protocol {requested!r} not supported, "
                                 f"service speaks {PROTOCOL!r}")
        return {"protocol": PROTOCOL, "service": "vralign-workbench"}

    def _verb_get_scene(self, payload):
        return self._snapshot

    def _verb_get_robot(self, payload):
        return {"robot": robot_to_doc(self.config.robot),
                "robot_ref": self.config.robot_ref}

    def _verb_project(self, payload):
        view = payload.get("view", "main")
        snapshot = self._snapshot
        if view == "main":
            matrix = np.array(snapshot["observer"]["projection"])
        else:
            matching = [m for m in snapshot["mirrors"] if m["id"] == view]
            if not matching:
                raise IndexOutOfRange(f"no mirror with id {view!r}")
            matrix = np.array(matching[0]["projection"])
        pixels = []
        for point in payload.get("points", []):
            u, v, w = matrix @ np.append(np.asarray(point, dtype=float), 1.0)
            if abs(w) < 1e-12 or w < 0:
                pixels.append(None)
            else:
                pixels.append([u / w, v / w])
        return {"view": view, "pixels": pixels}

    def _verb_set_observer(self, payload):
        self.observer_pose = RigidTransform.from_doc(payload["pose"])
        return {"observer": self.observer_pose.to_doc()}

    def _verb_set_config(self, payload):
        config = JointConfig(np.asarray(payload["angles_deg"], dtype=float),
                             physical=True)
        if len(config) != self.config.robot.joint_count:
            raise SchemaError(f"config needs {self.config.robot.joint_count} angles")
        self.config.robot.assert_within_limits(config)
        self.config_deg = config.angles_deg
        if not self.session.finalized:
            self.actual_config_deg = config.angles_deg
        return {"config_deg": list(self.config_deg)}

    def _verb_nudge_virtual(self, payload):
        if self.session.finalized:
            raise SessionFinalized("the registration is finalized; the gizmo is locked")
        t_delta = np.asarray(payload.get("translation_mm", [0, 0, 0]), dtype=float)
        r_delta = np.deg2rad(np.asarray(payload.get("rotation_deg", [0, 0, 0]), dtype=float))
        # rotation spins the model about its own base point, so translations
        # accumulate additively and rotations compose on the left
        new_rot = so3_exp(r_delta) @ self.virtual_pose.rotation
        new_t = self.virtual_pose.translation + t_delta
        self.virtual_pose = RigidTransform(new_rot, new_t)
        return {"virtual_pose": self.virtual_pose.to_doc()}

    def _verb_set_virtual(self, payload):
        if self.session.finalized:
            raise SessionFinalized("the registration is finalized; the gizmo is locked")
        self.virtual_pose = RigidTransform.from_doc(payload["pose"])
        return {"virtual_pose": self.virtual_pose.to_doc()}

    def _verb_add_mirror(self, payload):
        pose = RigidTransform.from_doc(payload["pose"]) if "pose" in payload \
            else self.observer_pose
        ray = Ray(camera_center(pose), viewing_direction(pose))
        d = gaze_distance(ray, self.config.mesh)  # NoHit propagates, scene unchanged
        mirror_projection(self.config.intrinsics, pose, d)  # validates the geometry
        mirror = {"id": self._next_mirror_id, "pose": pose, "d_mm": d}
        self._next_mirror_id += 1
        self.mirrors.append(mirror)
        return {"id": mirror["id"], "d_mm": d}

    def _verb_remove_mirror(self, payload):
        mid = payload.get("id")
        for i, m in enumerate(self.mirrors):
            if m["id"] == mid:
                del self.mirrors[i]
                return {"removed": mid}
        raise IndexOutOfRange(f"no mirror with id {mid!r}")

    def _verb_record_trial(self, payload):
        trial = self.session.record_trial(self.virtual_pose,
                                          JointConfig(self.config_deg),
                                          mirror_count=len(self.mirrors))
        return {"trial_index": trial.index, "trials": len(self.session.trials),
                "mirror_count": trial.mirror_count}

    def _verb_finalize(self, payload):
        reg = self.session.finalize_registration()
        return {"registration": reg.to_doc(), "truth_pose": self.config.truth_pose.to_doc()}

    def _verb_evaluate(self, payload):
        report = self.session.evaluate_registration(payload["real"], payload["virtual"])
        return {"report": report.to_doc()}

    def _verb_plan(self, payload):
        plan = self.session.make_guidance_plan(
            np.asarray(payload["target_deg"], dtype=float))
        return {"plan": plan.to_doc()}

    def _verb_mark_step(self, payload):
        if self.session.plan is None:
            raise NotFinalized("no guidance plan to mark steps on")
        try:
            self.session.plan.mark_done(int(payload["joint_index"]))
        except IndexError as exc:
            raise IndexOutOfRange(str(exc)) from exc
        return {"plan": self.session.plan.to_doc()}

    def _verb_score(self, payload):
        summary = self.session.score_execution(
            np.asarray(payload["actual_deg"], dtype=float))
        return {"summary": summary.to_doc()}

    def _verb_set_actual_config(self, payload):
        if not self.session.finalized:
            raise NotFinalized("set-up starts after the registration is finalized")
        angles = np.asarray(payload["angles_deg"], dtype=float)
        if len(angles) != self.config.robot.joint_count:
            raise SchemaError(f"config needs {self.config.robot.joint_count} angles")
        self.actual_config_deg = angles
        return {"actual_config_deg": list(angles)}

    def _verb_save_session(self, payload):
        doc = self.session.to_document()
        path = payload.get("path")
        if path:
            Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                                  encoding="utf-8")
        return {"path": path, "document": doc}

    def _verb_load_session(self, payload):
        self.session = AlignmentSession.load(payload["path"])
        return {"trials": len(self.session.trials),
                "finalized": self.session.finalized}


def make_envelope(request_id, verb, revision, ok, payload=None, error=None) -> dict:
    out = {"id": request_id, "type": "response", "verb": verb,
           "ok": ok, "revision": revision}
    if ok:
        out["payload"] = payload
    else:
        out["error"] = error
    return out


def create_app(bench: Workbench, static_dir=None):
    """FastAPI app exposing the workbench over one WebSocket endpoint."""
    app = FastAPI(title="vralign workbench")
    app.state.bench = bench
    subscribers: set = set()

    @app.get("/api/health")
    def health():
        return {"ok": True, "revision": bench.revision, "protocol": PROTOCOL}

    async def pump(websocket: WebSocket, queue: "asyncio.Queue"):
        while True:
            message = await queue.get()
            await websocket.send_text(message)

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket):
        await websocket.accept()
        queue: asyncio.Queue = asyncio.Queue()
        subscribers.add(queue)
        writer = asyncio.create_task(pump(websocket, queue))
        greeted = False
        try:
            while True:
                raw = await websocket.receive_text()
                try:
                    request = json.loads(raw)
                except json.JSONDecodeError as exc:
                    queue.put_nowait(json.dumps(make_envelope(
                        None, None, bench.revision, False,
                        error={"type": "BadRequest", "message": f"invalid JSON: {exc}"})))
                    continue
                request_id = request.get("id")
                verb = request.get("verb")
                if not greeted and verb != "hello":
                    queue.put_nowait(json.dumps(make_envelope(
                        request_id, verb, bench.revision, False,
                        error={"type": "ProtocolError",
                               "message": "first message must be the hello handshake"})))
                    continue
                try:
                    payload, mutated = bench.handle(verb, request.get("payload") or {})
                except (WorkbenchError, ValueError, KeyError, TypeError) as exc:
                    queue.put_nowait(json.dumps(make_envelope(
                        request_id, verb, bench.revision, False,
                        error={"type": type(exc).__name__, "message": str(exc)})))
                    continue
                if verb == "hello":
                    greeted = True
                queue.put_nowait(json.dumps(make_envelope(
                    request_id, verb, bench.revision, True, payload=payload)))
                if mutated:
                    event = json.dumps({"type": "event", "event": "scene_changed",
                                        "revision": bench.revision})
                    for other in subscribers:
                        if other is not queue:
                            other.put_nowait(event)
        except WebSocketDisconnect:
            pass
        finally:
            subscribers.discard(queue)
            writer.cancel()

    if static_dir and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")
    return app


def serve(config: ServiceConfig, host: str = "127.0.0.1", port: int = 8787,
          static_dir=None) -> None:
    """Run the workbench service until interrupted."""
    import uvicorn

    app = create_app(Workbench(config), static_dir=static_dir)
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    except OSError as exc:
        raise BindFailure(f"cannot bind {host}:{port}: {exc}") from exc
