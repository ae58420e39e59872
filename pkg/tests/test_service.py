import json
import threading
from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient

from vralign.service import PROTOCOL, ServiceConfig, Workbench, create_app, fixture_path
from vralign.session import replay_document

# pose at the fixture observer's eye but looking away from the scene box
MISSING_POSE = {
    "rotation": [[-1.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, -1.0, 0.0]],
    "translation_mm": [520.0, 400.0, -1200.0],
}


class FakeClock:
    def __init__(self):
        self.t = 0.0

    def __call__(self):
        self.t += 50.0
        return self.t


@pytest.fixture()
def bench() -> Workbench:
    config = ServiceConfig.from_file(fixture_path("workbench_config.json"))
    return Workbench(config, clock=FakeClock())


@pytest.fixture()
def client(bench):
    with TestClient(create_app(bench)) as c:
        yield c


class Channel:
    """Small JSON request/response helper over a test websocket."""

    def __init__(self, ws):
        self.ws = ws
        self.next_id = 0
        self.events = []

    def call(self, verb, payload=None, expect_ok=True):
        self.next_id += 1
        self.ws.send_json({"id": self.next_id, "verb": verb, "payload": payload or {}})
        while True:
            msg = self.ws.receive_json()
            if msg.get("type") == "event":
                self.events.append(msg)
                continue
            assert msg["id"] == self.next_id
            if expect_ok:
                assert msg["ok"], msg.get("error")
                return msg
            assert not msg["ok"]
            return msg


def open_channel(client):
    ctx = client.websocket_connect("/ws")
    ws = ctx.__enter__()
    ch = Channel(ws)
    ch.call("hello", {"protocol": PROTOCOL})
    return ctx, ch


def test_fresh_scene(client):
    ctx, ch = open_channel(client)
    try:
        scene = ch.call("get_scene")["payload"]
        assert scene["revision"] == 0
        assert scene["mirrors"] == []
        assert scene["status"] == "aligning"
        assert scene["truth_pose"] is None
        assert scene["actual_config_deg"] is None
        assert len(scene["real_segments"]) >= 1
    finally:
        ctx.__exit__(None, None, None)


def test_hello_required_first(client):
    with client.websocket_connect("/ws") as ws:
        ws.send_json({"id": 1, "verb": "get_scene", "payload": {}})
        msg = ws.receive_json()
        assert not msg["ok"] and msg["error"]["type"] == "ProtocolError"
        ws.send_json({"id": 2, "verb": "hello", "payload": {"protocol": "workbench/999"}})
        msg = ws.receive_json()
        assert not msg["ok"]
        ws.send_json({"id": 3, "verb": "hello", "payload": {"protocol": PROTOCOL}})
        msg = ws.receive_json()
        assert msg["ok"] and msg["payload"]["protocol"] == PROTOCOL


def test_unknown_verb_structured_error(client):
    ctx, ch = open_channel(client)
    try:
        msg = ch.call("frobnicate", expect_ok=False)
        assert msg["error"]["type"] == "UnknownVerb"
    finally:
        ctx.__exit__(None, None, None)


def test_revision_increments_by_one_per_mutation(client):
    ctx, ch = open_channel(client)
    try:
        r0 = ch.call("get_scene")["payload"]["revision"]
        ch.call("nudge_virtual", {"translation_mm": [1.0, 0.0, 0.0]})
        ch.call("nudge_virtual", {"rotation_deg": [0.0, 0.0, 0.5]})
        ch.call("add_mirror")
        scene = ch.call("get_scene")["payload"]
        assert scene["revision"] == r0 + 3
        # reads do not bump the revision
        assert ch.call("get_scene")["payload"]["revision"] == r0 + 3
    finally:
        ctx.__exit__(None, None, None)


def test_read_idempotence(client):
    ctx, ch = open_channel(client)
    try:
        a = ch.call("get_scene")["payload"]
        b = ch.call("get_scene")["payload"]
        assert a == b
    finally:
        ctx.__exit__(None, None, None)


def test_add_mirror_freezes_gaze_distance(client):
    ctx, ch = open_channel(client)
    try:
        out = ch.call("add_mirror")["payload"]
        assert out["d_mm"] == 2500.0  # fixture observer is 2500 mm from the back wall
        scene = ch.call("get_scene")["payload"]
        assert len(scene["mirrors"]) == 1
        mirror = scene["mirrors"][0]
        assert mirror["d_mm"] == 2500.0
        assert mirror["intrinsics"]["fy"] < 0  # flipped y
        removed = ch.call("remove_mirror", {"id": mirror["id"]})["payload"]
        assert removed["removed"] == mirror["id"]
    finally:
        ctx.__exit__(None, None, None)


def test_add_mirror_miss_leaves_scene_unchanged(client):
    ctx, ch = open_channel(client)
    try:
        before = ch.call("get_scene")["payload"]
        msg = ch.call("add_mirror", {"pose": MISSING_POSE}, expect_ok=False)
        assert msg["error"]["type"] == "NoHit"
        after = ch.call("get_scene")["payload"]
        assert after == before
    finally:
        ctx.__exit__(None, None, None)


def test_truth_hidden_until_finalize(client):
    ctx, ch = open_channel(client)
    try:
        scene = ch.call("get_scene")["payload"]
        assert scene["truth_pose"] is None
        assert "truth" not in json.dumps(scene["real_segments"])
        ch.call("record_trial")
        out = ch.call("finalize")["payload"]
        assert out["truth_pose"] is not None
        scene = ch.call("get_scene")["payload"]
        assert scene["truth_pose"] is not None
        assert scene["status"] == "finalized"
    finally:
        ctx.__exit__(None, None, None)


def test_nudges_compose_and_lock_after_finalize(client):
    ctx, ch = open_channel(client)
    try:
        start = np.array(ch.call("get_scene")["payload"]["virtual"]["pose"]["translation_mm"])
        for _ in range(5):
            ch.call("nudge_virtual", {"translation_mm": [2.0, -1.0, 0.5]})
        scene = ch.call("get_scene")["payload"]
        got = np.array(scene["virtual"]["pose"]["translation_mm"])
        assert np.allclose(got, start + 5 * np.array([2.0, -1.0, 0.5]), atol=1e-9)
        ch.call("record_trial")
        ch.call("finalize")
        msg = ch.call("nudge_virtual", {"translation_mm": [1, 0, 0]}, expect_ok=False)
        assert msg["error"]["type"] == "SessionFinalized"
    finally:
        ctx.__exit__(None, None, None)


def test_project_matches_scene_projection(client):
    ctx, ch = open_channel(client)
    try:
        ch.call("add_mirror")
        scene = ch.call("get_scene")["payload"]
        point = scene["virtual_segments"][0][1]
        for view, matrix in [("main", scene["observer"]["projection"]),
                             (scene["mirrors"][0]["id"],
                              scene["mirrors"][0]["projection"])]:
            out = ch.call("project", {"view": view, "points": [point]})["payload"]
            u, v, w = np.array(matrix) @ np.append(np.array(point), 1.0)
            assert np.allclose(out["pixels"][0], [u / w, v / w], atol=1e-9)
    finally:
        ctx.__exit__(None, None, None)


def test_scene_change_events_pushed_to_other_clients(client):
    ctx_a, ch_a = open_channel(client)
    ctx_b, ch_b = open_channel(client)
    try:
        ch_a.call("nudge_virtual", {"translation_mm": [1.0, 0.0, 0.0]})
        # b's next receive should be the pushed event
        msg = ch_b.ws.receive_json()
        assert msg["type"] == "event" and msg["event"] == "scene_changed"
        assert msg["revision"] == ch_a.call("get_scene")["payload"]["revision"]
    finally:
        ctx_a.__exit__(None, None, None)
        ctx_b.__exit__(None, None, None)


def test_scripted_session_matches_replay(client, tmp_path):
    ctx, ch = open_channel(client)
    try:
        ch.call("add_mirror")
        for _ in range(5):
            ch.call("nudge_virtual", {"translation_mm": [20.0, -8.0, 0.0],
                                      "rotation_deg": [0.0, 0.0, 0.8]})
        for _ in range(3):
            ch.call("record_trial")
        ch.call("finalize")
        real = [[600.0, 0.0, 300.0], [500.0, -100.0, 800.0], [700.0, 40.0, 1200.0]]
        virtual = [[90.0, 45.0, 310.0], [-15.0, -60.0, 790.0], [180.0, 80.0, 1190.0]]
        live = ch.call("evaluate", {"real": real, "virtual": virtual})["payload"]["report"]
        ch.call("plan", {"target_deg": [10.0, 20.0, 0.0, -30.0, 5.0, 40.0, 0.0]})
        ch.call("score", {"actual_deg": [12.0, 18.0, 1.0, -28.0, 5.0, 44.0, -2.0]})
        path = tmp_path / "session.json"
        saved = ch.call("save_session", {"path": str(path)})["payload"]
        doc = json.loads(path.read_text())
        assert saved["document"] == doc
        recomputed = replay_document(doc)
        assert recomputed["registration"] == doc["registration"]
        assert recomputed["evaluations"] == [live]
        assert recomputed["scores"] == [s["summary"] for s in doc["scores"]]
    finally:
        ctx.__exit__(None, None, None)


def test_guidance_flow_with_sliders(client):
    ctx, ch = open_channel(client)
    try:
        msg = ch.call("set_actual_config",
                      {"angles_deg": [0, 0, 0, 0, 0, 0, 0]}, expect_ok=False)
        assert msg["error"]["type"] == "NotFinalized"
        ch.call("record_trial")
        ch.call("finalize")
        target = [10.0, 20.0, 0.0, -30.0, 5.0, 40.0, 0.0]
        plan = ch.call("plan", {"target_deg": target})["payload"]["plan"]
        assert [s["joint_index"] for s in plan["steps"]] == list(range(7))
        ch.call("set_actual_config", {"angles_deg": target})
        plan = ch.call("mark_step", {"joint_index": 0})["payload"]["plan"]
        assert plan["steps"][0]["done"] and not plan["steps"][1]["done"]
        summary = ch.call("score", {"actual_deg": target})["payload"]["summary"]
        assert summary["max"] == 0.0
        scene = ch.call("get_scene")["payload"]
        assert scene["actual_config_deg"] == target
    finally:
        ctx.__exit__(None, None, None)


def test_set_config_validates_limits(client):
    ctx, ch = open_channel(client)
    try:
        msg = ch.call("set_config", {"angles_deg": [500, 0, 0, 0, 0, 0, 0]},
                      expect_ok=False)
        assert "limits" in msg["error"]["message"]
        ch.call("set_config", {"angles_deg": [10, 10, 10, 10, 10, 10, 10]})
        scene = ch.call("get_scene")["payload"]
        assert scene["config_deg"] == [10.0] * 7
    finally:
        ctx.__exit__(None, None, None)


def test_concurrent_mutations_never_tear_state(bench):
    errors = []

    def spin(k):
        try:
            for _ in range(50):
                bench.handle("nudge_virtual", {"translation_mm": [0.1 * k, 0.0, 0.0]})
                payload, _ = bench.handle("get_scene", {})
                assert payload["revision"] == payload["revision"]  # snapshot is one object
        except Exception as exc:  # pragma: no cover - failure reporting
            errors.append(exc)

    threads = [threading.Thread(target=spin, args=(k,)) for k in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
    assert bench.revision == 200
    scene, _ = bench.handle("get_scene", {})
    assert scene["revision"] == 200


def test_load_session_roundtrip(client, tmp_path, bench):
    ctx, ch = open_channel(client)
    try:
        ch.call("record_trial")
        ch.call("record_trial")
        path = tmp_path / "s.json"
        ch.call("save_session", {"path": str(path)})
        ch.call("load_session", {"path": str(path)})
        scene = ch.call("get_scene")["payload"]
        assert scene["session"]["trials"] == 2
    finally:
        ctx.__exit__(None, None, None)
