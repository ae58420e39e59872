/**
 * End-to-end: spawn the real workbench service, run the scripted alignment
 * session through the client channel, and check that
 *   1) the service-side report equals what CLI replay recomputes from the
 *      captured session document, and
 *   2) the viewport-consistency invariant holds: the client's screen-space
 *      placement of the virtual robot matches the service's own projection
 *      within 1 px in every viewport.
 */
import { execFile, spawn, ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { promisify } from "node:util";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import WebSocket from "ws";

import { canvasDistance, pixelToCanvas, projectPoint } from "../src/math.js";
import { viewportSpecs } from "../src/renderer.js";
import { SceneSnapshot } from "../src/protocol.js";
import { Channel, SocketLike } from "../src/transport.js";

const execFileAsync = promisify(execFile);
const PORT = 18_000 + (process.pid % 2_000);
const BASE = `http://127.0.0.1:${PORT}`;

let service: ChildProcess;
let channel: Channel;
const workdir = mkdtempSync(join(tmpdir(), "vralign-e2e-"));

async function waitForHealth(timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    try {
      const res = await fetch(`${BASE}/api/health`);
      if (res.ok) return;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) throw new Error("service never became healthy");
    await new Promise((r) => setTimeout(r, 250));
  }
}

beforeAll(async () => {
  service = spawn("python3", ["-m", "vralign", "serve", "--port", String(PORT)], {
    stdio: ["ignore", "pipe", "pipe"],
  });
  service.stderr?.on("data", (chunk: Buffer) => process.stderr.write(chunk));
  await waitForHealth();
  channel = new Channel((url) => new WebSocket(url) as unknown as SocketLike);
  await channel.connect(`ws://127.0.0.1:${PORT}/ws`);
}, 45_000);

afterAll(() => {
  channel?.close();
  service?.kill();
});

describe("scripted session against the live service", () => {
  const realLandmarks = [
    [600.0, 0.0, 300.0], [500.0, -100.0, 800.0], [700.0, 40.0, 1200.0],
  ];
  const virtualLandmarks = [
    [90.0, 45.0, 310.0], [-15.0, -60.0, 790.0], [180.0, 80.0, 1190.0],
  ];

  it("connect -> mirror -> nudges -> trials -> finalize -> evaluate matches CLI replay", async () => {
    const mirror = await channel.request<{ id: number; d_mm: number }>("add_mirror");
    expect(mirror.d_mm).toBeCloseTo(2500.0, 9);

    for (let i = 0; i < 5; i++) {
      await channel.request("nudge_virtual", {
        translation_mm: [22.0, -9.0, 1.0],
        rotation_deg: [0.0, 0.0, 0.9],
      });
    }
    for (let i = 0; i < 3; i++) {
      await channel.request("record_trial");
    }
    await channel.request("finalize");
    const { report } = await channel.request<{ report: unknown }>("evaluate", {
      real: realLandmarks,
      virtual: virtualLandmarks,
    });

    const sessionPath = join(workdir, "session.json");
    await channel.request("save_session", { path: sessionPath });

    const replayPath = join(workdir, "replay.json");
    await execFileAsync("python3",
      ["-m", "vralign", "replay", sessionPath, "--out", replayPath]);
    const replayed = JSON.parse(readFileSync(replayPath, "utf-8")) as {
      registration: unknown;
      evaluations: unknown[];
    };
    const stored = JSON.parse(readFileSync(sessionPath, "utf-8")) as {
      registration: unknown;
      evaluations: unknown[];
    };
    // interactive execution, the captured document, and offline replay agree
    expect(replayed.evaluations).toEqual([report]);
    expect(stored.evaluations).toEqual([report]);
    expect(replayed.registration).toEqual(stored.registration);
  }, 60_000);

  it("holds the viewport-consistency invariant within 1 px", async () => {
    const scene = await channel.request<SceneSnapshot>("get_scene");
    expect(scene.mirrors.length).toBeGreaterThan(0);
    for (const spec of viewportSpecs(scene)) {
      const view = spec.id === "main" ? "main" : Number(spec.id);
      const points = scene.virtual_segments[0]!;
      const served = await channel.request<{ pixels: Array<number[] | null> }>(
        "project", { view, points });
      let checked = 0;
      points.forEach((point, i) => {
        const local = projectPoint(spec.projection, point);
        const remote = served.pixels[i];
        if (local === null || !remote) {
          expect(local).toBeNull();
          expect(remote).toBeNull();
          return;
        }
        const clientCanvas = pixelToCanvas(local, spec, spec.role);
        const serviceCanvas = pixelToCanvas({ u: remote[0]!, v: remote[1]! }, spec, spec.role);
        expect(canvasDistance(clientCanvas, serviceCanvas)).toBeLessThan(1.0);
        checked += 1;
      });
      expect(checked).toBeGreaterThan(0);
    }
  }, 30_000);

  it("locks mutations after finalize with a structured error", async () => {
    await expect(
      channel.request("nudge_virtual", { translation_mm: [1, 0, 0] }),
    ).rejects.toThrow(/SessionFinalized/);
  });
});
