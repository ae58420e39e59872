/** DOM wiring: viewports, gizmo keys, and the session panel.
 *
 * Server-authoritative by construction: every repaint follows a fresh
 * get_scene for a new revision; nothing numeric is computed locally beyond
 * applying served projection matrices to served geometry.
 */

import { GizmoHandle, GizmoState, stepsForKey } from "./gizmo.js";
import { buildDrawLists, paintDrawList } from "./renderer.js";
import { SceneSnapshot } from "./protocol.js";
import {
  SessionController,
  guidanceChecklist,
  jointSummaryRow,
  misalignmentRow,
  sessionStatusLine,
} from "./session.js";
import { Channel } from "./transport.js";

const HANDLES: GizmoHandle[] = [
  "translate-x", "translate-y", "translate-z",
  "rotate-x", "rotate-y", "rotate-z",
];

export class WorkbenchApp {
  private readonly gizmo = new GizmoState();
  private readonly session: SessionController;
  private scene: SceneSnapshot | null = null;
  private paintedRevision = -1;
  private refreshing = false;

  private viewportHost!: HTMLElement;
  private statusBar!: HTMLElement;
  private reportHost!: HTMLElement;
  private banner!: HTMLElement;

  constructor(private readonly root: HTMLElement, private readonly channel: Channel) {
    this.session = new SessionController(channel);
  }

  async start(url: string): Promise<void> {
    this.buildLayout();
    this.channel.onClose(() => this.banner.classList.add("visible"));
    await this.channel.connect(url);
    this.channel.onEvent(() => void this.refresh());
    await this.refresh();
    this.bindKeys();
  }

  /** Pull the scene and repaint once per revision. */
  private async refresh(): Promise<void> {
    if (this.refreshing) return;
    this.refreshing = true;
    try {
      const scene = await this.channel.request<SceneSnapshot>("get_scene");
      this.scene = scene;
      if (scene.revision !== this.paintedRevision) {
        this.paintedRevision = scene.revision;
        this.paint(scene);
      }
    } finally {
      this.refreshing = false;
    }
  }

  private paint(scene: SceneSnapshot): void {
    const drawLists = buildDrawLists(scene);
    const wanted = new Set(drawLists.map((d) => `viewport-${d.viewport.id}`));
    for (const child of Array.from(this.viewportHost.children)) {
      if (!wanted.has(child.id)) child.remove();
    }
    for (const drawList of drawLists) {
      const id = `viewport-${drawList.viewport.id}`;
      let cell = document.getElementById(id);
      if (!cell) {
        cell = document.createElement("figure");
        cell.id = id;
        cell.className = `viewport ${drawList.viewport.role}`;
        const canvas = document.createElement("canvas");
        canvas.width = drawList.viewport.width;
        canvas.height = drawList.viewport.height;
        const caption = document.createElement("figcaption");
        cell.append(canvas, caption);
        this.viewportHost.append(cell);
        // mirror viewports are read-only: gizmo focus stays on the main view
        if (drawList.viewport.role === "main") {
          canvas.tabIndex = 0;
          canvas.addEventListener("click", () => canvas.focus());
        }
      }
      cell.querySelector("figcaption")!.textContent = drawList.viewport.title;
      const ctx = (cell.querySelector("canvas") as HTMLCanvasElement).getContext("2d")!;
      paintDrawList(ctx, drawList);
    }
    if (scene.session.finalized) this.gizmo.lock();
    this.statusBar.textContent =
      `rev ${scene.revision} | ${sessionStatusLine(scene)} | handle: ${this.gizmo.activeHandle}`;
    this.renderReports(scene);
  }

  private renderReports(scene: SceneSnapshot): void {
    this.reportHost.replaceChildren();
    const evaluation = scene.session.evaluations.at(-1);
    if (evaluation) {
      const header = ["(tx̄, σx)", "(tȳ, σy)", "(tz̄, σz)", "(‖t̄‖₂, ‖σ‖₂)"];
      this.reportHost.append(
        this.table("misalignment [mm]", header, [misalignmentRow(evaluation)]),
      );
    }
    const score = scene.session.scores.at(-1);
    if (score) {
      this.reportHost.append(this.table(
        "joint error [deg]",
        ["mean", "median", "min", "max", "std"],
        [jointSummaryRow(score.summary)],
      ));
    }
    if (scene.session.plan) {
      const list = document.createElement("ol");
      list.className = "checklist";
      for (const item of guidanceChecklist(scene.session.plan, scene.actual_config_deg)) {
        const li = document.createElement("li");
        li.textContent = `joint ${item.jointIndex + 1} → ${item.targetDeg.toFixed(1)}°`
          + (item.deltaDeg !== null ? ` (off by ${item.deltaDeg.toFixed(1)}°)` : "");
        if (item.done) li.classList.add("done");
        list.append(li);
      }
      this.reportHost.append(list);
    }
  }

  private table(title: string, header: string[], rows: string[][]): HTMLElement {
    const wrap = document.createElement("div");
    const caption = document.createElement("h3");
    caption.textContent = title;
    const table = document.createElement("table");
    table.innerHTML = `<tr>${header.map((h) => `<th>${h}</th>`).join("")}</tr>`
      + rows.map((r) => `<tr>${r.map((c) => `<td>${c}</td>`).join("")}</tr>`).join("");
    wrap.append(caption, table);
    return wrap;
  }

  private bindKeys(): void {
    this.root.addEventListener("keydown", (event) => {
      const key = event.key;
      const index = Number.parseInt(key, 10);
      if (index >= 1 && index <= 6) {
        this.gizmo.setHandle(HANDLES[index - 1]!);
        if (this.scene) this.paint(this.scene);
        return;
      }
      const steps = stepsForKey(key);
      if (steps !== null && !this.gizmo.locked) {
        this.gizmo.nudge(steps, event.shiftKey);
        event.preventDefault();
        return;
      }
      if (key === "Enter") void this.commitGizmo();
    });
  }

  private async commitGizmo(): Promise<void> {
    const delta = this.gizmo.commit();
    if (!delta) return;
    try {
      await this.channel.request("nudge_virtual", delta);
      await this.refresh(); // repaint only once the new revision arrives
    } catch (error) {
      this.toast(String(error));
    }
  }

  private buildLayout(): void {
    this.root.innerHTML = "";
    this.banner = document.createElement("div");
    this.banner.className = "banner";
    this.banner.textContent = "disconnected from the workbench service";
    this.statusBar = document.createElement("div");
    this.statusBar.className = "status";
    this.viewportHost = document.createElement("div");
    this.viewportHost.className = "viewports";
    this.reportHost = document.createElement("div");
    this.reportHost.className = "reports";

    const panel = document.createElement("div");
    panel.className = "panel";
    const actions: Array<[string, () => Promise<unknown>]> = [
      ["add mirror", () => this.channel.request("add_mirror")],
      ["record trial", () => this.session.recordTrial()],
      ["finalize", () => this.session.finalize()],
      ["commit nudge", () => this.commitGizmo()],
    ];
    for (const [label, action] of actions) {
      const button = document.createElement("button");
      button.textContent = label;
      button.addEventListener("click", () => {
        action().then(() => this.refresh()).catch((error) => this.toast(String(error)));
      });
      panel.append(button);
    }
    this.root.append(this.banner, this.statusBar, this.viewportHost, panel, this.reportHost);
  }

  private toast(message: string): void {
    const node = document.createElement("div");
    node.className = "toast";
    node.textContent = message;
    this.root.append(node);
    setTimeout(() => node.remove(), 4000);
  }
}
