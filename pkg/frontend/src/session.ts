/** Session panel controller: buttons map one-to-one onto service verbs. */

import {
  JointSummaryDoc,
  MisalignmentDoc,
  PlanDoc,
  SceneSnapshot,
  TransformDoc,
} from "./protocol.js";
import { Channel } from "./transport.js";

export interface LandmarkPairs {
  real: number[][];
  virtual: number[][];
}

export class SessionController {
  lastEvaluation: MisalignmentDoc | null = null;
  lastScore: JointSummaryDoc | null = null;
  plan: PlanDoc | null = null;

  constructor(private readonly channel: Channel) {}

  async recordTrial(): Promise<number> {
    const out = await this.channel.request<{ trials: number }>("record_trial");
    return out.trials;
  }

  async finalize(): Promise<TransformDoc> {
    const out = await this.channel.request<{ truth_pose: TransformDoc }>("finalize");
    return out.truth_pose;
  }

  async evaluate(pairs: LandmarkPairs): Promise<MisalignmentDoc> {
    const out = await this.channel.request<{ report: MisalignmentDoc }>("evaluate", pairs);
    this.lastEvaluation = out.report;
    return out.report;
  }

  async makePlan(targetDeg: number[]): Promise<PlanDoc> {
    const out = await this.channel.request<{ plan: PlanDoc }>("plan", {
      target_deg: targetDeg,
    });
    this.plan = out.plan;
    return out.plan;
  }

  async markStep(jointIndex: number): Promise<PlanDoc> {
    const out = await this.channel.request<{ plan: PlanDoc }>("mark_step", {
      joint_index: jointIndex,
    });
    this.plan = out.plan;
    return out.plan;
  }

  async score(actualDeg: number[]): Promise<JointSummaryDoc> {
    const out = await this.channel.request<{ summary: JointSummaryDoc }>("score", {
      actual_deg: actualDeg,
    });
    this.lastScore = out.summary;
    return out.summary;
  }

  async saveSession(path: string): Promise<void> {
    await this.channel.request("save_session", { path });
  }
}

const fmt = (value: number) => value.toFixed(2);

/** Misalignment report as per-axis "(mean, std)" cells plus the L2 pair. */
export function misalignmentRow(report: MisalignmentDoc): string[] {
  const cells = report.mean_mm.map(
    (mean, axis) => `(${fmt(mean)}, ${fmt(report.std_mm[axis]!)})`,
  );
  cells.push(`(${fmt(report.l2_mean_mm)}, ${fmt(report.l2_std_mm)})`);
  return cells;
}

export function jointSummaryRow(summary: JointSummaryDoc): string[] {
  return [summary.mean, summary.median, summary.min, summary.max, summary.std].map(fmt);
}

/** Next pending step, honoring the base-to-tip ordering of the plan. */
export function nextPendingStep(plan: PlanDoc): number | null {
  for (const step of plan.steps) {
    if (!step.done) return step.joint_index;
  }
  return null;
}

export function guidanceChecklist(plan: PlanDoc, actualDeg: number[] | null): Array<{
  jointIndex: number;
  targetDeg: number;
  done: boolean;
  deltaDeg: number | null;
}> {
  return plan.steps.map((step) => ({
    jointIndex: step.joint_index,
    targetDeg: step.target_deg,
    done: step.done,
    deltaDeg: actualDeg ? Math.abs(actualDeg[step.joint_index]! - step.target_deg) : null,
  }));
}

export function sessionStatusLine(scene: SceneSnapshot): string {
  const { trials, suggested_trials, finalized } = scene.session;
  if (finalized) return `registration finalized over ${trials} trials`;
  return `${trials}/${suggested_trials} suggested trials recorded`;
}
