/** Wire types for the workbench channel (see docs/protocol.md). */

export const PROTOCOL = "workbench/1";

export interface TransformDoc {
  rotation: number[][];
  translation_mm: number[];
}

export interface IntrinsicsDoc {
  fx: number;
  fy: number;
  cx: number;
  cy: number;
  skew: number;
}

export interface CameraDoc {
  intrinsics: IntrinsicsDoc;
  pose: TransformDoc;
  projection: number[][];
  center: number[];
  viewing_direction: number[];
}

export interface MirrorDoc extends CameraDoc {
  id: number;
  d_mm: number;
  observer_pose: TransformDoc;
}

export interface MisalignmentDoc {
  mean_mm: number[];
  std_mm: number[];
  l2_mean_mm: number;
  l2_std_mm: number;
  count: number;
  per_axis_mode: string;
}

export interface JointSummaryDoc {
  per_joint_deg: number[];
  mean: number;
  median: number;
  min: number;
  max: number;
  std: number;
}

export interface PlanDoc {
  target_deg: number[];
  steps: Array<{ joint_index: number; target_deg: number; done: boolean }>;
  created_ms: number;
}

export interface SessionInfoDoc {
  trials: number;
  finalized: boolean;
  suggested_trials: number;
  registration: { trial_count: number } | null;
  plan: PlanDoc | null;
  evaluations: MisalignmentDoc[];
  scores: Array<{ summary: JointSummaryDoc }>;
}

export interface SceneSnapshot {
  revision: number;
  status: "aligning" | "finalized";
  viewport: { width: number; height: number };
  observer: CameraDoc;
  mirrors: MirrorDoc[];
  virtual: { pose: TransformDoc; config_deg: number[] };
  config_deg: number[];
  actual_config_deg: number[] | null;
  real_segments: number[][][];
  virtual_segments: number[][][];
  truth_pose: TransformDoc | null;
  session: SessionInfoDoc;
}

export interface NudgeDelta {
  translation_mm: [number, number, number];
  rotation_deg: [number, number, number];
}

export interface ResponseEnvelope {
  id: number;
  type: "response";
  verb: string;
  ok: boolean;
  revision: number;
  payload?: unknown;
  error?: { type: string; message: string };
}

export interface EventEnvelope {
  type: "event";
  event: string;
  revision: number;
}

export type Envelope = ResponseEnvelope | EventEnvelope;

export function parseEnvelope(raw: string): Envelope {
  const data = JSON.parse(raw) as Record<string, unknown>;
  if (data.type === "event" && typeof data.event === "string") {
    return data as unknown as EventEnvelope;
  }
  if (data.type === "response" && typeof data.ok === "boolean") {
    return data as unknown as ResponseEnvelope;
  }
  throw new Error(`unrecognized envelope: ${raw.slice(0, 120)}`);
}

/** Error carrying the structured service-side failure. */
export class ServiceError extends Error {
  readonly kind: string;

  constructor(kind: string, message: string) {
    super(`${kind}: ${message}`);
    this.kind = kind;
  }
}
