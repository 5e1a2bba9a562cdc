import type { SessionApi } from "./client.js";
import type {
  Context,
  Gaze,
  Observation,
  Reliance,
  SessionMetrics,
  StepRequestBody,
  TraceEntry,
  Transparency,
} from "./types.js";

export interface ScenarioSegment {
  context: Context;
  steps: number;
}

export interface ScenarioPreset {
  name: string;
  label: string;
  segments: ScenarioSegment[];
}

/** Bundled intersection scripts for the guided mode. */
export const SCENARIO_PRESETS: ScenarioPreset[] = [
  {
    name: "low-reliability-pedestrians",
    label: "Low reliability intersections with pedestrians",
    segments: [
      {
        context: {
          reliability: "Rel_low",
          traffic: "Traffic_low",
          pedestrians: "Peds_present",
        },
        steps: 8,
      },
      {
        context: {
          reliability: "Rel_low",
          traffic: "Traffic_high",
          pedestrians: "Peds_present",
        },
        steps: 8,
      },
      {
        context: {
          reliability: "Rel_mid",
          traffic: "Traffic_low",
          pedestrians: "Peds_present",
        },
        steps: 8,
      },
    ],
  },
  {
    name: "reliability-sweep",
    label: "Reliability sweep, calm traffic",
    segments: (["Rel_low", "Rel_mid", "Rel_high"] as const).map((r) => ({
      context: {
        reliability: r,
        traffic: "Traffic_low",
        pedestrians: "Peds_absent",
      },
      steps: 10,
    })),
  },
];

/**
 * Everything the page renders about one session.  All numbers are verbatim
 * service responses; the controller never recomputes a probability or a
 * reward.
 */
export interface SessionView {
  sessionId: string | null;
  connected: boolean;
  steps: TraceEntry[];
  pTrustHigh: number[];
  pWorkloadHigh: number[];
  resetSteps: number[];
  lastAction: Transparency | null;
  cumulativeDiscountedReward: number;
  context: Context;
  scenarioRunning: boolean;
  scenarioStepsLeft: number;
}

const DEFAULT_CONTEXT: Context = {
  reliability: "Rel_mid",
  traffic: "Traffic_low",
  pedestrians: "Peds_absent",
};

export class SessionController {
  private sessionId: string | null = null;
  private steps: TraceEntry[] = [];
  private context: Context = { ...DEFAULT_CONTEXT };
  private scenarioQueue: Context[] = [];
  private scenarioActive = false;
  private listeners: Array<(view: SessionView) => void> = [];

  constructor(private readonly client: SessionApi) {}

  onChange(listener: (view: SessionView) => void): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    const view = this.view();
    for (const listener of this.listeners) listener(view);
  }

  view(): SessionView {
    const last = this.steps[this.steps.length - 1];
    return {
      sessionId: this.sessionId,
      connected: this.sessionId !== null,
      steps: [...this.steps],
      pTrustHigh: this.steps.map((s) => s.p_trust_high),
      pWorkloadHigh: this.steps.map((s) => s.p_workload_high),
      resetSteps: this.steps.filter((s) => s.belief_reset)
        .map((s) => s.step_index),
      lastAction: last ? last.action : null,
      cumulativeDiscountedReward: last
        ? last.cumulative_discounted_reward
        : 0,
      context: { ...this.context },
      scenarioRunning: this.scenarioActive,
      scenarioStepsLeft: this.scenarioQueue.length,
    };
  }

  async start(carryBelief = false): Promise<SessionView> {
    const info = await this.client.createSession(carryBelief);
    this.sessionId = info.session_id;
    this.steps = [];
    this.scenarioQueue = [];
    this.scenarioActive = false;
    this.emit();
    return this.view();
  }

  /** Rebuild the timeline from the service trace (page-reload path). */
  async restore(sessionId: string): Promise<SessionView> {
    const trace = await this.client.trace(sessionId);
    this.sessionId = trace.session_id;
    this.steps = [...trace.steps];
    const last = this.steps[this.steps.length - 1];
    if (last) this.context = { ...last.context };
    this.emit();
    return this.view();
  }

  setContext(partial: Partial<Context>): void {
    this.context = { ...this.context, ...partial };
    this.emit();
  }

  /**
   * One human tick: send the chosen reliance/gaze with the current context,
   * append the verbatim result to the timeline.
   */
  async step(
    reliance: Reliance,
    gaze: Gaze,
    episodeStart = false,
  ): Promise<TraceEntry> {
    if (this.sessionId === null) throw new Error("no active session");
    const body: StepRequestBody = {
      context: { ...this.context },
      observation: { reliance, gaze },
      episode_start: episodeStart,
    };
    const result = await this.client.step(this.sessionId, body);
    const entry: TraceEntry = {
      ...result,
      context: body.context,
      observation: body.observation,
      episode_start: episodeStart,
    };
    this.steps.push(entry);
    this.emit();
    return entry;
  }

  /** Queue a preset's contexts; each subsequent step consumes one. */
  startScenario(preset: ScenarioPreset): void {
    this.scenarioQueue = preset.segments.flatMap((segment) =>
      Array.from({ length: segment.steps }, () => ({ ...segment.context })),
    );
    this.scenarioActive = this.scenarioQueue.length > 0;
    if (this.scenarioActive) {
      const next = this.scenarioQueue[0];
      if (next) this.context = { ...next };
    }
    this.emit();
  }

  pauseScenario(): void {
    this.scenarioActive = false;
    this.emit();
  }

  resumeScenario(): void {
    this.scenarioActive = this.scenarioQueue.length > 0;
    this.emit();
  }

  get scenarioRunning(): boolean {
    return this.scenarioActive;
  }

  /**
   * One guided tick: the scenario supplies the context, the human supplies
   * reliance/gaze.  Episode boundaries are marked when the context changes.
   */
  async scenarioStep(reliance: Reliance, gaze: Gaze): Promise<TraceEntry | null> {
    if (!this.scenarioActive) return null;
    const next = this.scenarioQueue.shift();
    if (next === undefined) {
      this.scenarioActive = false;
      this.emit();
      return null;
    }
    const episodeStart =
      next.reliability !== this.context.reliability ||
      next.traffic !== this.context.traffic ||
      next.pedestrians !== this.context.pedestrians;
    this.context = { ...next };
    if (this.scenarioQueue.length === 0) this.scenarioActive = false;
    return this.step(reliance, gaze, episodeStart);
  }

  /** End-of-run summary, verbatim from the service. */
  async summary(): Promise<SessionMetrics> {
    if (this.sessionId === null) throw new Error("no active session");
    return this.client.metrics(this.sessionId);
  }
}

/** Reliance/gaze options in canonical order, for building controls. */
export const RELIANCE_OPTIONS: Reliance[] = ["R_minus", "R_plus"];
export const GAZE_OPTIONS: Gaze[] = [
  "G_road",
  "G_vehi",
  "G_ped",
  "G_side",
  "G_oth",
];

export type { Observation };
