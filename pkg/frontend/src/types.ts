// Category names mirror the service's CSV/JSON vocabulary exactly.

export type Transparency = "AR_off" | "AR_on";
export type Reliability = "Rel_low" | "Rel_mid" | "Rel_high";
export type Traffic = "Traffic_low" | "Traffic_high";
export type Pedestrians = "Peds_absent" | "Peds_present";
export type Reliance = "R_minus" | "R_plus";
export type Gaze = "G_road" | "G_vehi" | "G_ped" | "G_side" | "G_oth";

export interface Context {
  reliability: Reliability;
  traffic: Traffic;
  pedestrians: Pedestrians;
}

export interface Observation {
  reliance: Reliance;
  gaze: Gaze;
}

export interface SessionInfo {
  session_id: string;
  carry_belief: boolean;
  belief: number[];
  p_trust_high: number;
  p_workload_high: number;
}

export interface StepResult {
  step_index: number;
  action: Transparency;
  belief: number[];
  p_trust_high: number;
  p_workload_high: number;
  reward: number;
  cumulative_discounted_reward: number;
  belief_reset: boolean;
}

export interface TraceEntry extends StepResult {
  context: Context;
  observation: Observation;
  episode_start: boolean;
}

export interface TraceResponse {
  session_id: string;
  carry_belief: boolean;
  steps: TraceEntry[];
}

export interface SessionMetrics {
  session_id: string;
  n_steps: number;
  discounted_return: number;
  calibration_rate: number;
  transparency_on_rate: number;
  zero_likelihood_resets: number;
}

export interface StepRequestBody {
  context: Context;
  observation: Observation;
  episode_start: boolean;
}
