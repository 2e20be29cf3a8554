// Server payload shapes; these mirror the play service's JSON exactly.

export interface ScenarioInfo {
  id: string;
  description: string;
  recipes: string[];
  horizon: number;
  model: string;
  modes: string[];
}

export type SessionStatus = "active" | "succeeded" | "failed-horizon";

export interface SessionSummary {
  api_version: number;
  session_id: string;
  scenario: string;
  mode: "cirl" | "irl";
  model: string;
  turn: number;
  horizon: number;
  status: SessionStatus;
  state: Record<string, string>;
  objectives: string[];
  belief: number[];
  robot_action: string | null;
  legal_human_actions: string[];
  true_recipe: string;
}

export interface TraceTurn {
  turn: number;
  state: Record<string, string>;
  robot_action: string;
  human_action: string;
  rewards: number[];
  belief: number[];
}

export interface SessionView extends SessionSummary {
  trace: TraceTurn[];
}

export interface ServiceError {
  code: string;
  message: string;
  legal_actions?: string[];
}
