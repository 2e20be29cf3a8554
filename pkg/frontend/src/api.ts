// Thin typed client for the play service. All game logic lives server-side;
// this module only moves JSON.

import type { ScenarioInfo, ServiceError, SessionSummary, SessionView } from "./types.js";

export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly legalActions?: string[];

  constructor(status: number, body: ServiceError) {
    super(body.message);
    this.status = status;
    this.code = body.code;
    this.legalActions = body.legal_actions;
  }
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(path, {
    headers: { "content-type": "application/json" },
    ...init,
  });
  const body = await response.json();
  if (!response.ok) {
    throw new ApiError(response.status, body as ServiceError);
  }
  return body as T;
}

export function listScenarios(): Promise<ScenarioInfo[]> {
  return request<ScenarioInfo[]>("/scenarios");
}

export interface CreateSessionRequest {
  scenario: string;
  mode: "cirl" | "irl";
  true_recipe: string; // recipe name or "random"
  seed?: number;
}

export function createSession(req: CreateSessionRequest): Promise<SessionSummary> {
  return request<SessionSummary>("/sessions", {
    method: "POST",
    body: JSON.stringify(req),
  });
}

export function getSession(id: string): Promise<SessionView> {
  return request<SessionView>(`/sessions/${id}`);
}

export function submitAction(
  id: string,
  action: string,
  turn: number,
): Promise<SessionSummary> {
  return request<SessionSummary>(`/sessions/${id}/action`, {
    method: "POST",
    body: JSON.stringify({ action, turn }),
  });
}
