// Pure projections from server responses to render-ready values.
// No game rules here: legality, beliefs and transitions all come from the
// service, and everything below is a deterministic function of its input.

import type { SessionStatus, SessionSummary, TraceTurn } from "./types.js";

export interface BeliefBar {
  recipe: string;
  /** display label, exactly three decimals of the server value */
  label: string;
  /** integer basis points (1/100 of a percent); bars always sum to 10000 */
  widthBp: number;
}

/**
 * Belief bars with widths in basis points that sum to exactly 10000, so
 * the stacked bars always fill the full track. Uses largest-remainder
 * rounding; ties go to the earlier recipe.
 */
export function beliefBars(objectives: string[], belief: number[]): BeliefBar[] {
  const raw = belief.map((p) => p * 10000);
  const floors = raw.map(Math.floor);
  let leftover = 10000 - floors.reduce((a, b) => a + b, 0);
  const order = raw
    .map((v, i) => ({ rem: v - floors[i], i }))
    .sort((a, b) => b.rem - a.rem || a.i - b.i);
  const widths = [...floors];
  for (const { i } of order) {
    if (leftover <= 0) break;
    widths[i] += 1;
    leftover -= 1;
  }
  return objectives.map((recipe, i) => ({
    recipe,
    label: belief[i].toFixed(3),
    widthBp: widths[i],
  }));
}

export interface ActionButton {
  action: string;
  enabled: boolean;
}

/**
 * One button per human action; enabled exactly when the server listed the
 * action as legal. In compare mode both sessions receive the same action,
 * so only actions legal in every board stay clickable.
 */
export function actionButtons(
  allActions: string[],
  legalSets: string[][],
): ActionButton[] {
  return allActions.map((action) => ({
    action,
    enabled: legalSets.every((legal) => legal.includes(action)),
  }));
}

export function statusBanner(status: SessionStatus, trueRecipe: string): string {
  switch (status) {
    case "active":
      return "";
    case "succeeded":
      return `Success — you cooked the ${trueRecipe}.`;
    case "failed-horizon":
      return `Out of time — the ${trueRecipe} never got made.`;
  }
}

export interface TimelineRow {
  turn: number;
  robot: string;
  human: string;
  beliefLabels: string[];
  completed: boolean;
}

export function timelineRows(trace: TraceTurn[], trueIndex: number): TimelineRow[] {
  return trace.map((t) => ({
    turn: t.turn,
    robot: t.robot_action,
    human: t.human_action,
    beliefLabels: t.belief.map((p) => p.toFixed(3)),
    completed: t.rewards[trueIndex] > 0,
  }));
}

/** Human-action vocabulary for the button row: the union of every legal
 * set seen so far, waiting first, otherwise in first-seen order. */
export function actionVocabulary(legalSets: string[][]): string[] {
  const seen: string[] = [];
  for (const legal of legalSets) {
    for (const action of legal) {
      if (!seen.includes(action)) seen.push(action);
    }
  }
  seen.sort((a, b) => Number(b === "wait") - Number(a === "wait"));
  return seen;
}

export function turnCounter(summary: SessionSummary): string {
  return `turn ${Math.min(summary.turn + 1, summary.horizon)} / ${summary.horizon}`;
}
