// DOM construction from render-ready values. Nothing here inspects game
// rules; it draws exactly what state.ts projected from the last response.

import type { BeliefBar, ActionButton, TimelineRow } from "./state.js";
import type { SessionSummary } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderBeliefBars(container: HTMLElement, bars: BeliefBar[]): void {
  container.replaceChildren();
  const track = el("div", "belief-track");
  for (const bar of bars) {
    const seg = el("div", "belief-segment");
    seg.style.width = `${bar.widthBp / 100}%`;
    seg.dataset.recipe = bar.recipe;
    seg.title = `${bar.recipe}: ${bar.label}`;
    track.appendChild(seg);
  }
  container.appendChild(track);
  const legend = el("div", "belief-legend");
  for (const bar of bars) {
    const item = el("span", "belief-item");
    const swatch = el("span", "belief-swatch");
    swatch.dataset.recipe = bar.recipe;
    item.appendChild(swatch);
    item.appendChild(el("span", "belief-name", bar.recipe));
    item.appendChild(el("span", "belief-value", bar.label));
    legend.appendChild(item);
  }
  container.appendChild(legend);
}

export function renderKitchen(container: HTMLElement, state: Record<string, string>): void {
  container.replaceChildren();
  for (const [ingredient, prep] of Object.entries(state)) {
    const card = el("div", "ingredient");
    card.appendChild(el("div", "ingredient-name", ingredient));
    const prepNode = el("div", "ingredient-state", prep);
    prepNode.dataset.prep = prep;
    card.appendChild(prepNode);
    container.appendChild(card);
  }
}

export function renderActions(
  container: HTMLElement,
  buttons: ActionButton[],
  busy: boolean,
  onChoose: (action: string) => void,
): void {
  container.replaceChildren();
  for (const button of buttons) {
    const node = el("button", "action-button", button.action);
    node.disabled = !button.enabled || busy;
    if (button.enabled && !busy) {
      node.addEventListener("click", () => onChoose(button.action));
    }
    container.appendChild(node);
  }
}

export function renderRobotAction(container: HTMLElement, summary: SessionSummary): void {
  container.textContent =
    summary.robot_action === null ? "—" : summary.robot_action;
}

export function renderBanner(
  container: HTMLElement,
  text: string,
  kind: "success" | "failure" | "error" | "none",
  onRetry?: () => void,
): void {
  container.replaceChildren();
  container.dataset.kind = kind;
  if (kind === "none") return;
  container.appendChild(el("span", "banner-text", text));
  if (onRetry) {
    const retry = el("button", "banner-retry", "retry");
    retry.addEventListener("click", onRetry);
    container.appendChild(retry);
  }
}

export function renderTimeline(container: HTMLElement, rows: TimelineRow[]): void {
  container.replaceChildren();
  for (const row of rows) {
    const node = el("div", "timeline-row" + (row.completed ? " completed" : ""));
    node.appendChild(el("span", "timeline-turn", `t${row.turn}`));
    node.appendChild(el("span", "timeline-robot", `robot: ${row.robot}`));
    node.appendChild(el("span", "timeline-human", `you: ${row.human}`));
    node.appendChild(el("span", "timeline-belief", row.beliefLabels.join(" / ")));
    container.appendChild(node);
  }
}
