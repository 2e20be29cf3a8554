// Application wiring: session lifecycle and event handlers. UI state is a
// pure projection of the last server response; a single mutation may be in
// flight at a time and the board re-renders only from confirmed responses.

import { ApiError, createSession, getSession, listScenarios, submitAction } from "./api.js";
import {
  actionButtons,
  actionVocabulary,
  beliefBars,
  statusBanner,
  timelineRows,
  turnCounter,
} from "./state.js";
import {
  renderActions,
  renderBanner,
  renderBeliefBars,
  renderKitchen,
  renderRobotAction,
  renderTimeline,
} from "./render.js";
import type { ScenarioInfo, SessionSummary, SessionView, TraceTurn } from "./types.js";

interface Board {
  summary: SessionSummary;
  trace: TraceTurn[];
  legalHistory: string[][];
  root: HTMLElement;
}

let boards: Board[] = [];
let busy = false;

const $ = (id: string) => document.getElementById(id) as HTMLElement;

async function init(): Promise<void> {
  let scenarios: ScenarioInfo[];
  try {
    scenarios = await listScenarios();
  } catch {
    renderBanner($("global-banner"), "play service unreachable", "error", () => init());
    return;
  }
  renderBanner($("global-banner"), "", "none");
  const scenarioSelect = $("scenario") as unknown as HTMLSelectElement;
  scenarioSelect.replaceChildren();
  for (const sc of scenarios) {
    const option = document.createElement("option");
    option.value = sc.id;
    option.textContent = `${sc.id} — ${sc.description}`;
    scenarioSelect.appendChild(option);
  }
  scenarioSelect.addEventListener("change", () => fillRecipes(scenarios));
  fillRecipes(scenarios);
  ($("start") as HTMLButtonElement).addEventListener("click", () => startGame(scenarios));
}

function fillRecipes(scenarios: ScenarioInfo[]): void {
  const scenarioSelect = $("scenario") as unknown as HTMLSelectElement;
  const recipeSelect = $("recipe") as unknown as HTMLSelectElement;
  const chosen = scenarios.find((s) => s.id === scenarioSelect.value) ?? scenarios[0];
  recipeSelect.replaceChildren();
  const random = document.createElement("option");
  random.value = "random";
  random.textContent = "random recipe";
  recipeSelect.appendChild(random);
  for (const recipe of chosen.recipes) {
    const option = document.createElement("option");
    option.value = recipe;
    option.textContent = recipe;
    recipeSelect.appendChild(option);
  }
}

function formValues() {
  const scenario = ($("scenario") as unknown as HTMLSelectElement).value;
  const recipe = ($("recipe") as unknown as HTMLSelectElement).value;
  const mode = ($("mode") as unknown as HTMLSelectElement).value as "cirl" | "irl" | "both";
  const seed = Number(($("seed") as unknown as HTMLInputElement).value || "0");
  return { scenario, recipe, mode, seed };
}

async function startGame(_scenarios: ScenarioInfo[]): Promise<void> {
  const { scenario, recipe, mode, seed } = formValues();
  const modes: ("cirl" | "irl")[] = mode === "both" ? ["cirl", "irl"] : [mode];
  // with a random recipe in compare mode, both robots must face the same
  // goal: the seed pins the server-side draw, so reuse it for both boards
  try {
    busy = true;
    const summaries = [];
    for (const m of modes) {
      summaries.push(
        await createSession({ scenario, mode: m, true_recipe: recipe, seed }),
      );
    }
    boards = summaries.map((summary, i) => ({
      summary,
      trace: [],
      legalHistory: [summary.legal_human_actions],
      root: makeBoardRoot(i, summaries.length),
    }));
    $("goal").textContent = `your goal: ${boards[0].summary.true_recipe}`;
  } catch (err) {
    renderBanner($("global-banner"), describe(err), "error");
    return;
  } finally {
    busy = false;
  }
  renderAll();
}

function makeBoardRoot(index: number, total: number): HTMLElement {
  const host = $("boards");
  if (index === 0) host.replaceChildren();
  const root = document.createElement("section");
  root.className = total > 1 ? "board compare" : "board";
  root.innerHTML = `
    <header class="board-header">
      <span class="board-title"></span>
      <span class="board-turn"></span>
    </header>
    <div class="board-banner"></div>
    <div class="board-kitchen"></div>
    <div class="board-robot">robot will: <span class="board-robot-action"></span></div>
    <div class="board-belief"></div>
    <div class="board-timeline"></div>`;
  host.appendChild(root);
  return root;
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return `${err.code}: ${err.message}`;
  return String(err);
}

function renderAll(): void {
  for (const board of boards) {
    const { summary } = board;
    const q = (cls: string) => board.root.querySelector(cls) as HTMLElement;
    q(".board-title").textContent =
      boards.length > 1 ? `${summary.mode} robot` : `${summary.mode} robot — ${summary.model}`;
    q(".board-turn").textContent = turnCounter(summary);
    renderKitchen(q(".board-kitchen"), summary.state);
    renderRobotAction(q(".board-robot-action"), summary);
    renderBeliefBars(q(".board-belief"), beliefBars(summary.objectives, summary.belief));
    renderTimeline(
      q(".board-timeline"),
      timelineRows(board.trace, summary.objectives.indexOf(summary.true_recipe)),
    );
    const banner = statusBanner(summary.status, summary.true_recipe);
    renderBanner(
      q(".board-banner"),
      banner,
      summary.status === "active" ? "none" : summary.status === "succeeded" ? "success" : "failure",
    );
  }
  const anyActive = boards.some((b) => b.summary.status === "active");
  const vocabulary = actionVocabulary(boards.flatMap((b) => b.legalHistory));
  const legalNow = boards.map((b) =>
    b.summary.status === "active" ? b.summary.legal_human_actions : [],
  );
  renderActions(
    $("actions"),
    anyActive ? actionButtons(vocabulary, legalNow) : [],
    busy,
    chooseAction,
  );
}

async function chooseAction(action: string): Promise<void> {
  if (busy) return;
  busy = true;
  renderAll();
  try {
    for (const board of boards) {
      if (board.summary.status !== "active") continue;
      try {
        board.summary = await submitAction(
          board.summary.session_id,
          action,
          board.summary.turn,
        );
      } catch (err) {
        if (err instanceof ApiError && err.status === 409) {
          // lost a race: re-sync the whole board from the server
          const view: SessionView = await getSession(board.summary.session_id);
          board.summary = view;
          board.trace = view.trace;
          continue;
        }
        throw err;
      }
      const view = await getSession(board.summary.session_id);
      board.trace = view.trace;
      board.legalHistory.push(board.summary.legal_human_actions);
    }
    renderBanner($("global-banner"), "", "none");
  } catch (err) {
    renderBanner($("global-banner"), describe(err), "error");
  } finally {
    busy = false;
  }
  renderAll();
}

init();
