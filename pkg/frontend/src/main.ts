// Browser entry point: wires the form, result list, score badges, and the
// side-by-side mode comparison against the engine's HTTP API.

import { ApiClient, ApiError } from "./api.js";
import { ConsoleSession, isSubmittable, otherMode, toGenerateBody } from "./session.js";
import {
  renderCompareView,
  renderError,
  renderLevelOptions,
  renderQuestionCards,
  renderScoreBadges,
} from "./view.js";

const api = new ApiClient("");
const session = new ConsoleSession();
let inFlight = false;
let lastRequestId: string | null = null;

function $(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node;
}

function readForm(): void {
  session.form.concept = ($("concept") as HTMLInputElement).value;
  session.form.level = Number(($("level") as HTMLSelectElement).value);
  session.form.mode = ($("mode") as HTMLSelectElement).value as "dok" | "dok+rag";
  session.form.count = Number(($("count") as HTMLInputElement).value);
}

function refreshSubmit(): void {
  readForm();
  ($("submit") as HTMLButtonElement).disabled = !isSubmittable(session.form) || inFlight;
}

async function submitGeneration(): Promise<void> {
  if (inFlight) return;
  readForm();
  if (!isSubmittable(session.form)) return;
  inFlight = true;
  refreshSubmit();
  const results = $("results");
  try {
    const resp = await api.generate(toGenerateBody(session.form));
    lastRequestId = resp.request_id;
    session.record({
      requestId: resp.request_id,
      concept: session.form.concept,
      level: session.form.level,
      mode: session.form.mode,
      questionCount: resp.questions.length,
    });
    renderQuestionCards(results, resp.questions);
  } catch (err) {
    if (err instanceof ApiError) {
      renderError($("errors"), err.payload);
    } else {
      renderError($("errors"), {
        stage: "network",
        code: "fetch_failed",
        message: String(err),
      });
    }
  } finally {
    inFlight = false;
    refreshSubmit();
  }
}

async function requestScores(): Promise<void> {
  if (!lastRequestId) return;
  try {
    const resp = await api.evaluate(lastRequestId);
    renderScoreBadges($("results"), resp.scores);
  } catch (err) {
    if (err instanceof ApiError) {
      renderError($("errors"), err.payload);
    }
  }
}

async function compareModes(): Promise<void> {
  readForm();
  if (!isSubmittable(session.form)) return;
  const body = toGenerateBody(session.form);
  const flipped = { ...body, mode: otherMode(body.mode) };
  try {
    const [current, other] = await Promise.all([api.generate(body), api.generate(flipped)]);
    renderCompareView($("compare"), {
      label: body.mode === "dok" ? "DOK only" : "DOK + retrieval",
      questions: current.questions,
    }, {
      label: flipped.mode === "dok" ? "DOK only" : "DOK + retrieval",
      questions: other.questions,
    });
  } catch (err) {
    if (err instanceof ApiError) renderError($("errors"), err.payload);
  }
}

async function init(): Promise<void> {
  const { levels } = await api.levels();
  renderLevelOptions($("level") as HTMLSelectElement, levels);
  for (const id of ["concept", "level", "mode", "count"]) {
    $(id).addEventListener("input", refreshSubmit);
    $(id).addEventListener("change", refreshSubmit);
  }
  $("submit").addEventListener("click", () => void submitGeneration());
  $("evaluate").addEventListener("click", () => void requestScores());
  $("compare-btn").addEventListener("click", () => void compareModes());
  refreshSubmit();
}

if (typeof document !== "undefined" && document.getElementById("concept")) {
  void init();
}
