// DOM rendering helpers. Kept framework-free so they are directly testable
// under jsdom and usable from a static page.

import type { ApiErrorPayload, DokLevelInfo, QuestionView, ScoresByQuestion } from "./api.js";

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderLevelOptions(select: HTMLSelectElement, levels: DokLevelInfo[]): void {
  select.innerHTML = "";
  for (const lv of levels) {
    const option = select.ownerDocument.createElement("option");
    option.value = String(lv.level);
    option.textContent = `Level ${lv.level} – ${lv.name}`;
    option.title = lv.definition; // definition shown as tooltip
    select.appendChild(option);
  }
}

export function renderQuestionCards(
  container: HTMLElement,
  questions: QuestionView[],
): void {
  container.innerHTML = "";
  for (const q of questions) {
    const card = el(container.ownerDocument, "article", "question-card");
    card.dataset.questionId = q.question_id;
    card.appendChild(el(container.ownerDocument, "h3", "question-text", q.question));
    card.appendChild(el(container.ownerDocument, "p", "answer-text", q.answer));
    if (q.provenance.length > 0) {
      const details = el(container.ownerDocument, "details", "provenance");
      details.appendChild(
        el(container.ownerDocument, "summary", undefined,
           `Sources (${q.provenance.length})`),
      );
      const list = el(container.ownerDocument, "ul");
      for (const chunkId of q.provenance) {
        list.appendChild(el(container.ownerDocument, "li", "chunk-ref", chunkId));
      }
      details.appendChild(list);
      card.appendChild(details);
    }
    container.appendChild(card);
  }
}

export function renderScoreBadges(
  container: HTMLElement,
  scores: ScoresByQuestion,
  warning?: string,
): void {
  for (const [questionId, metrics] of Object.entries(scores)) {
    const card = container.querySelector<HTMLElement>(
      `[data-question-id="${questionId}"]`,
    );
    if (!card) continue;
    let row = card.querySelector<HTMLElement>(".score-row");
    if (!row) {
      row = el(container.ownerDocument, "div", "score-row");
      card.appendChild(row);
    }
    row.innerHTML = "";
    for (const [metric, value] of Object.entries(metrics)) {
      row.appendChild(
        el(container.ownerDocument, "span", "score-badge",
           `${metric}: ${value.toFixed(2)}`),
      );
    }
  }
  if (warning) {
    const note = el(container.ownerDocument, "p", "score-warning", warning);
    container.appendChild(note);
  }
}

export function renderError(container: HTMLElement, payload: ApiErrorPayload): void {
  container.innerHTML = "";
  container.appendChild(
    el(container.ownerDocument, "p", "error-banner",
       `Error in ${payload.stage} (${payload.code}): ${payload.message}`),
  );
}

export interface CompareColumn {
  label: string;
  questions: QuestionView[];
}

export function renderCompareView(
  container: HTMLElement,
  left: CompareColumn,
  right: CompareColumn,
): void {
  container.innerHTML = "";
  for (const column of [left, right]) {
    const col = el(container.ownerDocument, "section", "compare-column");
    col.appendChild(el(container.ownerDocument, "h2", undefined, column.label));
    const cards = el(container.ownerDocument, "div", "compare-cards");
    renderQuestionCards(cards, column.questions);
    col.appendChild(cards);
    container.appendChild(col);
  }
}
