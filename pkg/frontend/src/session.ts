// Form state and session history: pure logic, no DOM.

import type { GenerateBody } from "./api.js";

export interface FormState {
  concept: string;
  level: number;
  mode: "dok" | "dok+rag";
  count: number;
  model?: string;
}

export interface HistoryEntry {
  requestId: string;
  concept: string;
  level: number;
  mode: string;
  questionCount: number;
}

export function defaultForm(): FormState {
  return { concept: "", level: 1, mode: "dok", count: 5 };
}

// Submission is enabled only when this returns true; mirrors the server's
// validation so a valid form always maps to a valid /api/generate body.
export function isSubmittable(form: FormState): boolean {
  return (
    form.concept.trim().length > 0 &&
    Number.isInteger(form.level) &&
    form.level >= 1 &&
    form.level <= 4 &&
    form.count >= 1 &&
    form.count <= 50
  );
}

export function toGenerateBody(form: FormState): GenerateBody {
  if (!isSubmittable(form)) {
    throw new Error("form state is not submittable");
  }
  const body: GenerateBody = {
    concept: form.concept.trim(),
    level: form.level,
    mode: form.mode,
    count: form.count,
  };
  if (form.model) body.model = form.model;
  return body;
}

export function otherMode(mode: "dok" | "dok+rag"): "dok" | "dok+rag" {
  return mode === "dok" ? "dok+rag" : "dok";
}

export class ConsoleSession {
  private readonly entries: HistoryEntry[] = [];
  form: FormState = defaultForm();

  record(entry: HistoryEntry): void {
    this.entries.push(entry);
  }

  get history(): readonly HistoryEntry[] {
    return this.entries;
  }
}
