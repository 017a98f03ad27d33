/** Pure view functions: state in, HTML string out. The controller injects
 * the result and wires events by element id, so every screen is testable
 * without a browser. */

import { diffWords } from "./diff.js";
import type {
  CharacteristicEntry,
  ProjectSummary,
  ReviewTask,
  SessionProgress,
} from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

export function renderStart(projects: ProjectSummary[]): string {
  const options = projects
    .filter((project) => project.evaluated)
    .map(
      (project) =>
        `<option value="${escapeHtml(project.id)}">${escapeHtml(project.name)} ` +
        `(${project.requirement_count} requirements)</option>`,
    )
    .join("");
  return `
  <section class="card" id="start-screen">
    <h1>Requirement review</h1>
    <p>Pick a project and enter your reviewer token to begin or resume.</p>
    <label>Project
      <select id="project-select">${options}</select>
    </label>
    <label>Reviewer token
      <input id="token-input" type="password" autocomplete="off" placeholder="token" />
    </label>
    <button id="start-button" class="primary">Start session</button>
    <p class="error" id="start-error" hidden></p>
  </section>`;
}

export function renderInstructions(
  project: ProjectSummary,
  characteristics: CharacteristicEntry[],
): string {
  const rows = characteristics
    .map(
      (entry) =>
        `<tr><th>${escapeHtml(entry.key)}</th><td>${escapeHtml(entry.definition)}</td></tr>`,
    )
    .join("");
  return `
  <section class="card" id="instructions-screen">
    <h1>${escapeHtml(project.name)}</h1>
    <h2>Project scope</h2>
    <p class="scope">${escapeHtml(project.scope_description)}</p>
    <h2>Quality characteristics</h2>
    <p>You will judge every requirement against each of these nine characteristics.
       First on your own; afterwards you will revisit each cell alongside an
       automated assessment.</p>
    <table class="definitions">${rows}</table>
    <button id="begin-button" class="primary">Begin</button>
  </section>`;
}

export function renderProgress(progress: SessionProgress): string {
  const bar = (label: string, done: number, total: number) => {
    const percent = total === 0 ? 0 : Math.round((100 * done) / total);
    return `
    <div class="progress-row">
      <span class="progress-label">${label}</span>
      <div class="progress-track"><div class="progress-fill" style="width:${percent}%"></div></div>
      <span class="progress-count">${done}/${total}</span>
    </div>`;
  };
  return (
    bar("Independent", progress.independent.done, progress.independent.total) +
    bar("Bound", progress.bound.done, progress.bound.total)
  );
}

function verdictButtons(): string {
  return `
  <div class="choices" id="verdict-choices" data-group="verdict">
    <button data-value="Fulfills" data-key="1">Fulfills <kbd>1</kbd></button>
    <button data-value="Violates" data-key="2">Violates <kbd>2</kbd></button>
    <button data-value="Uncertain" data-key="3">Uncertain <kbd>3</kbd></button>
  </div>`;
}

function cellHeader(task: ReviewTask): string {
  return `
  <header class="task-header">
    <span class="badge">${escapeHtml(task.phase)}</span>
    <span class="counter">Cell ${task.position} of ${task.total}</span>
  </header>
  <h2>${escapeHtml(task.characteristic)}</h2>
  <p class="definition">${escapeHtml(task.characteristic_definition)}</p>
  <blockquote class="requirement" id="requirement-text">
    <strong>${escapeHtml(task.requirement_id)}</strong> ${escapeHtml(task.requirement_text)}
  </blockquote>`;
}

export function renderIndependentTask(task: ReviewTask): string {
  return `
  <section class="card task" id="task-screen" data-phase="Independent">
    ${cellHeader(task)}
    <p>Does this requirement fulfill the characteristic above?</p>
    ${verdictButtons()}
    <button id="submit-button" class="primary" disabled>Submit</button>
    <p class="error" id="task-error" hidden></p>
  </section>`;
}

export function renderDiff(original: string, improved: string): string {
  return diffWords(original, improved)
    .map((op) => {
      const text = escapeHtml(op.text);
      if (op.kind === "same") return text;
      return op.kind === "added"
        ? `<ins>${text}</ins>`
        : `<del>${text}</del>`;
    })
    .join("");
}

export function renderBoundTask(task: ReviewTask): string {
  const hasImprovement = task.llm_improved_text != null;
  const improvementBlock = hasImprovement
    ? `
    <div class="side-by-side">
      <div>
        <h4>Original</h4>
        <p>${escapeHtml(task.requirement_text)}</p>
      </div>
      <div>
        <h4>Suggested rewrite</h4>
        <p id="improved-text">${renderDiff(task.requirement_text, task.llm_improved_text ?? "")}</p>
      </div>
    </div>
    <h3>Is the suggested version an improvement?</h3>
    <div class="choices" id="improvement-choices" data-group="improvement_rating">
      <button data-value="Improvement" data-key="7">Improvement <kbd>7</kbd></button>
      <button data-value="NoImprovement" data-key="8">No improvement <kbd>8</kbd></button>
      <button data-value="Unsure" data-key="9">Unsure <kbd>9</kbd></button>
    </div>`
    : "";
  return `
  <section class="card task" id="task-screen" data-phase="Bound">
    ${cellHeader(task)}
    <div class="llm-panel">
      <h3>Automated assessment: <span class="llm-verdict ${task.llm_verdict === "Fulfills" ? "ok" : "bad"}">${escapeHtml(task.llm_verdict ?? "")}</span></h3>
      <p id="llm-explanation">${escapeHtml(task.llm_explanation ?? "")}</p>
      ${improvementBlock}
    </div>
    <h3>Your verdict, knowing the assessment above</h3>
    ${verdictButtons()}
    <h3>How plausible is the explanation?</h3>
    <div class="choices" id="plausibility-choices" data-group="plausibility">
      <button data-value="Plausible" data-key="4">Plausible <kbd>4</kbd></button>
      <button data-value="Implausible" data-key="5">Implausible <kbd>5</kbd></button>
      <button data-value="Neutral" data-key="6">Neutral <kbd>6</kbd></button>
    </div>
    <button id="submit-button" class="primary" disabled>Submit</button>
    <p class="error" id="task-error" hidden></p>
  </section>`;
}

export function renderCompleted(progress: SessionProgress, reportUrl: string): string {
  return `
  <section class="card" id="completed-screen">
    <h1>All done</h1>
    <p>Both phases are complete: ${progress.independent.done} independent and
       ${progress.bound.done} bound judgments recorded. Thank you.</p>
    <p><a id="report-link" href="${escapeHtml(reportUrl)}">View the project report</a></p>
  </section>`;
}

export function renderPhaseBanner(phase: string): string {
  return phase === "Bound"
    ? `<div class="banner" id="phase-banner">Independent phase complete - the
       automated assessments are now visible for the bound phase.</div>`
    : "";
}
