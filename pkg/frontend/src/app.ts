/** Controller: session state machine over the API, rendering via views.
 *
 * The client is stateless beyond the reviewer token and session id (kept in
 * sessionStorage); a reload re-opens the session and the server reports the
 * exact position. The UI never aggregates or withholds anything itself — it
 * renders exactly what the API returns, which is what keeps the independent
 * phase blind by construction.
 */

import { ApiClient, ApiError } from "./api.js";
import type {
  ImprovementRating,
  Plausibility,
  ProjectSummary,
  ReviewTask,
  SessionProgress,
  VoteBody,
  VoteVerdict,
} from "./types.js";
import {
  renderBoundTask,
  renderCompleted,
  renderIndependentTask,
  renderInstructions,
  renderPhaseBanner,
  renderProgress,
  renderStart,
} from "./views.js";

interface Selection {
  verdict?: VoteVerdict;
  plausibility?: Plausibility;
  improvement_rating?: ImprovementRating;
}

export class App {
  private client: ApiClient | null = null;
  private sessionId = "";
  private projectId = "";
  private lastPhase = "";
  private selection: Selection = {};
  private currentTask: ReviewTask | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly progressHost: HTMLElement,
    private readonly storage: Storage = sessionStorage,
  ) {}

  async start(): Promise<void> {
    const token = this.storage.getItem("reqqa-token");
    const projectId = this.storage.getItem("reqqa-project");
    if (token && projectId) {
      await this.openSession(token, projectId);
      return;
    }
    await this.showStart();
  }

  private async showStart(): Promise<void> {
    const anonymous = new ApiClient("anonymous");
    const { projects } = await anonymous.listProjects();
    this.root.innerHTML = renderStart(projects);
    const button = this.byId<HTMLButtonElement>("start-button");
    button.addEventListener("click", async () => {
      const select = this.byId<HTMLSelectElement>("project-select");
      const input = this.byId<HTMLInputElement>("token-input");
      if (!select.value || !input.value) {
        this.showError("start-error", "choose a project and enter your token");
        return;
      }
      try {
        await this.openSession(input.value, select.value, projects);
      } catch (error) {
        this.showError("start-error", describe(error));
      }
    });
  }

  private async openSession(
    token: string,
    projectId: string,
    knownProjects?: ProjectSummary[],
  ): Promise<void> {
    this.client = new ApiClient(token);
    this.projectId = projectId;
    const progress = await this.client.openSession(projectId);
    this.sessionId = progress.session_id;
    this.storage.setItem("reqqa-token", token);
    this.storage.setItem("reqqa-project", projectId);

    const fresh = progress.independent.done === 0 && progress.phase === "Independent";
    if (fresh) {
      const projects = knownProjects ?? (await this.client.listProjects()).projects;
      const project = projects.find((candidate) => candidate.id === projectId);
      const { characteristics } = await this.client.characteristics();
      if (project) {
        this.root.innerHTML = renderInstructions(project, characteristics);
        this.byId("begin-button").addEventListener("click", () => void this.advance());
        this.renderProgressBar(progress);
        return;
      }
    }
    await this.advance();
  }

  /** Fetch the next task (the server decides the phase) and render it. */
  private async advance(): Promise<void> {
    if (!this.client) return;
    const envelope = await this.client.nextTask(this.sessionId);
    const progress = await this.client.progress(this.sessionId);
    this.renderProgressBar(progress);
    this.selection = {};

    if (envelope.task === null) {
      this.currentTask = null;
      this.root.innerHTML = renderCompleted(progress, this.client.reportUrl(this.projectId));
      return;
    }
    const task = envelope.task;
    this.currentTask = task;
    const banner = this.lastPhase === "Independent" && task.phase === "Bound"
      ? renderPhaseBanner(task.phase)
      : "";
    this.lastPhase = task.phase;
    this.root.innerHTML =
      banner + (task.phase === "Bound" ? renderBoundTask(task) : renderIndependentTask(task));
    this.wireChoices();
  }

  private wireChoices(): void {
    for (const group of this.root.querySelectorAll<HTMLElement>(".choices")) {
      group.addEventListener("click", (event) => {
        const target = (event.target as HTMLElement).closest<HTMLButtonElement>("button[data-value]");
        if (!target) return;
        this.select(group, target);
      });
    }
    this.byId("submit-button").addEventListener("click", () => void this.submit());
  }

  private select(group: HTMLElement, button: HTMLButtonElement): void {
    for (const sibling of group.querySelectorAll("button")) {
      sibling.classList.toggle("selected", sibling === button);
    }
    const field = group.dataset.group as keyof Selection;
    this.selection[field] = button.dataset.value as never;
    this.byId<HTMLButtonElement>("submit-button").disabled = !this.selectionComplete();
  }

  private selectionComplete(): boolean {
    const task = this.currentTask;
    if (!task || !this.selection.verdict) return false;
    if (task.phase === "Independent") return true;
    if (!this.selection.plausibility) return false;
    if (task.llm_improved_text != null && !this.selection.improvement_rating) return false;
    return true;
  }

  private async submit(): Promise<void> {
    const task = this.currentTask;
    if (!this.client || !task || !this.selectionComplete()) return;
    const vote: VoteBody = {
      requirement_id: task.requirement_id,
      characteristic: task.characteristic,
      verdict: this.selection.verdict as VoteVerdict,
    };
    if (task.phase === "Bound") {
      vote.plausibility = this.selection.plausibility;
      if (task.llm_improved_text != null) {
        vote.improvement_rating = this.selection.improvement_rating;
      }
    }
    try {
      await this.client.submitVote(this.sessionId, vote);
      await this.advance();
    } catch (error) {
      // a duplicate vote means another tab got there first: just move on
      if (error instanceof ApiError && error.code === "duplicate-vote") {
        await this.advance();
        return;
      }
      this.showError("task-error", describe(error));
    }
  }

  /** Keyboard shortcuts: digits select choices, Enter submits. */
  handleKey(event: KeyboardEvent): void {
    if (event.key === "Enter") {
      void this.submit();
      return;
    }
    const button = this.root.querySelector<HTMLButtonElement>(
      `.choices button[data-key="${event.key}"]`,
    );
    if (button) {
      const group = button.closest<HTMLElement>(".choices");
      if (group) this.select(group, button);
    }
  }

  private renderProgressBar(progress: SessionProgress): void {
    this.progressHost.innerHTML = renderProgress(progress);
  }

  private byId<T extends HTMLElement = HTMLElement>(id: string): T {
    const element = this.root.querySelector<T>(`#${id}`);
    if (!element) throw new Error(`missing element #${id}`);
    return element;
  }

  private showError(id: string, message: string): void {
    const element = this.root.querySelector<HTMLElement>(`#${id}`);
    if (element) {
      element.textContent = message;
      element.hidden = false;
    }
  }
}

function describe(error: unknown): string {
  if (error instanceof ApiError) return `${error.code}: ${error.message}`;
  return String(error);
}

export function boot(): void {
  const root = document.getElementById("app");
  const progressHost = document.getElementById("progress");
  if (!root || !progressHost) throw new Error("missing #app / #progress mount points");
  const app = new App(root, progressHost);
  document.addEventListener("keydown", (event) => {
    const target = event.target as HTMLElement | null;
    if (target && (target.tagName === "INPUT" || target.tagName === "SELECT")) return;
    app.handleKey(event);
  });
  void app.start();
}

declare global {
  interface Window {
    __REQQA_NO_AUTOBOOT__?: boolean;
  }
}

if (typeof document !== "undefined" && !window.__REQQA_NO_AUTOBOOT__) {
  boot();
}
