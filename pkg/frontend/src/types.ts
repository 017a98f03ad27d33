/** Wire types of the /v1 review API. */

export type PhaseName = "Independent" | "Bound" | "Completed";
export type VoteVerdict = "Fulfills" | "Violates" | "Uncertain";
export type Plausibility = "Plausible" | "Implausible" | "Neutral";
export type ImprovementRating = "Improvement" | "NoImprovement" | "Unsure";

export interface ProjectSummary {
  id: string;
  name: string;
  scope_description: string;
  requirement_count: number;
  evaluated: boolean;
}

export interface CharacteristicEntry {
  key: string;
  definition: string;
}

export interface PhaseProgress {
  done: number;
  total: number;
}

export interface SessionProgress {
  session_id: string;
  phase: PhaseName;
  independent: PhaseProgress;
  bound: PhaseProgress;
  project_id?: string;
}

/** Task payload; the llm_* fields exist only in bound-phase payloads. */
export interface ReviewTask {
  session_id: string;
  phase: PhaseName;
  requirement_id: string;
  requirement_text: string;
  characteristic: string;
  characteristic_definition: string;
  scope_description: string;
  position: number;
  total: number;
  llm_verdict?: "Fulfills" | "Violates";
  llm_explanation?: string;
  llm_improved_text?: string;
}

export interface TaskEnvelope {
  phase: PhaseName;
  task: ReviewTask | null;
}

export interface VoteBody {
  requirement_id: string;
  characteristic: string;
  verdict: VoteVerdict;
  plausibility?: Plausibility;
  improvement_rating?: ImprovementRating;
}

export interface ApiErrorBody {
  error: { code: string; message: string };
}
