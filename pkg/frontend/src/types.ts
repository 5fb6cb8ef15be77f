export type MappingLevel = "A" | "B" | "C";
export type CandidateStatus = "pending" | "accepted" | "rejected";
export type DecisionAction = "accept" | "reject" | "reset";

export interface CandidateSide {
  scheme: string;
  code: string;
  label: string | null;
}

export interface Candidate {
  id: string;
  source: CandidateSide;
  target: CandidateSide;
  approximate: boolean;
  no_map: boolean;
  combination: boolean;
  scenario: number;
  choice_list: number;
  status: CandidateStatus;
  level: MappingLevel | null;
  reasoning: string | null;
}

export interface CandidatePage {
  schema_version: string;
  total: number;
  page: number;
  page_size: number;
  items: Candidate[];
}

export interface Stats {
  schema_version: string;
  candidates: number;
  by_status: Record<CandidateStatus, number>;
  by_level: Record<"A" | "B" | "C" | "unassessed", number>;
  decisions_total: number;
  decisions_bulk: number;
}

export interface ResultCell {
  type: "iri" | "literal" | "blank";
  value: string;
  datatype?: string;
}

export interface GenerationAttempt {
  raw_response: string;
  extracted_sparql: string | null;
  parse_outcome: string;
  validation_issues: string[];
}

export interface Assessment {
  queried_label: string;
  retrieved_label: string;
  queried_code: string | null;
  retrieved_code: string | null;
  level: MappingLevel;
  reasoning: string;
  model_id: string;
  strategy: string;
  temperature: number;
}

export interface QueryResponse {
  schema_version: string;
  sparql: string;
  attempts: GenerationAttempt[];
  columns: string[];
  rows: (ResultCell | null)[][];
  boolean: boolean | null;
  assessments: Assessment[];
  assessment_failures: string[];
  summary: string | null;
}

export interface CandidateFilters {
  level?: MappingLevel;
  status?: CandidateStatus;
}

/** The grading rubric shown on level badges. */
export const LEVEL_DEFINITIONS: Record<MappingLevel, string> = {
  A: "The content or the semantics of the original label and the mapped label are completely consistent.",
  B: "Parts of the original and the mapped labels are related, but it is not certain whether they match or conflict.",
  C: "The original and the mapped labels partially conflict with each other.",
};
