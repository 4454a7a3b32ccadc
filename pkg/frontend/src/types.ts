// Wire types for the reportsmith HTTP API.

export interface RuleScore {
  rule: string;
  points: number;
  max: number;
  evidence: string;
}

export interface ScoreResponse {
  total: number;
  max_total: number;
  percent: number;
  rule_table: string;
  rules: RuleScore[];
  missing_fields: string[];
}

export interface StructuredReportDto {
  title: string;
  steps_to_reproduce: string[];
  expected_result: string;
  actual_result: string;
  additional_information: string;
  missing_fields: string[];
}

export interface StructureResponse {
  report: StructuredReportDto | null;
  rendered: string | null;
  raw: string;
  parse_error: string | null;
}

export interface MetricsResponse {
  rouge1: { p: number; r: number; f: number };
  meteor: number;
  cosine_tf: number;
  embedding_similarity: number | null;
}

export interface HealthResponse {
  status: string;
  backends: string[];
}

export const BODY_SECTIONS = [
  "steps_to_reproduce",
  "expected_result",
  "actual_result",
  "additional_information",
] as const;

export type BodySection = (typeof BODY_SECTIONS)[number];

export const SECTION_LABELS: Record<BodySection, string> = {
  steps_to_reproduce: "Steps to Reproduce",
  expected_result: "Expected Results",
  actual_result: "Actual Results",
  additional_information: "Additional Information",
};
