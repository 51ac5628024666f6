/** Response shapes of the model service. Field names mirror the JSON API. */

export interface ModifierSchema {
  name: string;
  kind: "continuous" | "binary" | "categorical";
  min?: number;
  max?: number;
  levels?: string[];
}

export interface ModelInfo {
  treatments: string[];
  reference: string;
  n_effect_modifiers: number;
  modifiers: ModifierSchema[];
  config: Record<string, unknown>;
  converged: boolean;
}

export interface EffectSummary {
  mean: number;
  q025: number;
  q975: number;
  samples: number[];
}

export interface ProfileAnswer {
  treatments: string[];
  reference: string;
  effects: Record<string, EffectSummary>;
  optimal: string;
  optimal_probs: Record<string, number>;
  tie: boolean;
}

export interface ContrastAnswer {
  g: string;
  g_prime: string;
  q: number;
  mean: number;
  q025: number;
  q975: number;
  excludes_zero: boolean;
  samples: number[];
}

export interface SummaryRow {
  parameter: string;
  mean: number;
  sd: number;
  q025: number;
  q975: number;
  rhat: number;
  ess: number;
}

export interface SummaryAnswer {
  summaries: SummaryRow[];
  forest: { parameter: string; mean: number; lower: number; upper: number }[];
}
