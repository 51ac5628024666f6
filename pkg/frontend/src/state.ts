import type { ModifierSchema } from "./types.js";

export interface FieldState {
  schema: ModifierSchema;
  raw: string;
  error: string | null;
}

export interface ValidationResult {
  valid: boolean;
  values: Record<string, number>;
}

/**
 * Form state for one covariate profile plus pinned comparison profiles.
 * Submission stays disabled until every field parses and respects its
 * schema; a monotone request token lets callers drop stale responses.
 */
export class ProfileFormState {
  fields: FieldState[];
  pinned: { label: string; values: Record<string, number> }[] = [];
  private requestToken = 0;

  constructor(modifiers: ModifierSchema[]) {
    this.fields = modifiers.map((schema) => ({
      schema,
      raw: defaultRaw(schema),
      error: null,
    }));
    this.validate();
  }

  setValue(name: string, raw: string): void {
    const field = this.fields.find((f) => f.schema.name === name);
    if (!field) throw new Error(`unknown covariate ${name}`);
    field.raw = raw;
    this.validate();
  }

  validate(): ValidationResult {
    const values: Record<string, number> = {};
    let valid = true;
    for (const field of this.fields) {
      field.error = checkField(field);
      if (field.error !== null) {
        valid = false;
      } else {
        values[field.schema.name] = Number(field.raw);
      }
    }
    return { valid, values };
  }

  get canSubmit(): boolean {
    return this.validate().valid;
  }

  values(): Record<string, number> {
    const result = this.validate();
    if (!result.valid) throw new Error("profile is not valid");
    return result.values;
  }

  pin(label: string): void {
    this.pinned.push({ label, values: this.values() });
  }

  /** New token for an outbound request; responses carrying an older token
   * than the latest issued one must be discarded. */
  nextToken(): number {
    this.requestToken += 1;
    return this.requestToken;
  }

  isStale(token: number): boolean {
    return token !== this.requestToken;
  }
}

function defaultRaw(schema: ModifierSchema): string {
  if (schema.kind === "binary") return "0";
  if (schema.kind === "categorical") return "0";
  const lo = schema.min ?? 0;
  const hi = schema.max ?? 0;
  return String((lo + hi) / 2);
}

function checkField(field: FieldState): string | null {
  const { schema, raw } = field;
  if (raw.trim() === "") return "required";
  const v = Number(raw);
  if (!Number.isFinite(v)) return "must be a number";
  if (schema.kind === "binary" && v !== 0 && v !== 1) return "must be 0 or 1";
  if (schema.kind === "continuous") {
    if (schema.min !== undefined && v < schema.min)
      return `below observed minimum ${schema.min}`;
    if (schema.max !== undefined && v > schema.max)
      return `above observed maximum ${schema.max}`;
  }
  return null;
}
