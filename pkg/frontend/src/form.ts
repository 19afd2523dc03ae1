// Request-form validation mirroring the server's rules, so obvious mistakes
// are caught before the POST and server errors map back onto fields.

import type { RequestForm } from "./types.js";

export const PRECEDENCES = ["urgent", "priority", "routine"] as const;

export interface ValidationResult {
  ok: boolean;
  errors: Partial<Record<keyof RequestForm, string>>;
}

export function validateRequestForm(
  form: Partial<RequestForm>,
  knownFacilities: string[],
): ValidationResult {
  const errors: ValidationResult["errors"] = {};
  if (!form.id || !form.id.trim()) {
    errors.id = "request id is required";
  }
  if (form.lat === undefined || !Number.isFinite(form.lat) ||
      form.lat < -90 || form.lat > 90) {
    errors.lat = "latitude must be in [-90, 90]";
  }
  if (form.lon === undefined || !Number.isFinite(form.lon)) {
    errors.lon = "longitude is required";
  }
  if (!form.precedence || !PRECEDENCES.includes(form.precedence as any)) {
    errors.precedence = `precedence must be one of ${PRECEDENCES.join(", ")}`;
  }
  if (form.patient_count === undefined || !Number.isInteger(form.patient_count) ||
      form.patient_count < 1) {
    errors.patient_count = "patient count must be a whole number >= 1";
  }
  if (!form.destination) {
    errors.destination = "destination facility is required";
  } else if (knownFacilities.length && !knownFacilities.includes(form.destination)) {
    errors.destination = `unknown facility '${form.destination}'`;
  }
  if (form.time !== undefined && (!Number.isFinite(form.time) || form.time < 0)) {
    errors.time = "time must be a non-negative number of seconds";
  }
  return { ok: Object.keys(errors).length === 0, errors };
}

// Map a server-side 422 detail string onto the most relevant field.
export function serverErrorField(detail: string): keyof RequestForm | null {
  if (detail.includes("patient_count") || detail.includes("cabin")) return "patient_count";
  if (detail.includes("destination") || detail.includes("facility")) return "destination";
  if (detail.includes("lat")) return "lat";
  if (detail.includes("lon")) return "lon";
  if (detail.toLowerCase().includes("duplicate") || detail.includes("id")) return "id";
  return null;
}
