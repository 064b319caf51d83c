/** Verbatim display of service numbers.
 *
 * The UI never rounds, rescales, or recomputes a probability: whatever number
 * the service sent is what the clinician reads. `String(x)` on the parsed JSON
 * value is the verbatim form of the response payload.
 */
export function verbatim(value: number | string): string {
  return String(value);
}

export function signOf(value: number): "+" | "-" | "" {
  if (value > 0) return "+";
  if (value < 0) return "-";
  return "";
}
