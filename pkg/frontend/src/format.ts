/** Display formatting.
 *
 * Every numeric cell keeps the exact API value alongside its rounded
 * string so tooltips can expose full precision. Rounding is half away
 * from zero at three decimals and happens only at the display layer.
 */

export interface DisplayValue {
  /** Three-decimal string shown in the panel. */
  display: string;
  /** Untouched API value, surfaced in tooltips. */
  full: number;
}

export function round3(value: number): number {
  return Math.round(value * 1000) / 1000;
}

export function formatNumber(value: number): string {
  return round3(value).toFixed(3);
}

/** Deltas carry an explicit sign; anything that rounds to zero renders
 * unsigned, so no cell ever shows "-0.000". */
export function formatSigned(value: number): string {
  const text = formatNumber(Math.abs(value));
  if (text === "0.000") return text;
  return value > 0 ? `+${text}` : `-${text}`;
}

export function display(value: number): DisplayValue {
  return { display: formatNumber(value), full: value };
}

export function displaySigned(value: number): DisplayValue {
  return { display: formatSigned(value), full: value };
}

/** Money keeps cents; it is not subject to three-decimal rounding. */
export function formatAmount(value: number): string {
  return value.toFixed(2);
}
