import { describe, expect, it } from "vitest";
import { display, formatAmount, formatNumber, formatSigned, round3 } from "../src/format.js";

describe("display rounding", () => {
  it("rounds to three decimals for display only", () => {
    expect(formatNumber(0.8571428571428571)).toBe("0.857");
    expect(formatNumber(0.2965)).toBe("0.297");
    expect(formatNumber(1)).toBe("1.000");
    expect(formatNumber(0.0005)).toBe("0.001");
    expect(formatNumber(0)).toBe("0.000");
  });

  it("keeps the full value untouched", () => {
    const cell = display(0.3136863136863137);
    expect(cell.full).toBe(0.3136863136863137);
    expect(cell.display).toBe("0.314");
  });

  it("signs deltas and leaves a true zero unsigned", () => {
    expect(formatSigned(0.12)).toBe("+0.120");
    expect(formatSigned(-0.0235)).toBe("-0.024");
    expect(formatSigned(0)).toBe("0.000");
    // rounds to zero: drop the misleading sign
    expect(formatSigned(-4e-7)).toBe("0.000");
    expect(formatSigned(4e-7)).toBe("0.000");
  });

  it("round3 is idempotent", () => {
    for (const value of [0.1234, 0.9995, 0.0004, 13.37]) {
      expect(round3(round3(value))).toBe(round3(value));
    }
  });

  it("formats money with cents", () => {
    expect(formatAmount(402.5)).toBe("402.50");
    expect(formatAmount(88.2)).toBe("88.20");
  });
});
