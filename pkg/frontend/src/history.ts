import type { WhatIfResponse } from "./types.js";

/** Session-local log of what-if probes, newest last, capped in length. */
export class ProbeHistory {
  private readonly entries: WhatIfResponse[] = [];

  constructor(readonly limit: number = 20) {}

  push(probe: WhatIfResponse): void {
    this.entries.push(probe);
    // cap: drop oldest entries first
    if (this.entries.length > this.limit) {
      this.entries.splice(0, this.entries.length - this.limit);
    }
  }

  list(): readonly WhatIfResponse[] {
    return this.entries;
  }

  get size(): number {
    return this.entries.length;
  }
}
