import { describe, expect, it } from "vitest";

import { hasPendingMutations, optimistic } from "../src/optimistic.js";

describe("optimistic", () => {
  it("applies immediately and resolves true on success", async () => {
    let value = "old";
    const ok = await optimistic({
      apply: () => {
        const snapshot = value;
        value = "new";
        return snapshot;
      },
      remote: async () => {},
      revert: (snapshot) => {
        value = snapshot;
      },
    });
    expect(ok).toBe(true);
    expect(value).toBe("new");
  });

  it("reverts and reports the error on failure", async () => {
    let value = "old";
    let seen: unknown = null;
    const ok = await optimistic({
      apply: () => {
        const snapshot = value;
        value = "new";
        return snapshot;
      },
      remote: async () => {
        throw new Error("422 from the API");
      },
      revert: (snapshot) => {
        value = snapshot;
      },
      onError: (error) => {
        seen = error;
      },
    });
    expect(ok).toBe(false);
    expect(value).toBe("old");
    expect((seen as Error).message).toContain("422");
  });

  it("tracks pending mutations while remote is in flight", async () => {
    let release!: () => void;
    const gate = new Promise<void>((resolve) => {
      release = resolve;
    });
    const run = optimistic({
      apply: () => null,
      remote: () => gate,
      revert: () => {},
    });
    expect(hasPendingMutations()).toBe(true);
    release();
    await run;
    expect(hasPendingMutations()).toBe(false);
  });
});
