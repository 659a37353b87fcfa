import { describe, expect, it } from "vitest";
import * as fc from "fast-check";

import { COMPOSER_DIRECTIONS, SequenceComposer } from "../src/composer.js";
import { GrammarError, parseSequence } from "../src/grammar.js";

describe("SequenceComposer", () => {
  it("builds canonical step text", () => {
    const composer = new SequenceComposer();
    composer.addStep("left", "30");
    composer.addStep("cw", 45);
    composer.addStep("up", " 7.5 ");
    expect(composer.list()).toEqual(["left:30", "rotate:cw:45", "up:7.5"]);
    expect(composer.text()).toBe("left:30,rotate:cw:45,up:7.5");
  });

  it("rejects bad angles without mutating state", () => {
    const composer = new SequenceComposer();
    composer.addStep("right", "15");
    for (const angle of ["abc", "", "1e3", "4 5", "nan", "30:10"]) {
      expect(() => composer.addStep("down", angle)).toThrow(GrammarError);
    }
    expect(composer.length).toBe(1);
    expect(composer.text()).toBe("right:15");
  });

  it("supports reset steps", () => {
    const composer = new SequenceComposer();
    composer.addReset();
    composer.addStep("ccw", "90");
    expect(composer.text()).toBe("reset,rotate:ccw:90");
  });

  it("removes steps by index and rejects bad indices", () => {
    const composer = new SequenceComposer();
    composer.addStep("left", "10");
    composer.addStep("right", "20");
    composer.removeStep(0);
    expect(composer.list()).toEqual(["right:20"]);
    expect(() => composer.removeStep(1)).toThrow(GrammarError);
    expect(() => composer.removeStep(-1)).toThrow(GrammarError);
  });

  it("clears to the empty sequence", () => {
    const composer = new SequenceComposer();
    composer.addStep("up", "5");
    composer.clear();
    expect(composer.length).toBe(0);
    expect(composer.text()).toBe("");
  });
});

type Action =
  | { kind: "add"; direction: (typeof COMPOSER_DIRECTIONS)[number]; angle: number }
  | { kind: "garbage"; direction: (typeof COMPOSER_DIRECTIONS)[number]; angle: string }
  | { kind: "reset" }
  | { kind: "remove"; slot: number }
  | { kind: "clear" };

const action: fc.Arbitrary<Action> = fc.oneof(
  fc.record({
    kind: fc.constant("add" as const),
    direction: fc.constantFrom(...COMPOSER_DIRECTIONS),
    angle: fc.oneof(
      fc.integer({ min: -720, max: 720 }),
      fc.double({ min: -360, max: 360, noNaN: true })
        .filter((v) => v === 0 || Math.abs(v) >= 1e-6),
    ),
  }),
  fc.record({
    kind: fc.constant("garbage" as const),
    direction: fc.constantFrom(...COMPOSER_DIRECTIONS),
    angle: fc.constantFrom("abc", "", "1e3", "n/a", "--5", "1.2.3"),
  }),
  fc.record({ kind: fc.constant("reset" as const) }),
  fc.record({ kind: fc.constant("remove" as const), slot: fc.nat(9) }),
  fc.record({ kind: fc.constant("clear" as const) }),
);

describe("composer invariant", () => {
  it("after any action sequence the text is empty or grammar-valid", () => {
    fc.assert(
      fc.property(fc.array(action, { maxLength: 30 }), (actions) => {
        const composer = new SequenceComposer();
        for (const act of actions) {
          const before = composer.length;
          if (act.kind === "add") {
            composer.addStep(act.direction, act.angle);
            expect(composer.length).toBe(before + 1);
          } else if (act.kind === "garbage") {
            expect(() => composer.addStep(act.direction, act.angle))
              .toThrow(GrammarError);
            expect(composer.length).toBe(before);
          } else if (act.kind === "reset") {
            composer.addReset();
          } else if (act.kind === "remove") {
            if (before === 0) {
              expect(() => composer.removeStep(act.slot)).toThrow(GrammarError);
            } else {
              composer.removeStep(act.slot % before);
              expect(composer.length).toBe(before - 1);
            }
          } else {
            composer.clear();
            expect(composer.length).toBe(0);
          }
          const text = composer.text();
          if (composer.length === 0) {
            expect(text).toBe("");
          } else {
            expect(parseSequence(text)).toHaveLength(composer.length);
          }
        }
      }),
      { numRuns: 300 },
    );
  });
});
