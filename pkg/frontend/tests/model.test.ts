import { describe, expect, it } from "vitest";

import {
  applySnapshot,
  applyTurn,
  initialViewModel,
  inputEnabled,
} from "../src/model.js";
import type { SessionSnapshot, TurnDocument } from "../src/types.js";
import flow from "./fixtures/french_north_flow.json";

const awaitingTurn: TurnDocument = {
  tod_utterance: "a question?",
  awaiting_input: true,
  completed: false,
  final_slots: null,
};

function liveModel() {
  const view = initialViewModel("restaurant");
  view.sessionId = "s1";
  view.awaitingInput = true;
  return view;
}

describe("inputEnabled", () => {
  it("requires a session awaiting input", () => {
    const view = initialViewModel("restaurant");
    expect(inputEnabled(view)).toBe(false);
    view.sessionId = "s1";
    expect(inputEnabled(view)).toBe(false);
    view.awaitingInput = true;
    expect(inputEnabled(view)).toBe(true);
  });

  it("is disabled while a send is in flight", () => {
    const view = liveModel();
    view.sendInFlight = true;
    expect(inputEnabled(view)).toBe(false);
  });

  it("is disabled once the session completes", () => {
    const view = liveModel();
    view.completed = true;
    expect(inputEnabled(view)).toBe(false);
  });
});

describe("applyTurn", () => {
  it("appends the accepted send exactly once, then the reply", () => {
    const view = liveModel();
    applyTurn(view, "hello there", awaitingTurn);
    const userLines = view.transcript.filter((entry) => entry.speaker === "user");
    expect(userLines).toEqual([{ speaker: "user", text: "hello there" }]);
    expect(view.transcript[view.transcript.length - 1]).toEqual({
      speaker: "tod",
      text: "a question?",
    });
  });

  it("carries completion and final slots", () => {
    const view = liveModel();
    applyTurn(view, "bye", {
      tod_utterance: "farewell",
      awaiting_input: false,
      completed: true,
      final_slots: { area: "north" },
    });
    expect(view.completed).toBe(true);
    expect(view.finalSlots).toEqual({ area: "north" });
    expect(inputEnabled(view)).toBe(false);
  });
});

describe("applySnapshot", () => {
  it("mirrors the entity rows from the snapshot", () => {
    const view = liveModel();
    const snapshot = flow.steps[2].state as unknown as SessionSnapshot;
    applySnapshot(view, snapshot);
    expect(view.entityRows.length).toBe(1);
    expect(view.entityRows[0].columns.name).toBe("two two");
    expect(view.error).toBeNull();
  });

  it("flags malformed snapshots instead of crashing", () => {
    const view = liveModel();
    applySnapshot(view, { not: "a snapshot" } as unknown as SessionSnapshot);
    expect(view.error).toMatch(/malformed/);
  });
});
