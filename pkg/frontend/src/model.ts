/** View model and its pure update helpers.
 *
 * The inspector never infers anything client-side: every flag, slot and trace
 * line shown comes from the latest state snapshot returned by the API.
 */

import type { EntityRowDocument, SessionSnapshot, TurnDocument } from "./types.js";

export interface TranscriptEntry {
  speaker: "user" | "tod";
  text: string;
}

export interface ChatViewModel {
  sessionId: string | null;
  domain: string;
  transcript: TranscriptEntry[];
  awaitingInput: boolean;
  completed: boolean;
  finalSlots: Record<string, string> | null;
  snapshot: SessionSnapshot | null;
  entityRows: EntityRowDocument[];
  sendInFlight: boolean;
  /** Inline banner for malformed snapshots; rendering must survive bad data. */
  error: string | null;
  /** Transient notice (conflicts, network failures). */
  toast: string | null;
  /** Utterance held for the retry affordance after a network failure. */
  retryText: string | null;
}

export function initialViewModel(domain: string): ChatViewModel {
  return {
    sessionId: null,
    domain,
    transcript: [],
    awaitingInput: false,
    completed: false,
    finalSlots: null,
    snapshot: null,
    entityRows: [],
    sendInFlight: false,
    error: null,
    toast: null,
    retryText: null,
  };
}

/** Input is enabled only while the engine awaits input on a live session. */
export function inputEnabled(view: ChatViewModel): boolean {
  return (
    view.sessionId !== null && view.awaitingInput && !view.completed && !view.sendInFlight
  );
}

export function applyCreated(
  view: ChatViewModel,
  sessionId: string,
  turn: TurnDocument,
): void {
  view.sessionId = sessionId;
  view.transcript.push({ speaker: "tod", text: turn.tod_utterance });
  view.awaitingInput = turn.awaiting_input;
  view.completed = turn.completed;
  view.finalSlots = turn.final_slots;
}

/** Fold one accepted exchange into the transcript: the send appears exactly once. */
export function applyTurn(view: ChatViewModel, text: string, turn: TurnDocument): void {
  view.transcript.push({ speaker: "user", text });
  view.transcript.push({ speaker: "tod", text: turn.tod_utterance });
  view.awaitingInput = turn.awaiting_input;
  view.completed = turn.completed;
  view.finalSlots = turn.final_slots;
  view.retryText = null;
  view.toast = null;
}

export function applySnapshot(view: ChatViewModel, snapshot: SessionSnapshot): void {
  try {
    view.entityRows = snapshot.state.db_query_output_list.map((row) => ({
      columns: { ...row.columns },
      row_index: row.row_index,
    }));
    view.snapshot = snapshot;
    view.error = null;
  } catch (err) {
    view.error = `malformed state snapshot: ${String(err)}`;
  }
}
