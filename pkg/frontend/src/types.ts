/** Wire types mirroring the session API documents, field names unchanged. */

export type TriFlagValue = "true" | "false" | "unset";

export interface TurnDocument {
  tod_utterance: string;
  awaiting_input: boolean;
  completed: boolean;
  final_slots: Record<string, string> | null;
}

export interface SessionCreated {
  session_id: string;
  domain: string;
  turn: TurnDocument;
}

export interface SlotValueDocument {
  raw: string;
  normalized: string;
}

export interface EntityRowDocument {
  columns: Record<string, string>;
  row_index: number;
}

/** The serialized information state; keys match the engine's field names. */
export interface InformationStateDocument {
  predefined_slots: Record<string, SlotValueDocument | null>;
  text_part: string;
  it_is_required_to_update_predefined_slots: TriFlagValue;
  it_is_required_to_query_database: TriFlagValue;
  db_query_output_list: EntityRowDocument[];
  query_output_list_is_empty: TriFlagValue;
  dialogue_is_completed: TriFlagValue;
  utterance_to_update_predefined_slot: string;
  checked_there_is_no_other_constraint: TriFlagValue;
  user_rejects_output: TriFlagValue;
  there_is_wrong_or_out_of_domain_value: TriFlagValue;
  wrong_or_out_of_domain_values_list: [string, string][];
  user_utterance_index: number;
  user_other_constraints: string;
  wrongness_within_other_constraints_checked: TriFlagValue;
  user_is_informed_there_is_no_entity_in_db: TriFlagValue;
  user_is_informed_of_db_output: TriFlagValue;
  domain_caption: string;
  extracted_information: Record<string, unknown>;
}

export interface SessionSnapshot {
  session_id: string;
  domain: string;
  pending: string | null;
  completed: boolean;
  state: InformationStateDocument;
  transcript: [string, string][];
  move_trace: [number, number, string, string][];
}

export const FLAG_FIELDS = [
  "it_is_required_to_update_predefined_slots",
  "it_is_required_to_query_database",
  "query_output_list_is_empty",
  "dialogue_is_completed",
  "checked_there_is_no_other_constraint",
  "user_rejects_output",
  "there_is_wrong_or_out_of_domain_value",
  "wrongness_within_other_constraints_checked",
  "user_is_informed_there_is_no_entity_in_db",
  "user_is_informed_of_db_output",
] as const;

export type FlagField = (typeof FLAG_FIELDS)[number];
