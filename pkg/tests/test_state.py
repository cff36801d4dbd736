import json

import pytest
from hypothesis import given, strategies as st

from istod.database import build_database
from istod.errors import ConfigurationError
from istod.state import (
    DomainSchema,
    SlotSpec,
    SlotValue,
    TriFlag,
    new_information_state,
    normalize_value,
    state_from_json,
    state_to_json,
)

from conftest import load_fixture


class TestLexicon:
    def test_stop_word_list_is_exactly_fifty_function_words(self):
        from istod.lexicon import STOP_WORDS

        assert len(STOP_WORDS) == 50

    def test_tokenizer_keeps_times_and_maps_number_words(self):
        from istod.lexicon import tokenize

        assert tokenize("after 20:15, take two") == ["after", "20:15", "take", "2"]


class TestTriFlag:
    def test_three_distinct_states(self):
        assert len({TriFlag.TRUE, TriFlag.FALSE, TriFlag.UNSET}) == 3

    def test_truthiness_means_true_only(self):
        assert bool(TriFlag.TRUE)
        assert not bool(TriFlag.FALSE)
        assert not bool(TriFlag.UNSET)

    def test_unset_is_distinct_from_false(self):
        assert TriFlag.UNSET.is_unset
        assert not TriFlag.FALSE.is_unset
        assert TriFlag.FALSE.is_false

    def test_of_conversion(self):
        assert TriFlag.of(True) is TriFlag.TRUE
        assert TriFlag.of(False) is TriFlag.FALSE
        assert TriFlag.of(None) is TriFlag.UNSET
        assert TriFlag.of(TriFlag.FALSE) is TriFlag.FALSE


class TestNormalizeValue:
    def test_hand_normalized_table(self):
        # 30 pairs worked out by hand before the implementation existed.
        for case in load_fixture("normalize_pairs.json"):
            got = normalize_value(case["raw"], case["slot"])
            assert got == case["expected"], case

    def test_case_fold(self):
        assert normalize_value("Moderate") == "moderate"

    def test_number_word_with_stars_slot(self):
        assert normalize_value("two", "stars") == "2"

    def test_caption_suffix_stripped(self):
        assert normalize_value(" French food", "food") == "french"

    @given(st.text(max_size=60))
    def test_idempotent(self, raw):
        once = normalize_value(raw, "food")
        assert normalize_value(once, "food") == once

    @given(st.text(max_size=60))
    def test_total_without_slot(self, raw):
        twice = normalize_value(normalize_value(raw))
        assert twice == normalize_value(raw)


def restaurant_like_schema():
    return DomainSchema(
        "bistro",
        (
            SlotSpec("pricerange", "Price budget", ("cheap", "expensive", "moderate"), True),
            SlotSpec("area", "Area or place", ("centre", "east", "north"), True),
        ),
    )


def bistro_db():
    return build_database(
        "bistro",
        ["name", "pricerange", "area"],
        [
            {"name": "alpha", "pricerange": "cheap", "area": "north"},
            {"name": "beta", "pricerange": "moderate", "area": "east"},
        ],
    )


class TestNewInformationState:
    def test_restaurant_schema_has_eleven_slot_keys(self, restaurant):
        state = new_information_state(restaurant.schema, restaurant.database)
        assert len(state.predefined_slots) == 11
        assert state.it_is_required_to_update_predefined_slots is TriFlag.TRUE
        assert state.dialogue_is_completed is TriFlag.FALSE
        assert state.it_is_required_to_query_database is TriFlag.UNSET
        assert state.query_output_list_is_empty is TriFlag.UNSET
        assert all(v is None for v in state.predefined_slots.values())
        assert state.text_part == ""
        assert state.user_utterance_index == 0
        assert "pricerange" in state.predefined_slots

    def test_degenerate_schema_is_valid(self):
        schema = DomainSchema("empty", ())
        db = build_database("empty", [], [])
        state = new_information_state(schema, db)
        assert state.predefined_slots == {}

    def test_hotel_domain_information_matches_hand_built_fixture(self, hotel):
        state = new_information_state(hotel.schema, hotel.database)
        expected = load_fixture("hotel_domain_information.json")
        info = state.extracted_information
        assert info["domain_caption"] == expected["domain_caption"]
        assert list(info["captions"]) == expected["captions"]
        assert list(info["database_columns"]) == expected["database_columns"]
        assert list(info["filterable_captions"]) == expected["filterable_captions"]
        assert info["entity_count"] == expected["entity_count"]
        by_caption = dict(zip(info["captions"], info["configurations"]))
        for caption, configurations in expected["spot_check_configurations"].items():
            assert list(by_caption[caption]) == configurations

    def test_domain_mismatch_is_a_configuration_error(self):
        schema = restaurant_like_schema()
        db = build_database("other", ["name"], [{"name": "x"}])
        with pytest.raises(ConfigurationError):
            new_information_state(schema, db)


class TestSnapshotRoundTrip:
    def test_fresh_state_round_trips(self):
        state = new_information_state(restaurant_like_schema(), bistro_db())
        again = state_from_json(state_to_json(state))
        assert again == state

    def test_mutated_state_round_trips(self):
        state = new_information_state(restaurant_like_schema(), bistro_db())
        state.predefined_slots["pricerange"] = SlotValue("Cheap", "cheap")
        state.text_part = "lovely view"
        state.user_utterance_index = 3
        state.there_is_wrong_or_out_of_domain_value = TriFlag.FALSE
        state.wrong_or_out_of_domain_values_list = [("area", "downtown")]
        state.db_query_output_list = list(bistro_db().rows)
        again = state_from_json(state_to_json(state))
        assert again == state
        assert again.predefined_slots["pricerange"].normalized == "cheap"

    def test_snapshot_field_names_are_stable(self):
        state = new_information_state(restaurant_like_schema(), bistro_db())
        snapshot = state.to_snapshot()
        expected_fields = {
            "predefined_slots",
            "text_part",
            "it_is_required_to_update_predefined_slots",
            "it_is_required_to_query_database",
            "db_query_output_list",
            "query_output_list_is_empty",
            "dialogue_is_completed",
            "utterance_to_update_predefined_slot",
            "checked_there_is_no_other_constraint",
            "user_rejects_output",
            "there_is_wrong_or_out_of_domain_value",
            "wrong_or_out_of_domain_values_list",
            "user_utterance_index",
            "user_other_constraints",
            "wrongness_within_other_constraints_checked",
            "user_is_informed_there_is_no_entity_in_db",
            "user_is_informed_of_db_output",
            "domain_caption",
            "extracted_information",
        }
        assert set(snapshot) == expected_fields
        json.dumps(snapshot)  # must be JSON-serializable as-is
