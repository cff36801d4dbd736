import json

import pytest

from istod import ingest
from istod.errors import IngestError
from istod.state import normalize_value


class TestLoadSchema:
    def test_restaurant_pricerange_values(self, data_dir):
        schemas = {s.domain_caption: s for s in ingest.load_schema(data_dir / "schema.json")}
        pricerange = schemas["restaurant"].slot("pricerange")
        assert pricerange.permitted_configurations == ("cheap", "expensive", "moderate")

    def test_bookpeople_permits_one_to_eight(self, data_dir):
        schemas = {s.domain_caption: s for s in ingest.load_schema(data_dir / "schema.json")}
        bookpeople = schemas["restaurant"].slot("bookpeople")
        assert bookpeople.permitted_configurations == tuple(str(n) for n in range(1, 9))

    def test_area_characterization_matches_metadata(self, data_dir):
        schemas = {s.domain_caption: s for s in ingest.load_schema(data_dir / "schema.json")}
        assert schemas["restaurant"].slot("area").characterization == (
            "Area or place of the restaurant"
        )

    def test_duplicate_caption_is_an_ingest_error(self, tmp_path):
        bad = [
            {
                "service_name": "demo",
                "slots": [
                    {"name": "demo-x", "description": "", "is_categorical": False},
                    {"name": "demo-x", "description": "", "is_categorical": False},
                ],
            }
        ]
        path = tmp_path / "schema.json"
        path.write_text(json.dumps(bad), encoding="utf-8")
        with pytest.raises(IngestError):
            ingest.load_schema(path)

    def test_missing_file_is_an_ingest_error(self, tmp_path):
        with pytest.raises(IngestError):
            ingest.load_schema(tmp_path / "nope.json")


class TestLoadDatabase:
    def test_food_permitted_list_from_column(self, restaurant):
        foods = restaurant.schema.slot("food").permitted_configurations
        column = {normalize_value(v, "food") for v in restaurant.database.column_values("food")}
        assert set(foods) == column
        assert foods == tuple(sorted(foods))

    def test_empty_table_is_valid(self, tmp_path):
        path = tmp_path / "restaurant_db.json"
        path.write_text("[]", encoding="utf-8")
        db = ingest.load_database(path, "restaurant")
        assert db.rows == ()

    def test_caption_mismatch_resolved_by_mapping(self, tmp_path):
        # hand-built mapping fixture: the file column differs from the slot caption
        rows = [
            {"name": "alpha", "price band": "cheap"},
            {"name": "beta", "price band": "moderate"},
        ]
        path = tmp_path / "demo_db.json"
        path.write_text(json.dumps(rows), encoding="utf-8")
        config = ingest.DomainConfig(caption_map={"pricerange": "price band", "name": "name"})
        db = ingest.load_database(path, "demo", config)
        assert db.columns == ("name", "pricerange")
        assert db.rows[0].columns["pricerange"] == "cheap"
        assert db.caption_map["pricerange"] == "price band"

    def test_train_camelcase_columns_renamed(self, train):
        assert "leaveat" in train.database.columns
        assert "arriveby" in train.database.columns
        assert train.caption_map["leaveat"] == "leaveAt"

    def test_malformed_rows_skipped_with_count(self, tmp_path, caplog):
        rows = [{"name": "alpha", "area": "north"}, "not-a-row", {"name": "beta"}]
        path = tmp_path / "demo_db.json"
        path.write_text(json.dumps(rows), encoding="utf-8")
        import logging

        with caplog.at_level(logging.WARNING):
            db = ingest.load_database(path, "demo", ingest.DomainConfig())
        assert len(db.rows) == 1
        assert any("skipped 2" in r.message for r in caplog.records)

    def test_unknown_domain_uses_defaults_with_warning(self, tmp_path, caplog):
        path = tmp_path / "demo_db.json"
        path.write_text(json.dumps([{"a": "1"}]), encoding="utf-8")
        import logging

        with caplog.at_level(logging.WARNING):
            db = ingest.load_database(path, "unheard-of-domain")
        assert db.columns == ("a",)


class TestFilterSingleDomain:
    def test_single_restaurant_kept(self, conversations):
        kept = {c.id for c in ingest.filter_single_domain(conversations)}
        assert "SNG0673.json" in kept

    def test_multi_domain_dropped(self, conversations):
        kept = {c.id for c in ingest.filter_single_domain(conversations)}
        assert "MUL0001.json" not in kept

    def test_non_listed_domain_dropped(self, conversations):
        kept = {c.id for c in ingest.filter_single_domain(conversations)}
        assert "SNG0996.json" not in kept

    def test_fixture_set_matches_hand_classification(self, conversations):
        kept = sorted(c.id for c in ingest.filter_single_domain(conversations))
        assert kept == [
            "SNG0451.json",
            "SNG0562.json",
            "SNG0673.json",
            "SNG0784.json",
            "SNG0895.json",
        ]

    def test_every_kept_conversation_has_a_dictionary(self, conversations, dictionaries):
        for conversation in ingest.filter_single_domain(conversations):
            assert conversation.domain in dictionaries


class TestBuildDomainDictionary:
    def test_hotel_filterable_excludes_booking_slots(self, hotel):
        filterable = set(hotel.schema.filterable_captions)
        assert {"bookday", "bookpeople", "bookstay"}.isdisjoint(filterable)
        assert {"pricerange", "stars", "area", "internet", "parking"} <= filterable

    def test_attraction_dictionary_round_trips(self, attraction):
        again = ingest.DomainDictionary.from_dict(
            json.loads(json.dumps(attraction.to_dict()))
        )
        assert again.to_dict() == attraction.to_dict()
        assert again.digest() == attraction.digest()

    def test_restaurant_area_characterization(self, restaurant):
        assert restaurant.schema.slot("area").characterization == (
            "Area or place of the restaurant"
        )

    def test_loading_is_deterministic(self, data_dir, dictionaries):
        reloaded = ingest.load_domains(data_dir)
        for domain, dictionary in dictionaries.items():
            assert reloaded[domain].digest() == dictionary.digest()

    def test_permitted_lists_are_normalize_fixpoints(self, dictionaries):
        for dictionary in dictionaries.values():
            for spec in dictionary.schema.slots:
                for value in spec.permitted_configurations:
                    assert normalize_value(value, spec.caption) == value

    def test_every_filterable_slot_has_caption_map_entry(self, dictionaries):
        for dictionary in dictionaries.values():
            for caption in dictionary.schema.filterable_captions:
                assert caption in dictionary.caption_map

    def test_conversation_turns_alternate(self, conversations):
        for conversation in conversations:
            speakers = [t.speaker for t in conversation.turns]
            assert all(a != b for a, b in zip(speakers, speakers[1:]))

    def test_dump_is_valid_json(self, restaurant):
        dumped = ingest.dump_dictionary(restaurant)
        assert json.loads(dumped)["domain_caption"] == "restaurant"

    def test_suggestion_settings_come_from_the_mapping_file(self, data_dir):
        schemas = {s.domain_caption: s for s in ingest.load_schema(data_dir / "schema.json")}
        config = ingest.DomainConfig(
            caption_map=ingest.DomainConfig.load("restaurant").caption_map,
            booking_only=("bookday", "bookpeople", "booktime"),
            open_slots=("name",),
            max_suggestion_items=1,
        )
        db = ingest.load_database(data_dir / "restaurant_db.json", "restaurant", config)
        dictionary = ingest.build_domain_dictionary("restaurant", schemas["restaurant"], db, config)
        assert dictionary.max_suggestion_items == 1
        from istod.moves import (
            create_clarifying_question_queryoutput_is_empty_output_is_rejected,
        )
        from istod.state import SlotValue, TriFlag, new_information_state

        state = new_information_state(dictionary.schema, dictionary.database)
        state.predefined_slots["pricerange"] = SlotValue("moderate", "moderate")
        state.predefined_slots["food"] = SlotValue("italian", "italian")
        state.query_output_list_is_empty = TriFlag.TRUE
        question = create_clarifying_question_queryoutput_is_empty_output_is_rejected(
            state,
            dictionary.database,
            dictionary.suggestions_per_slot,
            dictionary.max_suggestion_items,
        )
        # capped to a single candidate configuration
        assert question.count("(") == 1
