import json
import random

import pytest

from istod import ingest
from istod.database import EntityRecord
from istod.errors import EvalError
from istod.evaluation import (
    ReplayReport,
    ScoreSummary,
    inform_verdict,
    labeled_goal,
    render_report,
    replay_conversation,
    replay_conversations,
    score_predictions,
    success_verdict,
    summarize,
)
from istod.state import normalize_value

from conftest import DATA_DIR


@pytest.fixture(scope="module")
def by_id(conversations):
    return {c.id: c for c in conversations}


@pytest.fixture(scope="module")
def corrected_goals():
    return json.loads((DATA_DIR / "corrected_goals.json").read_text("utf-8"))


def simple_report(informed=True, columns=("a", "b")):
    rows = (EntityRecord(columns={c: "x" for c in columns}, row_index=0),)
    return ReplayReport(
        conversation_id="X",
        consumed_count=1,
        extracted_slots={},
        labeled_goal={},
        informed=informed,
        succeeded=False,
        transcript=(),
        presented_entities=rows,
        presented_columns=tuple(columns),
        database_columns=tuple(columns),
    )


class TestLabeledGoal:
    def test_two_star_hotel_goal_at_three_consumed(self, by_id):
        goal = labeled_goal(by_id["SNG0451.json"], 3)
        assert goal["pricerange"] == ("moderate",)
        assert goal["stars"] == ("2",)
        assert goal["name"] == ("ashley hotel",)

    def test_single_turn_conversation(self, by_id):
        conv = by_id["SNG0996.json"]
        goal = labeled_goal(conv, 1)
        assert goal == {"destination": ("train station",)}

    def test_hand_built_fixture_matches_hand_reading(self, by_id):
        # after all four user turns the annotated state carries the
        # booking slots entered in turn three.
        goal = labeled_goal(by_id["SNG0562.json"], 4)
        assert goal["bookday"] == ("wednesday",)
        assert goal["bookpeople"] == ("1",)
        assert goal["bookstay"] == ("5",)
        assert goal["type"] == ("hotel",)

    def test_out_of_range_consumed_count(self, by_id):
        with pytest.raises(EvalError):
            labeled_goal(by_id["SNG0451.json"], 0)
        with pytest.raises(EvalError):
            labeled_goal(by_id["SNG0451.json"], 99)


class TestInformVerdict:
    def test_extra_goal_slots_do_not_contradict(self):
        extracted = {"area": "north", "food": "french"}
        goal = {
            "area": ("north",),
            "food": ("french",),
            "name": ("two two",),
            "pricerange": ("expensive",),
        }
        assert inform_verdict(extracted, goal) is True

    def test_direct_contradiction(self):
        assert inform_verdict({"area": "south"}, {"area": ("north",)}) is False

    def test_dontcare_matches_anything(self):
        assert inform_verdict({"area": "south"}, {"area": ("dontcare",)}) is True
        assert inform_verdict({}, {"area": ("dontcare",)}, strict=True) is True

    def test_strict_mode_requires_every_goal_slot(self):
        extracted = {"area": "north"}
        goal = {"area": ("north",), "food": ("french",)}
        assert inform_verdict(extracted, goal) is True
        assert inform_verdict(extracted, goal, strict=False) is True
        assert inform_verdict(extracted, goal, strict=True) is False

    def test_presented_entities_must_satisfy_extracted_filterable_slots(self):
        good = EntityRecord(columns={"area": "north"}, row_index=0)
        bad = EntityRecord(columns={"area": "south"}, row_index=1)
        extracted = {"area": "north"}
        goal = {"area": ("north",)}
        assert inform_verdict(extracted, goal, presented=[good], filterable=["area"])
        assert not inform_verdict(extracted, goal, presented=[good, bad], filterable=["area"])

    def test_agreement_with_brute_force_comparator_on_random_pairs(self):
        rng = random.Random(4242)
        captions = ["area", "food", "pricerange", "stars"]
        pools = {
            "area": ["north", "south", "east"],
            "food": ["french", "italian"],
            "pricerange": ["cheap", "moderate", "dontcare"],
            "stars": ["2", "4"],
        }

        def brute_force(extracted, goal):
            for caption, values in goal.items():
                if caption not in extracted:
                    continue
                if "dontcare" in values:
                    continue
                if extracted[caption] not in values:
                    return False
            return True

        for _ in range(500):
            extracted = {
                c: rng.choice([v for v in pools[c] if v != "dontcare"])
                for c in rng.sample(captions, rng.randint(0, 3))
            }
            goal = {
                c: (rng.choice(pools[c]),) for c in rng.sample(captions, rng.randint(0, 4))
            }
            assert inform_verdict(extracted, goal) == brute_force(extracted, goal)

    def test_invariant_under_renormalization(self):
        extracted = {"food": "French Food", "stars": "two"}
        goal = {"food": ("french",), "stars": ("2",)}
        assert inform_verdict(extracted, goal) is True
        renorm = {c: normalize_value(v, c) for c, v in extracted.items()}
        assert inform_verdict(renorm, goal) is True


class TestSuccessVerdict:
    def test_full_row_presentation_succeeds(self):
        report = simple_report(informed=True)
        assert success_verdict(report) is True

    def test_elided_column_fails(self):
        report = simple_report(informed=True)
        report.presented_entities = (EntityRecord(columns={"a": "x"}, row_index=0),)
        assert success_verdict(report) is False

    def test_not_informed_never_succeeds(self):
        assert success_verdict(simple_report(informed=False)) is False

    def test_sweep_success_equals_inform_under_full_rows(self):
        for i in range(50):
            report = simple_report(informed=i % 2 == 0)
            assert success_verdict(report) == report.informed


class TestSummarize:
    def test_all_informed_and_succeeded(self):
        reports = [simple_report() for _ in range(4)]
        for r in reports:
            r.succeeded = success_verdict(r)
        summary = summarize(reports)
        assert (summary.inform_rate, summary.success_rate, summary.updated_combined) == (
            100.0,
            100.0,
            100.0,
        )

    def test_table_values_sfn_and_hdno(self):
        assert ScoreSummary.from_rates(97.2, 87.8).updated_combined == 92.5
        assert ScoreSummary.from_rates(96.7, 91.7).updated_combined == 94.2

    def test_single_failure_among_four(self):
        reports = [simple_report() for _ in range(3)] + [simple_report(informed=False)]
        for r in reports:
            r.succeeded = success_verdict(r)
        summary = summarize(reports)
        assert (summary.inform_rate, summary.success_rate, summary.updated_combined) == (
            75.0,
            75.0,
            75.0,
        )

    def test_combined_invariant_holds(self):
        rng = random.Random(1)
        for _ in range(100):
            i, s = rng.uniform(0, 100), rng.uniform(0, 100)
            summary = ScoreSummary.from_rates(i, s)
            assert summary.updated_combined == (summary.inform_rate + summary.success_rate) / 2

    def test_empty_reports_is_an_error(self):
        with pytest.raises(EvalError):
            summarize([])

    def test_summary_is_order_independent(self):
        reports = [simple_report(informed=i % 3 == 0) for i in range(9)]
        for r in reports:
            r.succeeded = success_verdict(r)
        forward = summarize(reports)
        backward = summarize(list(reversed(reports)))
        assert forward == backward


class TestReplayTranscriptFixtures:
    def test_two_star_hotel_completion_after_three_consumed(self, by_id, hotel):
        report = replay_conversation(by_id["SNG0451.json"], hotel)
        assert report.completed
        assert report.consumed_count == 3
        names = [r.columns["name"] for r in report.presented_entities]
        assert names == ["lovell lodge", "ashley hotel"]
        assert report.informed and report.succeeded

    def test_five_guesthouses_despite_type_mention(self, by_id, hotel):
        report = replay_conversation(by_id["SNG0562.json"], hotel)
        rows = report.presented_entities
        assert len(rows) == 5
        assert all(r.columns["type"] == "guesthouse" for r in rows)
        assert all(r.columns["stars"] == "4" for r in rows)
        assert all(r.columns["area"] == "east" for r in rows)
        assert "type" not in report.extracted_slots
        assert report.informed and report.succeeded

    def test_french_north_completion_with_area_and_food(self, by_id, restaurant):
        report = replay_conversation(by_id["SNG0673.json"], restaurant)
        assert report.completed
        assert report.extracted_slots == {"area": "north", "food": "french"}
        assert report.informed and report.succeeded

    def test_swapped_stations_fail_faulty_goal_but_pass_corrected(
        self, by_id, train, corrected_goals
    ):
        conv = by_id["SNG0784.json"]
        against_label = replay_conversation(conv, train)
        assert against_label.extracted_slots["departure"] == "bishops stortford"
        assert against_label.extracted_slots["destination"] == "cambridge"
        assert not against_label.informed
        corrected = replay_conversation(
            conv, train, goal_override=corrected_goals["SNG0784.json"]
        )
        assert corrected.informed and corrected.succeeded

    def test_replay_summary_is_deterministic(self, conversations, dictionaries, corrected_goals):
        kept = ingest.filter_single_domain(conversations)
        first = summarize(
            replay_conversations(kept, dictionaries, goal_overrides=corrected_goals)
        )
        second = summarize(
            replay_conversations(kept, dictionaries, goal_overrides=corrected_goals)
        )
        assert first == second

    def test_success_equals_inform_across_fixture_replays(
        self, conversations, dictionaries, corrected_goals
    ):
        kept = ingest.filter_single_domain(conversations)
        for report in replay_conversations(kept, dictionaries, goal_overrides=corrected_goals):
            assert report.succeeded == report.informed


class TestScorePredictions:
    def make_prediction_file(self, tmp_path, conversations, corrupt_one=False):
        payload = {}
        for i, conv in enumerate(conversations):
            goal = labeled_goal(conv, len(conv.user_turns))
            state = {f"{conv.domain}-{c}": list(v) for c, v in goal.items()}
            if corrupt_one and i == 0:
                first_key = sorted(state)[0]
                state[first_key] = ["definitely-wrong-value"]
            payload[conv.id.removesuffix(".json").lower()] = [
                {"response": "placeholder", "state": state}
            ]
        path = tmp_path / "predictions.json"
        path.write_text(json.dumps(payload), encoding="utf-8")
        return path

    def test_oracle_predictions_score_perfectly(self, tmp_path, conversations):
        kept = ingest.filter_single_domain(conversations)
        path = self.make_prediction_file(tmp_path, kept)
        summary, reports = score_predictions(path, kept)
        assert (summary.inform_rate, summary.success_rate, summary.updated_combined) == (
            100.0,
            100.0,
            100.0,
        )
        assert len(reports) == len(kept)

    def test_one_contradicted_conversation_drops_inform(self, tmp_path, conversations):
        kept = ingest.filter_single_domain(conversations)
        path = self.make_prediction_file(tmp_path, kept, corrupt_one=True)
        summary, reports = score_predictions(path, kept)
        expected = 100.0 * (len(kept) - 1) / len(kept)
        assert summary.inform_rate == pytest.approx(expected)

    def test_one_contradicted_slot_in_one_of_ten_gives_inform_ninety(
        self, tmp_path, dictionaries
    ):
        import random

        from synthetic_users import generate_goal_suite

        rng = random.Random(31337)
        ten = generate_goal_suite(dictionaries, rng, per_domain=4)[:10]
        path = self.make_prediction_file(tmp_path, ten, corrupt_one=True)
        summary, reports = score_predictions(path, ten)
        assert len(reports) == 10
        assert summary.inform_rate == 90.0
        assert summary.success_rate == 90.0
        assert summary.updated_combined == 90.0

    def test_id_mismatches_reported_per_conversation(self, tmp_path, conversations, caplog):
        kept = ingest.filter_single_domain(conversations)
        path = self.make_prediction_file(tmp_path, kept[:2])
        import logging

        with caplog.at_level(logging.WARNING):
            summary, reports = score_predictions(path, kept)
        assert len(reports) == 2
        assert any("no predictions" in r.message for r in caplog.records)

    def test_missing_file_is_an_error(self, conversations):
        with pytest.raises(EvalError):
            score_predictions("/nonexistent/pred.json", conversations)


class TestRenderReport:
    def test_contains_rows_and_summary_block(self, by_id, restaurant):
        report = replay_conversation(by_id["SNG0673.json"], restaurant)
        text = render_report([report], summarize([report]))
        assert "SNG0673.json" in text
        assert "inform: 100.0" in text
        assert "updated_combined: 100.00" in text
