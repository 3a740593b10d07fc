import pytest
from hypothesis import given
from hypothesis import strategies as st

from duomotion.text import (
    RECIPROCAL_TEMPLATE,
    decompose_prompt,
    load_cache,
    save_cache,
    tokenize,
)

# the three worked decomposition examples the rule engine must reproduce
EXAMPLE_PLURAL = "these two return to their original position."
EXAMPLE_MARKERS = "one person is crossing the legs, the other person takes a picture."
EXAMPLE_FIRST_ONLY = "the first person places both hands on the waist while facing the second."


class TestRuleEngine:
    def test_plural_sentence_rewritten_for_both(self):
        record = decompose_prompt(EXAMPLE_PLURAL)
        assert record.person1 == "he returns to his original position"
        assert record.person2 == record.person1
        assert record.source == "rule"

    def test_marker_sentence_split_at_clause(self):
        record = decompose_prompt(EXAMPLE_MARKERS)
        assert record.person1 == "one person is crossing the legs"
        assert record.person2 == "the other person takes a picture"

    def test_first_person_only_gets_reciprocal(self):
        record = decompose_prompt(EXAMPLE_FIRST_ONLY)
        assert record.person1 == (
            "the first person places both hands on the waist while facing the second"
        )
        assert record.person2 == RECIPROCAL_TEMPLATE
        assert record.person2
        assert "second" in record.person2

    def test_first_second_pair_split(self):
        record = decompose_prompt("the first person bows, the second person curtsies.")
        assert record.person1 == "the first person bows"
        assert record.person2 == "the second person curtsies"

    def test_while_separator_split(self):
        record = decompose_prompt("one person kicks high while the other person ducks.")
        assert record.person1 == "one person kicks high"
        assert record.person2 == "the other person ducks"

    def test_marker_mid_sentence_is_not_a_split_point(self):
        record = decompose_prompt("one person throws a ball at the other.")
        assert record.person1 == "one person throws a ball at the other"
        assert record.person2 == RECIPROCAL_TEMPLATE

    def test_plural_verb_conjugation(self):
        cases = {
            "these two dance together.": "he dances together",
            "the two people are hugging.": "he is hugging",
            "they wave at the camera.": "he waves at the camera",
            "these two cross their arms.": "he crosses his arms",
        }
        for overall, expected in cases.items():
            assert decompose_prompt(overall).person1 == expected

    def test_sentence_without_plural_subject_copied(self):
        record = decompose_prompt("a slow dance unfolds.")
        assert record.person1 == "a slow dance unfolds"
        assert record.person2 == record.person1

    def test_empty_prompt_rejected(self):
        with pytest.raises(ValueError):
            decompose_prompt("   ")

    def test_person1_and_person2_nonempty(self):
        for overall in (EXAMPLE_PLURAL, EXAMPLE_MARKERS, EXAMPLE_FIRST_ONLY, "hi."):
            record = decompose_prompt(overall)
            assert record.person1.strip() and record.person2.strip()

    @pytest.mark.parametrize(
        "overall",
        [EXAMPLE_PLURAL, "these two bounce together in step.", "a slow dance unfolds."],
    )
    def test_idempotent_on_plural_scenario_outputs(self, overall):
        first = decompose_prompt(overall)
        second = decompose_prompt(first.person1)
        assert second.person1 == first.person1
        assert second.person2 == first.person1


class TestCache:
    def test_cache_hit_returned_verbatim(self):
        cache = {EXAMPLE_PLURAL: ("custom one", "custom two")}
        record = decompose_prompt(EXAMPLE_PLURAL, cache)
        assert (record.person1, record.person2) == ("custom one", "custom two")
        assert record.source == "cache"

    def test_empty_cache_values_fall_through_to_rules(self):
        cache = {EXAMPLE_PLURAL: ("", "whatever")}
        record = decompose_prompt(EXAMPLE_PLURAL, cache)
        assert record.source == "rule"
        assert record.person1 == "he returns to his original position"

    def test_cache_file_round_trip(self, tmp_path):
        cache = {"a b c.": ("a", "b"), "x?": ("y", "z")}
        path = tmp_path / "cache.tsv"
        save_cache(path, cache)
        assert load_cache(path) == cache

    def test_malformed_cache_line_rejected(self, tmp_path):
        path = tmp_path / "cache.tsv"
        path.write_text("only two\tfields\n", encoding="utf-8")
        with pytest.raises(ValueError):
            load_cache(path)

    def test_tab_in_cache_field_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            save_cache(tmp_path / "c.tsv", {"k": ("a\tb", "c")})


class TestTokenize:
    def test_basic(self):
        assert tokenize("One person, the OTHER!") == ["one", "person", "the", "other"]

    def test_apostrophes_kept_in_word(self):
        assert tokenize("don't stop") == ["don't", "stop"]

    def test_empty(self):
        assert tokenize("...") == []

    @given(st.text(max_size=80))
    def test_total_and_lowercase(self, text):
        for token in tokenize(text):
            assert token == token.lower()
            assert token
