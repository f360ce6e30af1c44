"""Closed-vocabulary CHAIR baseline: parsing, rates, file loading."""

import pytest

from ovfact.baselines.chair import (
    ClosedVocabulary,
    chair_i,
    chair_parse,
    chair_s,
    split_sentences,
)
from ovfact.demodata import (
    CAPTION_MAIN,
    DEMO_CHAIR_CLASSES,
    DEMO_CHAIR_SYNONYMS,
    REF_MAIN,
)
from ovfact.errors import DataError
from ovfact.model import build_entity_set

VOCAB = ClosedVocabulary.from_mappings(DEMO_CHAIR_CLASSES, DEMO_CHAIR_SYNONYMS)


class TestParse:
    def test_longest_match_wins(self):
        parsed = chair_parse("A hot dog on a plate.", VOCAB)
        assert parsed.surfaces == ("hot dog",)

    def test_consumed_tokens_cannot_rematch(self):
        parsed = chair_parse("a hot dog and a dog", VOCAB)
        assert parsed.surfaces == ("hot dog", "dog")

    def test_synonyms_map_to_canonical_class(self):
        parsed = chair_parse("A puppy on the lawn.", VOCAB)
        assert parsed.surfaces == ("dog", "grass")

    def test_mentions_deduplicate_keeping_first_order(self):
        parsed = chair_parse("A dog and a pup chase another puppy past a house.", VOCAB)
        assert parsed.surfaces == ("dog", "house")

    def test_out_of_vocabulary_words_are_invisible(self):
        parsed = chair_parse("A dragon breathing fire.", VOCAB)
        assert len(parsed) == 0

    def test_attribute_qualified_phrases_reduce_to_bare_class(self):
        # the closed vocabulary cannot represent "red blanket"
        parsed = chair_parse("A red blanket.", VOCAB)
        assert parsed.surfaces == ("blanket",)

    def test_matching_ignores_punctuation_and_case(self):
        parsed = chair_parse("DOG, grass; SKY!", VOCAB)
        assert parsed.surfaces == ("dog", "grass", "sky")

    def test_class_beats_synonym_for_the_same_span(self):
        vocab = ClosedVocabulary.from_mappings(["dog", "cat"], {"dog": "cat"})
        assert chair_parse("a dog", vocab).surfaces == ("dog",)


class TestVocabulary:
    def test_synonym_to_unknown_class_rejected(self):
        with pytest.raises(DataError):
            ClosedVocabulary.from_mappings(["dog"], {"pup": "cat"})

    def test_empty_class_list_rejected(self):
        with pytest.raises(DataError):
            ClosedVocabulary.from_mappings([])

    def test_unnormalized_direct_construction_rejected(self):
        with pytest.raises(DataError):
            ClosedVocabulary(classes=frozenset({"Dog"}))

    def test_from_json(self, tmp_path):
        path = tmp_path / "vocab.json"
        path.write_text('{"classes": ["Dog", "hot dog"], "synonyms": {"pup": "dog"}}')
        vocab = ClosedVocabulary.from_json(path)
        assert vocab.classes == frozenset({"dog", "hot dog"})
        assert ("pup", "dog") in vocab.synonyms

    def test_from_json_malformed(self, tmp_path):
        path = tmp_path / "vocab.json"
        path.write_text('{"synonyms": {}}')
        with pytest.raises(DataError, match="malformed"):
            ClosedVocabulary.from_json(path)
        path.write_text("not json")
        with pytest.raises(DataError, match="invalid JSON"):
            ClosedVocabulary.from_json(path)
        with pytest.raises(DataError, match="cannot read"):
            ClosedVocabulary.from_json(tmp_path / "absent.json")


class TestSentences:
    def test_splits_on_terminator_plus_whitespace(self):
        assert split_sentences("One. Two! Three? Four") == [
            "One.",
            "Two!",
            "Three?",
            "Four",
        ]

    def test_decimal_points_do_not_split(self):
        assert split_sentences("It is 3.5 meters tall.") == ["It is 3.5 meters tall."]

    def test_empty_caption_has_no_sentences(self):
        assert split_sentences("   ") == []


class TestRates:
    def test_instance_rate(self):
        mentioned = build_entity_set(["dog", "blanket"])
        gt = build_entity_set(["dog"])
        assert chair_i(mentioned, gt) == pytest.approx(0.5)

    def test_instance_rate_empty_mentions_is_zero(self):
        assert chair_i(build_entity_set([]), build_entity_set(["dog"])) == 0.0

    def test_sentence_rate(self):
        caption = "A dog runs. A blanket lies there."
        gt = chair_parse(REF_MAIN, VOCAB)
        per_sentence = [chair_parse(s, VOCAB) for s in split_sentences(caption)]
        assert chair_s(per_sentence, gt) == pytest.approx(0.5)

    def test_sentence_rate_no_sentences_is_zero(self):
        assert chair_s([], build_entity_set(["dog"])) == 0.0

    def test_demo_caption_rates(self):
        mentioned = chair_parse(CAPTION_MAIN, VOCAB)
        gt = chair_parse(REF_MAIN, VOCAB)
        assert mentioned.surfaces == ("dog", "blanket", "sky")
        assert gt.surfaces == ("dog", "grass", "sky")
        assert chair_i(mentioned, gt) == pytest.approx(1 / 3, abs=1e-12)
        per_sentence = [chair_parse(s, VOCAB) for s in split_sentences(CAPTION_MAIN)]
        assert chair_s(per_sentence, gt) == 1.0

    def test_adding_hallucinated_mentions_never_lowers_instance_rate(self):
        gt = build_entity_set(["dog"])
        phrases = ["dog"]
        previous = chair_i(build_entity_set(phrases), gt)
        for extra in ("cat", "house", "tree", "person"):
            phrases.append(extra)
            current = chair_i(build_entity_set(phrases), gt)
            assert current >= previous
            previous = current
        assert previous == pytest.approx(4 / 5)
