"""Data model invariants: entities, samples, vocabularies, score records."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ovfact.errors import DataError, NormalizationError
from ovfact.model import (
    CaptionSample,
    EmbeddingVector,
    Entity,
    EntitySet,
    FactualityScore,
    ImageRef,
    ReferenceMode,
    SimilarityMatrix,
    Vocabulary,
    build_entity_set,
    build_vocabulary,
    normalize_entity,
)


class TestEntity:
    def test_normalize_casefolds_and_collapses_whitespace(self):
        entity = normalize_entity("  Red\t BLANKET ")
        assert entity.surface == "red blanket"
        assert entity.head == "blanket"
        assert entity.attributes == ("red",)

    def test_single_token_has_no_attributes(self):
        entity = normalize_entity("Dog")
        assert entity.surface == "dog"
        assert entity.head == "dog"
        assert entity.attributes == ()

    def test_empty_phrase_rejected(self):
        with pytest.raises(NormalizationError):
            normalize_entity("   ")

    def test_surface_must_round_trip(self):
        with pytest.raises(NormalizationError):
            Entity(surface="red blanket", head="dog", attributes=("red",))
        with pytest.raises(NormalizationError):
            Entity(surface="dog", head="")

    def test_attributed_phrase_is_distinct_from_bare_head(self):
        assert normalize_entity("red blanket").dedup_key != normalize_entity("blanket").dedup_key

    @given(st.text())
    def test_normalize_never_returns_invalid_entity(self, raw):
        try:
            entity = normalize_entity(raw)
        except NormalizationError:
            return
        assert entity.surface
        assert entity.head == entity.surface.split()[-1]


class TestEntitySet:
    def test_order_is_first_occurrence(self):
        entity_set = build_entity_set(["dog", "sky", "Dog", "grass"])
        assert entity_set.surfaces == ("dog", "sky", "grass")

    def test_dropped_counts_unnormalizable_phrases(self):
        entity_set = build_entity_set(["dog", "  ", "", "sky"])
        assert entity_set.surfaces == ("dog", "sky")
        assert entity_set.dropped == 2

    def test_dropped_does_not_affect_equality(self):
        a = build_entity_set(["dog"])
        b = build_entity_set(["dog", "   "])
        assert b.dropped == 1
        assert a == b

    def test_direct_construction_rejects_duplicates(self):
        dup = normalize_entity("dog")
        with pytest.raises(DataError):
            EntitySet(entities=(dup, normalize_entity("DOG")))

    def test_contains_is_casefolded(self):
        entity_set = build_entity_set(["Red Blanket"])
        assert "red blanket" in entity_set
        assert "RED BLANKET" in entity_set
        assert normalize_entity("red blanket") in entity_set
        assert "blanket" not in entity_set
        assert 42 not in entity_set

    def test_without_removes_one_surface(self):
        entity_set = build_entity_set(["dog", "sky", "grass"])
        smaller = entity_set.without("SKY")
        assert smaller.surfaces == ("dog", "grass")
        # original untouched
        assert entity_set.surfaces == ("dog", "sky", "grass")

    def test_empty_set(self):
        entity_set = build_entity_set([])
        assert len(entity_set) == 0
        assert list(entity_set) == []


class TestSample:
    def test_requires_id_and_caption(self):
        image = ImageRef(id="img", uri="img")
        with pytest.raises(DataError):
            CaptionSample(id="", image=image, caption="a dog")
        with pytest.raises(DataError):
            CaptionSample(id="s", image=image, caption="   ")

    def test_image_dimensions_validated(self):
        with pytest.raises(DataError):
            ImageRef(id="img", uri="img", width=0)
        with pytest.raises(DataError):
            ImageRef(id="", uri="img")

    def test_content_key_depends_on_every_scored_field(self):
        base = CaptionSample(
            id="s", image=ImageRef(id="i", uri="u"), caption="a dog", reference_caption="a cat"
        )
        variants = [
            CaptionSample(id="s2", image=base.image, caption="a dog", reference_caption="a cat"),
            CaptionSample(id="s", image=ImageRef(id="i2", uri="u"), caption="a dog", reference_caption="a cat"),
            CaptionSample(id="s", image=base.image, caption="a dog!", reference_caption="a cat"),
            CaptionSample(id="s", image=base.image, caption="a dog", reference_caption=None),
        ]
        keys = {base.content_key(), *(v.content_key() for v in variants)}
        assert len(keys) == 5

    def test_content_key_ignores_uri(self):
        a = CaptionSample(id="s", image=ImageRef(id="i", uri="u1"), caption="a dog")
        b = CaptionSample(id="s", image=ImageRef(id="i", uri="u2"), caption="a dog")
        assert a.content_key() == b.content_key()


class TestVocabulary:
    def test_build_unions_sorts_and_casefolds(self, tmp_path):
        first = tmp_path / "a.txt"
        first.write_text("Dog\nsky\n# comment\n\n  Grass  \n")
        second = tmp_path / "b.txt"
        second.write_text("dog\ncat\n")
        vocab = build_vocabulary([first, second])
        assert vocab.concepts == ("cat", "dog", "grass", "sky")
        assert vocab.sources == (("a.txt", 3), ("b.txt", 2))

    def test_contains_casefolds(self, tmp_path):
        path = tmp_path / "v.txt"
        path.write_text("dog\n")
        vocab = build_vocabulary([path])
        assert "DOG" in vocab
        assert "cat" not in vocab

    def test_empty_union_is_fatal(self, tmp_path):
        path = tmp_path / "v.txt"
        path.write_text("# nothing here\n")
        with pytest.raises(DataError):
            build_vocabulary([path])

    def test_missing_file_is_fatal_and_named(self, tmp_path):
        missing = tmp_path / "nope.txt"
        with pytest.raises(DataError, match="nope.txt"):
            build_vocabulary([missing])

    def test_constructor_enforces_sorted_unique(self):
        with pytest.raises(DataError):
            Vocabulary(concepts=("dog", "cat"))
        with pytest.raises(DataError):
            Vocabulary(concepts=("cat", "cat"))

    def test_content_hash_ignores_source_file_order(self, tmp_path):
        first = tmp_path / "a.txt"
        first.write_text("dog\ncat\n")
        second = tmp_path / "b.txt"
        second.write_text("sky\n")
        assert (
            build_vocabulary([first, second]).content_hash
            == build_vocabulary([second, first]).content_hash
        )


class TestEmbeddingAndSimilarity:
    def test_dim_mismatch_rejected(self):
        with pytest.raises(DataError):
            EmbeddingVector(values=(1.0, 0.0), dim=3)

    def test_non_finite_rejected(self):
        with pytest.raises(DataError):
            EmbeddingVector(values=(float("nan"),), dim=1)

    def test_similarity_clamps_rounding_overshoot(self):
        matrix = SimilarityMatrix(np.array([[1.0 + 1e-9, -1.0 - 1e-9]]))
        assert matrix.values.max() == 1.0
        assert matrix.values.min() == -1.0

    def test_similarity_is_read_only(self):
        matrix = SimilarityMatrix(np.zeros((2, 2)))
        with pytest.raises(ValueError):
            matrix.values[0, 0] = 0.5

    def test_similarity_must_be_two_dimensional(self):
        with pytest.raises(DataError):
            SimilarityMatrix(np.zeros(3))
        with pytest.raises(DataError):
            SimilarityMatrix(np.array([[float("inf")]]))

    def test_zero_sized_matrices_allowed(self):
        assert SimilarityMatrix(np.zeros((0, 4))).rows == 0
        assert SimilarityMatrix(np.zeros((4, 0))).cols == 0


class TestFactualityScore:
    def _make(self, precision, recall, **kwargs):
        denom = precision + recall
        f1 = 0.0 if denom == 0.0 else 2.0 * precision * recall / denom
        defaults = dict(
            reference_mode=ReferenceMode.FROM_GT_CAPTION,
            candidate_count=3,
            grounded_count=2,
            reference_count=3,
        )
        defaults.update(kwargs)
        return FactualityScore(precision=precision, recall=recall, f1=f1, **defaults)

    def test_valid_score_round_trips_to_record(self):
        score = self._make(2 / 3, 0.5)
        record = score.as_record()
        assert record["precision"] == 2 / 3
        assert record["reference_mode"] == "from_gt_caption"
        assert record["degenerate"] is False

    def test_out_of_range_rejected(self):
        with pytest.raises(DataError):
            FactualityScore(
                precision=1.5, recall=0.0, f1=0.0,
                reference_mode=ReferenceMode.FROM_GT_CAPTION,
                candidate_count=1, grounded_count=1, reference_count=1,
            )

    def test_inconsistent_f1_rejected(self):
        with pytest.raises(DataError):
            FactualityScore(
                precision=0.5, recall=0.5, f1=0.9,
                reference_mode=ReferenceMode.FROM_GT_CAPTION,
                candidate_count=1, grounded_count=1, reference_count=1,
            )

    def test_grounded_cannot_exceed_candidates(self):
        with pytest.raises(DataError):
            self._make(0.5, 0.5, candidate_count=1, grounded_count=2)
