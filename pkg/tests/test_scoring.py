"""Softmax scoring, outlier normalization, and the combined methods."""

import math

import numpy as np
import pytest

from ole.embeddings import LabeledEmbeddings
from ole.errors import ValidationError
from ole.scoring import (
    SCORE_METHODS,
    ScoringContext,
    id_score,
    no_probabilities,
    score_batch,
    yes_probabilities,
    yes_probabilities_ole,
)

E = math.e


def unit(rows):
    rows = np.asarray(rows, dtype=np.float64)
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def random_context(rng, with_prototypes=True, with_no=True):
    m = int(rng.integers(2, 9))
    d = int(rng.integers(4, 24))
    g = int(rng.integers(1, 6)) if with_prototypes else 0
    return ScoringContext(
        id_embeddings=unit(rng.normal(size=(m, d))),
        prototypes=unit(rng.normal(size=(g, d))) if g else np.empty((0, d)),
        temperature=float(rng.uniform(0.05, 1.0)),
        no_embeddings=unit(rng.normal(size=(m, d))) if with_no else None,
    )


class TestContextValidation:
    def test_rejects_both_no_sources(self):
        ids = np.eye(2)
        with pytest.raises(ValidationError):
            ScoringContext(
                id_embeddings=ids,
                no_embeddings=-ids,
                no_probabilities=np.zeros((1, 2)),
            )

    def test_rejects_probabilities_out_of_range(self):
        with pytest.raises(ValidationError):
            ScoringContext(id_embeddings=np.eye(2), no_probabilities=np.array([[0.5, 1.5]]))

    def test_rejects_nonpositive_temperature(self):
        with pytest.raises(ValidationError):
            ScoringContext(id_embeddings=np.eye(2), temperature=0.0)


class TestYesProbabilities:
    def test_two_way_softmax(self):
        ctx = ScoringContext(id_embeddings=np.eye(2), temperature=1.0)
        probs = yes_probabilities(np.array([1.0, 0.0]), ctx)
        np.testing.assert_allclose(probs, [E / (E + 1), 1 / (E + 1)], atol=1e-9)
        assert probs[0] == pytest.approx(0.731059, abs=1e-6)

    def test_uniform_for_equal_similarities(self):
        d = 4
        ids = unit(np.ones((3, d)) + 0)  # identical rows
        ctx = ScoringContext(id_embeddings=ids, temperature=0.07)
        probs = yes_probabilities(unit(np.ones((1, d)))[0], ctx)
        np.testing.assert_allclose(probs, 1 / 3, atol=1e-12)

    def test_small_temperature_one_hot(self):
        ctx = ScoringContext(id_embeddings=np.eye(2), temperature=0.001)
        probs = yes_probabilities(np.array([1.0, 0.0]), ctx)
        np.testing.assert_allclose(probs, [1.0, 0.0], atol=1e-9)

    def test_sums_to_one(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            ctx = random_context(rng, with_prototypes=False, with_no=False)
            x = unit(rng.normal(size=(1, ctx.id_embeddings.shape[1])))[0]
            assert yes_probabilities(x, ctx).sum() == pytest.approx(1.0, abs=1e-9)


class TestYesProbabilitiesOle:
    def test_empty_prototypes_exact_reduction(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            ctx = random_context(rng, with_prototypes=False, with_no=False)
            x = unit(rng.normal(size=(1, ctx.id_embeddings.shape[1])))[0]
            np.testing.assert_array_equal(
                yes_probabilities_ole(x, ctx), yes_probabilities(x, ctx)
            )

    def test_symmetric_two_term(self):
        ctx = ScoringContext(
            id_embeddings=np.array([[1.0, 0.0]]),
            prototypes=np.array([[1.0, 0.0]]),
            temperature=1.0,
        )
        probs = yes_probabilities_ole(np.array([1.0, 0.0]), ctx)
        np.testing.assert_allclose(probs, [0.5], atol=1e-12)

    def test_worked_two_class_one_prototype(self):
        # denominator e + 1 + e; the independent arithmetic gives
        # (0.422319, 0.155362)
        ctx = ScoringContext(
            id_embeddings=np.eye(2),
            prototypes=np.array([[1.0, 0.0]]),
            temperature=1.0,
        )
        probs = yes_probabilities_ole(np.array([1.0, 0.0]), ctx)
        np.testing.assert_allclose(probs, [E / (2 * E + 1), 1 / (2 * E + 1)], atol=1e-12)
        assert probs[0] == pytest.approx(0.422319, abs=1e-6)

    def test_monotone_suppression_and_argmax(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            ctx = random_context(rng, with_prototypes=False, with_no=False)
            d = ctx.id_embeddings.shape[1]
            x = unit(rng.normal(size=(1, d)))[0]
            base = yes_probabilities_ole(x, ctx)
            augmented = ScoringContext(
                id_embeddings=ctx.id_embeddings,
                prototypes=unit(rng.normal(size=(1, d))),
                temperature=ctx.temperature,
            )
            after = yes_probabilities_ole(x, augmented)
            assert np.all(after < base)
            assert np.argmax(after) == np.argmax(base)

    def test_sub_normalized(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            ctx = random_context(rng, with_no=False)
            x = unit(rng.normal(size=(1, ctx.id_embeddings.shape[1])))[0]
            assert yes_probabilities_ole(x, ctx).sum() <= 1.0 + 1e-12


class TestNoProbabilities:
    def test_stored_passthrough(self):
        stored = np.array([[0.2, 0.9]])
        ctx = ScoringContext(id_embeddings=np.eye(2), no_probabilities=stored)
        out = no_probabilities(np.array([[1.0, 0.0]]), ctx)
        np.testing.assert_array_equal(out, stored)

    def test_symmetric_pair_gives_half(self):
        ids = np.array([[1.0, 0.0]])
        ctx = ScoringContext(id_embeddings=ids, no_embeddings=ids, temperature=1.0)
        out = no_probabilities(np.array([1.0, 0.0]), ctx)
        np.testing.assert_allclose(out, [0.5])

    def test_two_way_softmax_value(self):
        ctx = ScoringContext(
            id_embeddings=np.array([[0.0, 1.0]]),
            no_embeddings=np.array([[1.0, 0.0]]),
            temperature=1.0,
        )
        out = no_probabilities(np.array([1.0, 0.0]), ctx)
        assert out[0] == pytest.approx(E / (1 + E), abs=1e-6)

    def test_missing_branch_rejected(self):
        ctx = ScoringContext(id_embeddings=np.eye(2))
        with pytest.raises(ValidationError):
            no_probabilities(np.array([1.0, 0.0]), ctx)


class TestIdScore:
    def test_clipn_worked_value(self):
        # M=1, p_yes = 1, p_no = 0.5 -> 0.5
        ctx = ScoringContext(
            id_embeddings=np.array([[1.0, 0.0]]),
            no_probabilities=np.array([[0.5]]),
            temperature=0.001,
        )
        score = id_score(np.array([[1.0, 0.0]]), ctx, "clipn")
        assert score[0] == pytest.approx(0.5, abs=1e-6)

    def test_clipn_degenerate_no_branch(self):
        rng = np.random.default_rng(4)
        ids = unit(rng.normal(size=(3, 8)))
        x = unit(rng.normal(size=(5, 8)))
        ctx = ScoringContext(
            id_embeddings=ids, no_probabilities=np.zeros((5, 3)), temperature=0.05
        )
        scores = id_score(x, ctx, "clipn")
        np.testing.assert_allclose(scores, 1.0, atol=1e-9)

    def test_clipn_ole_worked_value(self):
        ctx = ScoringContext(
            id_embeddings=np.array([[1.0, 0.0]]),
            prototypes=np.array([[1.0, 0.0]]),
            no_probabilities=np.array([[0.0]]),
            temperature=1.0,
        )
        score = id_score(np.array([[1.0, 0.0]]), ctx, "clipn_ole")
        assert score[0] == pytest.approx(0.5, abs=1e-6)

    def test_baselines_ignore_prototypes(self):
        rng = np.random.default_rng(5)
        ids = unit(rng.normal(size=(4, 6)))
        x = unit(rng.normal(size=(10, 6)))
        bare = ScoringContext(id_embeddings=ids, temperature=0.3)
        loaded = ScoringContext(
            id_embeddings=ids, prototypes=unit(rng.normal(size=(5, 6))), temperature=0.3
        )
        for method in ("maxlogit", "energy", "mcm"):
            np.testing.assert_array_equal(
                id_score(x, bare, method), id_score(x, loaded, method)
            )

    def test_prototype_permutation_invariance(self):
        rng = np.random.default_rng(6)
        ids = unit(rng.normal(size=(3, 6)))
        protos = unit(rng.normal(size=(6, 6)))
        x = unit(rng.normal(size=(4, 6)))
        no = unit(rng.normal(size=(3, 6)))
        a = ScoringContext(id_embeddings=ids, prototypes=protos, no_embeddings=no, temperature=0.2)
        b = ScoringContext(
            id_embeddings=ids, prototypes=protos[::-1], no_embeddings=no, temperature=0.2
        )
        np.testing.assert_allclose(
            id_score(x, a, "clipn_ole"), id_score(x, b, "clipn_ole"), atol=1e-12
        )

    def test_all_finite(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            ctx = random_context(rng)
            x = unit(rng.normal(size=(6, ctx.id_embeddings.shape[1])))
            for method in SCORE_METHODS:
                assert np.all(np.isfinite(id_score(x, ctx, method)))

    def test_method_constraints(self):
        ctx = ScoringContext(id_embeddings=np.eye(2))
        with pytest.raises(ValidationError):
            id_score(np.array([1.0, 0.0]), ctx, "clipn")
        with pytest.raises(ValidationError):
            id_score(np.array([1.0, 0.0]), ctx, "not_a_method")


class TestScoreBatch:
    def test_index_pairing(self):
        rng = np.random.default_rng(8)
        ids = unit(rng.normal(size=(3, 5)))
        images = LabeledEmbeddings(unit(rng.normal(size=(7, 5))), normalized=True)
        ctx = ScoringContext(id_embeddings=ids, temperature=0.2)
        batch = score_batch(images, ctx, "mcm")
        singles = [float(id_score(images.matrix[i], ctx, "mcm")) for i in range(7)]
        np.testing.assert_allclose(batch, singles, atol=0)

    def test_requires_normalized(self):
        images = LabeledEmbeddings(np.array([[3.0, 4.0]]))
        ctx = ScoringContext(id_embeddings=np.eye(2))
        with pytest.raises(ValidationError):
            score_batch(images, ctx, "mcm")
