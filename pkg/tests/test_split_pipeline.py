"""Split factorization stages and the end-to-end pipeline."""

import json

import numpy as np
import pytest
from scipy import sparse

from conftest import small_split_config, write_jsonl
from oracles import block_topic_matrix, purity, separated_topics_problem, topic_corpus_jsonl
from senmfk_split.errors import DegenerateMatrix, NonNegativityViolation, ShapeMismatch
from senmfk_split.matrix_builder import SemanticConfig
from senmfk_split.model_selection import SelectionConfig
from senmfk_split.nmf_core import NmfConfig, relative_error
from senmfk_split.split_pipeline import (
    SplitConfig,
    assign_documents,
    concat_normalized,
    default_joint_range,
    factorize_m,
    factorize_x,
    final_regression,
    joint_factorize,
    run_split,
    top_words,
)
from senmfk_split.text_pipeline import Vocabulary


def vocab_of(*terms):
    return Vocabulary(
        terms=tuple(terms),
        index_of={t: i for i, t in enumerate(terms)},
        doc_freq={t: 1 for t in terms},
    )


def selection(k_lo, k_hi, seed, perturbations=6, max_iter=300):
    return SelectionConfig(
        k_lo, k_hi, n_perturbations=perturbations, nmf=NmfConfig(max_iter=max_iter, tol=1e-7, seed=seed)
    )


class TestFactorizeX:
    def test_synthetic_rank_three(self, rng):
        X = sparse.csr_matrix(separated_topics_problem(rng, 3))
        W1, H1, report = factorize_x(X, selection(2, 6, seed=1))
        assert report.chosen_k == 3
        assert W1.shape[1] == 3 and H1.shape[0] == 3
        assert relative_error(X, W1, H1) < 0.05
        assert [r.k for r in report.per_k] == [2, 3, 4, 5, 6]

    def test_rank_one_corpus(self, rng):
        w = rng.uniform(0.5, 1.5, (8, 1))
        X = sparse.csr_matrix(np.tile(w, (1, 10)))
        W1, _H1, report = factorize_x(X, selection(1, 3, seed=2))
        assert report.chosen_k == 1
        assert W1.shape == (8, 1)


class TestFactorizeM:
    def test_block_diagonal_two_topics(self, rng):
        blocks = []
        for _ in range(2):
            b = rng.uniform(0.5, 1.0, (5, 5))
            blocks.append(b + b.T)
        M = sparse.csr_matrix(np.block([
            [blocks[0], np.zeros((5, 5))],
            [np.zeros((5, 5)), blocks[1]],
        ]))
        W2, _H2, report = factorize_m(M, selection(1, 4, seed=3))
        assert report.chosen_k == 2
        # each consensus column is supported on one block
        for t in range(2):
            col = W2[:, t]
            top_half, bottom_half = col[:5].sum(), col[5:].sum()
            assert min(top_half, bottom_half) < 0.05 * max(top_half, bottom_half)

    def test_zero_matrix_rejected(self):
        with pytest.raises(DegenerateMatrix):
            factorize_m(sparse.csr_matrix((6, 6)), selection(1, 2, seed=4))


class TestConcatNormalized:
    def test_columns_become_unit(self, rng):
        W1 = rng.uniform(0.5, 1.0, (6, 2)) * 2.0
        W2 = rng.uniform(0.5, 1.0, (6, 3))
        out = concat_normalized(W1, W2)
        np.testing.assert_allclose(np.linalg.norm(out, axis=0), 1.0, atol=1e-12)

    def test_column_order(self, rng):
        W1 = rng.uniform(0.1, 1.0, (5, 2))
        W2 = rng.uniform(0.1, 1.0, (5, 3))
        out = concat_normalized(W1, W2)
        assert out.shape == (5, 5)
        np.testing.assert_allclose(out[:, 0], W1[:, 0] / np.linalg.norm(W1[:, 0]))
        np.testing.assert_allclose(out[:, 2], W2[:, 0] / np.linalg.norm(W2[:, 0]))

    def test_self_concat_duplicates_detectable(self, rng):
        W = rng.uniform(0.1, 1.0, (7, 3))
        out = concat_normalized(W, W)
        for t in range(3):
            cos = out[:, t] @ out[:, t + 3]
            np.testing.assert_allclose(cos, 1.0, atol=1e-12)

    def test_shape_mismatch(self, rng):
        with pytest.raises(ShapeMismatch):
            concat_normalized(rng.uniform(size=(5, 2)), rng.uniform(size=(6, 2)))


class TestJointFactorize:
    def test_duplicate_basis_merges(self, rng):
        B = block_topic_matrix(rng, 4, rows_per_topic=10)
        perm = [2, 0, 3, 1]
        Wcat = np.hstack([B, B[:, perm]])
        W, Hstar, report = joint_factorize(Wcat, selection(2, 8, seed=5))
        assert report.chosen_k == 4
        assert W.shape == (40, 4) and Hstar.shape == (4, 8)
        # every true basis column is matched by some consensus column
        sims = (B / np.linalg.norm(B, axis=0)).T @ (W / np.linalg.norm(W, axis=0))
        assert (sims.max(axis=1) >= 0.95).all()

    def test_orthogonal_columns_keep_full_rank(self, rng):
        # six mutually orthogonal-support columns: nothing to merge
        Wcat = block_topic_matrix(rng, 6, rows_per_topic=5)
        W, _Hstar, report = joint_factorize(Wcat, selection(2, 6, seed=6))
        assert report.chosen_k == 6

    def test_single_column(self, rng):
        col = rng.uniform(0.5, 1.0, (9, 1))
        W, _H, report = joint_factorize(col, selection(1, 1, seed=7, perturbations=4))
        assert report.chosen_k == 1
        cos = (W[:, 0] / np.linalg.norm(W)) @ (col[:, 0] / np.linalg.norm(col))
        assert cos > 0.999

    def test_scan_clamped_to_column_count(self, rng):
        Wcat = block_topic_matrix(rng, 3, rows_per_topic=4)
        W, _H, report = joint_factorize(Wcat, selection(2, 10, seed=8, perturbations=4))
        assert report.chosen_k <= 3

    def test_negative_input_rejected(self):
        with pytest.raises(NonNegativityViolation):
            joint_factorize(np.array([[1.0, -1.0]]).T, selection(1, 1, seed=9, perturbations=4))


class TestDefaultJointRange:
    def test_regular_case(self):
        assert default_joint_range(3, 4, 100) == (3, 7)

    def test_floor_of_two(self):
        assert default_joint_range(2, 6, 100) == (2, 8)

    def test_rank_one_side_includes_one(self):
        assert default_joint_range(1, 1, 100) == (1, 2)
        assert default_joint_range(1, 5, 100) == (1, 6)

    def test_row_cap(self):
        assert default_joint_range(4, 4, 6) == (4, 6)


class TestFinalRegression:
    def test_zero_target(self):
        W = np.ones((5, 2))
        H = final_regression(sparse.csr_matrix((5, 3)), W)
        np.testing.assert_allclose(H, 0.0, atol=1e-12)

    def test_recovers_construction(self, rng):
        W = rng.uniform(0.1, 1.0, (10, 3))
        H_true = rng.uniform(0.0, 1.0, (3, 6))
        X = sparse.csr_matrix(W @ H_true)
        H = final_regression(X, W, NmfConfig(max_iter=5000, tol=1e-12, seed=1))
        assert relative_error(X, W, H) < 1e-6

    def test_error_bounded_by_one(self, rng):
        X = sparse.csr_matrix(rng.uniform(0.0, 1.0, (8, 6)))
        W = rng.uniform(0.0, 1.0, (8, 2))
        H = final_regression(X, W, NmfConfig(seed=2))
        assert relative_error(X, W, H) <= 1.0 + 1e-12


class TestAssignDocuments:
    def test_argmax_and_tie_rule(self):
        H = np.array([[0.1, 0.5, 0.0], [0.9, 0.5, 0.0]])
        out = assign_documents(H)
        np.testing.assert_array_equal(out.assignments, [1, 0, 0])
        assert out.zero_columns == (2,)

    def test_histogram_partition(self, rng):
        H = rng.uniform(0.0, 1.0, (4, 30))
        out = assign_documents(H)
        assert out.counts.sum() == 30
        assert len(out.counts) == 4

    def test_scaling_invariance(self, rng):
        H = rng.uniform(0.0, 1.0, (3, 12))
        a = assign_documents(H)
        b = assign_documents(H * 17.5)
        np.testing.assert_array_equal(a.assignments, b.assignments)


class TestTopWords:
    def test_indicator_column(self):
        vocab = vocab_of(*[f"t{chr(97 + i)}" for i in range(9)])
        W = np.zeros((9, 1))
        W[7, 0] = 1.0
        ranked = top_words(W, vocab, top_n=1)
        assert ranked[0][0][0] == vocab.terms[7]

    def test_equal_weights_lexicographic(self):
        vocab = vocab_of("zed", "ant", "mid")
        W = np.array([[0.5], [0.5], [0.9]])
        ranked = top_words(W, vocab, top_n=3)
        assert [t for t, _ in ranked[0]] == ["mid", "ant", "zed"]

    def test_top5_prefix_of_top20(self, rng):
        vocab = vocab_of(*sorted({f"w{chr(97+i)}{chr(97+j)}" for i in range(5) for j in range(5)}))
        W = rng.uniform(0.0, 1.0, (len(vocab), 3))
        top20 = top_words(W, vocab, top_n=20)
        top5 = top_words(W, vocab, top_n=5)
        for t in range(3):
            assert top5[t] == top20[t][:5]

    def test_weights_non_increasing(self, rng):
        vocab = vocab_of(*sorted({f"v{chr(97+i)}{chr(97+j)}" for i in range(4) for j in range(4)}))
        W = rng.uniform(0.0, 1.0, (len(vocab), 2))
        for ranked in top_words(W, vocab, top_n=len(vocab)):
            weights = [w for _, w in ranked]
            assert all(a >= b for a, b in zip(weights, weights[1:]))


class TestRunSplit:
    def test_three_topic_corpus(self, rng, tmp_path):
        lines, labels = topic_corpus_jsonl(rng, docs_per_topic=50)
        corpus_path = write_jsonl(tmp_path / "input.jsonl", lines)
        model = run_split(corpus_path, small_split_config(seed=3), tmp_path / "ws")
        assert model.k == 3
        assert model.k <= model.k1 + model.k2
        assert purity(model.assignments, labels) >= 0.8
        assert model.histogram.sum() == len(labels)
        for name in (
            "vocab.txt",
            "corpus.jsonl",
            "X.mtx",
            "cooc.mtx",
            "M.mtx",
            "W1.mtx",
            "W2.mtx",
            "W.mtx",
            "H.mtx",
            "selection_x.json",
            "selection_m.json",
            "selection_joint.json",
            "topics.json",
            "assignments.csv",
            "histogram.csv",
        ):
            assert (tmp_path / "ws" / name).is_file(), name

    def test_byte_identical_reruns(self, rng, tmp_path):
        lines, _ = topic_corpus_jsonl(rng, docs_per_topic=30)
        corpus_path = write_jsonl(tmp_path / "input.jsonl", lines)
        run_split(corpus_path, small_split_config(seed=4), tmp_path / "ws_a")
        run_split(corpus_path, small_split_config(seed=4), tmp_path / "ws_b")
        names = sorted(p.name for p in (tmp_path / "ws_a").iterdir())
        assert names == sorted(p.name for p in (tmp_path / "ws_b").iterdir())
        for name in names:
            assert (tmp_path / "ws_a" / name).read_bytes() == (
                tmp_path / "ws_b" / name
            ).read_bytes(), name

    def test_reconstruction_sanity(self, rng, tmp_path):
        lines, _ = topic_corpus_jsonl(rng, docs_per_topic=40)
        corpus_path = write_jsonl(tmp_path / "input.jsonl", lines)
        model = run_split(corpus_path, small_split_config(seed=5), tmp_path / "ws")
        from senmfk_split import storage

        X = storage.read_sparse(tmp_path / "ws" / "X.mtx")
        W1 = storage.read_dense(tmp_path / "ws" / "W1.mtx")
        H1 = storage.read_dense(tmp_path / "ws" / "H1.mtx")
        err_final = relative_error(X, model.W, model.H)
        err_x = relative_error(X, W1, H1)
        assert err_final <= 1.0
        if model.k == model.k1:
            assert err_final <= 1.05 * err_x

    def test_factors_nonnegative_finite(self, rng, tmp_path):
        lines, _ = topic_corpus_jsonl(rng, docs_per_topic=30)
        corpus_path = write_jsonl(tmp_path / "input.jsonl", lines)
        model = run_split(corpus_path, small_split_config(seed=6), tmp_path / "ws")
        from senmfk_split import storage

        for name in ("W1.mtx", "W2.mtx", "W.mtx", "H.mtx", "H1.mtx", "H2.mtx", "Hstar.mtx"):
            arr = storage.read_dense(tmp_path / "ws" / name)
            assert (arr >= 0).all() and np.isfinite(arr).all(), name

    def test_topics_json_schema(self, rng, tmp_path):
        lines, _ = topic_corpus_jsonl(rng, docs_per_topic=30)
        corpus_path = write_jsonl(tmp_path / "input.jsonl", lines)
        model = run_split(corpus_path, small_split_config(seed=7), tmp_path / "ws")
        payload = json.loads((tmp_path / "ws" / "topics.json").read_text())
        assert [e["topic_id"] for e in payload] == list(range(model.k))
        for entry in payload:
            weights = [t["weight"] for t in entry["terms"]]
            assert all(a >= b for a, b in zip(weights, weights[1:]))
            assert len(entry["terms"]) == min(20, len(model.W))
