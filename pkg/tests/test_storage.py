"""Artifact round-trips and format contracts."""

import numpy as np
from scipy import sparse

from senmfk_split import storage
from senmfk_split.model_selection import RankRecord, SelectionReport


class TestMatrixMarket:
    def test_sparse_header_and_roundtrip(self, rng, tmp_path):
        raw = rng.uniform(0.0, 1.0, (7, 5))
        raw[raw < 0.5] = 0.0
        X = sparse.csr_matrix(raw)
        path = tmp_path / "X.mtx"
        storage.write_sparse(X, path)
        first = path.read_text().splitlines()[0]
        assert first == "%%MatrixMarket matrix coordinate real general"
        back = storage.read_sparse(path)
        np.testing.assert_array_equal(back.toarray(), X.toarray())

    def test_symmetric_matrix_still_general_format(self, rng, tmp_path):
        raw = rng.uniform(0.0, 1.0, (4, 4))
        S = sparse.csr_matrix(raw + raw.T)
        path = tmp_path / "S.mtx"
        storage.write_sparse(S, path)
        assert "general" in path.read_text().splitlines()[0]
        np.testing.assert_array_equal(storage.read_sparse(path).toarray(), S.toarray())

    def test_float64_exact_roundtrip(self, tmp_path):
        # 17 significant digits must reproduce doubles bit for bit
        vals = np.array([[1.0 / 3.0, np.pi], [1e-300, 1.2345678901234567]])
        X = sparse.csr_matrix(vals)
        path = tmp_path / "vals.mtx"
        storage.write_sparse(X, path)
        back = storage.read_sparse(path).toarray()
        assert (back == vals).all()

    def test_dense_array_roundtrip(self, rng, tmp_path):
        W = rng.uniform(0.0, 1.0, (6, 3))
        path = tmp_path / "W.mtx"
        storage.write_dense(W, path)
        assert path.read_text().splitlines()[0] == "%%MatrixMarket matrix array real general"
        back = storage.read_dense(path)
        assert (back == W).all()

    def test_write_deterministic(self, rng, tmp_path):
        W = rng.uniform(0.0, 1.0, (5, 4))
        storage.write_dense(W, tmp_path / "a.mtx")
        storage.write_dense(W, tmp_path / "b.mtx")
        assert (tmp_path / "a.mtx").read_bytes() == (tmp_path / "b.mtx").read_bytes()


class TestSelectionReportIO:
    def test_roundtrip(self, rng, tmp_path):
        report = SelectionReport(
            per_k=[
                RankRecord(2, 0.5, 0.7, 0.3),
                RankRecord(3, 0.9, 0.95, 0.1),
            ],
            chosen_k=3,
            consensus_W=rng.uniform(0.0, 1.0, (6, 3)),
            fallback=False,
        )
        path = tmp_path / "sel.json"
        storage.write_selection_report(report, path)
        back = storage.read_selection_report(path, report.consensus_W)
        assert back == report


class TestCsvArtifacts:
    def test_assignments_format(self, tmp_path):
        path = tmp_path / "a.csv"
        storage.write_assignments(
            ["docA", "docB"], np.array([1, 0]), np.array([0.5, 0.25]), path
        )
        lines = path.read_text().splitlines()
        assert lines[0] == "doc_id,topic_id,max_weight"
        assert lines[1] == "docA,1,0.5"

    def test_histogram_roundtrip(self, tmp_path):
        path = tmp_path / "h.csv"
        storage.write_histogram(np.array([3, 0, 7]), path)
        assert storage.read_histogram(path) == [(0, 3), (1, 0), (2, 7)]

    def test_trace_csv(self, tmp_path):
        path = tmp_path / "t.csv"
        storage.write_trace_csv([10, 20], [0.5, 0.25], path)
        lines = path.read_text().splitlines()
        assert lines[0] == "iteration,relative_error"
        assert lines[1] == "10,0.5"
