"""Workspace artifact persistence.

Sparse matrices go to MatrixMarket coordinate files and dense factors to
MatrixMarket array files, both with 17 significant digits so float64 values
round-trip exactly.  Selection reports are JSON, topic tables JSON, document
assignments and histograms CSV.  All writers are deterministic: identical
inputs produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
from scipy import io as scipy_io
from scipy import sparse

from .errors import DataError
from .model_selection import RankRecord, SelectionReport

_PRECISION = 17  # significant digits; scipy renders %.16e, exact for float64


def write_sparse(mat, path: str | Path) -> None:
    """MatrixMarket coordinate file, 1-based indices, general symmetry."""
    scipy_io.mmwrite(
        str(path), sparse.coo_matrix(mat), precision=_PRECISION, symmetry="general"
    )


def write_dense(mat: np.ndarray, path: str | Path) -> None:
    """MatrixMarket array file."""
    arr = np.asarray(mat, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    scipy_io.mmwrite(str(path), arr, precision=_PRECISION)


def read_sparse(path: str | Path) -> sparse.csr_matrix:
    mat = scipy_io.mmread(str(path))
    if not sparse.issparse(mat):
        raise DataError(f"{path}: expected a coordinate (sparse) MatrixMarket file")
    return sparse.csr_matrix(mat)


def read_dense(path: str | Path) -> np.ndarray:
    mat = scipy_io.mmread(str(path))
    if sparse.issparse(mat):
        raise DataError(f"{path}: expected an array (dense) MatrixMarket file")
    return np.asarray(mat, dtype=np.float64)


def write_selection_report(report: SelectionReport, path: str | Path) -> None:
    """Selection scan as JSON; the consensus basis is persisted separately."""
    payload = {
        "per_k": [
            {
                "k": r.k,
                "min_silhouette": r.min_silhouette,
                "mean_silhouette": r.mean_silhouette,
                "relative_error": r.relative_error,
            }
            for r in report.per_k
        ],
        "chosen_k": report.chosen_k,
        "fallback": report.fallback,
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def read_selection_report(path: str | Path, consensus_W: np.ndarray) -> SelectionReport:
    payload = json.loads(Path(path).read_text("utf-8"))
    return SelectionReport(
        per_k=[
            RankRecord(
                k=int(r["k"]),
                min_silhouette=float(r["min_silhouette"]),
                mean_silhouette=float(r["mean_silhouette"]),
                relative_error=float(r["relative_error"]),
            )
            for r in payload["per_k"]
        ],
        chosen_k=int(payload["chosen_k"]),
        consensus_W=consensus_W,
        fallback=bool(payload["fallback"]),
    )


def write_topics(topics: list[list[tuple[str, float]]], path: str | Path) -> None:
    """topics.json: [{topic_id, terms: [{term, weight}]}]."""
    payload = [
        {
            "topic_id": t,
            "terms": [{"term": term, "weight": weight} for term, weight in ranked],
        }
        for t, ranked in enumerate(topics)
    ]
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def read_topics(path: str | Path) -> list[list[tuple[str, float]]]:
    payload = json.loads(Path(path).read_text("utf-8"))
    return [
        [(e["term"], float(e["weight"])) for e in entry["terms"]] for entry in payload
    ]


def write_assignments(
    doc_ids: list[str],
    assignments: np.ndarray,
    max_weights: np.ndarray,
    path: str | Path,
) -> None:
    """assignments.csv: doc_id, topic_id, max_weight."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["doc_id", "topic_id", "max_weight"])
        for doc_id, topic, weight in zip(doc_ids, assignments, max_weights):
            writer.writerow([doc_id, int(topic), format(float(weight), ".17g")])


def write_histogram(counts: np.ndarray, path: str | Path) -> None:
    """histogram.csv: topic_id, count."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["topic_id", "count"])
        for t, c in enumerate(counts):
            writer.writerow([t, int(c)])


def read_histogram(path: str | Path) -> list[tuple[int, int]]:
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["topic_id", "count"]:
            raise DataError(f"{path}: unexpected histogram header {header}")
        return [(int(row[0]), int(row[1])) for row in reader]


def write_trace_csv(iterations: list[int], errors: list[float], path: str | Path) -> None:
    """Objective trace: iteration, relative_error."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "relative_error"])
        for it, err in zip(iterations, errors):
            writer.writerow([it, format(err, ".17g")])
