"""Automatic rank selection for NMF via perturbation ensembles.

For every candidate rank k the input matrix is perturbed ``n_perturbations``
times and factorized from distinct seeds.  The resulting basis columns are
clustered under the constraint that each cluster takes exactly one column per
ensemble member; cluster tightness is scored with cosine-distance silhouettes.
The chosen rank is the largest k whose minimum silhouette clears the
configured threshold, and that rank's cluster centroids become the consensus
basis.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DegenerateMatrix, InvalidRank, ShapeMismatch
from .matrix_builder import canonicalize
from .nmf_core import NmfConfig, nmf, perturb, relative_error, solve_h

_EXACT_ASSIGNMENT_MAX_K = 12
_MAX_CLUSTER_ROUNDS = 100
_DISTANCE_DUST = 1e-12


@dataclass(frozen=True)
class SelectionConfig:
    """Rank scan parameters: candidate range [k_min, k_max], ensemble size,
    perturbation magnitude, and the silhouette acceptance threshold."""

    k_min: int
    k_max: int
    n_perturbations: int = 10
    delta: float = 0.03
    silhouette_threshold: float = 0.75
    nmf: NmfConfig = field(default_factory=NmfConfig)

    def __post_init__(self):
        if not (1 <= self.k_min <= self.k_max):
            raise ValueError("need 1 <= k_min <= k_max")
        if self.n_perturbations < 2:
            raise ValueError("n_perturbations must be >= 2")
        if not (0 < self.silhouette_threshold < 1):
            raise ValueError("silhouette_threshold must be in (0, 1)")


@dataclass(frozen=True)
class RankRecord:
    """Stability and fit statistics for one candidate rank."""

    k: int
    min_silhouette: float
    mean_silhouette: float
    relative_error: float


@dataclass
class SelectionReport:
    """Scan results: one record per candidate rank, the chosen rank, its
    consensus basis, and whether the choice fell back to the most stable rank
    because no rank met the threshold."""

    per_k: list[RankRecord]
    chosen_k: int
    consensus_W: np.ndarray
    fallback: bool = False


@dataclass(frozen=True)
class SilhouetteStats:
    per_cluster_min: tuple[float, ...]
    overall_min: float
    overall_mean: float
    single_cluster: bool = False


def child_seed(base: int, *key: int) -> int:
    """Deterministic per-task seed derived from a base seed and an index key."""
    ss = np.random.SeedSequence(entropy=base, spawn_key=tuple(int(x) for x in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def normalize_columns(W: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Scale columns to unit L2 norm; all-zero columns are left untouched.
    Returns the scaled matrix and the original norms (with zeros kept) so the
    caller can push the scale into the paired factor's rows."""
    W = np.asarray(W, dtype=np.float64)
    norms = np.linalg.norm(W, axis=0)
    safe = np.where(norms == 0, 1.0, norms)
    return W / safe, norms


def _match_columns(columns: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """One-to-one assignment of the k columns to the k centroids maximizing
    cosine similarity: exact for k <= 12, greedy by descending similarity
    otherwise.  Returns perm with perm[c] = cluster index for column c."""
    sim = columns.T @ centroids  # (k columns) x (k centroids)
    k = sim.shape[0]
    if k <= _EXACT_ASSIGNMENT_MAX_K:
        rows, cols = linear_sum_assignment(sim, maximize=True)
        perm = np.empty(k, dtype=np.int64)
        perm[rows] = cols
        return perm
    perm = np.full(k, -1, dtype=np.int64)
    taken = np.zeros(k, dtype=bool)
    order = np.argsort(-sim, axis=None, kind="stable")
    assigned = 0
    for flat in order:
        c, j = divmod(int(flat), k)
        if perm[c] == -1 and not taken[j]:
            perm[c] = j
            taken[j] = True
            assigned += 1
            if assigned == k:
                break
    return perm


def cluster_columns(
    column_sets: list[np.ndarray],
) -> tuple[np.ndarray, np.ndarray]:
    """Partition the p*k columns of p equally shaped (rows x k) matrices into
    k clusters holding exactly one column from each set.

    Centroids start as set 0's columns; every set is then matched one-to-one
    against the centroids by cosine similarity, centroids are recomputed as
    normalized cluster means, and matching repeats until the labels stabilize
    (at most 100 rounds).  Columns are expected to be L2-normalized.

    Returns (labels, centroids): labels has shape (p, k) with labels[s, c]
    the cluster of column c in set s; centroids is rows x k.
    """
    if not column_sets:
        raise ShapeMismatch("need at least one column set")
    sets = [np.asarray(s, dtype=np.float64) for s in column_sets]
    shape = sets[0].shape
    if len(shape) != 2:
        raise ShapeMismatch("column sets must be 2-D")
    for s in sets:
        if s.shape != shape:
            raise ShapeMismatch(f"column set shapes differ: {s.shape} vs {shape}")
    p = len(sets)
    _, k = shape
    centroids = sets[0].copy()
    labels: np.ndarray | None = None
    for _ in range(_MAX_CLUSTER_ROUNDS):
        new_labels = np.vstack([_match_columns(s, centroids) for s in sets])
        if labels is not None and (new_labels == labels).all():
            break
        labels = new_labels
        accum = np.zeros(shape)
        for s in range(p):
            accum[:, labels[s]] += sets[s]  # labels[s] is a permutation
        centroids, _ = normalize_columns(accum / p)
    return labels, centroids


def silhouette(columns: np.ndarray, labels: np.ndarray) -> SilhouetteStats:
    """Silhouette statistics of labeled columns under cosine distance.

    s(i) = (b(i) - a(i)) / max(a(i), b(i)) with a the mean distance to the
    point's own cluster and b the smallest mean distance to another cluster;
    singletons score 0.  A single-cluster labeling is degenerate and reports
    1.0 with the ``single_cluster`` flag set.
    """
    cols = np.asarray(columns, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64).ravel()
    n = cols.shape[1]
    if labels.size != n:
        raise ShapeMismatch(f"{n} columns but {labels.size} labels")
    k = int(labels.max()) + 1 if n else 0
    sizes = np.bincount(labels, minlength=k)
    if (sizes == 0).any():
        raise ShapeMismatch("labels must form contiguous non-empty clusters")
    if k == 1:
        return SilhouetteStats((1.0,), 1.0, 1.0, single_cluster=True)
    unit, _ = normalize_columns(cols)
    dist = 1.0 - unit.T @ unit
    np.clip(dist, 0.0, None, out=dist)
    dist[dist < _DISTANCE_DUST] = 0.0
    np.fill_diagonal(dist, 0.0)
    # cluster_dist[i, c] = total distance from point i to cluster c
    cluster_dist = np.zeros((n, k))
    for c in range(k):
        cluster_dist[:, c] = dist[:, labels == c].sum(axis=1)
    own = labels
    scores = np.zeros(n)
    for i in range(n):
        size_own = sizes[own[i]]
        if size_own == 1:
            scores[i] = 0.0
            continue
        a = cluster_dist[i, own[i]] / (size_own - 1)
        other = [c for c in range(k) if c != own[i]]
        b = min(cluster_dist[i, c] / sizes[c] for c in other)
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0.0 else (b - a) / denom
    per_cluster = tuple(float(scores[labels == c].min()) for c in range(k))
    return SilhouetteStats(
        per_cluster_min=per_cluster,
        overall_min=float(scores.min()),
        overall_mean=float(scores.mean()),
    )


def _ensemble_member(X, k, j, config: SelectionConfig, symmetric: bool) -> np.ndarray:
    base = config.nmf.seed
    Xp = perturb(X, config.delta, seed=child_seed(base, k, j, 0), symmetric=symmetric)
    member_cfg = NmfConfig(
        max_iter=config.nmf.max_iter,
        tol=config.nmf.tol,
        epsilon=config.nmf.epsilon,
        seed=child_seed(base, k, j, 1),
    )
    pair = nmf(Xp, k, member_cfg)
    unit, _ = normalize_columns(pair.W)
    return unit


def nmfk(
    X,
    config: SelectionConfig,
    symmetric_perturbation: bool = False,
    threads: int = 1,
) -> SelectionReport:
    """Scan ranks k_min..k_max and pick the number of latent factors.

    Per rank: factorize ``n_perturbations`` perturbed copies from distinct
    seeds, L2-normalize the basis columns, cluster them one-per-member, score
    the clustering with silhouettes, and record the reconstruction error of
    the centroid basis (H re-solved on the unperturbed matrix).  The chosen
    rank is the largest one with min silhouette >= the threshold; if none
    qualifies the most stable rank is returned with ``fallback`` set.

    Raises DegenerateMatrix on an all-zero input and InvalidRank when the
    scan range exceeds min(m, n).
    """
    X = canonicalize(X)
    if X.nnz == 0:
        raise DegenerateMatrix("cannot select a rank for an all-zero matrix")
    m, n = X.shape
    if config.k_max > min(m, n):
        raise InvalidRank(f"k_max {config.k_max} exceeds min{X.shape} = {min(m, n)}")
    base = config.nmf.seed
    p = config.n_perturbations
    ks = list(range(config.k_min, config.k_max + 1))

    members: dict[tuple[int, int], np.ndarray] = {}
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {
                (k, j): pool.submit(_ensemble_member, X, k, j, config, symmetric_perturbation)
                for k in ks
                for j in range(p)
            }
        members = {key: fut.result() for key, fut in futures.items()}
    else:
        for k in ks:
            for j in range(p):
                members[(k, j)] = _ensemble_member(X, k, j, config, symmetric_perturbation)

    per_k: list[RankRecord] = []
    centroids_by_k: dict[int, np.ndarray] = {}
    for k in ks:
        ensemble = [members[(k, j)] for j in range(p)]
        labels, centroids = cluster_columns(ensemble)
        stats = silhouette(np.hstack(ensemble), labels.ravel())
        if (np.linalg.norm(centroids, axis=0) == 0).any():
            err = 1.0  # dead consensus column: rank is unusable, worst-case fit
        else:
            solve_cfg = NmfConfig(
                max_iter=config.nmf.max_iter,
                tol=config.nmf.tol,
                epsilon=config.nmf.epsilon,
                seed=child_seed(base, k, p, 2),
            )
            H = solve_h(X, centroids, solve_cfg)
            err = relative_error(X, centroids, H)
        per_k.append(
            RankRecord(
                k=k,
                min_silhouette=stats.overall_min,
                mean_silhouette=stats.overall_mean,
                relative_error=err,
            )
        )
        centroids_by_k[k] = centroids

    stable = [r.k for r in per_k if r.min_silhouette >= config.silhouette_threshold]
    if stable:
        chosen = max(stable)
        fallback = False
    else:
        best = per_k[0]
        for rec in per_k[1:]:
            if rec.min_silhouette > best.min_silhouette:  # ties keep smaller k
                best = rec
        chosen = best.k
        fallback = True
    return SelectionReport(
        per_k=per_k,
        chosen_k=chosen,
        consensus_W=centroids_by_k[chosen],
        fallback=fallback,
    )
