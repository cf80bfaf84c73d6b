"""Partitioning entities into clusters and averaging them into proxies.

The partitioner is a medoid-based Lloyd alternation: assign every point to
its nearest medoid, then move each medoid to the member minimising the
cluster's summed distance, until the medoid set is stable. Three distance
kinds are supported: plain Euclidean, Euclidean over per-dimension bin
centers (with exact duplicates collapsed into weighted points), and Gower
dissimilarity for mixed numeric/categorical rows.

Determinism contract: identical inputs and seed give identical partitions.
Ties in assignment go to the lowest cluster index, ties in the medoid update
to the lowest member index, and the k == n and k == 1 paths never draw from
the RNG.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

EUCLIDEAN = "euclidean"
BINNED = "binned_euclidean"
GOWER = "gower"
_KINDS = (EUCLIDEAN, BINNED, GOWER)

# cap on g * s * s elements in one batched medoid-update tensor
_BATCH_LIMIT = 30_000_000


@dataclass(frozen=True, eq=False)
class DistanceSpec:
    """Distance kind plus the feature-space statistics it needs.

    Gower needs per-column numeric ranges and a categorical mask; the binned
    kind needs per-column bin edges. Batch-dependent statistics may be left
    unset, in which case :func:`k_medoids` derives them from the batch being
    clustered; the pairwise :func:`distance` requires them up front.
    """

    kind: str = EUCLIDEAN
    n_bins: int = 20
    categorical_mask: np.ndarray | None = None
    numeric_ranges: np.ndarray | None = None
    bin_lo: np.ndarray | None = None
    bin_hi: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown distance kind {self.kind!r}")
        if self.kind == BINNED and self.n_bins < 1:
            raise ValueError("n_bins must be >= 1")

    def for_batch(self, points: np.ndarray) -> "DistanceSpec":
        """Fill missing batch statistics from ``points``."""
        points = np.asarray(points, dtype=float)
        if self.kind == BINNED and (self.bin_lo is None or self.bin_hi is None):
            return replace(self, bin_lo=points.min(axis=0), bin_hi=points.max(axis=0))
        if self.kind == GOWER and self.numeric_ranges is None:
            mask = self._mask(points.shape[1])
            num = ~mask
            ranges = np.zeros(points.shape[1])
            if num.any():
                ranges[num] = points[:, num].max(axis=0) - points[:, num].min(axis=0)
            return replace(self, numeric_ranges=ranges)
        return self

    def _mask(self, width: int) -> np.ndarray:
        if self.kind != GOWER:
            raise ValueError("categorical mask only applies to gower distances")
        if self.categorical_mask is None:
            return np.zeros(width, dtype=bool)
        mask = np.asarray(self.categorical_mask, dtype=bool)
        if mask.shape != (width,):
            raise ValueError(f"categorical mask has shape {mask.shape}, need ({width},)")
        return mask


def euclidean_spec() -> DistanceSpec:
    return DistanceSpec(EUCLIDEAN)


def binned_spec(n_bins: int = 20) -> DistanceSpec:
    return DistanceSpec(BINNED, n_bins=n_bins)


def gower_spec(categorical_mask: np.ndarray | Sequence[bool],
               numeric_ranges: np.ndarray | Sequence[float] | None = None) -> DistanceSpec:
    return DistanceSpec(
        GOWER,
        categorical_mask=np.asarray(categorical_mask, dtype=bool),
        numeric_ranges=None if numeric_ranges is None else np.asarray(numeric_ranges, float),
    )


def bin_centers(points: np.ndarray, lo: np.ndarray, hi: np.ndarray, n_bins: int) -> np.ndarray:
    """Snap each value to the center of its equal-width bin over [lo, hi].

    Values at the upper edge fall into the last bin; zero-width dimensions
    collapse to their single value.
    """
    points = np.asarray(points, dtype=float)
    width = (hi - lo) / n_bins
    safe = np.where(width > 0, width, 1.0)
    idx = np.clip(np.floor((points - lo) / safe), 0, n_bins - 1)
    return np.where(width > 0, lo + (idx + 0.5) * safe, lo)


# -- distance handlers -----------------------------------------------------

class _EuclideanHandler:
    """Cross distances via the Gram expansion ||x||^2 + ||y||^2 - 2 x.y.

    Assignment uses squared distances (argmin-equivalent); true distances
    take a sqrt after clamping the expansion at zero.
    """

    def __init__(self, points: np.ndarray) -> None:
        self.points = np.ascontiguousarray(points, dtype=float)
        self.norms = np.einsum("ij,ij->i", self.points, self.points)

    def cross_sq(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        a, b = self.points[rows], self.points[cols]
        sq = self.norms[rows][:, None] + self.norms[cols][None, :] - 2.0 * (a @ b.T)
        np.maximum(sq, 0.0, out=sq)
        return sq

    def assign_values(self, medoids: np.ndarray) -> np.ndarray:
        sq = self.points @ self.points[medoids].T
        sq *= -2.0
        sq += self.norms[:, None]
        sq += self.norms[medoids][None, :]
        np.maximum(sq, 0.0, out=sq)
        return sq

    @staticmethod
    def finalize(values: np.ndarray) -> np.ndarray:
        return np.sqrt(values)

    def cross(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        return np.sqrt(self.cross_sq(rows, cols))

    def medoid_update(self, assignment: np.ndarray, k: int, weights: np.ndarray) -> np.ndarray:
        order = np.argsort(assignment, kind="stable")
        sizes = np.bincount(assignment, minlength=k)
        bounds = np.concatenate([[0], np.cumsum(sizes)])
        new = np.empty(k, dtype=np.int64)
        for s in np.unique(sizes):
            clusters = np.nonzero(sizes == s)[0]
            if s == 0:
                raise ValueError("empty cluster in medoid update")
            if len(clusters) * s * s <= _BATCH_LIMIT:
                members = np.stack([order[bounds[c]:bounds[c + 1]] for c in clusters])
                p = self.points[members]
                n2 = self.norms[members]
                sq = n2[:, :, None] + n2[:, None, :] - 2.0 * (p @ p.transpose(0, 2, 1))
                np.maximum(sq, 0.0, out=sq)
                sums = np.einsum("gij,gj->gi", np.sqrt(sq), weights[members])
                new[clusters] = members[np.arange(len(clusters)), np.argmin(sums, axis=1)]
            else:
                for c in clusters:
                    members = order[bounds[c]:bounds[c + 1]]
                    new[c] = self._medoid_chunked(members, weights)
        return new

    def _medoid_chunked(self, members: np.ndarray, weights: np.ndarray,
                        chunk: int = 1024) -> np.int64:
        w = weights[members]
        sums = np.empty(len(members))
        for start in range(0, len(members), chunk):
            block = members[start:start + chunk]
            sums[start:start + chunk] = self.cross(block, members) @ w
        return members[int(np.argmin(sums))]


class _GowerHandler:
    """Mean per-dimension dissimilarity over included dimensions.

    Numeric dimensions contribute |x - y| / range and are dropped when the
    range is zero; categorical and boolean dimensions contribute a 0/1
    mismatch. Values land in [0, 1].
    """

    def __init__(self, points: np.ndarray, mask: np.ndarray, ranges: np.ndarray) -> None:
        self.points = np.asarray(points, dtype=float)
        self.cat_cols = np.nonzero(mask)[0]
        num = np.nonzero(~mask)[0]
        keep = ranges[num] > 0
        self.num_cols = num[keep]
        self.num_ranges = ranges[num][keep]
        self.denom = max(len(self.cat_cols) + len(self.num_cols), 1)

    def cross(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        a, b = self.points[rows], self.points[cols]
        out = np.zeros((len(rows), len(cols)))
        for col, rng in zip(self.num_cols, self.num_ranges):
            out += np.abs(a[:, col, None] - b[None, :, col]) / rng
        for col in self.cat_cols:
            out += a[:, col, None] != b[None, :, col]
        out /= self.denom
        return out

    def assign_values(self, medoids: np.ndarray) -> np.ndarray:
        return self.cross(np.arange(len(self.points)), medoids)

    @staticmethod
    def finalize(values: np.ndarray) -> np.ndarray:
        return values

    def medoid_update(self, assignment: np.ndarray, k: int, weights: np.ndarray) -> np.ndarray:
        order = np.argsort(assignment, kind="stable")
        sizes = np.bincount(assignment, minlength=k)
        bounds = np.concatenate([[0], np.cumsum(sizes)])
        new = np.empty(k, dtype=np.int64)
        for c in range(k):
            members = order[bounds[c]:bounds[c + 1]]
            if members.size == 0:
                raise ValueError("empty cluster in medoid update")
            sums = self.cross(members, members) @ weights[members]
            new[c] = members[int(np.argmin(sums))]
        return new


def _handler(points: np.ndarray, spec: DistanceSpec):
    if spec.kind == GOWER:
        mask = spec._mask(points.shape[1])
        ranges = spec.numeric_ranges
        if ranges is None:
            raise ValueError("gower handler needs numeric ranges")
        return _GowerHandler(points, mask, np.asarray(ranges, dtype=float))
    return _EuclideanHandler(points)


def distance(x: np.ndarray, y: np.ndarray, spec: DistanceSpec | None = None) -> float:
    """Pairwise distance under ``spec`` (Euclidean by default).

    Gower and binned kinds need their batch statistics present on the spec;
    build one with :meth:`DistanceSpec.for_batch` or pass explicit ranges.
    """
    spec = spec or euclidean_spec()
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("distance expects two equal-length vectors")
    if spec.kind == BINNED:
        if spec.bin_lo is None or spec.bin_hi is None:
            raise ValueError("binned distance needs bin edges; use for_batch")
        x = bin_centers(x, spec.bin_lo, spec.bin_hi, spec.n_bins)
        y = bin_centers(y, spec.bin_lo, spec.bin_hi, spec.n_bins)
        return float(np.linalg.norm(x - y))
    if spec.kind == GOWER:
        if spec.numeric_ranges is None:
            raise ValueError("gower distance needs numeric ranges; use for_batch")
        handler = _handler(np.stack([x, y]), spec)
        return float(handler.cross(np.array([0]), np.array([1]))[0, 0])
    return float(np.linalg.norm(x - y))


def cross_distances(x: np.ndarray, y: np.ndarray, spec: DistanceSpec | None = None) -> np.ndarray:
    """True distance matrix between two row sets under ``spec``.

    Missing batch statistics are derived from the stacked rows of both sets.
    """
    spec = spec or euclidean_spec()
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    stacked = np.vstack([x, y])
    spec = spec.for_batch(stacked)
    if spec.kind == BINNED:
        stacked = bin_centers(stacked, spec.bin_lo, spec.bin_hi, spec.n_bins)
    handler = _handler(stacked, spec)
    rows = np.arange(len(x))
    cols = np.arange(len(x), len(stacked))
    values = handler.cross(rows, cols)
    return values


# -- partitions ------------------------------------------------------------

@dataclass
class Partition:
    """Cluster assignment over n points, with medoid indices when available."""

    n_points: int
    k: int
    assignment: np.ndarray
    medoids: np.ndarray | None = None
    cost_history: list[float] | None = None

    def validate(self) -> None:
        """Raise ValueError unless this is a well-formed partition."""
        if self.assignment.shape != (self.n_points,):
            raise ValueError("assignment shape mismatch")
        if self.n_points:
            if self.assignment.min() < 0 or self.assignment.max() >= self.k:
                raise ValueError("cluster index out of range")
            sizes = np.bincount(self.assignment, minlength=self.k)
            if (sizes == 0).any():
                raise ValueError("empty cluster")
        if self.medoids is not None:
            if len(self.medoids) != self.k or len(np.unique(self.medoids)) != self.k:
                raise ValueError("medoids must be k distinct indices")
            if (self.medoids < 0).any() or (self.medoids >= self.n_points).any():
                raise ValueError("medoid index out of range")
            if not np.array_equal(self.assignment[self.medoids], np.arange(self.k)):
                raise ValueError("medoid not a member of its own cluster")

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.k)

    def cluster_members(self, cluster: int) -> np.ndarray:
        return np.nonzero(self.assignment == cluster)[0]


def cluster_count(n_entities: int, rho: int) -> int:
    """Number of clusters for a batch: ceil(n / rho)."""
    if rho < 1:
        raise ValueError("rho must be >= 1")
    if n_entities < 1:
        raise ValueError("n_entities must be >= 1")
    return -(-int(n_entities) // int(rho))


def random_partition(n_points: int, k: int,
                     seed: int | np.random.SeedSequence | np.random.Generator = 0) -> Partition:
    """Uniform assignment with one anchor point per cluster, so no cluster
    is empty by construction. No medoids."""
    if not 1 <= k <= n_points:
        raise ValueError(f"need 1 <= k <= n_points, got k={k}, n={n_points}")
    rng = np.random.default_rng(seed)
    assignment = rng.integers(0, k, n_points)
    anchors = rng.choice(n_points, size=k, replace=False)
    assignment[anchors] = np.arange(k)
    return Partition(n_points=n_points, k=k, assignment=assignment.astype(np.int64))


def _singleton_partition(n: int, init: np.ndarray | None) -> Partition:
    if init is None:
        order = np.arange(n, dtype=np.int64)
    else:
        order = np.asarray(init, dtype=np.int64)
    assignment = np.empty(n, dtype=np.int64)
    assignment[order] = np.arange(n)
    return Partition(n_points=n, k=n, assignment=assignment,
                     medoids=order.copy(), cost_history=[0.0])


def k_medoids(points: np.ndarray, k: int, spec: DistanceSpec | None = None, *,
              seed: int | np.random.SeedSequence | np.random.Generator = 0,
              max_iter: int = 100,
              init_medoids: Sequence[int] | np.ndarray | None = None,
              weights: np.ndarray | None = None) -> Partition:
    """Partition ``points`` into k clusters around medoids.

    Initial medoids are k distinct uniform draws unless ``init_medoids``
    pins them. The alternation stops when the medoid set is stable or after
    ``max_iter`` rounds; the recorded cost history (weighted sum of true
    member-to-medoid distances) is non-increasing.

    For the binned kind, points sharing a bin-center representative are
    collapsed into one weighted point first; distances and costs are then
    measured between representatives. If fewer distinct representatives than
    k exist, the uncollapsed representative-valued points are clustered
    instead. The k == n and k == 1 paths are deterministic and draw nothing
    from the RNG.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2:
        raise ValueError("points must be a 2d array")
    n = len(points)
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    if weights is None:
        weights = np.ones(n)
    else:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (n,) or (weights < 0).any():
            raise ValueError("weights must be n non-negative values")
    if init_medoids is not None:
        init_medoids = np.asarray(init_medoids, dtype=np.int64)
        if (init_medoids.shape != (k,) or len(np.unique(init_medoids)) != k
                or init_medoids.min() < 0 or init_medoids.max() >= n):
            raise ValueError("init_medoids must be k distinct indices into points")

    spec = (spec or euclidean_spec()).for_batch(points)

    # binned kind: collapse duplicate representatives into weighted points
    inverse = None
    if spec.kind == BINNED:
        centers = bin_centers(points, spec.bin_lo, spec.bin_hi, spec.n_bins)
        uniq, inv = np.unique(centers, axis=0, return_inverse=True)
        if len(uniq) >= k:
            work = uniq
            inverse = inv
            work_weights = np.bincount(inv, weights=weights)
            if init_medoids is not None:
                work_init = inv[init_medoids]
                if len(np.unique(work_init)) != k:
                    raise ValueError("init_medoids collapse to duplicate representatives")
            else:
                work_init = None
        else:
            work, work_weights, work_init = centers, weights, init_medoids
    else:
        work, work_weights, work_init = points, weights, init_medoids

    part = _k_medoids_work(work, k, spec, seed, max_iter, work_init, work_weights)

    if inverse is None:
        return part
    # map the representative-space partition back to original point indices
    firsts = np.full(len(work), n, dtype=np.int64)
    np.minimum.at(firsts, inverse, np.arange(n, dtype=np.int64))
    return Partition(
        n_points=n,
        k=k,
        assignment=part.assignment[inverse],
        medoids=firsts[part.medoids],
        cost_history=part.cost_history,
    )


def _k_medoids_work(points: np.ndarray, k: int, spec: DistanceSpec, seed,
                    max_iter: int, init: np.ndarray | None,
                    weights: np.ndarray) -> Partition:
    n = len(points)
    if k == n:
        return _singleton_partition(n, init)
    handler = _handler(points, spec)

    if k == 1:
        medoids = handler.medoid_update(np.zeros(n, dtype=np.int64), 1, weights)
        mind = handler.finalize(handler.assign_values(medoids)[:, 0])
        mind[medoids[0]] = 0.0
        return Partition(n, 1, np.zeros(n, dtype=np.int64), medoids,
                         [float(mind @ weights)])

    if init is None:
        rng = np.random.default_rng(seed)
        medoids = rng.choice(n, size=k, replace=False).astype(np.int64)
    else:
        medoids = init.copy()

    history: list[float] = []
    assignment = np.zeros(n, dtype=np.int64)
    for _ in range(max_iter):
        assignment, cost = _assign(handler, medoids, weights, k)
        history.append(cost)
        new = handler.medoid_update(assignment, k, weights)
        if np.array_equal(new, medoids):
            break
        medoids = new
    else:
        assignment, cost = _assign(handler, medoids, weights, k)
        history.append(cost)
    return Partition(n, k, assignment, medoids, history)


def _assign(handler, medoids: np.ndarray, weights: np.ndarray, k: int):
    values = handler.assign_values(medoids)
    assignment = np.argmin(values, axis=1).astype(np.int64)
    # a medoid always belongs to its own cluster, even among exact duplicates
    assignment[medoids] = np.arange(k)
    mind = handler.finalize(values[np.arange(len(assignment)), assignment])
    mind[medoids] = 0.0
    return assignment, float(mind @ weights)


# -- proxies ---------------------------------------------------------------

@dataclass(frozen=True)
class ProxyEntity:
    """One cluster averaged into a standalone training/prediction row."""

    cluster_index: int
    member_count: int
    features: np.ndarray
    outcome: float | None = None


def proxy_matrices(partition: Partition, features: np.ndarray,
                   outcomes: np.ndarray | None = None):
    """Average features (and outcomes) per cluster.

    Returns (cluster_ids, proxy_features, proxy_outcomes, counts) with rows
    ordered by ascending cluster index; clusters without members are skipped.
    proxy_outcomes is None when no outcomes are given.
    """
    features = np.asarray(features, dtype=float)
    if features.shape[0] != partition.n_points:
        raise ValueError("features row count does not match the partition")
    sizes = partition.sizes()
    cluster_ids = np.nonzero(sizes)[0]
    counts = sizes[cluster_ids].astype(float)

    sums = np.zeros((partition.k, features.shape[1]))
    np.add.at(sums, partition.assignment, features)
    proxy_features = sums[cluster_ids] / counts[:, None]

    proxy_outcomes = None
    if outcomes is not None:
        outcomes = np.asarray(outcomes, dtype=float)
        osums = np.zeros(partition.k)
        np.add.at(osums, partition.assignment, outcomes)
        proxy_outcomes = osums[cluster_ids] / counts
    return cluster_ids, proxy_features, proxy_outcomes, counts


def make_proxies(partition: Partition, features: np.ndarray,
                 outcomes: np.ndarray | None = None) -> list[ProxyEntity]:
    """Proxy entities ordered by cluster index; see :func:`proxy_matrices`."""
    cluster_ids, px, py, counts = proxy_matrices(partition, features, outcomes)
    return [
        ProxyEntity(
            cluster_index=int(c),
            member_count=int(counts[i]),
            features=px[i],
            outcome=None if py is None else float(py[i]),
        )
        for i, c in enumerate(cluster_ids)
    ]


def mean_medoid_gap(n: int, d: int, samples: int = 1000, seed: int = 0) -> float:
    """Monte Carlo mean distance between sample mean and medoid.

    Each sample draws n uniform points in the unit d-cube, finds the medoid
    (minimum summed Euclidean distance, ties to the lowest index) and
    measures its distance to the sample mean.
    """
    if n < 1 or d < 1 or samples < 1:
        raise ValueError("n, d and samples must be positive")
    rng = np.random.default_rng(seed)
    chunk = max(1, int(2e7 / (n * n)))
    total = 0.0
    done = 0
    while done < samples:
        b = min(chunk, samples - done)
        x = rng.random((b, n, d))
        norms = np.einsum("bnd,bnd->bn", x, x)
        sq = norms[:, :, None] + norms[:, None, :] - 2.0 * (x @ x.transpose(0, 2, 1))
        np.maximum(sq, 0.0, out=sq)
        sums = np.sqrt(sq).sum(axis=2)
        med = np.argmin(sums, axis=1)
        centers = x.mean(axis=1)
        gaps = np.linalg.norm(centers - x[np.arange(b), med], axis=1)
        total += float(gaps.sum())
        done += b
    return total / samples
