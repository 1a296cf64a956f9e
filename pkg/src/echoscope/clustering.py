"""Locally scaled spectral clustering with rotation-based model selection.

The affinity uses cosine distance with per-point scales (distance to the
K-th nearest neighbor), so dense and sparse regions get comparable edge
weights.  Model selection rotates the leading eigenvectors of the normalized
affinity toward a one-nonzero-per-row pattern with a product of plane
rotations; the k whose best rotation leaves the least mass outside the
per-row maxima wins, and every k whose cost sits within a hair of that
minimum counts as tied, with the largest tied k taken.  Everything here is
single-threaded and deterministic: the same affinity always yields the same
labels, bit for bit.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.cluster.vq import kmeans2
from scipy.linalg import eigh

from .errors import ClusteringError

log = logging.getLogger(__name__)

DEFAULT_NEIGHBOR_K = 7
SCALE_FLOOR = 1e-12
# Costs this close to the scan minimum are ties.  On nearly disconnected
# affinities the degenerate leading eigenspace puts several k at the same
# mathematical cost zero, separated only by roundoff; an exact comparison
# would then pick whichever k the noise favors instead of the largest.
TIE_TOL = 1e-8


def pairwise_cosine_distances(X: np.ndarray) -> np.ndarray:
    """Symmetric matrix of 1 - cosine similarity with a zero diagonal.

    Zero vectors are treated as orthogonal to everything (distance 1).
    Entries are clipped into [0, 2].
    """
    X = np.asarray(X, dtype=np.float64)
    norms = np.sqrt(np.sum(X * X, axis=1))
    safe = np.where(norms > 0.0, norms, 1.0)
    U = X / safe[:, None]
    sim = U @ U.T
    np.clip(sim, -1.0, 1.0, out=sim)
    D = 1.0 - sim
    D = (D + D.T) * 0.5
    np.fill_diagonal(D, 0.0)
    return np.maximum(D, 0.0)


def local_scales(D: np.ndarray, neighbor_k: int = DEFAULT_NEIGHBOR_K) -> np.ndarray:
    """Distance to each point's K-th nearest neighbor, floored at 1e-12.

    With fewer than K neighbors available the farthest one is used.
    """
    n = D.shape[0]
    kk = min(neighbor_k, n - 1)
    scales = np.full(n, SCALE_FLOOR)
    if kk >= 1:
        for i in range(n):
            row = np.delete(D[i], i)
            row.sort()
            scales[i] = row[kk - 1]
    return np.maximum(scales, SCALE_FLOOR)


def affinity(D: np.ndarray, scales: np.ndarray) -> np.ndarray:
    """Locally scaled Gaussian affinity W_ij = exp(-D_ij^2 / (s_i s_j)).

    Symmetric, entries in [0, 1], zero diagonal.
    """
    W = np.exp(-(D * D) / np.outer(scales, scales))
    np.fill_diagonal(W, 0.0)
    return W


def spectral_embed(W: np.ndarray, k_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Leading eigenpairs of the symmetrically normalized affinity.

    Returns (eigenvalues, X) with eigenvalues in descending order and X the
    matching eigenvector columns.  Zero-degree rows get all-zero coordinates.
    Each column's sign is fixed so its largest-magnitude entry is positive
    (lowest row index on ties), which makes the embedding reproducible.
    """
    W = np.asarray(W, dtype=np.float64)
    n = W.shape[0]
    deg = np.sum(W, axis=1)
    inv_sqrt = np.zeros(n)
    pos = deg > 0.0
    inv_sqrt[pos] = 1.0 / np.sqrt(deg[pos])
    L = W * inv_sqrt[:, None] * inv_sqrt[None, :]
    L = (L + L.T) * 0.5
    vals, vecs = eigh(L)
    k = min(k_max, n)
    order = np.arange(n - 1, n - 1 - k, -1)
    X = vecs[:, order].copy()
    X[~pos, :] = 0.0
    for c in range(X.shape[1]):
        col = X[:, c]
        lead = int(np.argmax(np.abs(col)))
        if col[lead] < 0.0:
            X[:, c] = -col
    return vals[order].copy(), X


def _pair_list(k: int) -> list[tuple[int, int]]:
    """Rotation planes ordered (0,1), (0,2), (1,2), (0,3), ...

    Grouping by the higher index means the planes of a (k-1)-column problem
    form a prefix, which is what lets the scan warm-start each k from the
    previous solution.
    """
    return [(i, j) for j in range(1, k) for i in range(j)]


def _build_rotation(angles: np.ndarray, pairs: list[tuple[int, int]], k: int) -> np.ndarray:
    R = np.eye(k)
    for a, (i, j) in enumerate(pairs):
        c = np.cos(angles[a])
        s = np.sin(angles[a])
        ci = R[:, i].copy()
        cj = R[:, j].copy()
        R[:, i] = c * ci + s * cj
        R[:, j] = -s * ci + c * cj
    return R


def _cost_terms(Z: np.ndarray):
    """Raw alignment cost sum_i sum_j Z_ij^2 / max_j Z_ij^2.

    All-zero rows (detached points) contribute the minimum value 1 and no
    gradient, so they never drive the rotation.
    """
    n = Z.shape[0]
    absZ = np.abs(Z)
    m = np.argmax(absZ, axis=1)
    Mz = Z[np.arange(n), m]
    msq = Mz * Mz
    rows = np.sum(Z * Z, axis=1)
    # msq gets squared again in the gradient, so the dead cutoff must keep
    # msq**2 well clear of underflow
    dead = msq <= 1e-150
    safe = np.where(dead, 1.0, msq)
    terms = np.where(dead, 1.0, rows / safe)
    return float(np.sum(terms)), m, msq, rows, dead


def _cost_only(X: np.ndarray, angles: np.ndarray, pairs: list[tuple[int, int]]) -> float:
    R = _build_rotation(angles, pairs, X.shape[1])
    J, *_ = _cost_terms(X @ R)
    return J


def _cost_and_grad(X: np.ndarray, angles: np.ndarray, pairs: list[tuple[int, int]]):
    """Cost, analytic gradient over all angles, and the rotation itself.

    The derivative of the rotation product with respect to angle a touches
    only two columns of the prefix product and two rows of the suffix product,
    which keeps the whole gradient at O(K k^2) for K angles.
    """
    n, k = X.shape
    K = len(pairs)
    cs = np.cos(angles)
    sn = np.sin(angles)

    prefix = [np.eye(k)]
    for a, (i, j) in enumerate(pairs):
        M = prefix[a].copy()
        ci = M[:, i].copy()
        cj = M[:, j].copy()
        M[:, i] = cs[a] * ci + sn[a] * cj
        M[:, j] = -sn[a] * ci + cs[a] * cj
        prefix.append(M)
    R = prefix[K]

    suffix = [None] * (K + 1)
    suffix[K] = np.eye(k)
    for a in range(K - 1, -1, -1):
        i, j = pairs[a]
        M = suffix[a + 1].copy()
        ri = M[i, :].copy()
        rj = M[j, :].copy()
        M[i, :] = cs[a] * ri - sn[a] * rj
        M[j, :] = sn[a] * ri + cs[a] * rj
        suffix[a] = M

    Z = X @ R
    J, m, msq, rows, dead = _cost_terms(Z)
    Gz = np.zeros_like(Z)
    ok = ~dead
    Gz[ok] = 2.0 * Z[ok] / msq[ok, None]
    live = np.flatnonzero(ok)
    Gz[live, m[live]] -= 2.0 * Z[live, m[live]] * rows[live] / (msq[live] ** 2)
    C = X.T @ Gz

    g = np.empty(K)
    for a, (i, j) in enumerate(pairs):
        u_i = -sn[a] * prefix[a][:, i] + cs[a] * prefix[a][:, j]
        u_j = -cs[a] * prefix[a][:, i] - sn[a] * prefix[a][:, j]
        g[a] = u_i @ (C @ suffix[a + 1][i, :]) + u_j @ (C @ suffix[a + 1][j, :])
    return J, g, R


@dataclass
class AlignmentResult:
    cost: float
    rotation: np.ndarray
    angles: np.ndarray
    converged: bool
    sweeps: int


def align_rotation(
    Xk: np.ndarray,
    init_angles: np.ndarray | None = None,
    *,
    max_sweeps: int = 200,
    gtol: float = 1e-9,
    ftol: float = 1e-12,
) -> AlignmentResult:
    """Minimize the alignment cost over products of plane rotations.

    Gradient descent with a Barzilai-Borwein step seed and Armijo
    backtracking (factor 1/2, slope 1e-4).  Stops when the gradient or the
    per-step improvement falls below tolerance; hitting the sweep cap returns
    the best point found with converged=False.  The reported cost is
    normalized to J/n - 1, which lives in [0, k-1] (tiny negatives from
    roundoff are clamped to zero).
    """
    Xk = np.asarray(Xk, dtype=np.float64)
    n, k = Xk.shape
    if k < 2:
        return AlignmentResult(0.0, np.eye(k), np.zeros(0), True, 0)
    pairs = _pair_list(k)
    K = len(pairs)
    theta = np.zeros(K)
    if init_angles is not None:
        take = min(len(init_angles), K)
        theta[:take] = init_angles[:take]

    J, g, R = _cost_and_grad(Xk, theta, pairs)
    best_J, best_theta, best_R = J, theta.copy(), R
    converged = False
    sweeps = 0
    prev_theta = None
    prev_g = None
    step = 1.0 / max(1.0, float(n))
    for sweeps in range(1, max_sweeps + 1):
        gsq = float(g @ g)
        if np.sqrt(gsq) <= gtol * max(1.0, J):
            converged = True
            break
        if prev_g is not None:
            dg = g - prev_g
            denom = float(dg @ dg)
            if denom > 0.0:
                step = abs(float((theta - prev_theta) @ dg)) / denom
                step = min(max(step, 1e-12), 1e3)
        t = step
        accepted = False
        for _ in range(45):
            cand = theta - t * g
            Jc = _cost_only(Xk, cand, pairs)
            if Jc <= J - 1e-4 * t * gsq:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            converged = True
            break
        prev_theta, prev_g = theta, g
        theta = cand
        J_prev = J
        J, g, R = _cost_and_grad(Xk, theta, pairs)
        if J < best_J:
            best_J, best_theta, best_R = J, theta.copy(), R
        if J_prev - J <= ftol * max(1.0, J_prev):
            converged = True
            break
    if J <= best_J:
        best_J, best_theta, best_R = J, theta.copy(), R
    if not converged:
        log.debug("rotation alignment hit the sweep cap (%d) at k=%d", max_sweeps, k)
    cost = max(best_J / n - 1.0, 0.0)
    return AlignmentResult(cost=cost, rotation=best_R, angles=best_theta, converged=converged, sweeps=sweeps)


def assign_clusters(Z: np.ndarray) -> np.ndarray:
    """Cluster of each row: the column with the largest magnitude (lowest
    index on exact ties)."""
    return np.argmax(np.abs(Z), axis=1)


def kmeans_assign(Xk: np.ndarray, k: int, seed: int) -> np.ndarray:
    """Alternative assignment: seeded k-means on row-normalized eigenvector
    coordinates."""
    norms = np.sqrt(np.sum(Xk * Xk, axis=1))
    safe = np.where(norms > 0.0, norms, 1.0)
    U = Xk / safe[:, None]
    _, labels = kmeans2(U, k, minit="++", seed=seed)
    return labels.astype(np.int64)


@dataclass
class ClusterModel:
    k_selected: int
    labels: np.ndarray
    costs: dict[int, float]
    eigenvalues: np.ndarray
    converged: dict[int, bool]
    assignment: str
    empty_clusters: list[int] = field(default_factory=list)


def select_k(
    W: np.ndarray,
    *,
    k_min: int = 2,
    k_max: int = 30,
    assignment: str = "rotation",
    seed: int = 0,
    max_sweeps: int = 200,
) -> ClusterModel:
    """Scan candidate cluster counts and keep the best-aligning one.

    Eigenvectors are computed once for the largest k; each k aligns its
    leading columns, warm-starting from the previous solution with zeros for
    the new planes.  The winner is the largest k whose cost lies within
    TIE_TOL of the scan minimum.  The scan is capped at n - 1 so there is
    always at least one more point than clusters.
    """
    if assignment not in ("rotation", "kmeans"):
        raise ClusteringError(f"unknown assignment mode: {assignment!r}")
    W = np.asarray(W, dtype=np.float64)
    n = W.shape[0]
    k_hi = min(k_max, n - 1)
    if k_min < 2:
        raise ClusteringError(f"k_min must be at least 2, got {k_min}")
    if k_hi < k_min:
        raise ClusteringError(f"need at least {k_min + 1} points to scan from k_min={k_min}, have {n}")
    eigenvalues, X = spectral_embed(W, k_hi)
    costs: dict[int, float] = {}
    converged: dict[int, bool] = {}
    rotations: dict[int, np.ndarray] = {}
    warm = None
    for k in range(k_min, k_hi + 1):
        res = align_rotation(X[:, :k], init_angles=warm, max_sweeps=max_sweeps)
        if warm is not None and res.cost > 1e-2:
            # the warm-started path can stall in a poor local minimum; a
            # cold start from zero angles is cheap insurance
            cold = align_rotation(X[:, :k], init_angles=None, max_sweeps=min(100, max_sweeps))
            if cold.cost < res.cost:
                res = cold
        warm = res.angles
        costs[k] = res.cost
        converged[k] = res.converged
        rotations[k] = res.rotation
        if not res.converged:
            log.warning("alignment at k=%d stopped at the sweep cap; using the best point found", k)
    min_cost = min(costs.values())
    best_k = max(k for k, c in costs.items() if c <= min_cost + TIE_TOL)
    if assignment == "rotation":
        labels = assign_clusters(X[:, :best_k] @ rotations[best_k])
    else:
        labels = kmeans_assign(X[:, :best_k], best_k, seed)
    empty = sorted(set(range(best_k)) - set(int(l) for l in labels))
    if empty:
        log.warning("selected k=%d but clusters %s received no members", best_k, empty)
    return ClusterModel(
        k_selected=best_k,
        labels=labels.astype(np.int64),
        costs=costs,
        eigenvalues=eigenvalues,
        converged=converged,
        assignment=assignment,
        empty_clusters=empty,
    )


def cluster_embeddings(
    X: np.ndarray,
    *,
    neighbor_k: int = DEFAULT_NEIGHBOR_K,
    k_min: int = 2,
    k_max: int = 30,
    assignment: str = "rotation",
    seed: int = 0,
    max_sweeps: int = 200,
) -> ClusterModel:
    """Full path from raw embeddings to an auto-sized clustering."""
    D = pairwise_cosine_distances(X)
    W = affinity(D, local_scales(D, neighbor_k))
    return select_k(
        W, k_min=k_min, k_max=k_max, assignment=assignment, seed=seed, max_sweeps=max_sweeps
    )
