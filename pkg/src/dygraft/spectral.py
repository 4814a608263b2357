"""Spectral summaries of snapshots: leading left singular vectors of the
adjacency matrix, computed by power iteration with deflation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import Snapshot

_MAX_ITERS = 20_000
_CONV_TOL = 1e-14
# Singular values at or below this fraction of the largest count as zero.
_RANK_REL_TOL = 1e-10


@dataclass(frozen=True)
class SpectralComponents:
    """Top-k left singular vectors as columns of ``vectors``.

    When k exceeds the numerical rank the trailing columns are zero and
    ``rank_deficient`` is set. Each nonzero column has unit norm with its
    largest-magnitude entry positive.
    """

    vectors: np.ndarray        # [node_count, k]
    singular_values: np.ndarray
    rank_deficient: bool


def _adjacency(snapshot: Snapshot) -> np.ndarray:
    n = snapshot.node_count
    a = np.zeros((n, n), dtype=np.float64)
    for u, v in snapshot.edges:
        a[u, v] = 1.0
        a[v, u] = 1.0
    return a


def _sign_normalize(v: np.ndarray) -> np.ndarray:
    # Anchor on the first entry within a relative band of the max
    # magnitude: a bare argmax is unstable when two entries tie up to
    # rounding, which happens whenever the graph has an automorphism.
    mags = np.abs(v)
    idx = int(np.argmax(mags >= mags.max() * (1.0 - 1e-9)))
    return -v if v[idx] < 0 else v


def eee_components(snapshot: Snapshot, k: int) -> SpectralComponents:
    """Leading k left singular vectors of the snapshot's adjacency matrix.

    Power iteration runs on A A^T; previously found directions are deflated
    by re-orthogonalization at every step. Each component starts from a
    fixed-seed pseudo-random vector, so results are deterministic.
    """
    n = snapshot.node_count
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    a = _adjacency(snapshot)
    b = a @ a.T

    vectors = np.zeros((n, k), dtype=np.float64)
    sigmas = np.zeros(k, dtype=np.float64)
    found: list[np.ndarray] = []
    rank_deficient = False

    top_sigma = 0.0
    for j in range(k):
        # A fixed-seed random start is deterministic and, unlike the
        # all-ones vector, almost surely has a component along every
        # remaining eigendirection (ones can be exactly orthogonal to the
        # top eigenspace after deflation and silently stall at 0).
        rng = np.random.default_rng(1_000_003 + j)
        v = rng.standard_normal(n)
        for u in found:
            v = v - (u @ v) * u
        v /= np.linalg.norm(v)

        # Anything this far below the top eigenvalue of B is deflation
        # residue, not signal; renormalizing it would amplify noise.
        zero_tol = 1e-12 * max(top_sigma * top_sigma, 1.0)
        lam = 0.0
        for _ in range(_MAX_ITERS):
            w = b @ v
            for u in found:
                w = w - (u @ w) * u
            norm = np.linalg.norm(w)
            if norm < zero_tol:
                lam = 0.0
                break
            w /= norm
            if np.linalg.norm(w - v) < _CONV_TOL or np.linalg.norm(w + v) < _CONV_TOL:
                v = w
                lam = float(v @ (b @ v))
                break
            v = w
        else:
            lam = float(v @ (b @ v))

        sigma = np.sqrt(max(lam, 0.0))
        if j == 0:
            top_sigma = sigma
        if sigma <= _RANK_REL_TOL * max(top_sigma, 1.0):
            rank_deficient = True
            break
        v = _sign_normalize(v)
        vectors[:, j] = v
        sigmas[j] = sigma
        found.append(v)

    return SpectralComponents(vectors=vectors, singular_values=sigmas,
                              rank_deficient=rank_deficient)
