"""Eigengap significance scoring and spectrum interval selection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from specband.spectral import Spectrum, grouping_tolerance

EPSILON = 1e-12  # guards divisions by a vanishing window std


class PartitionError(ValueError):
    """Invalid input to a partition operation."""


@dataclass(frozen=True)
class PartitionResult:
    """Gap scores and the selected interval boundaries over column indices."""

    scores: np.ndarray  # (n-1,), score of gap i = lam[i+1] - lam[i]
    boundaries: np.ndarray  # ascending ints, boundaries[0] = 0, boundaries[-1] = n
    window: int
    requested_intervals: int

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64)
        b = np.asarray(self.boundaries, dtype=np.int64)
        if b.size < 2 or b[0] != 0 or np.any(np.diff(b) <= 0):
            raise PartitionError("boundaries must start at 0 and strictly increase")
        object.__setattr__(self, "scores", s)
        object.__setattr__(self, "boundaries", b)

    @property
    def num_intervals(self) -> int:
        return self.boundaries.size - 1

    @property
    def num_boundaries(self) -> int:
        return self.boundaries.size

    def intervals(self) -> list[tuple[int, int]]:
        b = self.boundaries
        return [(int(b[i]), int(b[i + 1])) for i in range(b.size - 1)]

    def to_json(self) -> dict:
        return {
            "scores": self.scores.tolist(),
            "boundaries": self.boundaries.tolist(),
            "w": int(self.window),
            "k": int(self.requested_intervals),
        }


def discrete_derivative(lam: np.ndarray) -> np.ndarray:
    """Consecutive differences of an ascending eigenvalue vector."""
    lam = np.asarray(lam, dtype=np.float64)
    if lam.ndim != 1:
        raise PartitionError("eigenvalues must be a 1-d vector")
    d = np.diff(lam)
    if np.any(d < 0):
        raise PartitionError("eigenvalues must be sorted ascending")
    return d


def significance_scores(d: np.ndarray, lam: np.ndarray, w: int,
                        equal_tol: float = 0.0) -> np.ndarray:
    """Score each gap by its normalized deviation from both window means.

    For gap index i in [w, len(d)-1-w], compares d[i] against the means of
    the w gaps before and after, each normalized by that window's std plus
    a small constant. The score is forced to zero where the eigenvalue at
    the gap's left end equals its predecessor (within `equal_tol`), so
    runs of repeated eigenvalues carry no significance.
    """
    d = np.asarray(d, dtype=np.float64)
    lam = np.asarray(lam, dtype=np.float64)
    if lam.size != d.size + 1:
        raise PartitionError("len(lam) must equal len(d) + 1")
    if w < 1:
        raise PartitionError(f"window must be >= 1, got {w}")
    if d.size < 2 * w + 1:
        raise PartitionError(f"need at least {2 * w + 1} gaps for window {w}, got {d.size}")
    scores = np.zeros(d.size, dtype=np.float64)
    for i in range(w, d.size - w):
        prev = d[i - w : i]
        nxt = d[i + 1 : i + w + 1]
        mu_p, sd_p = prev.mean(), prev.std()
        mu_n, sd_n = nxt.mean(), nxt.std()
        scores[i] = abs(d[i] - mu_p) / (sd_p + EPSILON) + abs(d[i] - mu_n) / (sd_n + EPSILON)
        if abs(lam[i] - lam[i - 1]) <= equal_tol:
            scores[i] = 0.0
    return scores


def identify_significant_gaps(sp: Spectrum, w: int, k: int,
                              equal_tol: float | None = None) -> PartitionResult:
    """Select up to k-1 interior boundaries at the most significant gaps.

    Gaps are ranked by score (ties: larger raw gap, then smaller index);
    zero-score gaps and gaps within the equality tolerance are never
    selected, so fewer than k intervals can result. Selected gap index i
    becomes boundary i+1; 0 and n close the list.
    """
    if k < 1:
        raise PartitionError(f"requested interval count must be >= 1, got {k}")
    if equal_tol is None:
        equal_tol = grouping_tolerance(sp)
    lam = sp.eigenvalues
    n = lam.size
    d = discrete_derivative(lam)
    if k == 1 or n < 2:
        scores = np.zeros(max(n - 1, 0), dtype=np.float64)
        return PartitionResult(scores, np.array([0, n]), window=w, requested_intervals=k)
    scores = significance_scores(d, lam, w, equal_tol=equal_tol)
    # a boundary at i+1 splits lam[i] from lam[i+1]; never split equal runs
    candidates = np.flatnonzero((scores > 0.0) & (d > equal_tol))
    order = sorted(candidates, key=lambda i: (-scores[i], -d[i], i))
    chosen = order[: k - 1]
    boundaries = np.unique(np.concatenate([[0, n], np.asarray(chosen, dtype=np.int64) + 1]))
    return PartitionResult(scores, boundaries, window=w, requested_intervals=k)
