"""Nearest-neighbour matching: one-way / two-way, absolute and ratio tests.

NN methods threshold the min-max normalized nearest distance (thresholds in
(0, 1]); NNR methods threshold the raw second-nearest/nearest ratio
(thresholds >= 1, larger ratio = more distinctive match).  Ties always
break toward the smallest index, so results are deterministic and
brute-force checkable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distance import DistanceMatrix
from .errors import TooFewColumns

METHODS = ("nn1", "nn2", "nnr1", "nnr2")


@dataclass(frozen=True)
class MatchParams:
    method: str
    threshold: float

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.method in ("nn1", "nn2") and not 0 < self.threshold <= 1:
            raise ValueError(f"nn threshold must be in (0, 1], got {self.threshold}")
        if self.method in ("nnr1", "nnr2") and not self.threshold >= 1:
            raise ValueError(f"nnr threshold must be >= 1, got {self.threshold}")


@dataclass(frozen=True)
class MatchPair:
    idx_a: int
    idx_b: int
    d1: float
    d2: float  # second-nearest in the same row (d1 when only one column)
    norm_d1: float

    def __post_init__(self):
        if self.d1 < 0 or self.d1 > self.d2:
            raise ValueError("require 0 <= d1 <= d2")
        if not 0.0 <= self.norm_d1 <= 1.0:
            raise ValueError("norm_d1 must be in [0, 1]")


def _ratio_accept(d1: float, d2: float, threshold: float) -> bool:
    if d1 == 0.0:
        return d2 > 0.0  # d1 = d2 = 0 is ambiguous; d1 = 0 < d2 is infinitely distinctive
    return d2 / d1 >= threshold


def _second_smallest(row: np.ndarray, skip: int) -> float:
    masked = row.copy()
    masked[skip] = np.inf
    return float(masked.min())


def match(dm: DistanceMatrix, params: MatchParams) -> list[MatchPair]:
    """Accepted correspondences, sorted by (idx_a, idx_b).

    Each row index appears at most once; for the two-way methods each column
    index appears at most once as well (mutual-nearest filtering).
    """
    d = dm.values
    n, m = d.shape
    if n == 0 or m == 0:
        return []
    ratio_method = params.method in ("nnr1", "nnr2")
    two_way = params.method in ("nn2", "nnr2")
    if ratio_method and m < 2:
        raise TooFewColumns("ratio matching needs at least 2 columns")

    dmin = float(d.min())
    dmax = float(d.max())
    span = dmax - dmin

    row_best = d.argmin(axis=1)  # ties -> smallest column
    col_best = d.argmin(axis=0)  # ties -> smallest row

    pairs: list[MatchPair] = []
    for i in range(n):
        j = int(row_best[i])
        d1 = float(d[i, j])
        d2 = _second_smallest(d[i], j) if m > 1 else d1
        norm_d1 = 0.0 if span == 0.0 else (d1 - dmin) / span

        if ratio_method:
            if not _ratio_accept(d1, d2, params.threshold):
                continue
        else:
            if not norm_d1 < params.threshold:
                continue

        if two_way and int(col_best[j]) != i:
            continue
        if params.method == "nnr2":
            c1 = float(d[col_best[j], j])
            c2 = _second_smallest(d[:, j], int(col_best[j])) if n > 1 else c1
            if n < 2 or not _ratio_accept(c1, c2, params.threshold):
                continue
        pairs.append(MatchPair(i, j, d1, d2, norm_d1))
    return pairs  # rows scanned in ascending order; one pair per row


def format_matches(pairs: list[MatchPair]) -> str:
    """Dump format for fixture diffs: 'idx_a idx_b d1 d2' per line."""
    lines = [f"{p.idx_a} {p.idx_b} {p.d1:.9g} {p.d2:.9g}" for p in pairs]
    return "\n".join(lines) + ("\n" if lines else "")
