"""The five descriptor dissimilarity measures and dense distance matrices.

Cosine and correlation similarities are converted to distances as
1 - similarity (range [0, 2]).  Everything accumulates in float64 no matter
the storage precision, and the blocked matrix kernels are required to agree
with the scalar definitions to 1e-6 relative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    BadOrder,
    ConstantVector,
    DimMismatch,
    LengthMismatch,
    ZeroVector,
)

_NORM_EPS = 1e-12
_VAR_EPS = 1e-12

KINDS = ("cityblock", "euclidean", "cosine", "minkowski", "correlation")

# rows-per-block budget so a diff block stays around 2**25 float64 elements
_BLOCK_BUDGET = 1 << 25


@dataclass(frozen=True)
class Metric:
    kind: str
    r: float = 3.0  # minkowski order; ignored by the other kinds

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown metric {self.kind!r}")
        if self.kind == "minkowski" and not (np.isfinite(self.r) and self.r > 0):
            raise BadOrder(f"minkowski order must be finite and > 0, got {self.r}")

    @property
    def label(self) -> str:
        return self.kind


CITYBLOCK = Metric("cityblock")
EUCLIDEAN = Metric("euclidean")
COSINE = Metric("cosine")
CORRELATION = Metric("correlation")


def _pair(p, q) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    q = np.asarray(q, dtype=np.float64).reshape(-1)
    if p.size != q.size:
        raise LengthMismatch(f"vector lengths differ: {p.size} vs {q.size}")
    if p.size == 0:
        raise LengthMismatch("vectors must have length >= 1")
    return p, q


def cityblock(p, q) -> float:
    p, q = _pair(p, q)
    return float(np.abs(p - q).sum())


def euclidean(p, q) -> float:
    p, q = _pair(p, q)
    d = p - q
    return float(np.sqrt((d * d).sum()))


def minkowski(p, q, r: float) -> float:
    if not (np.isfinite(r) and r > 0):
        raise BadOrder(f"order must be finite and > 0, got {r}")
    p, q = _pair(p, q)
    return float((np.abs(p - q) ** r).sum() ** (1.0 / r))


def cosine_distance(p, q) -> float:
    p, q = _pair(p, q)
    np_, nq = np.linalg.norm(p), np.linalg.norm(q)
    if np_ <= _NORM_EPS or nq <= _NORM_EPS:
        raise ZeroVector("cosine distance undefined for (near-)zero vectors")
    return float(max(1.0 - (p @ q) / (np_ * nq), 0.0))


def correlation_distance(p, q) -> float:
    p, q = _pair(p, q)
    if p.size < 2:
        raise LengthMismatch("correlation needs length >= 2")
    pc = p - p.mean()
    qc = q - q.mean()
    if (pc @ pc) / p.size <= _VAR_EPS or (qc @ qc) / q.size <= _VAR_EPS:
        raise ConstantVector("correlation undefined for (near-)constant vectors")
    return float(max(1.0 - (pc @ qc) / (np.linalg.norm(pc) * np.linalg.norm(qc)), 0.0))


@dataclass(frozen=True)
class DistanceMatrix:
    values: np.ndarray  # (n, m) float64, finite, >= 0
    metric: Metric

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2:
            raise ValueError("distance matrix must be 2-D")
        if not np.all(np.isfinite(vals)):
            raise ValueError("distance matrix entries must be finite")
        if vals.size and vals.min() < 0:
            raise ValueError("distance matrix entries must be >= 0")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


def _as_vectors(x) -> np.ndarray:
    vectors = getattr(x, "vectors", x)
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2:
        raise ValueError("descriptor sets must be 2-D arrays")
    return vectors


def _reject_rows(bad: np.ndarray, which: str, error, reason: str):
    idx = np.nonzero(bad)[0]
    if idx.size:
        raise error(f"{reason} in set {which} at rows {idx.tolist()[:20]}")


def _block_rows(m: int, d: int) -> int:
    return max(1, _BLOCK_BUDGET // max(m * d, 1))


def distance_matrix(a, b, metric: Metric) -> DistanceMatrix:
    """All-pairs distances between two descriptor sets (rows of a x rows of b).

    Rows violating the metric's preconditions (zero vectors under cosine,
    constant vectors under correlation) are reported with their indices.
    """
    va, vb = _as_vectors(a), _as_vectors(b)
    if va.shape[1] != vb.shape[1]:
        raise DimMismatch(f"descriptor dims differ: {va.shape[1]} vs {vb.shape[1]}")
    n, m = va.shape[0], vb.shape[0]
    d = va.shape[1]

    if metric.kind == "cosine":
        na = np.linalg.norm(va, axis=1)
        nb = np.linalg.norm(vb, axis=1)
        _reject_rows(na <= _NORM_EPS, "A", ZeroVector, "zero vector")
        _reject_rows(nb <= _NORM_EPS, "B", ZeroVector, "zero vector")
        sim = (va / na[:, None]) @ (vb / nb[:, None]).T
        values = np.maximum(1.0 - sim, 0.0)
    elif metric.kind == "correlation":
        ca = va - va.mean(axis=1, keepdims=True)
        cb = vb - vb.mean(axis=1, keepdims=True)
        na = np.linalg.norm(ca, axis=1)
        nb = np.linalg.norm(cb, axis=1)
        _reject_rows(na * na / d <= _VAR_EPS, "A", ConstantVector, "constant vector")
        _reject_rows(nb * nb / d <= _VAR_EPS, "B", ConstantVector, "constant vector")
        sim = (ca / na[:, None]) @ (cb / nb[:, None]).T
        values = np.maximum(1.0 - sim, 0.0)
    else:
        values = np.empty((n, m), dtype=np.float64)
        step = _block_rows(m, d)
        for start in range(0, n, step):
            stop = min(start + step, n)
            diff = np.abs(va[start:stop, None, :] - vb[None, :, :])
            if metric.kind == "cityblock":
                values[start:stop] = diff.sum(axis=2)
            elif metric.kind == "euclidean":
                values[start:stop] = np.sqrt((diff * diff).sum(axis=2))
            else:  # minkowski
                values[start:stop] = (diff**metric.r).sum(axis=2) ** (1.0 / metric.r)
    return DistanceMatrix(values, metric)
