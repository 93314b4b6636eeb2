"""Helpers for driving the primary featreg CLI and parsing its files."""

import subprocess
import sys

import numpy as np


def run_featreg(*args: str) -> subprocess.CompletedProcess:
    return subprocess.run(
        [sys.executable, "-m", "featreg.cli", *map(str, args)],
        capture_output=True,
        text=True,
    )


def parse_kpd(data: bytes):
    """Parse a KPD1 file into (keypoint rows, vector matrix)."""
    text = data.decode("ascii")
    assert text.startswith("KPD1\n"), "missing KPD1 magic"
    lines = text.splitlines()
    n, dim = map(int, lines[1].split())
    keypoints = []
    vectors = np.zeros((n, dim), dtype=np.float64)
    for i, line in enumerate(lines[2 : 2 + n]):
        parts = line.split()
        keypoints.append(
            (float(parts[0]), float(parts[1]), float(parts[2]), int(parts[3]), float(parts[4]))
        )
        vectors[i] = np.array(parts[5:], dtype=np.float64)
    return keypoints, vectors


def rel_error(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-30))
