"""Proper orthogonal decomposition of state snapshots.

The snapshot matrix collects the trailing window of accepted states as
columns; the projection basis keeps the left singular vectors whose
singular values exceed ``threshold * sigma_1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RnewtonError

# Retention threshold relative to the largest singular value: 50 * 2**-52.
DEFAULT_POD_THRESHOLD = 50.0 * 2.0 ** -52


@dataclass(frozen=True)
class SnapshotMatrix:
    """States x_{k_h} ... x_k as columns, ordered by increasing time index."""

    columns: np.ndarray       # (n_x, m)
    time_indices: np.ndarray  # (m,) increasing

    @property
    def width(self) -> int:
        return self.columns.shape[1]


@dataclass(frozen=True)
class ProjectionBasis:
    """Orthonormal columns V (= W) plus the retained singular values."""

    v: np.ndarray                 # (n_x, n_r), orthonormal columns
    singular_values: np.ndarray   # (n_r,), descending
    threshold: float

    @property
    def n_r(self) -> int:
        return self.v.shape[1]


def build_snapshot_matrix(history, k: int, window: int) -> SnapshotMatrix:
    """Window of the trailing ``window`` states ending at index ``k``.

    The window start is ``k_h = max(0, k - window + 1)``, so early steps use
    whatever history exists.
    """
    if len(history) == 0:
        raise ValueError("empty state history")
    if not (0 <= k < len(history)):
        raise ValueError(f"k={k} outside history of length {len(history)}")
    if window < 1:
        raise ValueError("window must be >= 1")
    k_h = max(0, k - window + 1)
    cols = np.column_stack([np.asarray(history[i], dtype=float) for i in range(k_h, k + 1)])
    return SnapshotMatrix(cols, np.arange(k_h, k + 1))


def compute_pod_basis(snapshots: SnapshotMatrix | np.ndarray,
                      threshold: float = DEFAULT_POD_THRESHOLD) -> ProjectionBasis:
    """Truncated SVD basis: left singular vectors with sigma > threshold * sigma_1.

    The snapshot matrix is tall and thin (m <= window << n_x), so a dense
    thin SVD is exact and cheap.  Column signs are fixed by forcing the
    largest-magnitude entry of each basis vector positive, which makes the
    basis deterministic across backends.
    """
    x = snapshots.columns if isinstance(snapshots, SnapshotMatrix) else np.asarray(snapshots, dtype=float)
    if x.ndim != 2 or x.shape[1] < 1:
        raise ValueError("snapshot matrix must be 2-D with at least one column")
    u, s, _ = np.linalg.svd(x, full_matrices=False)
    if s.size == 0 or s[0] <= 0.0:
        raise RnewtonError("all-zero snapshot matrix: no basis")
    keep = s > threshold * s[0]  # strict: values exactly at the cut are dropped
    v = u[:, keep]
    retained = s[keep]
    flip = v[np.argmax(np.abs(v), axis=0), np.arange(v.shape[1])] < 0
    v = v * np.where(flip, -1.0, 1.0)
    return ProjectionBasis(v, retained, threshold)
