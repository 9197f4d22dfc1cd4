"""Per-component gradient memory with an incrementally maintained mean."""

from __future__ import annotations

import numpy as np


class GradientTable:
    """Rows y_i (all zero initially) and their running mean.

    ``replace`` costs O(b d). The mean is recomputed from scratch once the
    number of rows rewritten since the last sync reaches ``resync_factor * n``,
    which keeps round-off drift bounded at amortized O(d) per row update.
    """

    def __init__(self, n: int, d: int, resync_factor: int = 16):
        self.entries = np.zeros((n, d))
        self.running_mean = np.zeros(d)
        self.n = n
        self._since_sync = 0
        self._resync_at = resync_factor * n

    def mean_of(self, idx) -> np.ndarray:
        rows = self.entries[idx]
        return np.ascontiguousarray(rows.T).sum(axis=1) / rows.shape[0]

    def replace(self, idx, new_rows: np.ndarray) -> np.ndarray:
        """Overwrite rows ``idx``; return the change in the mean."""
        delta = new_rows - self.entries[idx]
        self.entries[idx] = new_rows
        shift = np.ascontiguousarray(delta.T).sum(axis=1) / self.n
        self.running_mean += shift
        self._since_sync += len(new_rows)
        if self._since_sync >= self._resync_at:
            old = self.running_mean.copy()
            self.resync()
            shift = shift + (self.running_mean - old)
        return shift

    def true_mean(self) -> np.ndarray:
        return np.ascontiguousarray(self.entries.T).sum(axis=1) / self.n

    def resync(self) -> None:
        self.running_mean = self.true_mean()
        self._since_sync = 0

    def drift(self) -> float:
        exact = self.true_mean()
        return float(np.linalg.norm(self.running_mean - exact) / (1.0 + np.linalg.norm(exact)))

    def copy(self) -> "GradientTable":
        other = GradientTable.__new__(GradientTable)
        other.entries = self.entries.copy()
        other.running_mean = self.running_mean.copy()
        other.n = self.n
        other._since_sync = self._since_sync
        other._resync_at = self._resync_at
        return other
