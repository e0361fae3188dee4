"""Amortized-growth array buffers.

Policies append one row per round for thousands of rounds; reallocating the
exact size each time would turn O(m^2) updates into O(m t) copies.  These
buffers double capacity instead, so appends are amortized O(row).
"""

from __future__ import annotations

import numpy as np


class GrowableMatrix:
    """Row-growable (and occasionally column-growable) float matrix."""

    def __init__(self, cols: int, capacity: int = 16):
        self._buf = np.zeros((max(capacity, 1), max(cols, 0)))
        self.rows = 0

    @property
    def cols(self) -> int:
        return self._buf.shape[1]

    @property
    def view(self) -> np.ndarray:
        """Live (rows, cols) window; treat as read-only."""
        return self._buf[: self.rows]

    def append_row(self, row: np.ndarray) -> None:
        row = np.asarray(row, dtype=float).reshape(-1)
        if row.shape[0] != self.cols:
            raise ValueError("row width mismatch")
        if self.rows == self._buf.shape[0]:
            bigger = np.zeros((2 * self._buf.shape[0], self.cols))
            bigger[: self.rows] = self._buf[: self.rows]
            self._buf = bigger
        self._buf[self.rows] = row
        self.rows += 1

    def append_col(self, col: np.ndarray) -> None:
        col = np.asarray(col, dtype=float).reshape(-1)
        if col.shape[0] != self.rows:
            raise ValueError("column length mismatch")
        bigger = np.zeros((self._buf.shape[0], self.cols + 1))
        bigger[:, : self.cols] = self._buf
        self._buf = bigger
        self._buf[: self.rows, -1] = col


class GrowableVector:
    def __init__(self, capacity: int = 16):
        self._buf = np.zeros(max(capacity, 1))
        self.size = 0

    @property
    def view(self) -> np.ndarray:
        return self._buf[: self.size]

    def append(self, value: float) -> None:
        if self.size == self._buf.shape[0]:
            bigger = np.zeros(2 * self._buf.shape[0])
            bigger[: self.size] = self._buf[: self.size]
            self._buf = bigger
        self._buf[self.size] = float(value)
        self.size += 1
