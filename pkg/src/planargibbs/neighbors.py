"""Cell-list neighbor search for sup-norm interaction cutoffs.

Cells have side equal to the cutoff, so every pair within the cutoff lies in
the same or an adjacent cell and a 3x3 block scan finds all candidates.
"""

from __future__ import annotations

import math

import numpy as np


class CellList:
    """Mutable spatial hash over particle indices.

    Positions are owned by the caller; the cell list only stores indices and
    must be told about every insertion, removal, and move.
    """

    def __init__(self, cell_size: float):
        if not (cell_size > 0 and math.isfinite(cell_size)):
            raise ValueError("cell size must be positive")
        self.cell_size = cell_size
        self._cells: dict[tuple[int, int], list[int]] = {}

    def _key(self, x: float, y: float) -> tuple[int, int]:
        c = self.cell_size
        return (int(math.floor(x / c)), int(math.floor(y / c)))

    def add(self, idx: int, x: float, y: float) -> None:
        self._cells.setdefault(self._key(x, y), []).append(idx)

    def remove(self, idx: int, x: float, y: float) -> None:
        key = self._key(x, y)
        bucket = self._cells[key]
        bucket.remove(idx)
        if not bucket:
            del self._cells[key]

    def move(self, idx: int, x_old: float, y_old: float, x_new: float, y_new: float) -> None:
        old, new = self._key(x_old, y_old), self._key(x_new, y_new)
        if old != new:
            self.remove(idx, x_old, y_old)
            self._cells.setdefault(new, []).append(idx)

    def reindex(self, old_idx: int, new_idx: int, x: float, y: float) -> None:
        """Replace an index in place (swap-remove bookkeeping)."""
        bucket = self._cells[self._key(x, y)]
        bucket[bucket.index(old_idx)] = new_idx

    def neighbors(self, x: float, y: float) -> list[int]:
        """Indices in the 3x3 cell block around (x, y)."""
        ci, cj = self._key(x, y)
        out: list[int] = []
        cells = self._cells
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                bucket = cells.get((ci + di, cj + dj))
                if bucket:
                    out.extend(bucket)
        return out

    @classmethod
    def build(cls, positions: np.ndarray, cell_size: float) -> "CellList":
        cl = cls(cell_size)
        for i, (x, y) in enumerate(np.asarray(positions, dtype=float).reshape(-1, 2)):
            cl.add(i, float(x), float(y))
        return cl


def window_pairs(positions: np.ndarray, half_width: float, cutoff: float | None,
                 chunk: int = 512):
    """Yield (i, j, distance) arrays over pairs i < j with an endpoint in the window.

    Membership in [-t, t)^2 is half-open; pairs farther apart than the cutoff
    (sup norm) are dropped when a cutoff is given.
    """
    pos = np.asarray(positions, dtype=float).reshape(-1, 2)
    n = pos.shape[0]
    if n < 2:
        return
    t = half_width
    inside = (pos[:, 0] >= -t) & (pos[:, 0] < t) & (pos[:, 1] >= -t) & (pos[:, 1] < t)
    cols = np.arange(n)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        d = np.max(np.abs(pos[start:stop, None, :] - pos[None, :, :]), axis=2)
        mask = cols[None, :] > np.arange(start, stop)[:, None]
        mask &= inside[start:stop, None] | inside[None, :]
        if cutoff is not None:
            mask &= d <= cutoff
        ii, jj = np.nonzero(mask)
        if ii.size:
            yield ii + start, jj, d[ii, jj]
