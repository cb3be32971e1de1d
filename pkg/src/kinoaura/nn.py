"""Dynamic nearest-neighbour index over weighted, partly periodic coordinates.

Small sets are scanned linearly by the compiled kernel. Once the live count
reaches ``kd_threshold`` a periodic ``cKDTree`` covers the bulk of the rows
and only the recently appended tail is scanned. Deleted rows are tombstoned
and compacted lazily. All results are recomputed with the exact metric and
ties go to the lowest id, so both paths return the same answer.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.spatial import cKDTree

from kinoaura import kernels

TWO_PI = 2.0 * math.pi


class NearestIndex:
    def __init__(self, weights, angular, kd_threshold: int = 2000):
        self.weights = np.ascontiguousarray(weights, dtype=float)
        self.angular = np.ascontiguousarray(angular, dtype=np.uint8)
        self.dims = self.weights.size
        self.kd_threshold = int(kd_threshold)
        self._pts = np.empty((64, self.dims))
        self._ids = np.empty(64, dtype=np.int64)
        self._vals = np.empty(64)
        self._alive = np.zeros(64, dtype=np.uint8)
        self._n = 0
        self._count = 0
        self._row: dict[int, int] = {}
        self._kd: cKDTree | None = None
        self._kd_n = 0
        self._ang_mask = self.angular.astype(bool)
        self._has_ang = bool(self._ang_mask.any())
        self._box = np.where(self._ang_mask, TWO_PI * self.weights, 0.0)

    def __len__(self) -> int:
        return self._count

    def __contains__(self, key) -> bool:
        return key in self._row

    def ids(self) -> list[int]:
        return sorted(self._row)

    def point(self, key) -> np.ndarray:
        return self._pts[self._row[key]].copy()

    def add(self, key: int, point, value: float = 0.0) -> None:
        if key in self._row:
            raise KeyError(f"id {key} already indexed")
        if self._n == self._pts.shape[0]:
            cap = 2 * self._pts.shape[0]
            self._pts = np.resize(self._pts, (cap, self.dims))
            self._ids = np.resize(self._ids, cap)
            self._vals = np.resize(self._vals, cap)
            alive = np.zeros(cap, dtype=np.uint8)
            alive[: self._n] = self._alive[: self._n]
            self._alive = alive
        r = self._n
        self._pts[r] = point
        self._ids[r] = key
        self._vals[r] = value
        self._alive[r] = 1
        self._row[key] = r
        self._n += 1
        self._count += 1

    def remove(self, key: int) -> None:
        r = self._row.pop(key)
        self._alive[r] = 0
        self._count -= 1
        if self._n > 256 and self._count < self._n // 2:
            self._compact()

    def clear(self) -> None:
        self.__init__(self.weights, self.angular, self.kd_threshold)

    def _compact(self) -> None:
        live = np.flatnonzero(self._alive[: self._n])
        k = live.size
        self._pts[:k] = self._pts[live]
        self._ids[:k] = self._ids[live]
        self._vals[:k] = self._vals[live]
        self._alive[:k] = 1
        self._alive[k:] = 0
        self._n = k
        self._row = {int(i): r for r, i in enumerate(self._ids[:k])}
        self._kd = None
        self._kd_n = 0

    def _scaled(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        s = pts * self.weights
        if self._has_ang:
            m = self._ang_mask
            wrapped = np.mod((kernels.wrap_angles(pts[..., m]) + math.pi) * self.weights[m], self._box[m])
            s[..., m] = np.where(wrapped >= self._box[m], 0.0, wrapped)
        return s

    def _refresh_kd(self) -> None:
        if self._count < self.kd_threshold:
            self._kd = None
            self._kd_n = 0
            return
        tail = self._n - self._kd_n
        if self._kd is None or tail > max(256, self._kd_n // 4):
            self._kd = cKDTree(self._scaled(self._pts[: self._n]), boxsize=self._box)
            self._kd_n = self._n

    # -- queries -----------------------------------------------------------
    def _tail_nearest(self, q):
        lo = self._kd_n
        row, d = kernels.nearest(self._pts[lo:self._n], self._n - lo, self._ids[lo:self._n],
                                 self._alive[lo:self._n], q, self.weights, self.angular)
        return (row + lo if row >= 0 else -1), d

    def _exact(self, rows, q):
        rows = np.asarray(rows, dtype=np.int64)
        if rows.size == 0:
            return rows, np.empty(0)
        d = kernels.distances(self._pts[rows], q, self.weights, self.angular)
        return rows, d

    def nearest(self, q) -> tuple[int | None, float]:
        """Closest live id and its distance; ``(None, inf)`` when empty."""
        q = np.ascontiguousarray(q, dtype=float)
        if self._count == 0:
            return None, math.inf
        self._refresh_kd()
        if self._kd is None:
            row, d = kernels.nearest(self._pts, self._n, self._ids, self._alive, q, self.weights, self.angular)
            return int(self._ids[row]), float(d)
        best_row, best_d = self._tail_nearest(q)
        sq = self._scaled(q)
        k = min(8, self._kd_n)
        while True:
            dd, rows = self._kd.query(sq, k=k)
            dd = np.atleast_1d(dd)
            rows = np.atleast_1d(rows)
            live = self._alive[rows].astype(bool)
            if live.any() or k >= self._kd_n:
                break
            k = min(4 * k, self._kd_n)
        if live.any():
            thr = dd[live][0] * (1.0 + 1e-9) + 1e-12
            if dd[-1] <= thr and k < self._kd_n:
                # ties may extend past the k returned rows
                cand = np.asarray(self._kd.query_ball_point(sq, thr), dtype=np.int64)
            else:
                cand = rows[live & (dd <= thr)]
            cand = cand[self._alive[cand].astype(bool)]
            cand, dc = self._exact(cand, q)
            m = dc.min()
            if m <= best_d:
                tied = cand[dc == m]
                row = int(tied[np.argmin(self._ids[tied])])
                if m < best_d or best_row < 0 or self._ids[row] < self._ids[best_row]:
                    best_row, best_d = row, float(m)
        return int(self._ids[best_row]), float(best_d)

    def _within_rows(self, q, radius) -> np.ndarray:
        q = np.ascontiguousarray(q, dtype=float)
        self._refresh_kd()
        if self._kd is None:
            return kernels.within(self._pts, self._n, self._alive, q, radius, self.weights, self.angular)
        lo = self._kd_n
        tail = kernels.within(self._pts[lo:self._n], self._n - lo, self._alive[lo:self._n], q, radius,
                              self.weights, self.angular) + lo
        cand = np.asarray(self._kd.query_ball_point(self._scaled(q), radius * (1.0 + 1e-9) + 1e-12), dtype=np.int64)
        if cand.size:
            cand = cand[self._alive[cand].astype(bool)]
            cand, d = self._exact(cand, q)
            cand = cand[d <= radius]
        return np.concatenate([np.sort(cand), tail])

    def within(self, q, radius: float) -> list[int]:
        return [int(i) for i in self._ids[self._within_rows(q, radius)]]

    def best_near(self, q, radius: float) -> int | None:
        """Live id of minimum value within ``radius`` (ties: lowest id)."""
        if self._count == 0:
            return None
        self._refresh_kd()
        if self._kd is None:
            row = kernels.best_near(self._pts, self._n, self._ids, self._alive, self._vals,
                                    np.ascontiguousarray(q, dtype=float), radius, self.weights, self.angular)
            return None if row < 0 else int(self._ids[row])
        rows = self._within_rows(q, radius)
        if rows.size == 0:
            return None
        vals = self._vals[rows]
        cand = rows[vals == vals.min()]
        return int(self._ids[cand].min())
