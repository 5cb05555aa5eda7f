"""Bounded LRU set of voxels observed occupied."""
from __future__ import annotations

import threading
from collections import OrderedDict

import numpy as np

CAPACITY = 100_000


class OccupancyCache:
    """Insertion-ordered voxel set; re-inserting a key refreshes it, overflow evicts the oldest."""

    def __init__(self, capacity: int = CAPACITY):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._keys: OrderedDict[tuple, None] = OrderedDict()
        self.lock = threading.Lock()
        self.version = 0  # bumped on every mutation

    def __len__(self) -> int:
        return len(self._keys)

    def __contains__(self, key) -> bool:
        return tuple(key) in self._keys

    def __iter__(self):
        return iter(list(self._keys))

    def insert(self, key) -> None:
        key = tuple(int(v) for v in key)
        if key in self._keys:
            self._keys.move_to_end(key)
        else:
            self._keys[key] = None
            if len(self._keys) > self.capacity:
                self._keys.popitem(last=False)
        self.version += 1

    def update(self, keys) -> list[tuple]:
        """Insert many keys (sorted first so order is deterministic); returns the new ones."""
        fresh = []
        store, cap = self._keys, self.capacity
        with self.lock:
            for key in sorted(keys):
                if key in store:
                    store.move_to_end(key)
                else:
                    fresh.append(key)
                    store[key] = None
                    if len(store) > cap:
                        store.popitem(last=False)
            self.version += 1
        return fresh

    def oldest(self):
        return next(iter(self._keys)) if self._keys else None

    def to_grid(self, shape) -> np.ndarray:
        """Boolean occupancy grid of the cached keys inside ``shape``."""
        grid = np.zeros(shape, dtype=bool)
        with self.lock:
            if not self._keys:
                return grid
            arr = np.array(list(self._keys), dtype=np.int64)
        ok = np.all((arr >= 0) & (arr < np.array(shape)), axis=1)
        arr = arr[ok]
        grid[arr[:, 0], arr[:, 1], arr[:, 2]] = True
        return grid
