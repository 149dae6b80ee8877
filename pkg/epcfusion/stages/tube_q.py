"""Implements TubeQ class."""

import queue
from typing import Generic, TypeVar

T = TypeVar('T')


class TubeQ(Generic[T]):
    """One-way channel between a stage and its workers.

    Thread stages use a plain :class:`queue.Queue`. Process stages pass the
    pipeline's :class:`multiprocessing.managers.SyncManager`, whose queue proxy
    can be handed to pool workers as an argument."""

    def __init__(self, maxsize=0, manager=None):
        self._queue = manager.Queue(maxsize) if manager is not None else queue.Queue(maxsize)

    def put(self, data: T):
        self._queue.put(data)

    def get(self, timeout: float | None = None) -> T:
        """Block until an item is available, or raise :class:`queue.Empty`
        once *timeout* expires."""
        return self._queue.get(True, timeout)
