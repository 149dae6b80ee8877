"""Implements Pipeline class."""
import multiprocessing
import threading
from typing import Generic, Iterable, Iterator, TypeVar

from .Stage import Stage

T = TypeVar('T')
Q = TypeVar('Q')


class Pipeline(Generic[T, Q]):
    """Feeds tasks to a stage and hands the results back in input order."""

    def __init__(self, stage: Stage[T, Q]):
        self._stage = stage
        # Process workers can only reach queues through a manager proxy.
        self._manager = multiprocessing.Manager() if stage.multi_process else None
        self._stage.open(self._manager)
        self._stage.build()
        self.task_index = 0
        self.lock = threading.Lock()

    def put(self, task: T | StopIteration):
        """Put *task* on the pipeline."""
        with self.lock:
            self._stage.put((self.task_index, task))
            self.task_index += 1

    def get(self, timeout: float | None = None) -> tuple[int, Q] | None:
        """Return the next ``(task_index, result)`` in completion order, or
        ``None`` once the stage has stopped."""
        try:
            return self._stage.get(timeout)
        except StopIteration:
            self.shutdown()
            return None

    def shutdown(self):
        if self._manager is not None:
            self._manager.shutdown()
            self._manager = None

    def results(self) -> Iterator[Q]:
        """Iterate over results in input order."""
        current = 0
        cache = {}
        while (result := self.get()) is not None:
            task_index, res = result
            cache[task_index] = res
            while current in cache:
                yield cache.pop(current)
                current += 1

    def run(self, inputs: Iterable[T]) -> Iterator[Q]:
        for input in inputs:
            self.put(input)
        self.put(StopIteration())
        return self.results()


def map_stage(fn, tasks: Iterable[T], num_worker: int = 1, multi_process: bool = False,
              collect_errors: bool = False, name: str | None = None) -> list:
    """Run *fn* over *tasks* on a single :class:`SimpleStage` and return one
    result per task in input order. Failed tasks come back as
    :class:`~epcfusion.stages.WorkException` when *collect_errors* is set."""
    from .SimpleStage import SimpleStage

    stage = SimpleStage(fn, num_worker, collect_errors=collect_errors,
                        multi_process=multi_process, name=name)
    return list(Pipeline(stage).run(tasks))
