"""Implements Stage class."""

import multiprocessing
from multiprocessing.pool import ThreadPool
from typing import Generic, TypeVar

from loguru import logger

from .tube_q import TubeQ
from .work_exception import WorkException

T = TypeVar('T')
Q = TypeVar('Q')


class Stage(Generic[T, Q]):
    """The Stage is an assembly of workers of identical functionality."""

    def __init__(
        self,
        worker_class,
        num_worker=1,
        multi_process=False,
        collect_errors=False,
        max_backlog=0,
        name=None,
        show_time=False,
        **worker_args
    ):
        """Create a stage of *num_worker* workers of the given *worker_class*,
        running as processes when *multi_process* is set and as threads
        otherwise.

        *collect_errors* turns a failing task into a :class:`WorkException`
        result instead of stopping the pipeline.
        Any worker initialization arguments are given in *worker_args*."""
        self._worker_class = worker_class
        self._worker_args = worker_args
        self._num_worker = max(1, int(num_worker))
        self._max_backlog = max_backlog
        self.collect_errors = collect_errors
        self._input_tube: TubeQ | None = None
        self._output_tube: TubeQ | None = None
        self.show_time = show_time
        self.name = name or self._worker_class.__name__
        self.multi_process = multi_process

    def put(self, task: tuple[int, T | StopIteration]):
        """Put *task* on the stage's input tube."""
        self._input_tube.put((task, 0))

    def get(self, timeout: float | None = None) -> tuple[int, Q]:
        """Retrieve the next ``(task_index, result)``; raise
        :class:`StopIteration` once every worker has stopped."""
        if self._output_tube is not None:
            task_index, result = self._output_tube.get(timeout)[0]
            if isinstance(result, WorkException):
                if self.collect_errors:
                    return task_index, result
                self.workers_pool.terminate()
                result.re_raise()
            if isinstance(result, BaseException) and not isinstance(result, StopIteration):
                self.workers_pool.terminate()
                raise result
            if not isinstance(result, StopIteration):
                return task_index, result
            self._output_tube = None
            self.workers_pool.join()
        raise StopIteration()

    def open(self, manager=None):
        """Create the input and result tubes."""
        self._input_tube = TubeQ(self._max_backlog, manager)
        self._output_tube = TubeQ(0, manager)

    def build(self):
        """Create and start up the internal workers."""
        logger.debug("stage {} starting {} {} worker(s)", self.name, self._num_worker,
                     'process' if self.multi_process else 'thread')
        if self.multi_process:
            self.workers_pool = multiprocessing.Pool(self._num_worker)
        else:
            self.workers_pool = ThreadPool(self._num_worker)
        for i in range(self._num_worker):
            self.workers_pool.apply_async(self._worker_class.process, kwds=dict(
                input_tube=self._input_tube,
                output_tube=self._output_tube,
                index=i,
                num_workers=self._num_worker,
                collect_errors=self.collect_errors,
                worker_args=self._worker_args,
                name=self.name,
                show_time=self.show_time))
        self.workers_pool.close()
