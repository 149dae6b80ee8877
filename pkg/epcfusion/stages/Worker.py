"""Implements Worker class."""

import abc
import queue
from typing import Generic, TypeVar

from loguru import logger

from .timer import Timer
from .tube_q import TubeQ
from .work_exception import WorkException

T = TypeVar('T')
Q = TypeVar('Q')

Envelope = tuple[tuple[int, object], int]


class Worker(abc.ABC, Generic[T, Q]):
    """A worker fetches the first available task of its stage and publishes
    the result as soon as it is done, tagged with the task index so that the
    pipeline can restore input order."""

    def __init__(self):
        pass

    def init2(
        self,
        input_tube: TubeQ[Envelope],   # Read task from the input tube.
        output_tube: TubeQ[Envelope],  # Send every result here.
        num_workers: int,              # Total number of workers in the stage.
        collect_errors: bool,          # Publish failures as results and keep going.
        name: str,
        index: int,
        show_time: bool,
    ):
        super(Worker, self).__init__()
        self.show_time = show_time
        self.name = name
        self.index = index
        self.process_executed = {
            "doInit": Timer("init"),
            "doTask": Timer("perTask", per_item=True),
            "doDispose": Timer("dispose"),
        }
        self._tube_task_input = input_tube
        self._tube_result_output = output_tube
        self._num_workers = num_workers
        self._collect_errors = collect_errors

    def putResult(self, task_index, result: Q | BaseException):
        self._tube_result_output.put(((task_index, result), 0))

    @classmethod
    def process(cls, worker_args, **kwargs):
        try:
            instance = cls(**worker_args)
            instance.init2(**kwargs)
            instance.run()
        except Exception as e:
            logger.opt(exception=e).error("worker {} failed during start-up", kwargs.get('name'))
            raise

    def run(self):
        try:
            with self.process_executed["doInit"]:
                self.doInit()

            while True:
                try:
                    (task_index, task), count = self._tube_task_input.get()
                except queue.Empty as e:
                    (task_index, task), count = ((-1, e), 0)

                # StopIteration is the stop request; count is the number of
                # workers of this stage that already saw it. The last one to
                # stop forwards it to the output.
                if isinstance(task, StopIteration):
                    count += 1
                    if count == self._num_workers:
                        self.putResult(task_index, task)
                    else:
                        self._tube_task_input.put(((task_index, task), count))
                    break

                with self.process_executed["doTask"]:
                    try:
                        result = self.doTask(task)
                    except Exception as e:
                        self.putResult(task_index, WorkException(e, self, task))
                        if self._collect_errors:
                            continue
                        break

                # None is a result like any other; every task yields exactly one.
                self.putResult(task_index, result)

        except KeyboardInterrupt as e:
            self.putResult(-1, e)
        except Exception as e:
            self.putResult(-1, WorkException(e, self, None))
        finally:
            with self.process_executed['doDispose']:
                self.doDispose()
            if self.show_time:
                stats = " ".join(f"{str(v):>30}" for v in self.process_executed.values() if v.elapsed_time > .001)
                logger.info("[{}]{:<10}: {}", self.index, str(self), stats)

    @abc.abstractmethod
    def doTask(self, task: T) -> Q:
        """Implement this method in the subclass with the work executed on
        each *task* and return its result."""

    def doInit(self):
        """Hook run inside the worker (thread or process) before the first task."""
        return None

    def doDispose(self):
        """Hook run inside the worker after the stop request."""
        return None

    def __str__(self):
        return self.name
