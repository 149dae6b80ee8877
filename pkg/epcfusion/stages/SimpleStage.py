"""Implements SimpleStage class."""

from .Stage import Stage
from .Worker import Worker

__all__ = ['SimpleStage']


class _Worker(Worker):
    def __init__(self, task_fn):
        super(_Worker, self).__init__()
        self.task_fn = task_fn

    def doTask(self, task):
        return self.task_fn(task)

    def __str__(self):
        return self.name


class SimpleStage(Stage):
    """A :class:`Stage` whose workers call a plain single-argument function.

    In process mode *target* must be picklable (a module-level function or a
    :func:`functools.partial` of one)."""

    def __init__(self, target, num_worker=1, collect_errors=False, max_backlog=0, multi_process=False,
                 show_time=False, name=None):
        super(SimpleStage, self).__init__(_Worker, num_worker, multi_process, collect_errors=collect_errors,
                                          max_backlog=max_backlog,
                                          name=name or getattr(target, '__name__', None),
                                          show_time=show_time, task_fn=target)
