from typing import Any, Generic, TypeVar

import tblib.pickling_support

tblib.pickling_support.install()

T = TypeVar('T')


def describe_item(work_item: Any) -> str:
    """Short label for a work item: its uprn or name when it has one."""
    for attr in ('uprn', 'name'):
        value = getattr(work_item, attr, None)
        if value is not None:
            return str(value)
    if isinstance(work_item, dict):
        for key in ('uprn', 'name'):
            if key in work_item:
                return str(work_item[key])
    text = repr(work_item)
    return text if len(text) <= 80 else text[:77] + '...'


class WorkException(Exception, Generic[T]):
    """A task failure captured inside a stage worker.

    Carries the original exception with its traceback (picklable through
    tblib, so it survives the trip back from a worker process), the stage
    name and the failing work item."""
    stage: str
    work_item: T | None
    tb: Any

    def __init__(self, orig_exc: Exception, stage: Any, work_item: T | None):
        super().__init__(orig_exc, str(stage), work_item)
        self.tb = orig_exc.__traceback__
        self.orig_exc = orig_exc
        self.work_item = work_item
        self.stage = str(stage)

    @property
    def label(self) -> str:
        return describe_item(self.work_item)

    def __str__(self):
        return f"WorkException {self.stage}, {self.label} --> {self.orig_exc!r}"

    def describe(self) -> dict[str, str]:
        """Machine-readable summary used in ingest and ablation reports."""
        return {
            'stage': self.stage,
            'item': self.label,
            'error': type(self.orig_exc).__name__,
            'message': str(self.orig_exc),
        }

    def re_raise(self):
        raise self.orig_exc.with_traceback(self.tb)
