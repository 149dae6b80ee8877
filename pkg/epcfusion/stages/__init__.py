"""Worker/stage/pipeline execution layer for per-record and per-config jobs."""

from .Worker import Worker
from .Stage import Stage
from .SimpleStage import SimpleStage
from .Pipeline import Pipeline, map_stage
from .work_exception import WorkException
from .tube_q import TubeQ
from .timer import Timer
