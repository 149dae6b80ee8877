"""Exception hierarchy.

Every error the package raises on purpose derives from :class:`EpcFusionError`
and knows the CLI exit code it maps to. Constructors take the message as the
only positional argument, extra context goes in keywords, so that instances
pickle cleanly across worker processes."""

from typing import Any


class EpcFusionError(Exception):
    exit_code = 5
    kind = 'internal'

    def __init__(self, message: str = '', **context: Any):
        super().__init__(message)
        self.context = context

    @property
    def message(self) -> str:
        return str(self.args[0]) if self.args else ''

    def to_dict(self) -> dict[str, Any]:
        payload = {'error': type(self).__name__, 'kind': self.kind, 'message': self.message,
                   'exit_code': self.exit_code}
        if self.context:
            payload['context'] = {k: str(v) for k, v in self.context.items()}
        return payload


class InvalidConfig(EpcFusionError):
    exit_code = 2
    kind = 'config'


class DataError(EpcFusionError):
    exit_code = 3
    kind = 'data'


class DegenerateGeometry(DataError):
    pass


class DuplicateKey(DataError):
    pass


class OutOfRange(DataError):
    pass


class EmptyInput(DataError):
    pass


class DegenerateTarget(DataError):
    pass


class MissingModality(DataError):
    pass


class SchemaMismatch(DataError):
    pass


class MissingFile(DataError):
    pass


class ShapeError(EpcFusionError):
    """Tensor shapes that do not fit together; a wiring bug, not bad data."""


class TrainingDiverged(EpcFusionError):
    exit_code = 4
    kind = 'training'


class GradCheckFailed(EpcFusionError):
    """Reverse-mode gradients disagree with finite differences."""
