# errors.py
from typing import Any


class SliceCheckError(Exception):
    """
    Base class for every error raised by slicecheck.
    Args:
        message (str): Human readable explanation.
        **detail: Machine readable context copied into to_dict().
    """

    def __init__(self, message: str = "", **detail: Any):
        super().__init__(message or self.__class__.__name__)
        self.message = message or self.__class__.__name__
        self.detail = detail

    def to_dict(self) -> dict:
        return {"error": self.__class__.__name__, "message": self.message, "detail": self.detail}


# ---------------------- header space ----------------------
class UnknownFieldCode(SliceCheckError):
    pass


class WidthMismatch(SliceCheckError):
    pass


class SchemaMismatch(SliceCheckError):
    pass


class UniverseTooLarge(SliceCheckError):
    pass


# ---------------------- documents & stores ----------------------
class MalformedJson(SliceCheckError):
    pass


class SchemaViolation(SliceCheckError):
    def __init__(self, path: str, message: str = ""):
        super().__init__(f"{path}: {message}" if message else path, path=path)
        self.path = path


class UnknownActionCode(SliceCheckError):
    pass


class NotFound(SliceCheckError):
    pass


class IoFailure(SliceCheckError):
    pass


class DeviceMismatch(SliceCheckError):
    pass


# ---------------------- traversal ----------------------
class DanglingInterface(SliceCheckError):
    pass


class UnknownDevice(SliceCheckError):
    pass


class UnknownTable(SliceCheckError):
    pass


class PathLengthExceeded(SliceCheckError):
    pass


# ---------------------- intents ----------------------
class UnknownIntentType(SliceCheckError):
    pass


class BadExpression(SliceCheckError):
    def __init__(self, position: int, message: str = ""):
        super().__init__(f"bad expression at token {position}: {message}", position=position)
        self.position = position


class EmptyInitialSet(SliceCheckError):
    pass


class StartPointUnresolved(SliceCheckError):
    pass


class NotComposite(SliceCheckError):
    pass


# ---------------------- cluster ----------------------
class TooFewIntents(SliceCheckError):
    pass


class NoSliceData(SliceCheckError):
    pass


class WorkerCrashed(SliceCheckError):
    def __init__(self, checker: int, pending: Any = None, message: str = ""):
        super().__init__(message or f"checker {checker} crashed", checker=checker, pending=pending)
        self.checker = checker
        self.pending = pending


# ---------------------- baselines & workbench ----------------------
class UnsupportedRewrite(SliceCheckError):
    def __init__(self, device: str, table: str, rule_index: int, action_type: int):
        super().__init__(
            f"rule {rule_index} of {device}/{table} rewrites headers (action {action_type})",
            device=device,
            table=table,
            rule_index=rule_index,
            action_type=action_type,
        )


class InvalidSpec(SliceCheckError):
    pass


class DivisionByZero(SliceCheckError):
    pass
