from typing import Optional

from com.mhire.dlm.common.network_responses import HTTPCode


class ExitCode:
    SUCCESS = 0
    DOMAIN_ERROR = 1
    USAGE = 2
    BACKEND = 3
    ACCEPTANCE = 4
    NO_CANDIDATE = 5


class DlmError(Exception):
    """Base class for every error raised by the pipeline"""

    exit_code = ExitCode.DOMAIN_ERROR
    http_code = HTTPCode.INTERNAL_SERVER_ERROR


class ConfigError(DlmError):
    exit_code = ExitCode.USAGE
    http_code = HTTPCode.UNPROCESSABLE_ENTITY


class InstanceError(DlmError):
    http_code = HTTPCode.UNPROCESSABLE_ENTITY


class BudgetViolationError(InstanceError):
    pass


class RewardParseError(DlmError):
    """Reward source rejected by the parser; position is a character offset"""

    http_code = HTTPCode.UNPROCESSABLE_ENTITY

    def __init__(self, message: str, position: Optional[int] = None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class DisallowedTokenError(RewardParseError):
    pass


class FeatureIndexError(RewardParseError):
    pass


class RewardEvalError(DlmError):
    http_code = HTTPCode.UNPROCESSABLE_ENTITY


class TooManyIndicesError(DlmError):
    http_code = HTTPCode.UNPROCESSABLE_ENTITY


class TrainingError(DlmError):
    pass


class CandidateFailure(DlmError):
    """A candidate reward could not be trained"""

    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(reason)


class LlmBackendError(DlmError):
    exit_code = ExitCode.BACKEND
    http_code = HTTPCode.SERVICE_UNAVAILABLE

    def __init__(self, message: str, slot: Optional[str] = None):
        self.detail = message
        self.slot = slot
        if slot:
            message = f"[{slot}] {message}"
        super().__init__(message)

    def with_slot(self, slot: str) -> "LlmBackendError":
        """Copy of this error, same subclass and attributes, annotated with the candidate slot"""
        error = type(self).__new__(type(self))
        error.__dict__.update(self.__dict__)
        error.slot = slot
        error.args = (f"[{slot}] {self.detail}",)
        error.__cause__ = self
        return error


class TranscriptExhaustedError(LlmBackendError):
    pass


class LlmDecodeError(LlmBackendError):
    def __init__(self, message: str, raw_body: str, slot: Optional[str] = None):
        self.raw_body = raw_body
        super().__init__(f"{message}; raw body: {raw_body[:500]}", slot=slot)


class ResponseFormatError(DlmError):
    http_code = HTTPCode.UNPROCESSABLE_ENTITY


class SensitiveFeatureError(ResponseFormatError):
    pass


class ReflectionParseError(DlmError):
    http_code = HTTPCode.UNPROCESSABLE_ENTITY


class NoCandidateError(DlmError):
    exit_code = ExitCode.NO_CANDIDATE
    http_code = HTTPCode.UNPROCESSABLE_ENTITY


class EvaluationError(DlmError):
    http_code = HTTPCode.UNPROCESSABLE_ENTITY


class MissingRewardError(EvaluationError):
    exit_code = ExitCode.USAGE
    http_code = HTTPCode.NOT_FOUND


class SearchSpaceTooLargeError(DlmError):
    http_code = HTTPCode.PAYLOAD_TOO_LARGE


class AcceptanceFailure(DlmError):
    exit_code = ExitCode.ACCEPTANCE


def http_code_for(error: Exception) -> int:
    """HTTP status a router should answer with for a given exception"""
    if isinstance(error, DlmError):
        return error.http_code
    if isinstance(error, ValueError):
        return HTTPCode.UNPROCESSABLE_ENTITY
    return HTTPCode.INTERNAL_SERVER_ERROR
