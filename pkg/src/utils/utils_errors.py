# -*- coding: utf-8 -*-

"""
Exception hierarchy shared by every module.

Each error also derives from the closest builtin so callers may catch either
one. `exit_code` is what the launcher returns when the error escapes a runner.
"""


class PedestrianIntentError(Exception):
    exit_code = 1


# ============================ USAGE / DATA (exit 2) ============================ #
class ArgumentError(PedestrianIntentError, ValueError):
    """Invalid argument value (counts, ratios, probabilities, shapes...)."""
    exit_code = 2


class ParseError(PedestrianIntentError, ValueError):
    """Malformed input text: JSONL line, action label, override token."""
    exit_code = 2

    def __init__(self, message: str, line_no: int = 0) -> None:
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}" if line_no else message)


class ValidationError(PedestrianIntentError, ValueError):
    """A record breaks one of its invariants."""
    exit_code = 2

    def __init__(self, message: str, record_id: str = "") -> None:
        self.record_id = record_id
        super().__init__(f"record '{record_id}': {message}" if record_id else message)


class ConfigurationError(PedestrianIntentError, ValueError):
    exit_code = 2


class RecordLookupError(PedestrianIntentError, KeyError):
    exit_code = 2

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class UndefinedMetricError(PedestrianIntentError, ValueError):
    exit_code = 2


# ================================ I/O (exit 3) ================================= #
class DataIOError(PedestrianIntentError, OSError):
    exit_code = 3

    def __init__(self, message: str, path: str = "") -> None:
        self.path = path
        super().__init__(f"{message}: '{path}'" if path else message)

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class CheckpointVersionError(DataIOError):
    exit_code = 3


# ============================= NUMERICAL (exit 4) ============================== #
class NumericalError(PedestrianIntentError, ArithmeticError):
    """Non-finite tensor detected; carries the diffusion step and batch ids when known."""
    exit_code = 4

    def __init__(self, message: str, step: int | None = None, batch_ids=None) -> None:
        self.step = step
        self.batch_ids = list(batch_ids) if batch_ids is not None else []
        details = []
        if step is not None:
            details.append(f"k={step}")
        if self.batch_ids:
            details.append(f"ids={','.join(str(i) for i in self.batch_ids[:8])}")
        super().__init__(f"{message} ({'; '.join(details)})" if details else message)
