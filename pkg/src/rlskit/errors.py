"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command line: 2 for
configuration problems, 3 for bad data, 4 for numerical failures.
"""


class RlsError(Exception):
    exit_code = 1


class ConfigError(RlsError):
    exit_code = 2


class DataError(RlsError):
    exit_code = 3


class NumericError(RlsError):
    exit_code = 4


class ShapeError(RlsError, ValueError):
    exit_code = 3


class ParameterError(ConfigError, ValueError):
    pass


class StateError(RlsError):
    pass


class ParseError(DataError):
    def __init__(self, message, line=None, path=None):
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)
        self.line = line
        self.path = path


class FormatError(DataError):
    pass


class VersionError(FormatError):
    pass


class CorruptionError(FormatError):
    pass


class LabelError(DataError):
    pass


class StratificationError(DataError):
    def __init__(self, classes):
        self.classes = list(classes)
        super().__init__(
            f"cannot stratify: classes with a single sample: {self.classes}")


class DegenerateDataError(DataError):
    pass


class NotPositiveDefiniteError(NumericError):
    def __init__(self, pivot, message=None):
        self.pivot = pivot
        super().__init__(message or
                         f"shifted matrix is not positive definite (pivot {pivot})")


class DegenerateLeverageError(NumericError):
    def __init__(self, index, leverage):
        self.index = index
        self.leverage = leverage
        super().__init__(
            f"leave-one-out undefined: 1 - S_ii <= 1e-12 at sample {index} "
            f"(S_ii = {leverage!r})")


class DegenerateSpectrumError(NumericError):
    pass


class BudgetError(RlsError):
    exit_code = 4

    def __init__(self, required, available):
        self.required = required
        self.available = available
        super().__init__(
            f"memory budget exceeded: needs a {required}x{required} matrix, "
            f"budget allows {available}x{available}")


class ChunkError(RlsError):
    exit_code = 4

    def __init__(self, chunk_index, cause):
        self.chunk_index = chunk_index
        super().__init__(f"chunk {chunk_index} failed: {cause}")


class RegistryError(ConfigError):
    pass


class PipelineError(RlsError):
    exit_code = 2


class TaskError(PipelineError):
    """A task raised; ``cause`` is the original exception."""

    def __init__(self, category, impl_name, cause):
        self.category = category
        self.impl_name = impl_name
        self.cause = cause
        super().__init__(f"task {category}:{impl_name} failed: {cause}")

    @property
    def exit_code(self):
        return getattr(self.cause, "exit_code", 1)


class ContractViolation(PipelineError):
    exit_code = 1


class KeyExistsError(PipelineError):
    """Options keys are write-once within a run."""
