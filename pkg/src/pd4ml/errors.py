"""Exception types shared across the package."""


class Pd4mlError(Exception):
    """Base class for all package errors."""


class DimensionError(Pd4mlError):
    """Operand shapes are incompatible with the requested operation."""


class DomainError(Pd4mlError):
    """Input values are outside the mathematical domain of an operation."""


class ContractError(Pd4mlError):
    """A documented precondition was violated by the caller."""


class NumericError(Pd4mlError):
    """An operation produced NaN or Inf from finite inputs."""


class MalformedRecordError(Pd4mlError):
    """A data record violates the dataset's declared conventions."""


class DatasetLookupError(Pd4mlError):
    """Unknown dataset name."""


class IntegrityError(Pd4mlError):
    """Checksum verification failed; the offending file is quarantined."""


class FetchError(Pd4mlError):
    """A dataset file could not be retrieved."""


class FormatError(Pd4mlError):
    """A container file is not valid PD4ML-BIN."""


class TrainingDiverged(Pd4mlError):
    """Training produced a non-finite loss; message carries diagnostics."""
