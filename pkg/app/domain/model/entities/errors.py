# domain/model/entities/errors.py

from typing import Any, Dict, Optional


class LatentFlowError(Exception):
    """Base class for every error raised by the latent flow pipeline."""


class DimensionError(LatentFlowError):
    """Raised when tensor shapes or latent widths do not match."""


class DomainError(LatentFlowError):
    """Raised when an operation is evaluated outside its mathematical domain."""


class ContractError(LatentFlowError):
    """Raised when an API is called in a way its contract forbids."""


class ConfigurationError(LatentFlowError):
    """Raised for invalid model, world or training configuration."""


class DataError(LatentFlowError):
    """Raised for empty, non-finite or otherwise unusable data."""


class DegenerateDataError(DataError):
    """Raised when a fit needs both classes but only one is present."""


class NumericError(LatentFlowError):
    """Raised when an iterative numerical routine fails to converge."""


class TrainingDivergedError(NumericError):
    """
    Raised when the training loss becomes NaN or infinite.

    Attributes:
        epoch: Epoch in which the non-finite loss appeared
        batch: Batch index inside that epoch
        last_record: Last finite loss record, if any
    """

    def __init__(self, message: str, epoch: int, batch: int,
                 last_record: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch
        self.last_record = last_record


class FileFormatError(LatentFlowError):
    """Raised when a dataset or model file is malformed, truncated or of another version."""


class RequestValidationError(LatentFlowError):
    """
    Specialized exception for invalid use case requests.

    Raised when request parameters fail validation checks, containing
    specific details about the validation failure.
    """
