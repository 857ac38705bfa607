"""
Exception hierarchy for the laboratory.

Every error raised on purpose derives from SacException so the CLI can map it
to a non-zero exit code without swallowing programming errors.
"""


class SacException(Exception):
    """
    Base exception for all laboratory failures.
    """
    pass


class InvalidInputException(SacException):
    """
    Raised for non-finite tensors, zero rows and other invalid values.
    """
    pass


class ShapeMismatchException(SacException):
    """
    Raised when tensor shapes are inconsistent with an operation.
    """
    pass


class LabelIndexException(SacException, IndexError):
    """
    Raised when a class index falls outside the label space.
    """
    pass


class ConfigurationException(SacException):
    """
    Raised for invalid configuration, manifests or preconditions.
    """
    pass


class TrainingFailureException(SacException):
    """
    Raised when training diverges.
    """

    def __init__(self, epoch: int, message: str = "loss became non-finite"):
        self.epoch = epoch
        super().__init__(f"Training failed at epoch {epoch}: {message}")


class InsufficientSamplesException(SacException):
    """
    Raised when too few fingerprint samples qualify.
    """

    def __init__(self, count: int, required: int):
        self.count = count
        self.required = required
        super().__init__(f"Only {count} qualifying samples found, {required} required")


class GenerationException(SacException):
    """
    Raised when adversarial example generation cannot reach its quota.
    """

    def __init__(self, count: int, required: int):
        self.count = count
        self.required = required
        super().__init__(f"Generated only {count} successful adversarial examples, {required} required")


class TransportException(SacException):
    """
    Raised when a suspect model cannot be queried.
    """
    pass


class CheckpointFormatException(SacException):
    """
    Raised for checkpoint files with a wrong magic string or a truncated payload.
    """
    pass


class JobFailedException(SacException):
    """
    Raised by the scheduler when a job fails; names the job and its seed.
    """

    def __init__(self, job_id: str, seed: int, cause: Exception):
        self.job_id = job_id
        self.seed = seed
        self.cause = cause
        super().__init__(f"Job {job_id} (seed {seed}) failed: {cause}")
