"""Shared exception types.

The CLI maps these to exit codes: usage problems exit 1, contract
violations exit 2, capacity overruns exit 3.
"""


class ContractViolation(ValueError):
    """An operation was invoked outside its documented precondition."""


class DataFormatError(ContractViolation):
    """A file (schema, model, dataset) failed validation on load."""


class UnsupportedModelError(ContractViolation):
    """The requested operation does not apply to this model type."""


class CapacityError(RuntimeError):
    """A configurable enumeration or safety cap was exceeded."""
