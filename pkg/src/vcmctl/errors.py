class InputDataError(ValueError):
    """Malformed or inconsistent input data (files, dims, values)."""


class BackendError(RuntimeError):
    """A codec backend failed to produce an outcome."""


class BitstreamError(InputDataError):
    """A bitstream could not be parsed or failed its integrity check."""
