"""Error hierarchy for the recognizer service."""


class ServiceError(Exception):
    """Base class for all service failures."""


class ServiceConfigError(ServiceError):
    """The service configuration or fixture table is invalid."""


class UndecodableUpload(ServiceError):
    """The uploaded request body does not decode as a PNG image."""
