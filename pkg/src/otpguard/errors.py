"""Exception hierarchy shared by every module in the package."""


class OtpGuardError(Exception):
    """Base class for all package errors."""


class DomainError(OtpGuardError, ValueError):
    """An argument falls outside the domain an operation accepts."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class NoInverseError(DomainError):
    pass


class ParameterError(OtpGuardError, ValueError):
    """Invalid RSA parameters."""


class IntegrityError(OtpGuardError):
    """Data that should have been produced by this package is inconsistent."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class FormatError(OtpGuardError, ValueError):
    """Malformed OTP, key, PIN or presented password."""


class UnknownUserError(OtpGuardError):
    pass


class DuplicateUserError(OtpGuardError):
    pass


class MissingKeyError(OtpGuardError):
    pass


class AuthFailed(OtpGuardError):
    """Login failed. The message never says whether the user or the PIN was wrong."""

    def __init__(self):
        super().__init__("authentication failed")


class InvalidSession(OtpGuardError):
    pass
