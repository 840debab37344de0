"""SMS one-time passwords hardened with RSA-encrypted transaction passwords."""

from .errors import (AuthFailed, DomainError, FormatError, IntegrityError,
                     NoInverseError, OtpGuardError, ParameterError)
from .passcode import PassCode, build_passcode, digit_sum, extract, insertion_position
from .rsa import PAPER_KEY, RsaKeyPair, keygen
from .txnpass import TransactionPassword, generate, verify

__all__ = [
    "AuthFailed", "DomainError", "FormatError", "IntegrityError", "NoInverseError",
    "OtpGuardError", "ParameterError", "PassCode", "build_passcode", "digit_sum",
    "extract", "insertion_position", "PAPER_KEY", "RsaKeyPair", "keygen",
    "TransactionPassword", "generate", "verify",
]
