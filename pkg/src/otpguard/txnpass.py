"""Transaction passwords: the pass code encrypted digit by digit.

The authenticator app and the server both run :func:`generate` on the same
inputs; only the result ever crosses the network.
"""
from __future__ import annotations

import hmac
from dataclasses import dataclass

from . import passcode
from .errors import FormatError
from .rsa import RsaKeyPair, decrypt_digits, encrypt_digits


@dataclass(frozen=True)
class TransactionPassword:
    cipher_digits: tuple[int, ...]

    @property
    def canonical(self) -> str:
        # Ambiguous to split back apart ("17" vs "1", "7"); only ever compared whole.
        return "".join(str(c) for c in self.cipher_digits)

    def __str__(self):
        return self.canonical


def generate(otp: str, key: str, rsa: RsaKeyPair) -> TransactionPassword:
    pc = passcode.build_passcode(otp, key)
    return TransactionPassword(tuple(encrypt_digits(pc.as_ints(), rsa)))


def verify(candidate: str, otp: str, key: str, rsa: RsaKeyPair) -> bool:
    """Constant-time comparison of ``candidate`` against the expected password.

    Raises FormatError for anything that is not a non-empty digit string, so
    callers can tell garbage input apart from a wrong password.
    """
    if not isinstance(candidate, str) or not candidate or not passcode._is_digits(candidate):
        raise FormatError("transaction password must be a non-empty digit string")
    expected = generate(otp, key, rsa).canonical
    return hmac.compare_digest(candidate.encode("ascii"), expected.encode("ascii"))


def decrypt_passcode(tp: TransactionPassword, rsa: RsaKeyPair) -> str:
    return "".join(str(d) for d in decrypt_digits(tp.cipher_digits, rsa))
