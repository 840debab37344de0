"""Pass-code construction: insert the secret key's digit sum into the OTP.

The sum goes in at the 1-based position named by the OTP's last digit.
Positions 7-10 lie past the end of a 6-digit OTP; the gap is filled with
zeros. A last digit of 0 maps to position 10.
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import FormatError, IntegrityError

OTP_LEN = 6
DEFAULT_KEY_LEN = 4


def validate_otp(otp: str) -> str:
    if not isinstance(otp, str) or len(otp) != OTP_LEN or not _is_digits(otp):
        raise FormatError(f"OTP must be exactly {OTP_LEN} decimal digits")
    return otp


def validate_key(key: str) -> str:
    if not isinstance(key, str) or not key or not _is_digits(key):
        raise FormatError("secret key must be a non-empty string of decimal digits")
    return key


def _is_digits(s: str) -> bool:
    # str.isdigit() accepts things like '²'
    return all("0" <= ch <= "9" for ch in s)


def digit_sum(key: str) -> int:
    return sum(int(ch) for ch in validate_key(key))


def insertion_position(otp: str) -> int:
    last = int(validate_otp(otp)[-1])
    return last if last else 10


@dataclass(frozen=True)
class PassCode:
    digits: str
    sum_pos: int
    sum_len: int
    otp_len: int = OTP_LEN

    def as_ints(self) -> list[int]:
        return [int(ch) for ch in self.digits]


def build_passcode(otp: str, key: str) -> PassCode:
    pos = insertion_position(otp)
    s = str(digit_sum(key))
    if pos <= OTP_LEN:
        digits = otp[: pos - 1] + s + otp[pos - 1 :]
    else:
        digits = otp + "0" * (pos - OTP_LEN - 1) + s
    return PassCode(digits=digits, sum_pos=pos, sum_len=len(s))


def extract(pc: PassCode) -> tuple[str, int]:
    """Recover ``(otp, summation)`` from a pass code and its layout metadata."""
    if pc.otp_len != OTP_LEN:
        raise IntegrityError(f"otp_len must be {OTP_LEN}")
    if pc.sum_len < 1:
        raise IntegrityError("sum_len must be at least 1")
    if not 1 <= pc.sum_pos <= 10:
        raise IntegrityError("sum_pos must lie in 1..10")
    if not _is_digits(pc.digits):
        raise IntegrityError("pass code contains non-digit characters")
    pos, n = pc.sum_pos, pc.sum_len
    expected_len = OTP_LEN + n if pos <= OTP_LEN else pos - 1 + n
    if len(pc.digits) != expected_len:
        raise IntegrityError(
            f"length {len(pc.digits)} inconsistent with sum_pos={pos}, sum_len={n}")
    start = pos - 1
    s = pc.digits[start : start + n]
    if pos <= OTP_LEN:
        otp = pc.digits[:start] + pc.digits[start + n :]
    else:
        otp = pc.digits[:OTP_LEN]
        if pc.digits[OTP_LEN:start].strip("0"):
            raise IntegrityError("padding positions must hold zeros")
    if len(s) > 1 and s[0] == "0":
        raise IntegrityError("summation has a leading zero")
    if insertion_position(otp) != pos:
        raise IntegrityError("sum_pos disagrees with the OTP's last digit")
    return otp, int(s)
