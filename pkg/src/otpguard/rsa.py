"""Textbook RSA over small integers, applied one decimal digit at a time.

With the default parameters (p=3, q=11) this is a 10-entry substitution
table, not encryption in any meaningful sense. It is kept because the
transaction-password scheme is defined this way.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

from .errors import DomainError, IntegrityError, NoInverseError, ParameterError

MAX_MODULUS = 10**6
MIN_MODULUS = 11


def gcd(a: int, b: int) -> int:
    if a < 0 or b < 0:
        raise DomainError("gcd expects non-negative integers")
    if a == 0 and b == 0:
        raise DomainError("gcd(0, 0) is undefined")
    while b:
        a, b = b, a % b
    return a


def _egcd(a: int, b: int) -> tuple[int, int, int]:
    x0, x1, y0, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    return a, x0, y0


def mod_inverse(d: int, phi: int) -> int:
    """Return e in [1, phi) with (e * d) % phi == 1."""
    if phi < 2:
        raise DomainError("modulus for inverse must be >= 2")
    g, x, _ = _egcd(d % phi, phi)
    if g != 1:
        raise NoInverseError(f"{d} has no inverse modulo {phi}")
    return x % phi


def mod_pow(base: int, exponent: int, modulus: int) -> int:
    """Square-and-multiply; every intermediate is reduced below ``modulus``."""
    if modulus < 2:
        raise DomainError("modulus must be >= 2")
    if exponent < 0:
        raise DomainError("exponent must be non-negative")
    result = 1
    base %= modulus
    while exponent:
        if exponent & 1:
            result = (result * base) % modulus
        base = (base * base) % modulus
        exponent >>= 1
    return result % modulus


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n < 4:
        return True
    if n % 2 == 0:
        return False
    for f in range(3, math.isqrt(n) + 1, 2):
        if n % f == 0:
            return False
    return True


@dataclass(frozen=True)
class RsaKeyPair:
    p: int
    q: int
    n: int
    phi: int
    e: int
    d: int

    def __post_init__(self):
        if not (is_prime(self.p) and is_prime(self.q)) or self.p == self.q:
            raise ParameterError("p and q must be distinct primes")
        if self.n != self.p * self.q or self.phi != (self.p - 1) * (self.q - 1):
            raise ParameterError("n or phi inconsistent with p and q")
        if not MIN_MODULUS <= self.n <= MAX_MODULUS:
            raise ParameterError(f"n must lie in [{MIN_MODULUS}, {MAX_MODULUS}]")
        if gcd(self.d, self.phi) != 1 or (self.e * self.d) % self.phi != 1:
            raise ParameterError("e and d are not inverse modulo phi")


def keygen(p: int, q: int, d: Optional[int] = None) -> RsaKeyPair:
    """Build a key pair from two small primes.

    When ``d`` is omitted the smallest d >= 3 coprime to phi is used, so the
    classic (3, 11) pair needs ``d=7`` passed explicitly to get e=3.
    """
    if not is_prime(p):
        raise ParameterError(f"{p} is not prime")
    if not is_prime(q):
        raise ParameterError(f"{q} is not prime")
    if p == q:
        raise ParameterError("p and q must differ")
    n = p * q
    if n < MIN_MODULUS:
        raise ParameterError(f"n={n} is too small to encode ten digits")
    if n > MAX_MODULUS:
        raise ParameterError(f"n={n} exceeds {MAX_MODULUS}")
    phi = (p - 1) * (q - 1)
    if d is None:
        d = 3
        while gcd(d, phi) != 1:
            d += 1
    elif d < 1 or gcd(d, phi) != 1:
        raise ParameterError(f"d={d} is not coprime to phi={phi}")
    e = mod_inverse(d, phi)
    return RsaKeyPair(p=p, q=q, n=n, phi=phi, e=e, d=d)


PAPER_KEY = keygen(3, 11, d=7)


def encrypt_digit(digit: int, key: RsaKeyPair) -> int:
    if not isinstance(digit, int) or not 0 <= digit <= 9:
        raise DomainError(f"plaintext must be a digit 0-9, got {digit!r}")
    return mod_pow(digit, key.e, key.n)


def decrypt_digit(c: int, key: RsaKeyPair) -> int:
    if not 0 <= c < key.n:
        raise DomainError(f"ciphertext {c} outside [0, {key.n})")
    digit = mod_pow(c, key.d, key.n)
    if digit > 9:
        raise IntegrityError(f"ciphertext {c} does not decrypt to a digit")
    return digit


def encrypt_digits(digits: Iterable[int], key: RsaKeyPair) -> list[int]:
    out = []
    for i, digit in enumerate(digits):
        try:
            out.append(encrypt_digit(digit, key))
        except DomainError as exc:
            raise DomainError(f"position {i}: {exc}", index=i) from exc
    return out


def decrypt_digits(ciphertexts: Iterable[int], key: RsaKeyPair) -> list[int]:
    out = []
    for i, c in enumerate(ciphertexts):
        try:
            out.append(decrypt_digit(c, key))
        except IntegrityError as exc:
            raise IntegrityError(f"position {i}: {exc}", index=i) from exc
        except DomainError as exc:
            raise DomainError(f"position {i}: {exc}", index=i) from exc
    return out
