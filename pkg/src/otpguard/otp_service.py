"""OTP issuance and the token/status lifecycle behind the login table.

Each user has at most one live record. A record is Valid (status bit 1)
until it is accepted, found expired, or superseded by a newer issue; after
that it is Expired (status bit 0) for good.
"""
from __future__ import annotations

import enum
import hmac
import logging
import random
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol

from . import passcode, txnpass
from .errors import MissingKeyError, UnknownUserError
from .rsa import PAPER_KEY, RsaKeyPair

log = logging.getLogger(__name__)

OTP_LIFETIME = 300  # seconds, inclusive


class Clock(Protocol):
    def now(self) -> float: ...


class SystemClock:
    def now(self) -> float:
        return time.time()


class ManualClock:
    """Clock that only moves when told to."""

    def __init__(self, start: float = 0.0):
        self._now = float(start)

    def now(self) -> float:
        return self._now

    def advance(self, seconds: float) -> float:
        if seconds < 0:
            raise ValueError("clock cannot run backwards")
        self._now += seconds
        return self._now

    def set(self, t: float) -> None:
        if t < self._now:
            raise ValueError("clock cannot run backwards")
        self._now = float(t)


class Mode(str, enum.Enum):
    PLAIN = "plain"
    TXN = "txn"


class Status(str, enum.Enum):
    VALID = "Valid"
    EXPIRED = "Expired"


class Reason(str, enum.Enum):
    EXPIRED = "Expired"
    TOKEN_MISMATCH = "TokenMismatch"
    MACHINE_MISMATCH = "MachineMismatch"
    BAD_PASSWORD = "BadPassword"
    ALREADY_USED = "AlreadyUsed"


@dataclass(frozen=True)
class ConsumeResult:
    accepted: bool
    reason: Optional[Reason] = None

    def __str__(self):
        return "Accepted" if self.accepted else f"Rejected({self.reason.value})"


ACCEPTED = ConsumeResult(True)


def generate_otp(rng: random.Random) -> str:
    return f"{rng.randrange(10**6):06d}"


@dataclass
class TokenRecord:
    token_value: str
    machine_id: str
    issued_at: float
    status_bit: int = 1


@dataclass
class OtpRecord:
    username: str
    otp: str
    token: TokenRecord
    mode: Mode
    expected_password: Optional[str] = None
    consumed: bool = False
    has_key: bool = field(default=False, repr=False)

    @property
    def status(self) -> Status:
        return Status.VALID if self.token.status_bit == 1 else Status.EXPIRED

    def _expire(self) -> None:
        self.token.status_bit = 0

    def table_row(self) -> dict:
        return {
            "username": self.username,
            "otp": self.otp,
            "secret_key": self.has_key,
            "token": self.token.status_bit,
            "status": self.status.value,
            "transaction_password": self.expected_password,
        }

    def to_dict(self) -> dict:
        return {
            "username": self.username,
            "otp": self.otp,
            "mode": self.mode.value,
            "expected_password": self.expected_password,
            "consumed": self.consumed,
            "has_key": self.has_key,
            "token_value": self.token.token_value,
            "machine_id": self.token.machine_id,
            "issued_at": self.token.issued_at,
            "status_bit": self.token.status_bit,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OtpRecord":
        token = TokenRecord(d["token_value"], d["machine_id"], d["issued_at"], d["status_bit"])
        return cls(d["username"], d["otp"], token, Mode(d["mode"]),
                   d["expected_password"], d["consumed"], d["has_key"])


class OtpService:
    """Record store plus the issue/consume/sweep operations on it.

    Mutations are serialized by a single lock. ``is_enrolled`` lets the
    owner reject unknown users; without it any username is accepted.
    """

    def __init__(self, clock: Optional[Clock] = None, rng: Optional[random.Random] = None,
                 rsa: RsaKeyPair = PAPER_KEY,
                 is_enrolled: Optional[Callable[[str], bool]] = None,
                 on_change: Optional[Callable[[], None]] = None):
        self.clock = clock or SystemClock()
        self.rng = rng or random.SystemRandom()
        self.rsa = rsa
        self.is_enrolled = is_enrolled
        self.on_change = on_change
        self.records: dict[str, OtpRecord] = {}
        self.history: list[OtpRecord] = []
        self._lock = threading.RLock()

    def _changed(self):
        if self.on_change is not None:
            self.on_change()

    def issue(self, username: str, machine_id: str, mode: Mode | str = Mode.TXN,
              key: Optional[str] = None, otp: Optional[str] = None) -> OtpRecord:
        """Issue a fresh OTP bound to ``machine_id``.

        ``otp`` forces the code instead of drawing one; tests use it to
        reproduce known rows.
        """
        mode = Mode(mode)
        if self.is_enrolled is not None and not self.is_enrolled(username):
            raise UnknownUserError(username)
        if mode is Mode.TXN and key is None:
            raise MissingKeyError("transaction-password mode needs the user's secret key")
        with self._lock:
            otp = passcode.validate_otp(otp) if otp is not None else generate_otp(self.rng)
            token = TokenRecord(
                token_value=f"{self.rng.getrandbits(128):032x}",
                machine_id=machine_id,
                issued_at=self.clock.now(),
            )
            expected = txnpass.generate(otp, key, self.rsa).canonical if mode is Mode.TXN else None
            prior = self.records.get(username)
            if prior is not None and prior.status is Status.VALID:
                prior._expire()
            rec = OtpRecord(username, otp, token, mode, expected, has_key=key is not None)
            self.records[username] = rec
            self.history.append(rec)
            log.info("issued OTP record for %s (mode=%s)", username, mode.value)
            self._changed()
            return rec

    def consume(self, record: OtpRecord, presented: str, presented_token: str,
                machine_id: str) -> ConsumeResult:
        """Check a presented password against ``record``.

        Checks run in a fixed order: already used, expired, token, machine,
        password. Acceptance and detected expiry both burn the record; a wrong
        password does not.
        """
        with self._lock:
            if record.consumed:
                return ConsumeResult(False, Reason.ALREADY_USED)
            if record.status is Status.EXPIRED:
                return ConsumeResult(False, Reason.EXPIRED)
            if self.clock.now() - record.token.issued_at > OTP_LIFETIME:
                record._expire()
                self._changed()
                return ConsumeResult(False, Reason.EXPIRED)
            if not _same(presented_token, record.token.token_value):
                return ConsumeResult(False, Reason.TOKEN_MISMATCH)
            if machine_id != record.token.machine_id:
                return ConsumeResult(False, Reason.MACHINE_MISMATCH)
            expected = record.expected_password if record.mode is Mode.TXN else record.otp
            if not _same(presented, expected):
                return ConsumeResult(False, Reason.BAD_PASSWORD)
            record.consumed = True
            record._expire()
            self._changed()
            return ACCEPTED

    def consume_for(self, username: str, presented: str, presented_token: str,
                    machine_id: str) -> ConsumeResult:
        with self._lock:
            rec = self.records.get(username)
            if rec is None:
                return ConsumeResult(False, Reason.TOKEN_MISMATCH)
            return self.consume(rec, presented, presented_token, machine_id)

    def expire_sweep(self) -> int:
        now = self.clock.now()
        flipped = 0
        with self._lock:
            for rec in self.history:
                if rec.status is Status.VALID and now - rec.token.issued_at > OTP_LIFETIME:
                    rec._expire()
                    flipped += 1
            if flipped:
                self._changed()
        return flipped

    def snapshot(self) -> list[dict]:
        """Current records as rows shaped like the login table."""
        with self._lock:
            return [rec.table_row() for rec in self.records.values()]


def _same(a, b) -> bool:
    if not isinstance(a, str) or not isinstance(b, str):
        return False
    return hmac.compare_digest(a.encode("utf-8"), b.encode("utf-8"))
