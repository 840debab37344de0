"""Bank-side authentication service and its wire protocol.

Every request and reply is a :class:`WireMessage`. On a socket each message
travels as a 4-byte big-endian length followed by that many bytes of UTF-8
JSON. The OTP leaves the server only on the SMS channel; the token only in
HTTP replies; the secret key never leaves at all.
"""
from __future__ import annotations

import hashlib
import hmac
import json
import logging
import os
import random
import socket
import socketserver
import struct
import tempfile
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from . import passcode
from .errors import AuthFailed, DuplicateUserError, FormatError, InvalidSession, OtpGuardError
from .otp_service import Clock, ConsumeResult, Mode, OtpRecord, OtpService, SystemClock
from .rsa import PAPER_KEY, RsaKeyPair

log = logging.getLogger(__name__)

KINDS = ("Login", "LoginOk", "Initiate", "SmsOtp", "Confirm", "Result")
HTTP = "Http"
SMS = "Sms"
SECRET_KEY_FIELDS = frozenset({"secret_key", "key", "secret"})
MAX_FRAME = 1 << 20
STATE_ENV = "TXNPASS_STATE"


@dataclass(frozen=True)
class WireMessage:
    kind: str
    via: str
    sender: str
    recipient: str
    fields: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise FormatError(f"unknown message kind {self.kind!r}")
        if self.via not in (HTTP, SMS):
            raise FormatError(f"unknown channel {self.via!r}")
        leaked = SECRET_KEY_FIELDS & set(self.fields)
        if leaked:
            raise FormatError(f"secret key fields may not be sent: {sorted(leaked)}")

    def to_dict(self) -> dict:
        return {"via": self.via, "kind": self.kind, "from": self.sender,
                "to": self.recipient, "fields": dict(self.fields)}

    @classmethod
    def from_dict(cls, d: dict) -> "WireMessage":
        try:
            return cls(d["kind"], d["via"], d["from"], d["to"], dict(d.get("fields", {})))
        except (KeyError, TypeError) as exc:
            raise FormatError(f"malformed message: {exc}") from exc


def encode_frame(msg: WireMessage) -> bytes:
    body = json.dumps(msg.to_dict(), separators=(",", ":")).encode("utf-8")
    return struct.pack(">I", len(body)) + body


def read_frame(stream) -> Optional[WireMessage]:
    """Read one frame from a binary file-like object; None on clean EOF."""
    header = stream.read(4)
    if not header:
        return None
    if len(header) < 4:
        raise FormatError("truncated frame header")
    (size,) = struct.unpack(">I", header)
    if size > MAX_FRAME:
        raise FormatError(f"frame of {size} bytes exceeds limit")
    body = stream.read(size)
    if len(body) < size:
        raise FormatError("truncated frame body")
    try:
        return WireMessage.from_dict(json.loads(body.decode("utf-8")))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"frame is not JSON: {exc}") from exc


class Transcript:
    """Append-only, ordered message log. Optionally mirrored to a JSONL file."""

    def __init__(self, path: Optional[str | os.PathLike] = None):
        self.records: list[dict] = []
        self.path = Path(path) if path else None
        self._lock = threading.Lock()
        if self.path:
            self.path.write_text("")

    def append(self, msg: WireMessage) -> dict:
        with self._lock:
            rec = {"seq": len(self.records), **msg.to_dict()}
            self.records.append(rec)
            if self.path:
                with self.path.open("a") as fh:
                    fh.write(json.dumps(rec) + "\n")
            return rec

    def dumps(self) -> str:
        return "".join(json.dumps(r) + "\n" for r in self.records)


@dataclass
class Enrollment:
    username: str
    salt: str
    pin_hash: str
    iterations: int
    secret_key: str = field(repr=False)
    mobile_number: str = ""

    def check_pin(self, pin: str) -> bool:
        return hmac.compare_digest(_hash_pin(pin, self.salt, self.iterations), self.pin_hash)


@dataclass
class Session:
    session_id: str
    username: str
    machine_id: str
    created_at: float


def _hash_pin(pin: str, salt_hex: str, iterations: int) -> str:
    return hashlib.pbkdf2_hmac("sha256", pin.encode(), bytes.fromhex(salt_hex), iterations).hex()


class AuthServer:
    """Enrollment, login, transaction initiation and confirmation.

    ``rng`` drives OTPs, tokens and session ids, so a seeded ``random.Random``
    makes a run reproducible. Leave it unset outside of simulations.
    SMS messages are handed to ``sms_sink``; replies are returned to the caller.
    """

    def __init__(self, mode: Mode | str = Mode.TXN, rng: Optional[random.Random] = None,
                 clock: Optional[Clock] = None, rsa: RsaKeyPair = PAPER_KEY,
                 state_path: Optional[str | os.PathLike] = None,
                 pin_iterations: int = 100_000, name: str = "bank",
                 gateway: str = "gateway",
                 sms_sink: Optional[Callable[[WireMessage], None]] = None):
        self.mode = Mode(mode)
        self.rng = rng or random.SystemRandom()
        self.clock = clock or SystemClock()
        self.name = name
        self.gateway = gateway
        self.pin_iterations = pin_iterations
        self.sms_sink = sms_sink
        self.state_path = Path(state_path) if state_path else None
        self.enrollments: dict[str, Enrollment] = {}
        self.sessions: dict[str, Session] = {}
        self._lock = threading.RLock()
        self.otp = OtpService(self.clock, self.rng, rsa,
                              is_enrolled=self.enrollments.__contains__,
                              on_change=self._save)
        if self.state_path and self.state_path.exists():
            self._load()

    # persistence

    def _save(self):
        if not self.state_path:
            return
        state = {
            "enrollments": [vars(e) for e in self.enrollments.values()],
            "records": [r.to_dict() for r in self.otp.records.values()],
        }
        fd, tmp = tempfile.mkstemp(dir=self.state_path.parent or ".", prefix=".state-")
        with os.fdopen(fd, "w") as fh:
            json.dump(state, fh, indent=1)
        os.replace(tmp, self.state_path)

    def _load(self):
        state = json.loads(self.state_path.read_text())
        for e in state.get("enrollments", []):
            self.enrollments[e["username"]] = Enrollment(**e)
        for r in state.get("records", []):
            rec = OtpRecord.from_dict(r)
            self.otp.records[rec.username] = rec
            self.otp.history.append(rec)

    # operations

    def enroll(self, username: str, pin: str, secret_key: str, mobile_number: str) -> Enrollment:
        if not username:
            raise FormatError("username required")
        if not pin or not passcode._is_digits(pin):
            raise FormatError("PIN must be decimal digits")
        passcode.validate_key(secret_key)
        with self._lock:
            if username in self.enrollments:
                raise DuplicateUserError(username)
            salt = os.urandom(16).hex()
            e = Enrollment(username, salt, _hash_pin(pin, salt, self.pin_iterations),
                           self.pin_iterations, secret_key, mobile_number)
            self.enrollments[username] = e
            self._save()
        return e

    def login(self, username: str, pin: str, machine_id: str) -> Session:
        e = self.enrollments.get(username)
        # unknown user and bad PIN raise the same error
        if e is None or not isinstance(pin, str) or not e.check_pin(pin):
            raise AuthFailed()
        with self._lock:
            sid = f"{self.rng.getrandbits(64):016x}"
            s = Session(sid, username, machine_id, self.clock.now())
            self.sessions[sid] = s
        return s

    def _session(self, session_id) -> Session:
        s = self.sessions.get(session_id)
        if s is None:
            raise InvalidSession("no such session")
        return s

    def initiate_transaction(self, session_id: str, machine_id: Optional[str] = None
                             ) -> tuple[str, WireMessage]:
        """Issue an OTP for the session's user.

        Returns the token (for the HTTP reply) and the SmsOtp message bound for
        the user's registered mobile. The record is bound to the requesting
        machine, which defaults to the one that logged in.
        """
        s = self._session(session_id)
        e = self.enrollments[s.username]
        key = e.secret_key if self.mode is Mode.TXN else None
        rec = self.otp.issue(s.username, machine_id or s.machine_id, self.mode, key=key)
        sms = WireMessage("SmsOtp", SMS, self.name, self.gateway,
                          {"mobile": e.mobile_number, "otp": rec.otp})
        if self.sms_sink is not None:
            self.sms_sink(sms)
        return rec.token.token_value, sms

    def confirm_transaction(self, session_id: str, presented_password: str,
                            presented_token: str, machine_id: Optional[str] = None
                            ) -> ConsumeResult:
        s = self._session(session_id)
        return self.otp.consume_for(s.username, presented_password, presented_token,
                                    machine_id or s.machine_id)

    # wire dispatch

    def handle(self, msg: WireMessage) -> list[WireMessage]:
        """Process one HTTP request; return the HTTP replies to its sender.

        SMS messages produced along the way go to ``sms_sink``.
        """
        f = msg.fields

        def reply(kind, **fields):
            return [WireMessage(kind, HTTP, self.name, msg.sender, fields)]

        if msg.via != HTTP:
            return reply("Result", status="Error", reason="WrongChannel")
        try:
            if msg.kind == "Login":
                s = self.login(f.get("username"), f.get("pin"), f.get("machine_id"))
                return reply("LoginOk", session_id=s.session_id)
            if msg.kind == "Initiate":
                token, _ = self.initiate_transaction(f.get("session_id"), f.get("machine_id"))
                return reply("Result", status="Initiated", token=token)
            if msg.kind == "Confirm":
                res = self.confirm_transaction(f.get("session_id"), f.get("password"),
                                               f.get("token"), f.get("machine_id"))
                if res.accepted:
                    return reply("Result", status="Accepted")
                return reply("Result", status="Rejected", reason=res.reason.value)
        except AuthFailed:
            return reply("Result", status="Error", reason="AuthFailed")
        except InvalidSession:
            return reply("Result", status="Error", reason="InvalidSession")
        except OtpGuardError as exc:
            log.warning("request failed: %s", type(exc).__name__)
            return reply("Result", status="Error", reason=type(exc).__name__)
        return reply("Result", status="Error", reason="UnsupportedKind")


# socket transport

class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        app: AuthServer = self.server.app
        transcript: Transcript = self.server.transcript
        while True:
            try:
                msg = read_frame(self.rfile)
            except FormatError as exc:
                log.warning("dropping connection: %s", exc)
                return
            if msg is None:
                return
            with self.server.lock:
                transcript.append(msg)
                replies = app.handle(msg)
                for r in replies:
                    transcript.append(r)
            for r in replies:
                self.wfile.write(encode_frame(r))
            self.wfile.flush()


class WireServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address, app: AuthServer, transcript: Optional[Transcript] = None):
        super().__init__(address, _Handler)
        self.app = app
        self.transcript = transcript or Transcript()
        # one writer at a time for the stores and the transcript
        self.lock = threading.Lock()
        if app.sms_sink is None:
            app.sms_sink = self._deliver_sms

    def _deliver_sms(self, msg: WireMessage):
        # no real SMS gateway; the transcript and log stand in for the phone
        self.transcript.append(msg)
        log.info("SMS to %s: %s", msg.fields.get("mobile"), msg.fields.get("otp"))


def parse_address(addr: str) -> tuple[str, int]:
    host, _, port = addr.rpartition(":")
    if not port.isdigit():
        raise ValueError(f"expected host:port, got {addr!r}")
    return host or "127.0.0.1", int(port)


def request(address: tuple[str, int], msg: WireMessage, timeout: float = 5.0) -> WireMessage:
    """Send one request and wait for its single reply."""
    with socket.create_connection(address, timeout=timeout) as sock:
        sock.sendall(encode_frame(msg))
        with sock.makefile("rb") as fh:
            reply = read_frame(fh)
    if reply is None:
        raise ConnectionError("server closed the connection without replying")
    return reply
