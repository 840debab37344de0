"""Deterministic actor simulation of the SMS-forwarding attack.

Four actors exchange :class:`~otpguard.server.WireMessage` objects through
per-actor FIFO queues: the bank, the SMS gateway, the legitimate user and
(optionally) the attacker. The scheduler visits actors round-robin in id
order and delivers one message per visit, so a run is a pure function of
the scenario name, mode, seed and clock script.

The attacker has phished the user's id and PIN, and malware on the user's
phone copies every SMS to it. The malware is modeled at the gateway, which
sends the attacker a duplicate of each SMS meant for the victim.
"""
from __future__ import annotations

import json
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

from . import passcode, txnpass
from .otp_service import ManualClock, Mode
from .rsa import PAPER_KEY, RsaKeyPair, encrypt_digits
from .server import HTTP, SECRET_KEY_FIELDS, SMS, AuthServer, Transcript, WireMessage

SCENARIOS = ("LegitPlain", "LegitTxn", "MitmPlain", "MitmTxn", "Replay", "Expiry")

BANK, GATEWAY, USER, ATTACKER = "bank", "gateway", "user", "attacker"
USER_MACHINE, ATTACKER_MACHINE = "user-pc", "attacker-pc"
USERNAME = "John"
MOBILE = "+15550000001"
SIM_PIN_ITERATIONS = 1000

_FIXED_MODE = {"LegitPlain": Mode.PLAIN, "LegitTxn": Mode.TXN,
               "MitmPlain": Mode.PLAIN, "MitmTxn": Mode.TXN}
# seconds the confirming actor waits before each Confirm it sends
_DEFAULT_CLOCK = {"Replay": (30, 10), "Expiry": (301,)}


@dataclass(frozen=True)
class AttackerModel:
    knows_credentials: bool = True
    sms_forwarding: bool = True
    knows_secret_key: bool = False
    # Extension: also try the OTP laid out at every insertion position with
    # no key material. Stronger than the forwarding-only attacker.
    brute_force_positions: bool = False

    def __post_init__(self):
        if self.knows_secret_key:
            raise ValueError("no shipped scenario gives the attacker the secret key")


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int = 0
    clock_script: Optional[tuple[float, ...]] = None
    mode: Optional[Mode] = None
    attacker: AttackerModel = AttackerModel()

    def __post_init__(self):
        if self.name not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.name!r}")
        fixed = _FIXED_MODE.get(self.name)
        mode = Mode(self.mode) if self.mode is not None else (fixed or Mode.TXN)
        if fixed is not None and mode is not fixed:
            raise ValueError(f"{self.name} always runs in {fixed.value} mode")
        object.__setattr__(self, "mode", mode)
        if self.clock_script is None:
            object.__setattr__(self, "clock_script", _DEFAULT_CLOCK.get(self.name, (30,)))
        else:
            object.__setattr__(self, "clock_script", tuple(self.clock_script))

    @property
    def has_attacker(self) -> bool:
        return self.name.startswith("Mitm")


@dataclass
class Outcome:
    scenario: str
    mode: str
    attacker_succeeded: bool
    user_succeeded: bool
    transcript: list[dict]
    rejection_reasons: list[str] = field(default_factory=list)

    def transcript_jsonl(self) -> str:
        return "".join(json.dumps(r) + "\n" for r in self.transcript)

    def summary(self) -> dict:
        return {"scenario": self.scenario, "mode": self.mode,
                "attacker_succeeded": self.attacker_succeeded,
                "user_succeeded": self.user_succeeded,
                "rejection_reasons": list(self.rejection_reasons),
                "messages": len(self.transcript)}


class Network:
    def __init__(self, clock: ManualClock):
        self.clock = clock
        self.transcript = Transcript()
        self.actors: dict[str, "Actor"] = {}
        self.queues: dict[str, deque] = {}

    def add(self, actor: "Actor"):
        actor.net = self
        self.actors[actor.actor_id] = actor
        self.queues[actor.actor_id] = deque()

    def send(self, msg: WireMessage):
        self.transcript.append(msg)
        self.queues[msg.recipient].append(msg)

    def run(self, max_steps: int = 10_000):
        order = sorted(self.actors)
        for aid in order:
            self.actors[aid].start()
        steps = 0
        while any(self.queues.values()):
            for aid in order:
                if self.queues[aid]:
                    self.actors[aid].receive(self.queues[aid].popleft())
                    steps += 1
            if steps > max_steps:
                raise RuntimeError("simulation did not quiesce")


class Actor:
    net: Network

    def __init__(self, actor_id: str):
        self.actor_id = actor_id

    def start(self):
        pass

    def receive(self, msg: WireMessage):
        pass

    def http(self, kind: str, **fields):
        self.net.send(WireMessage(kind, HTTP, self.actor_id, BANK, fields))


class BankActor(Actor):
    def __init__(self, server: AuthServer):
        super().__init__(BANK)
        self.server = server

    def start(self):
        self.server.sms_sink = self.net.send

    def receive(self, msg):
        for reply in self.server.handle(msg):
            self.net.send(reply)


class GatewayActor(Actor):
    def __init__(self, directory: dict[str, str], forward_to: Optional[str] = None):
        super().__init__(GATEWAY)
        self.directory = directory
        self.forward_to = forward_to

    def receive(self, msg):
        if msg.kind != "SmsOtp":
            return
        owner = self.directory.get(msg.fields.get("mobile"))
        if owner is None:
            return
        self.net.send(WireMessage("SmsOtp", SMS, GATEWAY, owner, dict(msg.fields)))
        if self.forward_to is not None:
            self.net.send(WireMessage("SmsOtp", SMS, GATEWAY, self.forward_to, dict(msg.fields)))


class _Confirmer(Actor):
    """Shared login -> initiate -> wait for token and SMS -> confirm flow.

    Before its i-th Confirm the actor advances the clock by ``delays[i]``
    (0 once the script runs out). A rejection moves on to the next candidate
    password; an acceptance replays the same request while scripted delays
    remain.
    """

    def __init__(self, actor_id, machine_id, credentials, delays):
        super().__init__(actor_id)
        self.machine_id = machine_id
        self.credentials = credentials
        self.delays = tuple(delays)
        self.sent = 0
        self.session_id = None
        self.token = None
        self.otp = None
        self.attempts: deque = deque()
        self.last_password = None

    def start(self):
        if self.credentials is not None:
            username, pin = self.credentials
            self.http("Login", username=username, pin=pin, machine_id=self.machine_id)

    def candidates(self, otp: str) -> list[str]:
        raise NotImplementedError

    def receive(self, msg):
        f = msg.fields
        if msg.kind == "LoginOk":
            self.session_id = f["session_id"]
            self.http("Initiate", session_id=self.session_id, machine_id=self.machine_id)
        elif msg.kind == "SmsOtp":
            # ignore SMS for transactions this actor did not start
            if self.token is not None and self.otp is None:
                self.otp = f["otp"]
                self.attempts.extend(self.candidates(self.otp))
                self._next()
        elif msg.kind == "Result":
            status = f.get("status")
            if status == "Initiated":
                self.token = f["token"]
            elif status == "Accepted" and self.sent < len(self.delays):
                self._confirm(self.last_password)
            elif status == "Rejected":
                self._next()

    def _next(self):
        if self.attempts:
            self._confirm(self.attempts.popleft())

    def _confirm(self, password):
        delay = self.delays[self.sent] if self.sent < len(self.delays) else 0
        self.net.clock.advance(delay)
        self.sent += 1
        self.last_password = password
        self.http("Confirm", session_id=self.session_id, password=password,
                  token=self.token, machine_id=self.machine_id)


class UserActor(_Confirmer):
    """Legitimate customer: browser, phone, and the offline authenticator app."""

    def __init__(self, username, pin, secret_key, mode: Mode, delays, active=True,
                 rsa: RsaKeyPair = PAPER_KEY):
        super().__init__(USER, USER_MACHINE, (username, pin) if active else None, delays)
        self._secret_key = secret_key
        self.mode = mode
        self.rsa = rsa

    def candidates(self, otp):
        if self.mode is Mode.TXN:
            return [txnpass.generate(otp, self._secret_key, self.rsa).canonical]
        return [otp]


class AttackerActor(_Confirmer):
    """Knows only its AttackerModel fields and the messages it receives."""

    def __init__(self, model: AttackerModel, stolen_credentials, delays,
                 rsa: RsaKeyPair = PAPER_KEY):
        super().__init__(ATTACKER, ATTACKER_MACHINE,
                         stolen_credentials if model.knows_credentials else None, delays)
        self.model = model
        self.rsa = rsa

    def candidates(self, otp):
        out = [otp]
        if self.model.brute_force_positions:
            out.extend(keyless_candidates(otp, self.rsa))
        return list(dict.fromkeys(out))


def keyless_candidates(otp: str, rsa: RsaKeyPair = PAPER_KEY) -> list[str]:
    """Every layout of the bare OTP over insertion positions 1-10, encrypted.

    Without the key there is no summation to insert; what remains is the OTP
    itself plus the zero padding positions 8-10 would add.
    """
    out = []
    for pos in range(1, 11):
        layout = otp if pos <= passcode.OTP_LEN + 1 else otp + "0" * (pos - passcode.OTP_LEN - 1)
        out.append("".join(str(c) for c in encrypt_digits([int(ch) for ch in layout], rsa)))
    return list(dict.fromkeys(out))


def _enrollment_material(seed: int) -> tuple[str, str]:
    r = random.Random(f"enroll-{seed}")
    pin = f"{r.randrange(10**4):04d}"
    key = f"{r.randrange(10**4):04d}"
    return pin, key


def run_scenario(scenario: Scenario | str, seed: Optional[int] = None) -> Outcome:
    if isinstance(scenario, str):
        scenario = Scenario(scenario, seed or 0)
    clock = ManualClock(0.0)
    pin, key = _enrollment_material(scenario.seed)
    server = AuthServer(scenario.mode, rng=random.Random(scenario.seed), clock=clock,
                        pin_iterations=SIM_PIN_ITERATIONS)
    server.enroll(USERNAME, pin, key, MOBILE)

    net = Network(clock)
    net.add(BankActor(server))
    attacker = scenario.attacker if scenario.has_attacker else None
    forward = ATTACKER if attacker is not None and attacker.sms_forwarding else None
    net.add(GatewayActor({MOBILE: USER}, forward_to=forward))
    if attacker is not None:
        net.add(UserActor(USERNAME, pin, key, scenario.mode, scenario.clock_script, active=False))
        net.add(AttackerActor(attacker, (USERNAME, pin), scenario.clock_script))
    else:
        net.add(UserActor(USERNAME, pin, key, scenario.mode, scenario.clock_script))
    net.run()
    return outcome_from_transcript(scenario, net.transcript.records)


def outcome_from_transcript(scenario: Scenario, records: list[dict]) -> Outcome:
    def accepted_for(actor):
        return any(r["kind"] == "Result" and r["to"] == actor
                   and r["fields"].get("status") == "Accepted" for r in records)

    reasons = [r["fields"]["reason"] for r in records
               if r["kind"] == "Result" and r["fields"].get("status") == "Rejected"]
    return Outcome(scenario.name, scenario.mode.value, accepted_for(ATTACKER),
                   accepted_for(USER), list(records), reasons)


# transcript checks

@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    message: str = ""
    index: Optional[int] = None


def _check_channels(records):
    otps = set()
    for i, r in enumerate(records):
        f = r["fields"]
        if "otp" in f:
            if r["via"] != SMS:
                return CheckResult("channel_separation", False, "OTP field on Http", i)
            otps.add(f["otp"])
        if "token" in f and r["via"] != HTTP:
            return CheckResult("channel_separation", False, "token field on Sms", i)
    tokens = {r["fields"]["token"] for r in records if "token" in r["fields"]}
    for i, r in enumerate(records):
        values = {str(v) for v in r["fields"].values()}
        if r["via"] == HTTP and r["from"] == BANK and values & otps:
            return CheckResult("channel_separation", False, "bank sent an OTP over Http", i)
        if r["via"] == SMS and values & tokens:
            return CheckResult("channel_separation", False, "token value on Sms", i)
    return CheckResult("channel_separation", True)


def _check_secret_key(records):
    for i, r in enumerate(records):
        leaked = SECRET_KEY_FIELDS & set(r["fields"])
        if leaked:
            return CheckResult("secret_key_absence", False,
                               f"secret key field {sorted(leaked)[0]!r}", i)
    return CheckResult("secret_key_absence", True)


def _check_ordering(records):
    logged_in, initiated, bank_sms = set(), set(), 0
    for i, r in enumerate(records):
        if r["seq"] != i:
            return CheckResult("ordering", False, f"seq {r['seq']} at position {i}", i)
        kind, f = r["kind"], r["fields"]
        if kind == "LoginOk":
            logged_in.add(r["to"])
        elif kind == "Result" and f.get("status") == "Initiated":
            initiated.add(r["to"])
        elif kind == "Initiate" and r["from"] not in logged_in:
            return CheckResult("ordering", False, "Initiate before LoginOk", i)
        elif kind == "Confirm" and r["from"] not in initiated:
            return CheckResult("ordering", False, "Confirm before token issued", i)
        elif kind == "SmsOtp":
            if r["from"] == BANK:
                bank_sms += 1
            elif bank_sms == 0:
                return CheckResult("ordering", False, "SMS delivered before bank sent it", i)
    return CheckResult("ordering", True)


CHECKS = {"channel_separation": _check_channels,
          "secret_key_absence": _check_secret_key,
          "ordering": _check_ordering}


def assert_transcript(outcome: Outcome, checks: Optional[Iterable[str]] = None
                      ) -> dict[str, CheckResult]:
    names = list(checks) if checks is not None else list(CHECKS)
    return {name: CHECKS[name](outcome.transcript) for name in names}


# matrix

MATRIX_ROWS = (("LegitPlain", Mode.PLAIN), ("LegitTxn", Mode.TXN),
               ("MitmPlain", Mode.PLAIN), ("MitmTxn", Mode.TXN),
               ("Replay", Mode.PLAIN), ("Replay", Mode.TXN),
               ("Expiry", Mode.PLAIN), ("Expiry", Mode.TXN))

# (attacker_succeeded, user_succeeded, rejection reasons)
EXPECTED = {
    ("LegitPlain", "plain"): (False, True, []),
    ("LegitTxn", "txn"): (False, True, []),
    ("MitmPlain", "plain"): (True, False, []),
    ("MitmTxn", "txn"): (False, False, ["BadPassword"]),
    ("Replay", "plain"): (False, True, ["AlreadyUsed"]),
    ("Replay", "txn"): (False, True, ["AlreadyUsed"]),
    ("Expiry", "plain"): (False, False, ["Expired"]),
    ("Expiry", "txn"): (False, False, ["Expired"]),
}


def matches_expected(outcome: Outcome) -> bool:
    want = EXPECTED.get((outcome.scenario, outcome.mode))
    got = (outcome.attacker_succeeded, outcome.user_succeeded, outcome.rejection_reasons)
    return want is not None and got == want and all(
        c.passed for c in assert_transcript(outcome).values())


def scenario_matrix(seed: int = 0, names: Optional[Iterable[str]] = None) -> list[Outcome]:
    wanted = set(names) if names is not None else set(SCENARIOS)
    return [run_scenario(Scenario(name, seed, mode=mode))
            for name, mode in MATRIX_ROWS if name in wanted]
