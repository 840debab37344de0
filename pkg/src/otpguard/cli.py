"""Command line entry point: ``otpguard <command>``.

Exit codes: 0 success, 1 a check failed, 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import random
import sys
from dataclasses import dataclass
from pathlib import Path

from . import mitm, passcode, txnpass
from .errors import FormatError, OtpGuardError, ParameterError
from .otp_service import Mode
from .rsa import RsaKeyPair, decrypt_digit, encrypt_digit, keygen

DEFAULT_CONFIG = "authenticator.json"

# (user, otp, key, transaction password)
GOLDEN_TABLE_II = (
    ("John", "891632", "4321", "17103118278"),
    ("Jim", "621589", "4567", "1881261730088"),
    ("Rusty", "123151", "2234", "1118271261"),
    ("David", "356123", "3458", "272680181827"),
)
# (pass-code digit, ciphertext) for pass code 81091632 under (n=33, e=3, d=7)
GOLDEN_TABLE_III = ((8, 17), (1, 1), (0, 0), (9, 3), (1, 1), (6, 18), (3, 27), (2, 8))
GOLDEN_KEY = {"p": 3, "q": 11, "n": 33, "phi": 20, "e": 3, "d": 7}


@dataclass(frozen=True)
class AuthenticatorConfig:
    """Offline authenticator settings.

    The secret key is stored in clear in the config file. Protect the file.
    """

    secret_key: str
    p: int = 3
    q: int = 11
    d: int = 7

    def __post_init__(self):
        passcode.validate_key(self.secret_key)

    @property
    def rsa(self) -> RsaKeyPair:
        return keygen(self.p, self.q, self.d)

    @classmethod
    def load(cls, path) -> "AuthenticatorConfig":
        data = json.loads(Path(path).read_text())
        cfg = cls(str(data["secret_key"]), int(data.get("p", 3)), int(data.get("q", 11)),
                  int(data.get("d", 7)))
        cfg.rsa  # validate RSA parameters now
        return cfg


def cmd_generate(otp: str, config: AuthenticatorConfig, out=None) -> int:
    try:
        passcode.validate_otp(otp)
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = out or sys.stdout
    print(txnpass.generate(otp, config.secret_key, config.rsa).canonical, file=out)
    return 0


def cmd_tables(out=None, table_ii=GOLDEN_TABLE_II, table_iii=GOLDEN_TABLE_III,
               key_params=GOLDEN_KEY) -> int:
    """Recompute the golden tables and print PASS/FAIL per cell."""
    out = out or sys.stdout
    failures = 0

    def cell(label, got, want):
        nonlocal failures
        ok = got == want
        failures += not ok
        print(f"{'PASS' if ok else 'FAIL'}  {label}: got {got}, expected {want}", file=out)

    key = keygen(3, 11, d=7)
    print("RSA key", file=out)
    for name, want in key_params.items():
        cell(name, getattr(key, name), want)

    print("Table II: transaction passwords", file=out)
    for user, otp, secret, want in table_ii:
        cell(f"{user} {otp}/{secret}", txnpass.generate(otp, secret, key).canonical, want)

    print("Table III: pass code 81091632", file=out)
    pc = passcode.build_passcode("891632", "4321").digits
    cell("pass code", pc, "".join(str(d) for d, _ in table_iii))
    for i, (digit, cipher) in enumerate(table_iii):
        cell(f"[{i}] encrypt {digit}", encrypt_digit(digit, key), cipher)
        cell(f"[{i}] decrypt {cipher}", decrypt_digit(cipher, key), digit)

    print(f"{failures} cell(s) failed" if failures else "all cells PASS", file=out)
    return 1 if failures else 0


def cmd_scenarios(names, seed: int = 0, out_dir=None, out=None) -> int:
    out = out or sys.stdout
    names = list(names)
    if names == ["all"]:
        names = list(mitm.SCENARIOS)
    bad = [n for n in names if n not in mitm.SCENARIOS]
    if bad:
        print(f"error: unknown scenario(s): {', '.join(bad)}; choose from "
              f"{', '.join(mitm.SCENARIOS)} or all", file=sys.stderr)
        return 2
    outcomes = mitm.scenario_matrix(seed, names)
    ok = True
    print(f"{'scenario':<12}{'mode':<7}{'attacker':<10}{'user':<8}{'reasons':<24}check", file=out)
    for o in outcomes:
        good = mitm.matches_expected(o)
        ok &= good
        attacker = "breach" if o.attacker_succeeded else "safe"
        user = "ok" if o.user_succeeded else "-"
        reasons = ",".join(o.rejection_reasons) or "-"
        print(f"{o.scenario:<12}{o.mode:<7}{attacker:<10}{user:<8}{reasons:<24}"
              f"{'PASS' if good else 'FAIL'}", file=out)
    if out_dir is not None:
        d = Path(out_dir)
        d.mkdir(parents=True, exist_ok=True)
        for o in outcomes:
            (d / f"{o.scenario}-{o.mode}.jsonl").write_text(o.transcript_jsonl())
        summary = [o.summary() for o in outcomes]
        (d / "summary.json").write_text(json.dumps(summary, indent=1) + "\n")
    return 0 if ok else 1


def cmd_serve(listen: str, mode: str, seed=None, state=None, transcript=None) -> int:
    from .server import AuthServer, Transcript, WireServer, parse_address

    rng = random.Random(seed) if seed is not None else None
    app = AuthServer(mode, rng=rng, state_path=state)
    server = WireServer(parse_address(listen), app, Transcript(transcript))
    host, port = server.server_address[:2]
    logging.getLogger(__name__).info("listening on %s:%d (mode=%s)", host, port, mode)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def cmd_enroll(state, username, pin, secret_key, mobile) -> int:
    from .server import AuthServer

    if not state:
        print("error: enroll needs --state or $TXNPASS_STATE", file=sys.stderr)
        return 2
    try:
        AuthServer(state_path=state).enroll(username, pin, secret_key, mobile)
    except OtpGuardError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    print(f"enrolled {username}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="otpguard", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="compute a transaction password offline")
    g.add_argument("--otp", required=True)
    g.add_argument("--config", default=DEFAULT_CONFIG,
                   help="JSON with secret_key, p, q, d (default: ./%(default)s)")

    sub.add_parser("tables", help="recompute the golden tables")

    s = sub.add_parser("serve", help="run the bank server")
    s.add_argument("--listen", default="127.0.0.1:8765")
    s.add_argument("--mode", choices=[m.value for m in Mode], default="txn")
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--state", default=os.environ.get("TXNPASS_STATE"))
    s.add_argument("--transcript", default=None, help="JSONL transcript path")

    sc = sub.add_parser("scenarios", help="run attack scenarios")
    sc.add_argument("names", nargs="+", help="scenario names or 'all'")
    sc.add_argument("--seed", type=int, default=0)
    sc.add_argument("--out", default="transcripts", help="transcript directory")

    e = sub.add_parser("enroll", help="add a customer to the server state file")
    e.add_argument("username")
    e.add_argument("--pin", required=True)
    e.add_argument("--secret-key", required=True)
    e.add_argument("--mobile", required=True)
    e.add_argument("--state", default=os.environ.get("TXNPASS_STATE"))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "generate":
        try:
            config = AuthenticatorConfig.load(args.config)
        except FileNotFoundError:
            print(f"error: config file {args.config} not found", file=sys.stderr)
            return 2
        except (KeyError, ValueError, FormatError, ParameterError) as exc:
            print(f"error: bad config: {exc}", file=sys.stderr)
            return 2
        return cmd_generate(args.otp, config)
    if args.command == "tables":
        return cmd_tables()
    if args.command == "scenarios":
        return cmd_scenarios(args.names, args.seed, args.out)
    if args.command == "serve":
        return cmd_serve(args.listen, args.mode, args.seed, args.state, args.transcript)
    if args.command == "enroll":
        return cmd_enroll(args.state, args.username, args.pin, args.secret_key, args.mobile)
    return 2


if __name__ == "__main__":
    sys.exit(main())
