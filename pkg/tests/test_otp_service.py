import random
import threading
from collections import Counter

import pytest
from scipy.stats import chisquare

from otpguard.errors import MissingKeyError, UnknownUserError
from otpguard.otp_service import (ManualClock, Mode, OtpService, Reason, Status,
                                  generate_otp)


@pytest.fixture
def clock():
    return ManualClock(1000.0)


@pytest.fixture
def service(clock):
    return OtpService(clock, random.Random(3))


def issue_john(service, **kw):
    return service.issue("John", "pc-1", Mode.TXN, key="4321", otp="891632", **kw)


class TestGenerateOtp:
    def test_seeded_determinism(self):
        a = [generate_otp(random.Random(5)) for _ in range(3)]
        assert len(set(a)) == 1
        r1, r2 = random.Random(9), random.Random(9)
        assert [generate_otp(r1) for _ in range(50)] == [generate_otp(r2) for _ in range(50)]

    def test_shape_and_uniformity(self):
        rng = random.Random(2024)
        draws = [generate_otp(rng) for _ in range(100_000)]
        assert all(len(d) == 6 and d.isascii() and d.isdigit() for d in draws)
        counts = Counter("".join(draws))
        _, p = chisquare([counts[str(i)] for i in range(10)])
        assert p > 0.001

    def test_leading_zeros_possible(self):
        rng = random.Random(1)
        assert any(generate_otp(rng).startswith("0") for _ in range(1000))


class TestIssue:
    def test_table_ii_row(self, service, clock):
        rec = issue_john(service)
        assert rec.expected_password == "17103118278"
        assert rec.token.status_bit == 1 and rec.status is Status.VALID
        assert rec.token.issued_at == clock.now()

    def test_distinct_tokens(self, service):
        a = issue_john(service).token.token_value
        b = issue_john(service).token.token_value
        assert a != b and len(a) == 32

    def test_new_issue_supersedes(self, service):
        first = issue_john(service)
        second = issue_john(service)
        assert first.status is Status.EXPIRED and first.token.status_bit == 0
        assert second.status is Status.VALID

    def test_missing_key(self, service):
        with pytest.raises(MissingKeyError):
            service.issue("John", "pc-1", Mode.TXN)

    def test_unknown_user(self, clock):
        svc = OtpService(clock, random.Random(0), is_enrolled={"John"}.__contains__)
        with pytest.raises(UnknownUserError):
            svc.issue("Mallory", "pc", Mode.PLAIN)

    def test_plain_mode(self, service):
        rec = service.issue("John", "pc-1", "plain")
        assert rec.expected_password is None and rec.mode is Mode.PLAIN


class TestConsume:
    def consume(self, service, rec, **over):
        args = dict(presented="17103118278", presented_token=rec.token.token_value,
                    machine_id="pc-1")
        args.update(over)
        return service.consume(rec, **args)

    @pytest.mark.parametrize("age", [0, 299, 300])
    def test_accept_within_lifetime(self, service, clock, age):
        rec = issue_john(service)
        clock.advance(age)
        assert self.consume(service, rec).accepted

    def test_expired(self, service, clock):
        rec = issue_john(service)
        clock.advance(301)
        res = self.consume(service, rec)
        assert res.reason is Reason.EXPIRED
        assert rec.token.status_bit == 0

    def test_just_past_boundary(self, service, clock):
        rec = issue_john(service)
        clock.advance(300.001)
        assert self.consume(service, rec).reason is Reason.EXPIRED

    def test_replay(self, service):
        rec = issue_john(service)
        assert self.consume(service, rec).accepted
        assert rec.token.status_bit == 0
        assert self.consume(service, rec).reason is Reason.ALREADY_USED

    @pytest.mark.parametrize("over,reason", [
        ({"presented_token": "0" * 32}, Reason.TOKEN_MISMATCH),
        ({"machine_id": "pc-2"}, Reason.MACHINE_MISMATCH),
        ({"presented": "891632"}, Reason.BAD_PASSWORD),
        ({"presented": None}, Reason.BAD_PASSWORD),
    ])
    def test_rejections_do_not_burn(self, service, over, reason):
        rec = issue_john(service)
        assert self.consume(service, rec, **over).reason is reason
        assert rec.status is Status.VALID
        assert self.consume(service, rec).accepted

    def test_reason_order(self, service, clock):
        rec = issue_john(service)
        bad = dict(presented="1", presented_token="x", machine_id="pc-9")
        assert self.consume(service, rec, **bad).reason is Reason.TOKEN_MISMATCH
        clock.advance(400)
        assert self.consume(service, rec, **bad).reason is Reason.EXPIRED

    def test_plain_mode_takes_otp(self, service):
        rec = service.issue("Henry", "pc-1", Mode.PLAIN, otp="764589")
        assert self.consume(service, rec, presented="764589").accepted

    def test_at_most_one_acceptance_under_threads(self, service):
        rec = issue_john(service)
        results = []
        barrier = threading.Barrier(16)

        def worker():
            barrier.wait()
            results.append(self.consume(service, rec))

        threads = [threading.Thread(target=worker) for _ in range(16)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert sum(r.accepted for r in results) == 1
        assert {r.reason for r in results if not r.accepted} == {Reason.ALREADY_USED}

    def test_status_bit_monotone(self, service, clock):
        rec = issue_john(service)
        bits = [rec.token.status_bit]
        for step in range(6):
            clock.advance(100)
            self.consume(service, rec)
            service.expire_sweep()
            bits.append(rec.token.status_bit)
        assert bits[0] == 1
        assert sum(1 for a, b in zip(bits, bits[1:]) if a != b) == 1


class TestSweep:
    def test_empty(self, service):
        assert service.expire_sweep() == 0

    def test_one_old_record(self, service, clock):
        rec = issue_john(service)
        clock.advance(301)
        assert service.expire_sweep() == 1
        assert rec.token.status_bit == 0
        assert service.expire_sweep() == 0

    def test_mixed_ages(self, service, clock):
        service.issue("Old", "pc", Mode.PLAIN)
        clock.advance(300)
        young = service.issue("Young", "pc", Mode.PLAIN)
        clock.advance(100)
        assert service.expire_sweep() == 1
        assert young.status is Status.VALID


def test_snapshot_rows(service):
    issue_john(service)
    service.issue("Henry", "pc", Mode.PLAIN, otp="764589")
    rows = service.snapshot()
    assert rows[0] == {"username": "John", "otp": "891632", "secret_key": True, "token": 1,
                       "status": "Valid", "transaction_password": "17103118278"}
    assert rows[1]["secret_key"] is False
    assert "4321" not in repr(rows) and "4321" not in repr(service.records)
