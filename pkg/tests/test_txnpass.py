import random

import pytest

from otpguard import txnpass
from otpguard.errors import FormatError, IntegrityError
from otpguard.passcode import build_passcode
from otpguard.txnpass import TransactionPassword, decrypt_passcode, generate, verify

TABLE_II = [
    ("891632", "4321", "17103118278"),
    ("621589", "4567", "1881261730088"),
    ("123151", "2234", "1118271261"),
    ("356123", "3458", "272680181827"),
]


@pytest.mark.parametrize("otp,key,password", TABLE_II)
def test_generate_table_ii(paper_key, otp, key, password):
    assert generate(otp, key, paper_key).canonical == password


def test_canonical_is_concatenation(paper_key):
    tp = generate("891632", "4321", paper_key)
    assert tp.cipher_digits == (17, 1, 0, 3, 1, 18, 27, 8)
    assert str(tp) == "17103118278"


class TestVerify:
    def test_match(self, paper_key):
        assert verify("17103118278", "891632", "4321", paper_key)

    def test_single_digit_flip(self, paper_key):
        assert not verify("17103118279", "891632", "4321", paper_key)

    def test_wrong_key(self, paper_key):
        # 9999 sums to 36, giving pass code 83691632
        assert build_passcode("891632", "9999").digits == "83691632"
        assert generate("891632", "9999", paper_key).canonical == "".join(
            str(d ** 3 % 33) for d in [8, 3, 6, 9, 1, 6, 3, 2])
        assert not verify("17103118278", "891632", "9999", paper_key)

    @pytest.mark.parametrize("candidate", ["", "1710a118278", " 17103118278", None])
    def test_format_error(self, paper_key, candidate):
        with pytest.raises(FormatError):
            verify(candidate, "891632", "4321", paper_key)


class TestDecrypt:
    def test_table_iii(self, paper_key):
        tp = TransactionPassword((17, 1, 0, 3, 1, 18, 27, 8))
        assert decrypt_passcode(tp, paper_key) == "81091632"

    def test_empty(self, paper_key):
        assert decrypt_passcode(TransactionPassword(()), paper_key) == ""

    def test_jim(self, paper_key):
        tp = TransactionPassword((18, 8, 1, 26, 17, 3, 0, 0, 8, 8))
        assert decrypt_passcode(tp, paper_key) == "6215890022"

    def test_integrity_error_index(self, paper_key):
        with pytest.raises(IntegrityError) as info:
            decrypt_passcode(TransactionPassword((17, 10)), paper_key)
        assert info.value.index == 1


def test_no_parse_operation():
    assert not any("parse" in name for name in dir(txnpass))
    assert not any("parse" in name for name in dir(TransactionPassword))


def _mutate(rng, digits):
    i = rng.randrange(len(digits))
    return digits[:i] + str((int(digits[i]) + rng.randint(1, 9)) % 10) + digits[i + 1:]


def test_sensitivity(paper_key):
    rng = random.Random(11)
    key_collisions = 0
    for _ in range(10_000):
        otp = f"{rng.randrange(10**6):06d}"
        key = "".join(rng.choice("0123456789") for _ in range(rng.randint(1, 8)))
        base = generate(otp, key, paper_key)
        assert generate(_mutate(rng, otp), key, paper_key).canonical != base.canonical
        other = generate(otp, _mutate(rng, key), paper_key)
        assert other.cipher_digits != base.cipher_digits
        key_collisions += other.canonical == base.canonical
    # concatenation is ambiguous, so a changed key sum occasionally
    # renders to the same string; see test_canonical_collision
    assert key_collisions < 50


def test_canonical_collision(paper_key):
    # 6 -> "18" and (1, 2) -> "1", "8": sums 6 and 12 collide at position 6
    a = generate("131776", "060", paper_key)
    b = generate("131776", "066", paper_key)
    assert a.cipher_digits != b.cipher_digits
    assert a.canonical == b.canonical == "127113131818"
    assert verify("127113131818", "131776", "066", paper_key)


def test_decrypt_round_trip(paper_key):
    rng = random.Random(12)
    for _ in range(2000):
        otp = f"{rng.randrange(10**6):06d}"
        key = "".join(rng.choice("0123456789") for _ in range(rng.randint(1, 8)))
        assert decrypt_passcode(generate(otp, key, paper_key), paper_key) == \
            build_passcode(otp, key).digits
