import pytest
from hypothesis import given, strategies as st

from otpguard.errors import FormatError, IntegrityError
from otpguard.passcode import (PassCode, build_passcode, digit_sum, extract,
                               insertion_position, validate_otp)
from otpguard.rsa import encrypt_digits, keygen

otps = st.text("0123456789", min_size=6, max_size=6)
secret_keys = st.text("0123456789", min_size=1, max_size=8)


def slot_oracle(otp, key):
    """Lay out the pass code slot by slot instead of slicing strings."""
    s = str(sum(map(int, key)))
    pos = int(otp[-1]) or 10
    slots = list(otp) if pos <= 6 else list(otp) + ["0"] * (pos - 7)
    out = []
    for i in range(1, len(slots) + 2):
        if i == pos:
            out.extend(s)
        if i <= len(slots):
            out.append(slots[i - 1])
    return "".join(out)


def table_ii(digits):
    return "".join(map(str, encrypt_digits([int(c) for c in digits], keygen(3, 11, d=7))))


class TestDigitSum:
    def test_examples(self):
        assert digit_sum("4321") == 10
        assert digit_sum("0000") == 0
        assert digit_sum("2234") == 11

    @pytest.mark.parametrize("key", ["", "43a1", "12 3", "4²"])
    def test_rejects(self, key):
        with pytest.raises(FormatError):
            digit_sum(key)


class TestInsertionPosition:
    @pytest.mark.parametrize("otp,pos", [("891632", 2), ("621589", 9), ("123450", 10),
                                         ("000001", 1)])
    def test_examples(self, otp, pos):
        assert insertion_position(otp) == pos

    @pytest.mark.parametrize("otp", ["12345", "1234567", "12a456", 123456])
    def test_bad_otp(self, otp):
        with pytest.raises(FormatError):
            validate_otp(otp)


class TestBuild:
    def test_worked_example(self):
        pc = build_passcode("891632", "4321")
        assert pc.digits == "81091632"
        assert (pc.sum_pos, pc.sum_len) == (2, 2)

    @pytest.mark.parametrize("otp,key,digits,password", [
        ("621589", "4567", "6215890022", "1881261730088"),
        ("123151", "2234", "11123151", "1118271261"),
        ("356123", "3458", "35206123", "272680181827"),
    ])
    def test_derived_rows(self, otp, key, digits, password):
        assert slot_oracle(otp, key) == digits
        assert table_ii(digits) == password
        assert build_passcode(otp, key).digits == digits

    def test_zero_last_digit(self):
        pc = build_passcode("123450", "4321")
        assert pc.digits == "123450" + "000" + "10"
        assert pc.sum_pos == 10


class TestExtract:
    def test_examples(self):
        assert extract(PassCode("81091632", 2, 2)) == ("891632", 10)
        assert extract(PassCode("6215890022", 9, 2)) == ("621589", 22)

    @pytest.mark.parametrize("pc", [
        PassCode("891632", 2, 0),
        PassCode("8109163", 2, 2),
        PassCode("6215891022", 9, 2),    # padding not zero
        PassCode("81091632", 3, 2),      # position disagrees with last digit
        PassCode("80191632", 2, 2),      # summation with leading zero
    ])
    def test_integrity(self, pc):
        with pytest.raises(IntegrityError):
            extract(pc)


@given(otps, secret_keys)
def test_matches_slot_oracle(otp, key):
    assert build_passcode(otp, key).digits == slot_oracle(otp, key)


@given(otps, secret_keys)
def test_round_trip(otp, key):
    assert extract(build_passcode(otp, key)) == (otp, digit_sum(key))


@given(otps, secret_keys)
def test_length_and_position_laws(otp, key):
    pc = build_passcode(otp, key)
    s = str(digit_sum(key))
    p = pc.sum_pos
    assert pc.sum_len == len(s)
    assert len(pc.digits) == (6 + len(s) if p <= 6 else 6 + (p - 7) + len(s))
    assert pc.digits[p - 1 : p - 1 + len(s)] == s
    assert set(pc.digits[6 : p - 1]) <= {"0"}
    assert build_passcode(otp, key) == pc
