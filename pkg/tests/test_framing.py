import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fogcrypt import (
    DATA_SIZE,
    FramingError,
    InputLengthError,
    IntegrityError,
    PayloadTooLongError,
    PlainBlock,
    WireTuple,
    as_device_id,
    decode_tuple,
    deframe_message,
    encode_tuple,
    frame_message,
)


class TestFrameMessage:
    def test_layout(self, sk):
        raw = bytes(frame_message(b"hello", sk))
        assert len(raw) == 64
        assert raw[:5] == b"hello"
        assert raw[5:55] == bytes(50)
        assert raw[55] == 5
        assert raw[56:] == bytes(sk)[:8]

    def test_block_fields(self, sk):
        block = frame_message(b"", sk)
        assert block.length == 0
        assert block.data == bytes(DATA_SIZE)
        assert block.check == sk.check_value

    @pytest.mark.parametrize("length", [0, 1, 54, 55])
    def test_roundtrip_boundaries(self, sk, length):
        payload = bytes(range(length))
        assert deframe_message(frame_message(payload, sk), sk) == payload

    @given(payload=st.binary(max_size=DATA_SIZE))
    @settings(max_examples=200)
    def test_roundtrip(self, payload):
        key = bytes(range(27))
        assert deframe_message(bytes(frame_message(payload, key)), key) == payload

    def test_payload_too_long(self, sk):
        with pytest.raises(PayloadTooLongError):
            frame_message(bytes(56), sk)


class TestDeframeMessage:
    def test_wrong_check(self, sk, other_sk):
        raw = bytes(frame_message(b"hello", sk))
        with pytest.raises(IntegrityError):
            deframe_message(raw, other_sk)

    @pytest.mark.parametrize("length", [56, 100, 255])
    def test_impossible_length(self, sk, length):
        raw = bytearray(bytes(frame_message(b"hello", sk)))
        raw[55] = length
        with pytest.raises(IntegrityError):
            deframe_message(bytes(raw), sk)

    def test_integrity_error_is_opaque(self, sk, other_sk):
        raw = bytearray(bytes(frame_message(b"hello", sk)))
        raw[55] = 200
        with pytest.raises(IntegrityError) as bad_length:
            deframe_message(bytes(raw), sk)
        with pytest.raises(IntegrityError) as bad_check:
            deframe_message(bytes(frame_message(b"hello", sk)), other_sk)
        assert str(bad_length.value) == str(bad_check.value) == "integrity check failed"

    def test_wrong_block_size(self, sk):
        with pytest.raises(InputLengthError):
            deframe_message(bytes(63), sk)
        with pytest.raises(InputLengthError):
            PlainBlock.from_bytes(bytes(65))

    def test_plain_block_from_bytes(self, sk):
        raw = bytes(frame_message(b"abc", sk))
        block = PlainBlock.from_bytes(raw)
        assert block.length == 3
        assert block.to_bytes() == raw


class TestTuples:
    def test_encode(self):
        wire = encode_tuple(1, bytes(64))
        assert len(wire) == 72
        assert wire[:8] == b"\x00" * 7 + b"\x01"

    def test_decode(self):
        enc = bytes(range(64))
        decoded = decode_tuple(encode_tuple("0102030405060708", enc))
        assert isinstance(decoded, WireTuple)
        assert decoded.device_id == bytes.fromhex("0102030405060708")
        assert decoded.enc == enc

    @pytest.mark.parametrize("length", [0, 71, 73, 1024])
    def test_decode_wrong_length(self, length):
        with pytest.raises(FramingError):
            decode_tuple(bytes(length))

    def test_encode_wrong_sizes(self):
        with pytest.raises(InputLengthError):
            encode_tuple(bytes(7), bytes(64))
        with pytest.raises(InputLengthError):
            encode_tuple(bytes(8), bytes(63))

    def test_device_id_forms(self):
        assert as_device_id(0xAA) == as_device_id("00000000000000aa") == bytes(7) + b"\xaa"
        with pytest.raises(InputLengthError):
            as_device_id(2**64)
        with pytest.raises(InputLengthError):
            as_device_id("not hex")
