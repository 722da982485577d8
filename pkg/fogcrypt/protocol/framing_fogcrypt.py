# coding=utf-8
# Copyright 2024 The fogcrypt authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Fixed-size block and tuple codecs.

Plain block (64 bytes):
    ┌────────────────────────────┬──────────┬──────────────────┐
    │ data + zero padding (55B)  │ len (1B) │ check = SK[0:8]  │
    └────────────────────────────┴──────────┴──────────────────┘

Tuple (72 bytes), sent to a fog node:
    ┌──────────────┬──────────────────────────┐
    │ id (8B, BE)  │ encrypted block (64B)    │
    └──────────────┴──────────────────────────┘
"""

import hmac
import struct
from dataclasses import dataclass
from typing import NamedTuple, Union

from .fogcrypt_utils import (
    BLOCK_SIZE,
    CHECK_SIZE,
    DATA_SIZE,
    DEVICE_ID_SIZE,
    TUPLE_SIZE,
    FramingError,
    InputLengthError,
    IntegrityError,
    PayloadTooLongError,
    SecretKey,
    as_device_id,
    as_secret_key,
)


PLAIN_BLOCK_STRUCT = struct.Struct(f">{DATA_SIZE}sB{CHECK_SIZE}s")
LENGTH_OFFSET = DATA_SIZE
CHECK_OFFSET = DATA_SIZE + 1


@dataclass(frozen=True)
class PlainBlock:
    r"""
    A framed plaintext block.

    Args:
        data (`bytes`):
            55 bytes: the payload followed by zero padding.
        length (`int`):
            Number of leading payload bytes in `data`.
        check (`bytes`):
            8-byte integrity check value.
    """

    data: bytes
    length: int
    check: bytes

    def __post_init__(self):
        if len(self.data) != DATA_SIZE:
            raise InputLengthError(f"block data must be {DATA_SIZE} bytes, got {len(self.data)}")
        if not 0 <= self.length <= 0xFF:
            raise InputLengthError(f"length field must fit in one byte, got {self.length}")
        if len(self.check) != CHECK_SIZE:
            raise InputLengthError(f"check value must be {CHECK_SIZE} bytes, got {len(self.check)}")

    def to_bytes(self) -> bytes:
        return PLAIN_BLOCK_STRUCT.pack(self.data, self.length, self.check)

    def __bytes__(self) -> bytes:
        return self.to_bytes()

    @classmethod
    def from_bytes(cls, raw: bytes) -> "PlainBlock":
        if len(raw) != BLOCK_SIZE:
            raise InputLengthError(f"block must be {BLOCK_SIZE} bytes, got {len(raw)}")
        data, length, check = PLAIN_BLOCK_STRUCT.unpack(bytes(raw))
        return cls(data, length, check)


def as_cipher_block(enc: bytes) -> bytes:
    enc = bytes(enc)
    if len(enc) != BLOCK_SIZE:
        raise InputLengthError(f"cipher block must be {BLOCK_SIZE} bytes, got {len(enc)}")
    return enc


def pack_message(payload: bytes, check: bytes) -> bytes:
    """Serialized form of `frame_message`; the session hot path calls this directly."""
    if len(payload) > DATA_SIZE:
        raise PayloadTooLongError(f"payload is {len(payload)} bytes, at most {DATA_SIZE} fit in one block")
    # struct pads the 55s field with zero bytes
    return PLAIN_BLOCK_STRUCT.pack(payload, len(payload), check)


def unpack_message(raw: bytes, check: bytes) -> bytes:
    """Inverse of `pack_message`. Raises `IntegrityError` on a check mismatch or an impossible length."""
    length = raw[LENGTH_OFFSET]
    if not hmac.compare_digest(raw[CHECK_OFFSET:], check) or length > DATA_SIZE:
        raise IntegrityError()
    return raw[:length]


def frame_message(payload: bytes, sk: Union[SecretKey, bytes]) -> PlainBlock:
    payload = bytes(payload)
    if len(payload) > DATA_SIZE:
        raise PayloadTooLongError(f"payload is {len(payload)} bytes, at most {DATA_SIZE} fit in one block")
    return PlainBlock(payload.ljust(DATA_SIZE, b"\x00"), len(payload), as_secret_key(sk).check_value)


def deframe_message(block: Union[PlainBlock, bytes], sk: Union[SecretKey, bytes]) -> bytes:
    raw = bytes(block)
    if len(raw) != BLOCK_SIZE:
        raise InputLengthError(f"block must be {BLOCK_SIZE} bytes, got {len(raw)}")
    return unpack_message(raw, as_secret_key(sk).check_value)


class WireTuple(NamedTuple):
    device_id: bytes
    enc: bytes


def encode_tuple(device_id: Union[bytes, int, str], enc: bytes) -> bytes:
    return as_device_id(device_id) + as_cipher_block(enc)


def decode_tuple(wire: bytes) -> WireTuple:
    wire = bytes(wire)
    if len(wire) != TUPLE_SIZE:
        raise FramingError(f"tuple must be {TUPLE_SIZE} bytes, got {len(wire)}")
    return WireTuple(wire[:DEVICE_ID_SIZE], wire[DEVICE_ID_SIZE:])
