"""
This file contains constants, the error hierarchy and small byte-level helpers shared by the fogcrypt protocol
modules.
"""

import hmac
from typing import Union


SK_SIZE = 27
CTR_SIZE = 5
CHECK_SIZE = 8
HASH_INPUT_SIZE = SK_SIZE + CTR_SIZE
DIGEST_SIZE = 32
BLOCK_SIZE = 2 * DIGEST_SIZE
DATA_SIZE = BLOCK_SIZE - 1 - CHECK_SIZE
DEVICE_ID_SIZE = 8
TUPLE_SIZE = DEVICE_ID_SIZE + BLOCK_SIZE

MAX_COUNTER = 2 ** (8 * CTR_SIZE) - 1
DEFAULT_RESYNC_WINDOW = 1024
MAX_RESYNC_WINDOW = 5_000_000
COUNTER_MODES = ("single", "dual")


##########
# Errors
##########


class FogCryptError(Exception):
    """Base class of every error raised by fogcrypt."""


class InputLengthError(FogCryptError, ValueError):
    pass


class InvalidCounterError(FogCryptError, ValueError):
    pass


class CounterOverflowError(FogCryptError, ValueError):
    pass


class UnknownHashError(FogCryptError, ValueError):
    pass


class PayloadTooLongError(FogCryptError, ValueError):
    pass


class FramingError(FogCryptError, ValueError):
    pass


class DuplicateDeviceError(FogCryptError, ValueError):
    pass


class StateFileError(FogCryptError, ValueError):
    pass


class ConfigurationError(FogCryptError, ValueError):
    pass


class UnknownDeviceError(FogCryptError, KeyError):
    def __str__(self):
        # KeyError quotes its argument, which garbles the message
        return str(self.args[0]) if self.args else "unknown device"


class RekeyRequiredError(FogCryptError):
    pass


class IntegrityError(FogCryptError):
    """
    Raised whenever a received block is rejected. Corruption, forgery and counter mismatch all look the same to
    the caller.
    """

    def __init__(self):
        super().__init__("integrity check failed")


##############
# Secret key
##############


class SecretKey:
    """
    The 27-byte pre-shared secret. Its first 8 bytes double as the integrity check value carried in every block.

    Args:
        key (`bytes`):
            Exactly 27 bytes of key material.
    """

    __slots__ = ("_key",)

    def __init__(self, key: Union[bytes, bytearray, "SecretKey"]):
        if isinstance(key, SecretKey):
            key = bytes(key)
        key = bytes(key)
        if len(key) != SK_SIZE:
            raise InputLengthError(f"secret key must be {SK_SIZE} bytes, got {len(key)}")
        self._key = key

    @classmethod
    def from_hex(cls, value: str) -> "SecretKey":
        try:
            raw = bytes.fromhex(value)
        except ValueError as e:
            raise InputLengthError(f"secret key is not valid hex: {e}") from None
        return cls(raw)

    @property
    def check_value(self) -> bytes:
        return self._key[:CHECK_SIZE]

    def hex(self) -> str:
        return self._key.hex()

    def __bytes__(self) -> bytes:
        return self._key

    def __len__(self) -> int:
        return SK_SIZE

    def __eq__(self, other) -> bool:
        if not isinstance(other, SecretKey):
            return NotImplemented
        return hmac.compare_digest(self._key, other._key)

    def __hash__(self) -> int:
        return hash(self._key)

    def __repr__(self) -> str:
        return "SecretKey(<27 bytes>)"


def as_secret_key(key) -> SecretKey:
    return key if isinstance(key, SecretKey) else SecretKey(key)


###################
# Counter helpers
###################


def check_counter(ctr: int) -> int:
    if not isinstance(ctr, int) or isinstance(ctr, bool):
        raise InvalidCounterError(f"counter must be an int, got {type(ctr).__name__}")
    if ctr < 1 or ctr > MAX_COUNTER:
        raise InvalidCounterError(f"counter must lie in [1, {MAX_COUNTER}], got {ctr}")
    return ctr


def counter_to_bytes(ctr: int) -> bytes:
    """Big-endian, most significant byte first: counter 1 serializes as 00 00 00 00 01."""
    return check_counter(ctr).to_bytes(CTR_SIZE, "big")


def counter_from_bytes(raw: bytes) -> int:
    if len(raw) != CTR_SIZE:
        raise InputLengthError(f"counter must be {CTR_SIZE} bytes, got {len(raw)}")
    return int.from_bytes(raw, "big")


def as_device_id(device_id: Union[bytes, bytearray, int, str]) -> bytes:
    """Normalizes an 8-byte device identifier given as bytes, an unsigned int or a hex string."""
    if isinstance(device_id, int) and not isinstance(device_id, bool):
        if device_id < 0 or device_id >= 2 ** (8 * DEVICE_ID_SIZE):
            raise InputLengthError(f"device id {device_id} does not fit in {DEVICE_ID_SIZE} bytes")
        return device_id.to_bytes(DEVICE_ID_SIZE, "big")
    if isinstance(device_id, str):
        try:
            device_id = bytes.fromhex(device_id)
        except ValueError as e:
            raise InputLengthError(f"device id is not valid hex: {e}") from None
    device_id = bytes(device_id)
    if len(device_id) != DEVICE_ID_SIZE:
        raise InputLengthError(f"device id must be {DEVICE_ID_SIZE} bytes, got {len(device_id)}")
    return device_id


def xor_bytes(a: bytes, b: bytes) -> bytes:
    if len(a) != len(b):
        raise InputLengthError(f"cannot XOR {len(a)} bytes with {len(b)} bytes")
    return (int.from_bytes(a, "big") ^ int.from_bytes(b, "big")).to_bytes(len(a), "big")
