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
""" Per-peer protocol state: counters, encryption, decryption and resynchronization."""

import hmac
from dataclasses import dataclass
from typing import Dict, Optional, Tuple, Union

from transformers.utils import ModelOutput, logging

from .configuration_fogcrypt import FogCryptConfig, _check_mode_and_window
from .fogcrypt_utils import (
    BLOCK_SIZE,
    CHECK_SIZE,
    CTR_SIZE,
    DATA_SIZE,
    DEFAULT_RESYNC_WINDOW,
    MAX_COUNTER,
    SK_SIZE,
    IntegrityError,
    InvalidCounterError,
    RekeyRequiredError,
    SecretKey,
    as_secret_key,
)
from .framing_fogcrypt import CHECK_OFFSET, LENGTH_OFFSET, as_cipher_block, pack_message
from .hashing_fogcrypt import HashFn, PrecomputedKeystream, get_hash


logger = logging.get_logger(__name__)

LOW_COUNTER_WARNING = 2**20


##########
# Outputs
##########


@dataclass
class ResyncOutput(ModelOutput):
    """
    Result of [`FogCryptSession.decrypt_with_resync`].

    Args:
        payload (`bytes`):
            The recovered payload.
        skipped (`int`):
            How many counters were skipped to find the one that decrypted the block. 0 when the peers were in sync.
    """

    payload: bytes
    skipped: int = None


@dataclass
class MemoryFootprint(ModelOutput):
    """
    Result of [`memory_footprint`], in bytes.

    Args:
        global_bytes (`int`):
            Long-lived storage: hash state, secret key with counter, and the second counter in dual mode.
        peak_local_bytes (`int`):
            The temporary SK' || CTR copy that is hashed.
        total_bytes (`int`):
            `global_bytes + peak_local_bytes`.
    """

    global_bytes: int
    peak_local_bytes: int = None
    total_bytes: int = None


@dataclass
class MemoryParams:
    r"""
    Args:
        hash_state (`int`, *optional*, defaults to 107):
            size(H), the hash working-state size.
        sk_ctr (`int`, *optional*, defaults to 32):
            size(SK || CTR).
        dual (`bool`, *optional*, defaults to `False`):
            Whether a separate 5-byte decryption counter is stored.
    """

    hash_state: int = 107
    sk_ctr: int = SK_SIZE + CTR_SIZE
    dual: bool = False

    def __post_init__(self):
        if self.hash_state < 0 or self.sk_ctr < 0:
            raise ValueError("memory sizes must be non-negative")

    @classmethod
    def from_config(cls, config: FogCryptConfig) -> "MemoryParams":
        state = config.hash_state_size
        if state is None:
            state = get_hash(config.hash_name).state_size
        return cls(hash_state=state, dual=config.counter_mode == "dual")


def memory_footprint(params: MemoryParams) -> MemoryFootprint:
    global_bytes = params.hash_state + params.sk_ctr + (CTR_SIZE if params.dual else 0)
    peak_local = params.sk_ctr
    return MemoryFootprint(
        global_bytes=global_bytes,
        peak_local_bytes=peak_local,
        total_bytes=global_bytes + peak_local,
    )


def forgery_bound(window: int, trials: int = 1) -> float:
    """Upper bound on the chance that `trials` random blocks pass a receiver scanning `window` extra counters."""
    return trials * (window + 1) / 2 ** (8 * CHECK_SIZE)


def window_exposure_bytes(window: int) -> int:
    """Ciphertext volume an adversary could suppress before the receiver stops resynchronizing."""
    return window * BLOCK_SIZE


###########
# Session
###########


class FogCryptSession:
    r"""
    Protocol state for one peer: the shared key, the encryption counter and the decryption counter.

    Counters hold the last value used, starting at 0, and are incremented before use, so the first block of a
    session is encrypted under counter 1. In `"single"` mode both directions share one counter.

    A session is a single-owner state machine: calls on one session must be serialized by the caller.

    Args:
        sk (`SecretKey` or `bytes`):
            The 27-byte pre-shared secret.
        mode (`str`, *optional*, defaults to `"dual"`):
            `"dual"` or `"single"`.
        resync_window (`int`, *optional*, defaults to 1024):
            Extra counters scanned by [`decrypt_with_resync`].
        hash_name (`str`, *optional*, defaults to `"blake2s"`):
            Registered hash used to derive keystreams.
        e_ctr (`int`, *optional*, defaults to 0):
            Last encryption counter used.
        d_ctr (`int`, *optional*):
            Last decryption counter used. Defaults to 0, or to `e_ctr` in single mode where both must be equal.
    """

    def __init__(
        self,
        sk: Union[SecretKey, bytes],
        mode: str = "dual",
        resync_window: int = DEFAULT_RESYNC_WINDOW,
        hash_name: Union[str, HashFn] = "blake2s",
        e_ctr: int = 0,
        d_ctr: Optional[int] = None,
    ):
        _check_mode_and_window(mode, resync_window)
        self._sk = as_secret_key(sk)
        self._key = bytes(self._sk)
        self._check = self._sk.check_value
        self._hash = get_hash(hash_name)
        self._new = self._hash.new
        self.mode = mode
        self.resync_window = resync_window
        self._precomputed: Optional[PrecomputedKeystream] = None
        if d_ctr is None:
            d_ctr = e_ctr if mode == "single" else 0
        self._set_counters(e_ctr, d_ctr)

        if not self._hash.length_extension_resistant:
            logger.warning(
                f"Hash {self._hash.name!r} is not length-extension resistant. Prefer 'blake2s' for deployments."
            )

    @classmethod
    def from_config(cls, sk: Union[SecretKey, bytes], config: FogCryptConfig, **kwargs) -> "FogCryptSession":
        config.sanity_check()
        return cls(
            sk,
            mode=config.counter_mode,
            resync_window=config.resync_window,
            hash_name=config.hash_name,
            **kwargs,
        )

    def _set_counters(self, e_ctr: int, d_ctr: int):
        for value in (e_ctr, d_ctr):
            if not isinstance(value, int) or not 0 <= value <= MAX_COUNTER:
                raise InvalidCounterError(f"counter state must lie in [0, {MAX_COUNTER}], got {value!r}")
        if self.mode == "single" and e_ctr != d_ctr:
            raise InvalidCounterError(f"single-counter session needs e_ctr == d_ctr, got {e_ctr} and {d_ctr}")
        self._e_ctr = e_ctr
        self._d_ctr = d_ctr

    @property
    def sk(self) -> SecretKey:
        return self._sk

    @property
    def hash_name(self) -> str:
        return self._hash.name

    @property
    def e_ctr(self) -> int:
        return self._e_ctr

    @property
    def d_ctr(self) -> int:
        return self._e_ctr if self.mode == "single" else self._d_ctr

    def _commit_d_ctr(self, value: int):
        if self.mode == "single":
            self._e_ctr = value
        else:
            self._d_ctr = value

    def peek_counters(self) -> Tuple[int, int]:
        return self.e_ctr, self.d_ctr

    def counters_remaining(self) -> int:
        return MAX_COUNTER - self._e_ctr

    def attach_keystream(self, pre: Optional[PrecomputedKeystream]):
        """Use `pre` for counters it covers instead of hashing on line. `None` detaches."""
        if pre is not None and pre.hash_name != self._hash.name:
            raise ValueError(f"precomputed keystream uses {pre.hash_name!r}, session uses {self._hash.name!r}")
        self._precomputed = pre

    def keystream(self, ctr: int) -> bytes:
        pre = self._precomputed
        if pre is not None and pre.start_ctr <= ctr <= pre.end_ctr:
            return pre[ctr - pre.start_ctr]
        digest = self._new(self._key + ctr.to_bytes(CTR_SIZE, "big")).digest()
        return digest + digest

    def encrypt_with(self, payload: bytes, keystream: bytes) -> bytes:
        plain = pack_message(payload, self._check)
        return (int.from_bytes(plain, "big") ^ int.from_bytes(keystream, "big")).to_bytes(BLOCK_SIZE, "big")

    def decrypt_with(self, enc: bytes, keystream: bytes) -> Optional[bytes]:
        """Decrypts under an explicit keystream. Returns `None` when the block does not verify."""
        plain = (int.from_bytes(enc, "big") ^ int.from_bytes(keystream, "big")).to_bytes(BLOCK_SIZE, "big")
        length = plain[LENGTH_OFFSET]
        if length > DATA_SIZE or not hmac.compare_digest(plain[CHECK_OFFSET:], self._check):
            return None
        return plain[:length]

    def encrypt_next(self, payload: bytes) -> bytes:
        ctr = self._e_ctr + 1
        if ctr > MAX_COUNTER:
            raise RekeyRequiredError("encryption counter exhausted; the session must be rekeyed")
        # pack before committing the counter so an oversized payload leaves the state unchanged
        enc = self.encrypt_with(payload, self.keystream(ctr))
        self._e_ctr = ctr
        if MAX_COUNTER - ctr == LOW_COUNTER_WARNING:
            logger.warning(f"Only {LOW_COUNTER_WARNING} encryption counters remain before a rekey is required.")
        return enc

    def decrypt_next(self, enc: bytes) -> bytes:
        return self._decrypt_window(enc, 0).payload

    def decrypt_with_resync(self, enc: bytes) -> ResyncOutput:
        return self._decrypt_window(enc, self.resync_window)

    def _decrypt_window(self, enc: bytes, window: int) -> ResyncOutput:
        if len(enc) != BLOCK_SIZE:
            enc = as_cipher_block(enc)
        base = self.d_ctr
        if base >= MAX_COUNTER:
            raise RekeyRequiredError("decryption counter exhausted; the session must be rekeyed")
        last = min(base + 1 + window, MAX_COUNTER)
        # one keystream at a time; nothing is committed until a candidate verifies
        for ctr in range(base + 1, last + 1):
            payload = self.decrypt_with(enc, self.keystream(ctr))
            if payload is not None:
                self._commit_d_ctr(ctr)
                skipped = ctr - base - 1
                if skipped:
                    logger.info(f"Resynchronized after skipping {skipped} counters.")
                return ResyncOutput(payload=payload, skipped=skipped)
        raise IntegrityError()

    def state_dict(self) -> Dict:
        return {
            "sk": self._sk,
            "mode": self.mode,
            "resync_window": self.resync_window,
            "hash_name": self.hash_name,
            "e_ctr": self.e_ctr,
            "d_ctr": self.d_ctr,
        }

    def load_state_dict(self, state: Dict):
        if as_secret_key(state["sk"]) != self._sk or state.get("hash_name", self.hash_name) != self.hash_name:
            raise ValueError("state belongs to a different key or hash")
        mode = state.get("mode", self.mode)
        window = state.get("resync_window", self.resync_window)
        _check_mode_and_window(mode, window)
        previous = (self.mode, self._e_ctr, self._d_ctr)
        self.mode = mode
        try:
            self._set_counters(state["e_ctr"], state["d_ctr"])
        except InvalidCounterError:
            self.mode, self._e_ctr, self._d_ctr = previous
            raise
        self.resync_window = window

    def __repr__(self) -> str:
        return (
            f"FogCryptSession(mode={self.mode!r}, hash={self.hash_name!r}, resync_window={self.resync_window}, "
            f"e_ctr={self.e_ctr}, d_ctr={self.d_ctr})"
        )


def new_session(
    sk: Union[SecretKey, bytes],
    mode: str = "dual",
    resync_window: int = DEFAULT_RESYNC_WINDOW,
    hash_name: str = "blake2s",
) -> FogCryptSession:
    return FogCryptSession(sk, mode=mode, resync_window=resync_window, hash_name=hash_name)


def encrypt_next(session: FogCryptSession, payload: bytes) -> bytes:
    return session.encrypt_next(payload)


def decrypt_next(session: FogCryptSession, enc: bytes) -> bytes:
    return session.decrypt_next(enc)


def decrypt_with_resync(session: FogCryptSession, enc: bytes) -> ResyncOutput:
    return session.decrypt_with_resync(enc)


def peek_counters(session: FogCryptSession) -> Tuple[int, int]:
    return session.peek_counters()


def counters_remaining(session: FogCryptSession) -> int:
    return session.counters_remaining()
