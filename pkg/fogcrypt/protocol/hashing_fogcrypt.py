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
""" Hash registry and keystream derivation for fogcrypt."""

import functools
import hashlib
import io
import os
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, NamedTuple, Optional, Tuple, Union

import numpy as np
from transformers.utils import logging

from .fogcrypt_utils import (
    CTR_SIZE,
    DIGEST_SIZE,
    HASH_INPUT_SIZE,
    MAX_COUNTER,
    SK_SIZE,
    CounterOverflowError,
    InputLengthError,
    SecretKey,
    UnknownHashError,
    as_secret_key,
    check_counter,
    counter_to_bytes,
)


logger = logging.get_logger(__name__)


@dataclass(frozen=True)
class HashFn:
    r"""
    A named 32-byte hash usable for keystream derivation.

    Args:
        name (`str`):
            Short identifier used in configs, state files and vector files.
        digest_size (`int`):
            Output size in bytes. Must be 32.
        state_size (`int`):
            Working-state size of a reference implementation in bytes, used as size(H) by the memory accounting.
        length_extension_resistant (`bool`):
            Whether the construction is immune to length-extension attacks.
        new (`Callable[[bytes], object]`):
            A hashlib-style constructor; `new(data).digest()` returns the digest.
    """

    name: str
    digest_size: int
    state_size: int
    length_extension_resistant: bool
    new: Callable

    def __post_init__(self):
        if self.digest_size != DIGEST_SIZE:
            raise ValueError(f"hash {self.name!r} has digest_size {self.digest_size}, expected {DIGEST_SIZE}")
        if self.state_size < 0:
            raise ValueError(f"hash {self.name!r} has a negative state_size")

    def digest(self, data: bytes) -> bytes:
        return self.new(data).digest()


FOGCRYPT_HASH_REGISTRY: Dict[str, HashFn] = {
    "blake2s": HashFn(
        name="blake2s",
        digest_size=32,
        state_size=107,
        length_extension_resistant=True,
        new=functools.partial(hashlib.blake2s, digest_size=32),
    ),
    "sha256": HashFn(
        name="sha256",
        digest_size=32,
        state_size=108,
        length_extension_resistant=False,
        new=hashlib.sha256,
    ),
    "sha3_256": HashFn(
        name="sha3_256",
        digest_size=32,
        state_size=200,
        length_extension_resistant=True,
        new=hashlib.sha3_256,
    ),
}


def register_hash(h: HashFn) -> HashFn:
    existing = FOGCRYPT_HASH_REGISTRY.get(h.name)
    if existing is not None and existing != h:
        raise ValueError(f"a different hash is already registered under {h.name!r}")
    FOGCRYPT_HASH_REGISTRY[h.name] = h
    return h


def available_hashes() -> List[str]:
    return sorted(FOGCRYPT_HASH_REGISTRY)


def get_hash(h: Union[str, HashFn]) -> HashFn:
    if isinstance(h, HashFn):
        return h
    try:
        return FOGCRYPT_HASH_REGISTRY[h]
    except KeyError:
        raise UnknownHashError(f"unknown hash {h!r}; available: {', '.join(available_hashes())}") from None


def hash32(data: bytes, h: Union[str, HashFn] = "blake2s") -> bytes:
    if len(data) != HASH_INPUT_SIZE:
        raise InputLengthError(f"hash input must be {HASH_INPUT_SIZE} bytes, got {len(data)}")
    return get_hash(h).digest(bytes(data))


def derive_keystream(sk: Union[SecretKey, bytes], ctr: int, h: Union[str, HashFn] = "blake2s") -> bytes:
    """
    Returns the 64-byte keystream H(SK' || CTR) || H(SK' || CTR). `sk` is copied into the hash input and never
    modified.
    """
    digest = hash32(bytes(as_secret_key(sk)) + counter_to_bytes(ctr), h)
    return digest + digest


class PrecomputedKeystream(Sequence):
    r"""
    Keystreams for a contiguous counter range, computed ahead of time. Each entry is stored once as its 32-byte
    digest and expanded to the 64-byte keystream on access.

    Args:
        start_ctr (`int`):
            Counter of the first entry.
        digests (`bytes`):
            Concatenated 32-byte digests, `len(digests) == 32 * n`.
        hash_name (`str`):
            Name of the hash the digests were computed with.
    """

    def __init__(self, start_ctr: int, digests: bytes, hash_name: str):
        if len(digests) % DIGEST_SIZE:
            raise InputLengthError(f"digest buffer length {len(digests)} is not a multiple of {DIGEST_SIZE}")
        self.start_ctr = start_ctr
        self.hash_name = hash_name
        self._digests = bytes(digests)

    def __len__(self) -> int:
        return len(self._digests) // DIGEST_SIZE

    def __getitem__(self, index):
        if isinstance(index, slice):
            return [self[i] for i in range(*index.indices(len(self)))]
        n = len(self)
        if index < 0:
            index += n
        if not 0 <= index < n:
            raise IndexError("precomputed keystream index out of range")
        digest = self._digests[index * DIGEST_SIZE : (index + 1) * DIGEST_SIZE]
        return digest + digest

    @property
    def nbytes(self) -> int:
        return len(self._digests)

    @property
    def end_ctr(self) -> int:
        """Last counter covered; `start_ctr - 1` when empty."""
        return self.start_ctr + len(self) - 1

    @property
    def digests(self) -> np.ndarray:
        """Read-only `(n, 32)` uint8 view of the stored digests."""
        return np.frombuffer(self._digests, dtype=np.uint8).reshape(len(self), DIGEST_SIZE)

    def covers(self, ctr: int) -> bool:
        return self.start_ctr <= ctr <= self.end_ctr

    def keystream_for(self, ctr: int) -> bytes:
        if not self.covers(ctr):
            raise IndexError(f"counter {ctr} outside precomputed range [{self.start_ctr}, {self.end_ctr}]")
        return self[ctr - self.start_ctr]


def precompute_keystream(
    sk: Union[SecretKey, bytes],
    start_ctr: int,
    n: int,
    h: Union[str, HashFn] = "blake2s",
) -> PrecomputedKeystream:
    check_counter(start_ctr)
    if n < 0:
        raise ValueError(f"n must be non-negative, got {n}")
    if start_ctr + n - 1 > MAX_COUNTER:
        raise CounterOverflowError(
            f"precomputing {n} keystreams from counter {start_ctr} runs past the last counter {MAX_COUNTER}"
        )
    h = get_hash(h)
    sk_bytes = bytes(as_secret_key(sk))
    digests = b"".join(h.digest(sk_bytes + ctr.to_bytes(CTR_SIZE, "big")) for ctr in range(start_ctr, start_ctr + n))
    return PrecomputedKeystream(start_ctr, digests, h.name)


##################
# Vector files
##################


class KeystreamVector(NamedTuple):
    sk: bytes
    ctr: int
    keystream: bytes


VECTOR_FILE_HEADER = "# fogcrypt keystream vectors"
VECTOR_FILE_FORMAT = "# format: sk_hex ctr_hex keystream_hex"


def generate_vectors(
    h: Union[str, HashFn] = "blake2s",
    count: int = 16,
    sk: Union[SecretKey, bytes, None] = None,
    start_ctr: int = 1,
) -> List[KeystreamVector]:
    """Vectors for counters `start_ctr .. start_ctr + count - 1`; the key defaults to 27 zero bytes."""
    h = get_hash(h)
    sk = as_secret_key(bytes(SK_SIZE) if sk is None else sk)
    pre = precompute_keystream(sk, start_ctr, count, h)
    return [KeystreamVector(bytes(sk), start_ctr + i, ks) for i, ks in enumerate(pre)]


def write_vectors(
    vectors: Iterable[KeystreamVector],
    sink: Union[str, os.PathLike, io.TextIOBase],
    hash_name: str = "blake2s",
) -> None:
    lines = [VECTOR_FILE_HEADER, f"# hash={hash_name}", VECTOR_FILE_FORMAT]
    for v in vectors:
        lines.append(f"{v.sk.hex()} {v.ctr.to_bytes(CTR_SIZE, 'big').hex()} {v.keystream.hex()}")
    text = "\n".join(lines) + "\n"
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "w", encoding="ascii") as f:
            f.write(text)
    else:
        sink.write(text)


def read_vectors(source: Union[str, os.PathLike, io.TextIOBase]) -> Tuple[Optional[str], List[KeystreamVector]]:
    """Parses a vector file. Returns the hash name from the header (or `None`) and the vectors."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="ascii") as f:
            text = f.read()
    else:
        text = source.read()

    hash_name = None
    vectors = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            if line[1:].strip().startswith("hash="):
                hash_name = line[1:].strip()[len("hash=") :]
            continue
        fields = line.split()
        if len(fields) != 3:
            raise ValueError(f"line {lineno}: expected 3 fields, got {len(fields)}")
        try:
            sk, ctr, ks = (bytes.fromhex(x) for x in fields)
        except ValueError as e:
            raise ValueError(f"line {lineno}: {e}") from None
        if len(sk) != SK_SIZE or len(ctr) != CTR_SIZE or len(ks) != 2 * DIGEST_SIZE:
            raise ValueError(f"line {lineno}: field lengths must be {SK_SIZE}, {CTR_SIZE} and {2 * DIGEST_SIZE} bytes")
        ctr = int.from_bytes(ctr, "big")
        if ctr < 1:
            raise ValueError(f"line {lineno}: counter must be at least 1")
        vectors.append(KeystreamVector(sk, ctr, ks))
    return hash_name, vectors


def verify_vectors(source, h: Union[str, HashFn, None] = None) -> List[int]:
    """Recomputes every vector in `source`. Returns the 1-based indices of vectors that do not match."""
    header_hash, vectors = read_vectors(source)
    h = get_hash(h or header_hash or "blake2s")
    mismatches = []
    for i, v in enumerate(vectors, start=1):
        if derive_keystream(v.sk, v.ctr, h) != v.keystream:
            mismatches.append(i)
    if mismatches:
        logger.warning(f"{len(mismatches)} of {len(vectors)} {h.name} vectors do not match")
    return mismatches
