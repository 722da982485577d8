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
"""
Host-side timing of the protocol against AES baselines. Every scheme encrypts and decrypts the same 55-byte payloads.
Timings are medians over several runs after warmup, reported per byte of the 64-byte blocks a run stands for.
"""

import platform
import time
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from tqdm import tqdm
from transformers.utils import ModelOutput, logging

from .netsim import make_rng
from .protocol import (
    BLOCK_SIZE,
    DATA_SIZE,
    SK_SIZE,
    FogCryptSession,
    hash32,
    precompute_keystream,
    xor_bytes,
)
from .protocol.fogcrypt_utils import CTR_SIZE


logger = logging.get_logger(__name__)

BENCH_COLUMNS = [
    "scheme",
    "encrypt_us_per_byte",
    "decrypt_us_per_byte",
    "key_setup_us",
    "blocks",
    "runs",
    "host",
]
KEY_SETUP_ITERATIONS = 1000


@dataclass
class BenchReport(ModelOutput):
    """
    One row of the benchmark table.

    Args:
        scheme (`str`):
            Scheme name.
        encrypt_us_per_byte (`float`):
            Median encryption time per block byte, in microseconds.
        decrypt_us_per_byte (`float`):
            Median decryption time per block byte, in microseconds.
        key_setup_us (`float`, *optional*):
            Mean key-schedule time in microseconds. `None` (written as N/A) for schemes without one.
        blocks (`int`):
            Blocks processed per run.
        runs (`int`):
            Timed runs the medians are taken over.
        host (`str`):
            Platform and interpreter description.
    """

    scheme: str
    encrypt_us_per_byte: float = None
    decrypt_us_per_byte: float = None
    key_setup_us: Optional[float] = None
    blocks: int = None
    runs: int = None
    host: str = None


def host_description() -> str:
    return f"{platform.platform()} {platform.python_implementation()} {platform.python_version()}"


##########
# Schemes
##########


class BenchScheme:
    name = None

    def __init__(self, seed: int = 0):
        self.rng = make_rng(seed)

    @staticmethod
    def from_type(scheme: str, *args, **kwargs) -> "BenchScheme":
        if scheme == "proposed":
            return ProposedScheme(*args, **kwargs)
        elif scheme == "proposed-precomputed":
            return PrecomputedScheme(*args, **kwargs)
        elif scheme == "aes256-ctr":
            return AesCtrScheme(*args, **kwargs)
        elif scheme == "aes256-gcm":
            return AesGcmScheme(*args, **kwargs)
        else:
            raise ValueError(f"Unknown scheme {scheme!r}, expected one of {BENCH_SCHEMES}.")

    def setup(self, blocks: int) -> Optional[float]:
        """Untimed preparation. Returns the key-setup time in microseconds, or `None`."""
        return None

    def reset(self):
        """Restores the state a timed run starts from."""

    def encrypt_all(self, payloads: Sequence[bytes]) -> List[bytes]:
        raise NotImplementedError

    def decrypt_all(self, blocks: Sequence[bytes]) -> List[bytes]:
        raise NotImplementedError


class ProposedScheme(BenchScheme):
    name = "proposed"

    def setup(self, blocks: int) -> Optional[float]:
        self.sk = self.rng.bytes(SK_SIZE)
        return None

    def reset(self):
        self.sender = FogCryptSession(self.sk, resync_window=0)
        self.receiver = FogCryptSession(self.sk, resync_window=0)

    def encrypt_all(self, payloads):
        encrypt = self.sender.encrypt_next
        return [encrypt(p) for p in payloads]

    def decrypt_all(self, blocks):
        decrypt = self.receiver.decrypt_next
        return [decrypt(b) for b in blocks]


class PrecomputedScheme(ProposedScheme):
    """Keystreams are derived during setup; the timed loops only frame and XOR."""

    name = "proposed-precomputed"

    def setup(self, blocks: int) -> Optional[float]:
        super().setup(blocks)
        start = time.perf_counter_ns()
        pre = precompute_keystream(self.sk, 1, blocks)
        self.keystreams = list(pre)
        return (time.perf_counter_ns() - start) / 1e3

    def encrypt_all(self, payloads):
        encrypt = self.sender.encrypt_with
        return [encrypt(p, k) for p, k in zip(payloads, self.keystreams)]

    def decrypt_all(self, blocks):
        decrypt = self.receiver.decrypt_with
        return [decrypt(b, k) for b, k in zip(blocks, self.keystreams)]


class AesCtrScheme(BenchScheme):
    name = "aes256-ctr"

    def setup(self, blocks: int) -> Optional[float]:
        self.key = self.rng.bytes(32)
        self.nonce = self.rng.bytes(16)
        start = time.perf_counter_ns()
        for _ in range(KEY_SETUP_ITERATIONS):
            Cipher(algorithms.AES(self.key), modes.CTR(self.nonce)).encryptor()
        return (time.perf_counter_ns() - start) / 1e3 / KEY_SETUP_ITERATIONS

    def reset(self):
        cipher = Cipher(algorithms.AES(self.key), modes.CTR(self.nonce))
        self.encryptor = cipher.encryptor()
        self.decryptor = cipher.decryptor()

    def encrypt_all(self, payloads):
        update = self.encryptor.update
        return [update(p.ljust(BLOCK_SIZE, b"\x00")) for p in payloads]

    def decrypt_all(self, blocks):
        update = self.decryptor.update
        return [update(b) for b in blocks]


class AesGcmScheme(BenchScheme):
    name = "aes256-gcm"

    def setup(self, blocks: int) -> Optional[float]:
        self.key = self.rng.bytes(32)
        start = time.perf_counter_ns()
        for _ in range(KEY_SETUP_ITERATIONS):
            AESGCM(self.key)
        elapsed = (time.perf_counter_ns() - start) / 1e3 / KEY_SETUP_ITERATIONS
        self.aead = AESGCM(self.key)
        self.nonces = [i.to_bytes(12, "big") for i in range(blocks)]
        return elapsed

    def encrypt_all(self, payloads):
        encrypt = self.aead.encrypt
        return [encrypt(n, p, None) for n, p in zip(self.nonces, payloads)]

    def decrypt_all(self, blocks):
        decrypt = self.aead.decrypt
        return [decrypt(n, b, None) for n, b in zip(self.nonces, blocks)]


BENCH_SCHEMES = ("proposed", "proposed-precomputed", "aes256-ctr", "aes256-gcm")
DEFAULT_SCHEMES = ("proposed", "proposed-precomputed", "aes256-ctr")


###########
# Running
###########


def make_payloads(blocks: int, seed: int = 0) -> List[bytes]:
    data = make_rng(seed).bytes(blocks * DATA_SIZE)
    return [data[i : i + DATA_SIZE] for i in range(0, len(data), DATA_SIZE)]


def bench_scheme(
    scheme: str,
    blocks: int = 100_000,
    runs: int = 5,
    warmup: int = 1,
    seed: int = 0,
    showprogress: bool = False,
) -> BenchReport:
    if blocks < 1 or runs < 1 or warmup < 0:
        raise ValueError("blocks and runs must be positive and warmup non-negative")
    bench = BenchScheme.from_type(scheme, seed=seed)
    payloads = make_payloads(blocks, seed)
    key_setup = bench.setup(blocks)

    encrypt_ns, decrypt_ns = [], []
    for run in tqdm(range(warmup + runs), desc=scheme, disable=not showprogress):
        bench.reset()
        t0 = time.perf_counter_ns()
        enc = bench.encrypt_all(payloads)
        t1 = time.perf_counter_ns()
        bench.decrypt_all(enc)
        t2 = time.perf_counter_ns()
        if run >= warmup:
            encrypt_ns.append(t1 - t0)
            decrypt_ns.append(t2 - t1)

    nbytes = blocks * BLOCK_SIZE
    report = BenchReport(
        scheme=scheme,
        encrypt_us_per_byte=float(np.median(encrypt_ns)) / 1e3 / nbytes,
        decrypt_us_per_byte=float(np.median(decrypt_ns)) / 1e3 / nbytes,
        key_setup_us=key_setup,
        blocks=blocks,
        runs=runs,
        host=host_description(),
    )
    logger.info(
        f"{scheme}: encrypt {report.encrypt_us_per_byte:.5f} us/B, decrypt {report.decrypt_us_per_byte:.5f} us/B"
    )
    return report


def run_bench(
    schemes: Sequence[str] = DEFAULT_SCHEMES,
    blocks: int = 100_000,
    runs: int = 5,
    warmup: int = 1,
    seed: int = 0,
    showprogress: bool = False,
) -> List[BenchReport]:
    unknown = [s for s in schemes if s not in BENCH_SCHEMES]
    if unknown:
        raise ValueError(f"Unknown schemes {unknown}, expected a subset of {BENCH_SCHEMES}.")
    return [bench_scheme(s, blocks, runs, warmup, seed, showprogress) for s in schemes]


def reference_us_per_byte(blocks: int = 100_000, runs: int = 5, seed: int = 0) -> float:
    """Median cost of one bare hash32 call plus a 64-byte XOR, per block byte."""
    rng = make_rng(seed)
    prefix = rng.bytes(SK_SIZE)
    block = rng.bytes(BLOCK_SIZE)
    inputs = [prefix + i.to_bytes(CTR_SIZE, "big") for i in range(1, blocks + 1)]
    timings = []
    for _ in range(runs):
        t0 = time.perf_counter_ns()
        for data in inputs:
            digest = hash32(data)
            xor_bytes(block, digest + digest)
        timings.append(time.perf_counter_ns() - t0)
    return float(np.median(timings)) / 1e3 / (blocks * BLOCK_SIZE)


def reports_to_frame(reports: Sequence[BenchReport]) -> pd.DataFrame:
    rows = [{column: r.get(column) for column in BENCH_COLUMNS} for r in reports]
    return pd.DataFrame(rows, columns=BENCH_COLUMNS)


def write_csv(reports: Sequence[BenchReport], path) -> pd.DataFrame:
    df = reports_to_frame(reports)
    df.to_csv(path, index=False, na_rep="N/A")
    return df
