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
Deterministic adversarial channel. Devices send real tuples through an adversary that can drop, modify, replay,
inject and reorder them before they reach a real [`Registry`]. The harness keeps the ground truth of every payload
so that accepted-but-wrong deliveries can be counted.
"""

import json
import os
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Tuple, Union

import numpy as np
import pandas as pd
from tqdm import tqdm
from transformers.utils import ModelOutput, logging

from .protocol import (
    BLOCK_SIZE,
    DATA_SIZE,
    SK_SIZE,
    AdversaryAction,
    FogCryptSession,
    FramingError,
    IntegrityError,
    ScenarioConfig,
    SecretKey,
    UnknownDeviceError,
    encode_tuple,
    forgery_bound,
    precompute_keystream,
    window_exposure_bytes,
)
from .protocol.fogcrypt_utils import as_secret_key
from .protocol.framing_fogcrypt import CHECK_OFFSET
from .registry import Registry


logger = logging.get_logger(__name__)

SCENARIO_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "scenarios")


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


##########
# Outputs
##########


@dataclass
class ScenarioReport(ModelOutput):
    """
    Outcome of [`run_scenario`]. Every field is a count, a probability or a device id; no payload bytes.

    Args:
        name (`str`):
            Scenario name.
        presented (`int`):
            Tuples handed to the fog node, legitimate or not.
        delivered (`int`):
            Tuples the fog node accepted.
        rejected (`int`):
            Tuples refused for any reason: integrity, framing or unknown device.
        replays_rejected (`int`):
            Replayed tuples among `rejected`.
        undetected_modifications (`int`):
            Accepted tuples whose payload or device differs from what was sent, plus accepted injections.
        desync_events (`int`):
            Times a device's fog-side counter fell behind the counter it had used.
        resync_recoveries (`int`):
            Accepted tuples that needed a non-zero skip.
        max_skipped (`int`):
            Largest skip seen.
        forgery_bound (`float`):
            Chance that one random tuple is accepted, given the window.
        window_exposure_bytes (`int`):
            Ciphertext that can be lost before resynchronization gives up.
        stale_devices (`List[str]`):
            Hex ids reported by [`Registry.stale_devices`] at the end of the run.
    """

    name: str
    presented: int = None
    delivered: int = None
    rejected: int = None
    replays_rejected: int = None
    undetected_modifications: int = None
    desync_events: int = None
    resync_recoveries: int = None
    max_skipped: int = None
    forgery_bound: float = None
    window_exposure_bytes: int = None
    stale_devices: List[str] = None

    def to_json(self, indent: Optional[int] = 2) -> str:
        return json.dumps(dict(self.items()), indent=indent)


@dataclass
class BitflipCensus(ModelOutput):
    """
    Result of [`bitflip_census`].

    Args:
        detected (`np.ndarray` of shape `(512,)`):
            `detected[8 * byte + bit]` is True when flipping that bit of the ciphertext made decryption fail. Bit 0
            is the least significant bit of the byte.
        per_byte (`np.ndarray` of shape `(64,)`):
            Detections per ciphertext byte, 0 to 8.
        detected_count (`int`):
            Total detections.
    """

    detected: np.ndarray
    per_byte: np.ndarray = None
    detected_count: int = None

    def detected_bits(self, byte: int) -> List[int]:
        return [bit for bit in range(8) if self.detected[8 * byte + bit]]


#############
# Adversary
#############


class Delivery(NamedTuple):
    wire: bytes
    kind: str  # "legit", "modified", "replay" or "inject"
    index: Optional[int]


class Adversary:
    """
    Man in the middle between the devices and the fog node. It sees and keeps wire bytes only: no keys, no
    plaintext.
    """

    def __init__(self):
        self.transcript: List[bytes] = []
        self._held: List[Tuple[int, int, bytes]] = []

    def intercept(self, index: int, wire: bytes, action: AdversaryAction) -> List[Delivery]:
        self.transcript.append(wire)
        kind = action.kind
        if kind == "pass":
            return [Delivery(wire, "legit", index)]
        if kind == "drop":
            return []
        if kind == "bitflip":
            modified = bytearray(wire)
            modified[action.byte] ^= 1 << action.bit
            return [Delivery(bytes(modified), "modified", index)]
        if kind == "replay":
            return [Delivery(wire, "legit", index), Delivery(self.transcript[action.index], "replay", action.index)]
        if kind == "inject":
            return [Delivery(wire, "legit", index), Delivery(action.data, "inject", None)]
        if kind == "reorder":
            self._held.append((index + action.displacement, index, wire))
            return []
        raise ValueError(f"unknown adversary action {kind!r}")

    def is_holding(self, index: int) -> bool:
        return any(i == index for _, i, _ in self._held)

    def release(self, index: int) -> List[Delivery]:
        """Held messages due after message `index`, in the order they were held."""
        due = [(i, w) for at, i, w in self._held if at <= index]
        self._held = [h for h in self._held if h[0] > index]
        return [Delivery(w, "legit", i) for i, w in due]

    def flush(self) -> List[Delivery]:
        due = [Delivery(w, "legit", i) for _, i, w in self._held]
        self._held = []
        return due


############
# Payloads
############


def generate_payload(generator: Dict, index: int, rng: np.random.Generator) -> bytes:
    kind = generator["kind"]
    if kind == "random":
        length = int(rng.integers(generator.get("min_len", 0), generator.get("max_len", DATA_SIZE), endpoint=True))
        return rng.bytes(length)
    if kind == "counter":
        return str(index).encode("ascii")
    return bytes.fromhex(generator.get("hex", ""))


###############
# Experiments
###############


def load_scenario(name_or_path: Union[str, os.PathLike]) -> ScenarioConfig:
    """Reads a scenario JSON file, or one of the bundled scenarios by name."""
    path = os.fspath(name_or_path)
    if not os.path.exists(path):
        bundled = os.path.join(SCENARIO_DIR, f"{path}.json")
        if os.path.exists(bundled):
            path = bundled
    return ScenarioConfig.from_json_file(path)


def available_scenarios() -> List[str]:
    return sorted(f[: -len(".json")] for f in os.listdir(SCENARIO_DIR) if f.endswith(".json"))


def run_scenario(scenario: ScenarioConfig, showprogress: bool = False) -> ScenarioReport:
    """
    Plays `scenario` through real sessions and a real registry. The same scenario, seed included, always yields the
    same report. Raises `ConfigurationError` before any message is sent when the scenario is malformed.
    """
    actions = scenario.sanity_check()
    topology = scenario.topology
    mode, window = topology["mode"], topology["window"]
    rng = make_rng(scenario.seed)

    registry = Registry(mode=mode, resync_window=window, staleness_threshold=topology["staleness_threshold"])
    devices = []
    for d in range(topology["devices"]):
        sk = rng.bytes(SK_SIZE)
        device_id = (d + 1).to_bytes(8, "big")
        registry.register_device(device_id, sk)
        devices.append((device_id, FogCryptSession(sk, mode=mode, resync_window=window)))

    logger.info(f"Running scenario {scenario.name!r}: {scenario.message_count} messages, {len(devices)} devices.")

    adversary = Adversary()
    truth: List[Tuple[bytes, bytes, int]] = []
    desynced = set()
    counts = dict(
        presented=0,
        delivered=0,
        rejected=0,
        replays_rejected=0,
        undetected_modifications=0,
        desync_events=0,
        resync_recoveries=0,
        max_skipped=0,
    )

    def deliver(delivery: Delivery):
        counts["presented"] += 1
        try:
            result = registry.handle_tuple(delivery.wire)
        except (IntegrityError, FramingError, UnknownDeviceError):
            counts["rejected"] += 1
            if delivery.kind == "replay":
                counts["replays_rejected"] += 1
            return
        counts["delivered"] += 1
        if delivery.index is None:
            counts["undetected_modifications"] += 1
        else:
            device_id, payload, _ = truth[delivery.index]
            if result.device_id != device_id or result.payload != payload:
                counts["undetected_modifications"] += 1
        if result.skipped:
            counts["resync_recoveries"] += 1
            counts["max_skipped"] = max(counts["max_skipped"], result.skipped)
            desynced.discard(result.device_id)

    for i in tqdm(range(scenario.message_count), disable=not showprogress):
        device_id, sender = devices[i % len(devices)]
        payload = generate_payload(scenario.payload, i, rng)
        wire = encode_tuple(device_id, sender.encrypt_next(payload))
        truth.append((device_id, payload, sender.e_ctr))
        logger.debug(f"message {i}: device {device_id.hex()} e_ctr={sender.e_ctr}")

        for delivery in adversary.intercept(i, wire, actions[i]):
            deliver(delivery)
        for delivery in adversary.release(i):
            deliver(delivery)

        receiver = registry.get(device_id).session
        if receiver.d_ctr < sender.e_ctr and not adversary.is_holding(i) and device_id not in desynced:
            desynced.add(device_id)
            counts["desync_events"] += 1

    for delivery in adversary.flush():
        deliver(delivery)

    report = ScenarioReport(
        name=scenario.name,
        **counts,
        forgery_bound=forgery_bound(window),
        window_exposure_bytes=window_exposure_bytes(window),
        stale_devices=[d.hex() for d in registry.stale_devices()],
    )
    logger.info(
        f"Scenario {scenario.name!r} finished: delivered={report.delivered} rejected={report.rejected} "
        f"undetected={report.undetected_modifications}."
    )
    return report


def format_report(report: ScenarioReport) -> str:
    rows = dict(report.items())
    rows["stale_devices"] = ", ".join(rows.get("stale_devices") or []) or "-"
    return pd.Series(rows, dtype=object).to_string()


def bitflip_census(
    sk: Union[SecretKey, bytes],
    payload: bytes,
    ctr: int = 1,
    hash_name: str = "blake2s",
) -> BitflipCensus:
    """
    Flips each of the 512 ciphertext bits of the block sent under counter `ctr` in turn and tries it on a fresh
    receiver synchronized to that counter.
    """
    sender = FogCryptSession(sk, resync_window=0, hash_name=hash_name, e_ctr=ctr - 1)
    enc = sender.encrypt_next(payload)

    detected = np.zeros(8 * BLOCK_SIZE, dtype=bool)
    for position in range(8 * BLOCK_SIZE):
        flipped = bytearray(enc)
        flipped[position // 8] ^= 1 << (position % 8)
        receiver = FogCryptSession(sk, resync_window=0, hash_name=hash_name, d_ctr=ctr - 1)
        try:
            receiver.decrypt_next(bytes(flipped))
        except IntegrityError:
            detected[position] = True

    per_byte = detected.reshape(BLOCK_SIZE, 8).sum(axis=1)
    return BitflipCensus(detected=detected, per_byte=per_byte, detected_count=int(detected.sum()))


def _window_checks(sk: SecretKey, receiver: FogCryptSession) -> np.ndarray:
    """Check-region values (as uint64) a block must carry to pass under any counter of the receiver's window."""
    start = receiver.d_ctr + 1
    pre = precompute_keystream(sk, start, receiver.resync_window + 1, receiver.hash_name)
    # keystream bytes 56..63 are digest bytes 24..31
    pad = pre.digests[:, CHECK_OFFSET - 32 :]
    check = np.frombuffer(sk.check_value, dtype=np.uint8)
    return np.ascontiguousarray(pad ^ check).view(np.uint64).ravel()


def forgery_trial(
    sk: Union[SecretKey, bytes],
    trials: int,
    window: int = 0,
    seed: int = 0,
    hash_name: str = "blake2s",
    batch_size: int = 1 << 16,
    showprogress: bool = False,
) -> int:
    """
    Feeds `trials` uniformly random 64-byte blocks to a receiver scanning `window` extra counters and returns how
    many it accepts. The expectation is `forgery_bound(window, trials)`.
    """
    sk = as_secret_key(sk)
    receiver = FogCryptSession(sk, resync_window=window, hash_name=hash_name)
    rng = make_rng(seed)
    expected = _window_checks(sk, receiver)
    passes = 0

    remaining = trials
    with tqdm(total=trials, disable=not showprogress) as bar:
        while remaining > 0:
            n = min(batch_size, remaining)
            blocks = np.frombuffer(rng.bytes(n * BLOCK_SIZE), dtype=np.uint8).reshape(n, BLOCK_SIZE)
            checks = np.ascontiguousarray(blocks[:, CHECK_OFFSET:]).view(np.uint64).ravel()
            for row in np.flatnonzero(np.isin(checks, expected)):
                try:
                    receiver.decrypt_with_resync(blocks[row].tobytes())
                except IntegrityError:
                    continue
                passes += 1
                expected = _window_checks(sk, receiver)
            remaining -= n
            bar.update(n)

    if passes:
        logger.warning(f"{passes} of {trials} random blocks passed the integrity check with window {window}.")
    return passes
