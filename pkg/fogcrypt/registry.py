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
Fog-node side of the protocol: a table of per-device sessions keyed by device id, tuple dispatch, staleness
detection and the line-oriented state file.

State file, one device per line, `#` starts a comment:

    id_hex sk_hex mode window e_ctr d_ctr
"""

import os
import tempfile
import threading
from dataclasses import dataclass, field
from typing import Dict, List, Optional, TextIO, Union

from transformers.utils import ModelOutput, logging

from .protocol import (
    DEFAULT_RESYNC_WINDOW,
    DuplicateDeviceError,
    FogCryptConfig,
    FogCryptSession,
    IntegrityError,
    RekeyRequiredError,
    SecretKey,
    StateFileError,
    UnknownDeviceError,
    as_device_id,
    decode_tuple,
    encode_tuple,
)
from .protocol.configuration_fogcrypt import _check_mode_and_window
from .protocol.fogcrypt_utils import DEVICE_ID_SIZE, MAX_COUNTER, SK_SIZE, FogCryptError


logger = logging.get_logger(__name__)

STATE_FILE_HEADER = "# fogcrypt state"


@dataclass
class TupleResult(ModelOutput):
    """
    Result of [`Registry.handle_tuple`].

    Args:
        device_id (`bytes`):
            The 8-byte id the tuple was addressed from.
        payload (`bytes`):
            The decrypted payload.
        skipped (`int`):
            Counters skipped while resynchronizing.
    """

    device_id: bytes
    payload: bytes = None
    skipped: int = None


@dataclass
class DeviceRecord:
    device_id: bytes
    session: FogCryptSession
    last_accepted: int = 0
    accepted_count: int = 0
    rejected_count: int = 0
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)


class Registry:
    r"""
    Per-device sessions of a fog node.

    Tuples for different devices may be handled from different threads; calls touching the same device are
    serialized by the device's lock. [`save_state`] takes every lock.

    Args:
        hash_name (`str`, *optional*, defaults to `"blake2s"`):
            Hash used by every session of this registry.
        mode (`str`, *optional*, defaults to `"dual"`):
            Default counter mode of newly registered devices.
        resync_window (`int`, *optional*, defaults to 1024):
            Default resynchronization window of newly registered devices.
        staleness_threshold (`int`, *optional*, defaults to 64):
            Default threshold of [`stale_devices`].
    """

    def __init__(
        self,
        hash_name: str = "blake2s",
        mode: str = "dual",
        resync_window: int = DEFAULT_RESYNC_WINDOW,
        staleness_threshold: int = 64,
    ):
        _check_mode_and_window(mode, resync_window, staleness_threshold)
        self.hash_name = hash_name
        self.mode = mode
        self.resync_window = resync_window
        self.staleness_threshold = staleness_threshold
        self._devices: Dict[bytes, DeviceRecord] = {}
        self._event_clock = 0
        self._lock = threading.RLock()

    @classmethod
    def from_config(cls, config: FogCryptConfig) -> "Registry":
        config.sanity_check()
        return cls(
            hash_name=config.hash_name,
            mode=config.counter_mode,
            resync_window=config.resync_window,
            staleness_threshold=config.staleness_threshold,
        )

    @property
    def event_clock(self) -> int:
        return self._event_clock

    def __len__(self) -> int:
        return len(self._devices)

    def __contains__(self, device_id) -> bool:
        return as_device_id(device_id) in self._devices

    def device_ids(self) -> List[bytes]:
        with self._lock:
            return list(self._devices)

    def get(self, device_id) -> DeviceRecord:
        device_id = as_device_id(device_id)
        with self._lock:
            record = self._devices.get(device_id)
        if record is None:
            raise UnknownDeviceError(f"unknown device {device_id.hex()}")
        return record

    def stats(self, device_id) -> Dict[str, int]:
        record = self.get(device_id)
        return {
            "last_accepted": record.last_accepted,
            "accepted_count": record.accepted_count,
            "rejected_count": record.rejected_count,
        }

    def register_device(
        self,
        device_id,
        sk: Union[SecretKey, bytes],
        mode: Optional[str] = None,
        resync_window: Optional[int] = None,
        e_ctr: int = 0,
        d_ctr: Optional[int] = None,
    ) -> DeviceRecord:
        device_id = as_device_id(device_id)
        session = FogCryptSession(
            sk,
            mode=self.mode if mode is None else mode,
            resync_window=self.resync_window if resync_window is None else resync_window,
            hash_name=self.hash_name,
            e_ctr=e_ctr,
            d_ctr=d_ctr,
        )
        with self._lock:
            if device_id in self._devices:
                raise DuplicateDeviceError(f"device {device_id.hex()} is already registered")
            record = DeviceRecord(device_id, session, last_accepted=self._event_clock)
            self._devices[device_id] = record
        return record

    def remove_device(self, device_id) -> bool:
        device_id = as_device_id(device_id)
        with self._lock:
            return self._devices.pop(device_id, None) is not None

    def handle_tuple(self, wire: bytes) -> TupleResult:
        """
        Decrypts one tuple. Raises `FramingError` for a wrong length, `UnknownDeviceError` for an unregistered id
        and `IntegrityError` when no counter in the device's window verifies or its decryption counter is exhausted.
        The event clock advances in every case.
        """
        with self._lock:
            self._event_clock += 1
            event = self._event_clock
        device_id, enc = decode_tuple(wire)
        with self._lock:
            record = self._devices.get(device_id)
        if record is None:
            raise UnknownDeviceError(f"unknown device {device_id.hex()}")

        with record.lock:
            try:
                out = record.session.decrypt_with_resync(enc)
            except IntegrityError:
                record.rejected_count += 1
                logger.warning(f"Rejected tuple from device {device_id.hex()} ({record.rejected_count} so far).")
                raise
            except RekeyRequiredError:
                record.rejected_count += 1
                logger.warning(f"Rejected tuple from device {device_id.hex()}: decryption counter exhausted, rekey it.")
                raise IntegrityError() from None
            record.last_accepted = max(record.last_accepted, event)
            record.accepted_count += 1
        if out.skipped:
            logger.info(f"Device {device_id.hex()} resynchronized, skipped={out.skipped}.")
        return TupleResult(device_id=device_id, payload=out.payload, skipped=out.skipped)

    def encrypt_for_device(self, device_id, payload: bytes) -> bytes:
        record = self.get(device_id)
        with record.lock:
            enc = record.session.encrypt_next(payload)
        return encode_tuple(record.device_id, enc)

    def stale_devices(self, threshold: Optional[int] = None) -> List[bytes]:
        """Ids of devices without an accepted message for more than `threshold` processed messages."""
        threshold = self.staleness_threshold if threshold is None else threshold
        if threshold < 0:
            raise ValueError(f"threshold must be non-negative, got {threshold}")
        with self._lock:
            clock = self._event_clock
            return [r.device_id for r in self._devices.values() if clock - r.last_accepted > threshold]

    ###############
    # Persistence
    ###############

    def _render_state(self) -> str:
        lines = [f"{STATE_FILE_HEADER} hash={self.hash_name}", "# id_hex sk_hex mode window e_ctr d_ctr"]
        for record in self._devices.values():
            s = record.session
            lines.append(f"{record.device_id.hex()} {s.sk.hex()} {s.mode} {s.resync_window} {s.e_ctr} {s.d_ctr}")
        return "\n".join(lines) + "\n"

    def save_state(self, sink: Union[str, os.PathLike, TextIO]) -> None:
        """
        Writes the persistent fields of every device. A path is replaced atomically: readers see the old file or the
        new one, never a partial write. Statistics are not persisted.
        """
        with self._lock:
            records = list(self._devices.values())
            for record in records:
                record.lock.acquire()
            try:
                text = self._render_state()
            finally:
                for record in records:
                    record.lock.release()

        if not isinstance(sink, (str, os.PathLike)):
            sink.write(text)
            return

        path = os.fspath(sink)
        directory = os.path.dirname(os.path.abspath(path))
        fd, tmp_path = tempfile.mkstemp(prefix=".fogcrypt-", suffix=".tmp", dir=directory)
        try:
            with os.fdopen(fd, "w", encoding="ascii") as f:
                f.write(text)
                f.flush()
                os.fsync(f.fileno())
            os.replace(tmp_path, path)
        except BaseException:
            if os.path.exists(tmp_path):
                os.unlink(tmp_path)
            raise
        logger.info(f"Saved {len(records)} devices to {path}.")

    @classmethod
    def load_state(cls, source: Union[str, os.PathLike, TextIO], hash_name: str = "blake2s", **kwargs) -> "Registry":
        if isinstance(source, (str, os.PathLike)):
            with open(source, "r", encoding="ascii") as f:
                text = f.read()
            origin = os.fspath(source)
        else:
            text = source.read()
            origin = "<stream>"

        for line in text.splitlines():
            stripped = line.strip()
            if stripped.startswith(STATE_FILE_HEADER):
                for token in stripped[len(STATE_FILE_HEADER) :].split():
                    if token.startswith("hash="):
                        hash_name = token[len("hash=") :]
                    else:
                        logger.warning(f"Ignoring unknown state file directive {token!r}.")
                break

        registry = cls(hash_name=hash_name, **kwargs)
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            device_id, sk, mode, window, e_ctr, d_ctr = _parse_state_line(line, lineno)
            try:
                registry.register_device(device_id, sk, mode=mode, resync_window=window, e_ctr=e_ctr, d_ctr=d_ctr)
            except FogCryptError as e:
                raise StateFileError(f"line {lineno}: {e}") from None
        logger.info(f"Loaded {len(registry)} devices from {origin}.")
        return registry


def _parse_state_line(line: str, lineno: int):
    fields = line.split()
    if len(fields) != 6:
        raise StateFileError(f"line {lineno}: expected 6 fields (id sk mode window e_ctr d_ctr), got {len(fields)}")
    id_hex, sk_hex, mode, window, e_ctr, d_ctr = fields
    try:
        device_id = bytes.fromhex(id_hex)
        sk = bytes.fromhex(sk_hex)
    except ValueError:
        raise StateFileError(f"line {lineno}: id and key must be hex") from None
    if len(device_id) != DEVICE_ID_SIZE:
        raise StateFileError(f"line {lineno}: device id must be {DEVICE_ID_SIZE} bytes, got {len(device_id)}")
    if len(sk) != SK_SIZE:
        raise StateFileError(f"line {lineno}: secret key must be {SK_SIZE} bytes, got {len(sk)}")
    try:
        window, e_ctr, d_ctr = int(window), int(e_ctr), int(d_ctr)
    except ValueError:
        raise StateFileError(f"line {lineno}: window and counters must be decimal integers") from None
    for value in (e_ctr, d_ctr):
        if not 0 <= value <= MAX_COUNTER:
            raise StateFileError(f"line {lineno}: counter {value} outside [0, {MAX_COUNTER}]")
    return device_id, sk, mode, window, e_ctr, d_ctr


def register_device(registry: Registry, device_id, sk, mode=None, resync_window=None) -> DeviceRecord:
    return registry.register_device(device_id, sk, mode=mode, resync_window=resync_window)


def remove_device(registry: Registry, device_id) -> bool:
    return registry.remove_device(device_id)


def handle_tuple(registry: Registry, wire: bytes) -> TupleResult:
    return registry.handle_tuple(wire)


def encrypt_for_device(registry: Registry, device_id, payload: bytes) -> bytes:
    return registry.encrypt_for_device(device_id, payload)


def stale_devices(registry: Registry, threshold: Optional[int] = None) -> List[bytes]:
    return registry.stale_devices(threshold)


def save_state(registry: Registry, sink) -> None:
    registry.save_state(sink)


def load_state(source, hash_name: str = "blake2s") -> Registry:
    return Registry.load_state(source, hash_name=hash_name)
