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
""" fogcrypt protocol and scenario configuration"""

import functools
from dataclasses import dataclass
from typing import Dict, List, Optional, Union

from transformers.configuration_utils import PretrainedConfig
from transformers.utils import logging

from .fogcrypt_utils import (
    COUNTER_MODES,
    DATA_SIZE,
    DEFAULT_RESYNC_WINDOW,
    MAX_RESYNC_WINDOW,
    TUPLE_SIZE,
    ConfigurationError,
)


logger = logging.get_logger(__name__)

MAX_INJECT_SIZE = 1024
SCENARIO_FIELDS = ("name", "seed", "message_count", "payload", "schedule", "topology")


@functools.lru_cache(maxsize=None)
def _base_config_keys() -> frozenset:
    """Keys every `PretrainedConfig` serializes, whatever the subclass."""
    return frozenset(PretrainedConfig().to_dict())


def _check_mode_and_window(mode, window, threshold=0):
    if mode not in COUNTER_MODES:
        raise ConfigurationError(f"counter mode must be one of {COUNTER_MODES}, got {mode!r}")
    if not isinstance(window, int) or not 0 <= window <= MAX_RESYNC_WINDOW:
        raise ConfigurationError(f"resync window must be an int in [0, {MAX_RESYNC_WINDOW}], got {window!r}")
    if not isinstance(threshold, int) or threshold < 0:
        raise ConfigurationError(f"staleness threshold must be a non-negative int, got {threshold!r}")


class FogCryptConfig(PretrainedConfig):
    r"""
    This is the configuration class to store the protocol parameters shared by a [`FogCryptSession`] and a fog
    [`Registry`]. Instantiating a configuration with the defaults yields BLAKE2s keystreams, dual counters and a
    1024-counter resynchronization window.

    Args:
        hash_name (`str`, *optional*, defaults to `"blake2s"`):
            Name of the registered 32-byte hash used to derive keystreams.
        counter_mode (`str`, *optional*, defaults to `"dual"`):
            `"dual"` keeps separate encryption and decryption counters so that both peers can send at the same
            time. `"single"` shares one counter for both directions.
        resync_window (`int`, *optional*, defaults to 1024):
            Number of counters above the current decryption counter a fog node scans to recover from dropped
            messages. 0 disables resynchronization. At most 5,000,000.
        hash_state_size (`int`, *optional*):
            Overrides the working-state size of the hash used in memory accounting. When unset, the registry
            value of `hash_name` is used (107 bytes for BLAKE2s).
        staleness_threshold (`int`, *optional*, defaults to 64):
            Number of processed messages after which a device without an accepted message is reported stale.

    Example:

    ```python
    >>> from fogcrypt import FogCryptConfig, FogCryptSession

    >>> configuration = FogCryptConfig(resync_window=16)
    >>> session = FogCryptSession.from_config(bytes(27), configuration)
    ```"""

    model_type = "fogcrypt"

    def __init__(
        self,
        hash_name: str = "blake2s",
        counter_mode: str = "dual",
        resync_window: int = DEFAULT_RESYNC_WINDOW,
        hash_state_size: Optional[int] = None,
        staleness_threshold: int = 64,
        **kwargs,
    ):
        super().__init__(**kwargs)

        self.hash_name = hash_name
        self.counter_mode = counter_mode
        self.resync_window = resync_window
        self.hash_state_size = hash_state_size
        self.staleness_threshold = staleness_threshold

    def sanity_check(self) -> "FogCryptConfig":
        from .hashing_fogcrypt import get_hash

        _check_mode_and_window(self.counter_mode, self.resync_window, self.staleness_threshold)
        get_hash(self.hash_name)
        if self.hash_state_size is not None and self.hash_state_size < 0:
            raise ConfigurationError(f"hash_state_size must be non-negative, got {self.hash_state_size}")
        return self


######################
# Adversary actions
######################


@dataclass(frozen=True)
class AdversaryAction:
    r"""
    What the adversary does with one legitimate message.

    Args:
        kind (`str`):
            One of `"pass"`, `"drop"`, `"bitflip"`, `"replay"`, `"inject"`, `"reorder"`.
        byte (`int`, *optional*):
            Byte index of the wire tuple to modify (`bitflip`).
        bit (`int`, *optional*):
            Bit index within `byte`, 0 being the least significant bit (`bitflip`).
        index (`int`, *optional*):
            Index of the earlier message whose wire bytes are sent again (`replay`).
        data (`bytes`, *optional*):
            Raw bytes delivered after the legitimate message (`inject`).
        displacement (`int`, *optional*):
            Number of later messages the message is held behind (`reorder`).
    """

    kind: str
    byte: Optional[int] = None
    bit: Optional[int] = None
    index: Optional[int] = None
    data: Optional[bytes] = None
    displacement: Optional[int] = None

    @classmethod
    def pass_(cls) -> "AdversaryAction":
        return cls("pass")

    @classmethod
    def drop(cls) -> "AdversaryAction":
        return cls("drop")

    @classmethod
    def bitflip(cls, byte: int, bit: int) -> "AdversaryAction":
        return cls("bitflip", byte=byte, bit=bit)

    @classmethod
    def replay(cls, index: int) -> "AdversaryAction":
        return cls("replay", index=index)

    @classmethod
    def inject(cls, data: bytes) -> "AdversaryAction":
        return cls("inject", data=bytes(data))

    @classmethod
    def reorder(cls, displacement: int) -> "AdversaryAction":
        return cls("reorder", displacement=displacement)

    @classmethod
    def parse(cls, obj: Union[str, Dict], position: int = 0) -> "AdversaryAction":
        """
        Reads the JSON encoding of an action scheduled for message `position`, checking its bounds. `replay_back`
        offsets are resolved against `position`.
        """
        if isinstance(obj, str):
            if obj in ("pass", "drop"):
                return cls(obj)
            raise ConfigurationError(f"message {position}: unknown action {obj!r}")
        if not isinstance(obj, dict) or len(obj) != 1:
            raise ConfigurationError(f"message {position}: an action is a string or a single-key object, got {obj!r}")

        (key, value), = obj.items()
        if key == "bitflip":
            if not isinstance(value, (list, tuple)) or len(value) != 2 or not all(isinstance(v, int) for v in value):
                raise ConfigurationError(f"message {position}: bitflip takes [byte, bit], got {value!r}")
            byte, bit = value
            if not 0 <= byte < TUPLE_SIZE or not 0 <= bit < 8:
                raise ConfigurationError(f"message {position}: bitflip position ({byte}, {bit}) outside the tuple")
            return cls.bitflip(byte, bit)
        if key in ("replay", "replay_back"):
            if not isinstance(value, int) or value < 0:
                raise ConfigurationError(f"message {position}: {key} takes a non-negative int, got {value!r}")
            index = value if key == "replay" else position - value
            if not 0 <= index <= position:
                raise ConfigurationError(
                    f"message {position}: replay must reference a message already transmitted, got {index}"
                )
            return cls.replay(index)
        if key == "inject":
            try:
                data = bytes.fromhex(value)
            except (TypeError, ValueError):
                raise ConfigurationError(f"message {position}: inject takes a hex string") from None
            if len(data) > MAX_INJECT_SIZE:
                raise ConfigurationError(f"message {position}: injected data exceeds {MAX_INJECT_SIZE} bytes")
            return cls.inject(data)
        if key == "reorder":
            if not isinstance(value, int) or value < 1:
                raise ConfigurationError(f"message {position}: reorder takes a positive displacement, got {value!r}")
            return cls.reorder(value)
        raise ConfigurationError(f"message {position}: unknown action {key!r}")

    def to_json(self) -> Union[str, Dict]:
        if self.kind in ("pass", "drop"):
            return self.kind
        if self.kind == "bitflip":
            return {"bitflip": [self.byte, self.bit]}
        if self.kind == "replay":
            return {"replay": self.index}
        if self.kind == "inject":
            return {"inject": self.data.hex()}
        return {"reorder": self.displacement}


class ScenarioConfig(PretrainedConfig):
    r"""
    This is the configuration class describing one adversarial channel experiment run by [`run_scenario`].
    Scenario files are JSON documents with the same fields and are read with
    [`~PretrainedConfig.from_json_file`].

    Args:
        name (`str`, *optional*, defaults to `""`):
            Free-form scenario name, echoed in the report.
        seed (`int`, *optional*, defaults to 0):
            Seed of the PCG64 generator that draws keys and payloads.
        message_count (`int`, *optional*, defaults to 0):
            Number of legitimate messages the devices send.
        payload (`dict`, *optional*):
            Payload generator: `{"kind": "random", "min_len": 0, "max_len": 55}` (default), `{"kind": "counter"}`
            (ASCII message index) or `{"kind": "fixed", "hex": "..."}`.
        schedule (`list` or `dict`, *optional*):
            Adversary actions, either one entry per message or `{"default": action, "overrides": {"i": action}}`.
            Defaults to passing every message.
        topology (`dict`, *optional*):
            `devices` (default 1), `mode` (default `"dual"`), `window` (default 1024) and `staleness_threshold`
            (default 64).
    """

    model_type = "fogcrypt_scenario"

    def __init__(
        self,
        name: str = "",
        seed: int = 0,
        message_count: int = 0,
        payload: Optional[Dict] = None,
        schedule: Union[List, Dict, None] = None,
        topology: Optional[Dict] = None,
        **kwargs,
    ):
        super().__init__(**kwargs)

        if payload is None:
            payload = {"kind": "random", "min_len": 0, "max_len": DATA_SIZE}
        if schedule is None:
            schedule = {"default": "pass"}
        if topology is None:
            topology = {}

        self.name = name
        self.seed = seed
        self.message_count = message_count
        self.payload = payload
        self.schedule = schedule
        self.topology = {
            "devices": 1,
            "mode": "dual",
            "window": DEFAULT_RESYNC_WINDOW,
            "staleness_threshold": 64,
            **topology,
        }

    def expand_schedule(self) -> List[AdversaryAction]:
        schedule = self.schedule
        if isinstance(schedule, dict):
            unknown = set(schedule) - {"default", "overrides"}
            if unknown:
                raise ConfigurationError(f"unknown schedule keys: {sorted(unknown)}")
            overrides = {}
            for key, action in (schedule.get("overrides") or {}).items():
                try:
                    i = int(key)
                except ValueError:
                    raise ConfigurationError(f"schedule override key {key!r} is not a message index") from None
                if not 0 <= i < self.message_count:
                    raise ConfigurationError(f"schedule override {i} outside [0, {self.message_count})")
                overrides[i] = action
            default = schedule.get("default", "pass")
            schedule = [overrides.get(i, default) for i in range(self.message_count)]
        if not isinstance(schedule, list):
            raise ConfigurationError("schedule must be a list or an object")
        if len(schedule) != self.message_count:
            raise ConfigurationError(
                f"schedule has {len(schedule)} entries but message_count is {self.message_count}"
            )
        return [AdversaryAction.parse(obj, position=i) for i, obj in enumerate(schedule)]

    def sanity_check(self) -> List[AdversaryAction]:
        """Checks the whole scenario and returns the expanded schedule. Raises `ConfigurationError`."""
        unknown = set(self.to_dict()) - set(SCENARIO_FIELDS) - _base_config_keys()
        if unknown:
            raise ConfigurationError(f"unknown scenario keys: {sorted(unknown)}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigurationError(f"seed must be a non-negative int, got {self.seed!r}")
        if not isinstance(self.message_count, int) or self.message_count < 0:
            raise ConfigurationError(f"message_count must be a non-negative int, got {self.message_count!r}")

        topology = self.topology
        unknown = set(topology) - {"devices", "mode", "window", "staleness_threshold"}
        if unknown:
            raise ConfigurationError(f"unknown topology keys: {sorted(unknown)}")
        if not isinstance(topology["devices"], int) or topology["devices"] < 1:
            raise ConfigurationError(f"topology needs at least one device, got {topology['devices']!r}")
        _check_mode_and_window(topology["mode"], topology["window"], topology["staleness_threshold"])

        payload = self.payload
        kind = payload.get("kind") if isinstance(payload, dict) else None
        if kind == "random":
            lo, hi = payload.get("min_len", 0), payload.get("max_len", DATA_SIZE)
            if not (isinstance(lo, int) and isinstance(hi, int) and 0 <= lo <= hi <= DATA_SIZE):
                raise ConfigurationError(f"random payload lengths must satisfy 0 <= min_len <= max_len <= {DATA_SIZE}")
        elif kind == "fixed":
            try:
                data = bytes.fromhex(payload.get("hex", ""))
            except (TypeError, ValueError):
                raise ConfigurationError("fixed payload needs a hex string") from None
            if len(data) > DATA_SIZE:
                raise ConfigurationError(f"fixed payload exceeds {DATA_SIZE} bytes")
        elif kind != "counter":
            raise ConfigurationError(f"unknown payload generator {payload!r}")

        return self.expand_schedule()
