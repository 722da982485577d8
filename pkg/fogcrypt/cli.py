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
Command line entry point.

    fogcrypt keygen   --out dev.state [--seed N] [--force]
    fogcrypt send     --state dev.state --in message.bin [--hex]
    fogcrypt recv     --state dev.state.peer --in wire.bin [--window W]
    fogcrypt vectors  --hash blake2s --count 16 --out kat.txt
    fogcrypt bench    --schemes proposed,aes256-ctr --blocks 100000 --csv bench.csv
    fogcrypt scenario --file replay --report replay.json
    fogcrypt memory   --hash blake2s --mode dual

Exit codes: 0 success, 1 usage, 2 integrity reject, 3 I/O, 4 validation.
"""

import argparse
import os
import secrets
import sys
from typing import BinaryIO, List, Optional

from transformers.utils import logging

from .benchmarking import BENCH_SCHEMES, DEFAULT_SCHEMES, reports_to_frame, run_bench, write_csv
from .netsim import format_report, load_scenario, make_rng, run_scenario
from .protocol import (
    DATA_SIZE,
    DEFAULT_RESYNC_WINDOW,
    SK_SIZE,
    TUPLE_SIZE,
    ConfigurationError,
    FogCryptError,
    FramingError,
    IntegrityError,
    MemoryParams,
    UnknownDeviceError,
    as_device_id,
    generate_vectors,
    get_hash,
    memory_footprint,
    write_vectors,
)
from .protocol.configuration_fogcrypt import _check_mode_and_window
from .registry import Registry


logger = logging.get_logger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_REJECT = 2
EXIT_IO = 3
EXIT_VALIDATION = 4


class FogCryptArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _open_input(path: str) -> BinaryIO:
    return sys.stdin.buffer if path == "-" else open(path, "rb")


def _write_output(path: Optional[str], data: bytes):
    if path is None or path == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()
    else:
        with open(path, "wb") as f:
            f.write(data)


def _status(message: str):
    print(message, file=sys.stderr)


def split_payloads(data: bytes) -> List[bytes]:
    """Successive 55-byte messages; empty input still yields one empty message."""
    if not data:
        return [b""]
    return [data[i : i + DATA_SIZE] for i in range(0, len(data), DATA_SIZE)]


def _select_device(registry: Registry, device: Optional[str]) -> bytes:
    if device is not None:
        return as_device_id(device)
    ids = registry.device_ids()
    if len(ids) != 1:
        raise ConfigurationError(f"state file holds {len(ids)} devices; pick one with --device")
    return ids[0]


############
# Commands
############


def cmd_keygen(args) -> int:
    targets = [args.out, f"{args.out}.peer"]
    existing = [p for p in targets if os.path.exists(p)]
    if existing and not args.force:
        raise FileExistsError(f"refusing to overwrite {', '.join(existing)} without --force")

    if args.seed is not None:
        rng = make_rng(args.seed)
        sk = rng.bytes(SK_SIZE)
        device_id = rng.bytes(8)
    else:
        sk = secrets.token_bytes(SK_SIZE)
        device_id = secrets.token_bytes(8)
    if args.id is not None:
        device_id = as_device_id(args.id)

    for path in targets:
        registry = Registry(hash_name=args.hash, mode=args.mode, resync_window=args.window)
        registry.register_device(device_id, sk)
        registry.save_state(path)
    _status(f"device {device_id.hex()}: wrote {targets[0]} and {targets[1]}")
    return EXIT_OK


def cmd_send(args) -> int:
    registry = Registry.load_state(args.state)
    device_id = _select_device(registry, args.device)
    with _open_input(args.input) as f:
        data = f.read()

    wires = [registry.encrypt_for_device(device_id, chunk) for chunk in split_payloads(data)]
    registry.save_state(args.state)

    if args.hex:
        _write_output(args.out, "".join(w.hex() + "\n" for w in wires).encode("ascii"))
    else:
        _write_output(args.out, b"".join(wires))
    _status(f"sent {len(wires)} tuples from device {device_id.hex()}")
    return EXIT_OK


def _read_wires(data: bytes, hex_input: bool) -> List[bytes]:
    if hex_input:
        wires = []
        for line in data.decode("ascii", errors="replace").splitlines():
            line = line.strip()
            if not line:
                continue
            try:
                wires.append(bytes.fromhex(line))
            except ValueError:
                # kept so that the registry reports it as a framing failure
                wires.append(line.encode("ascii", errors="replace"))
        return wires
    return [data[i : i + TUPLE_SIZE] for i in range(0, len(data), TUPLE_SIZE)]


def cmd_recv(args) -> int:
    registry = Registry.load_state(args.state)
    if args.window is not None:
        _check_mode_and_window(registry.mode, args.window)
        registry.resync_window = args.window
        for device_id in registry.device_ids():
            registry.get(device_id).session.resync_window = args.window

    with _open_input(args.input) as f:
        wires = _read_wires(f.read(), args.hex)

    payloads = []
    rejects = 0
    for i, wire in enumerate(wires):
        try:
            result = registry.handle_tuple(wire)
        except (IntegrityError, FramingError, UnknownDeviceError) as e:
            rejects += 1
            _status(f"message {i}: rejected ({e})")
            continue
        payloads.append(result.payload)
        _status(
            f"message {i}: accepted device={result.device_id.hex()} len={len(result.payload)} skipped={result.skipped}"
        )

    registry.save_state(args.state)
    _write_output(args.out, b"".join(payloads))
    return EXIT_REJECT if rejects else EXIT_OK


def cmd_vectors(args) -> int:
    h = get_hash(args.hash)
    vectors = generate_vectors(h, count=args.count)
    if args.out is None or args.out == "-":
        write_vectors(vectors, sys.stdout, hash_name=h.name)
    else:
        write_vectors(vectors, args.out, hash_name=h.name)
    return EXIT_OK


def cmd_bench(args) -> int:
    schemes = [s.strip() for s in args.schemes.split(",") if s.strip()]
    reports = run_bench(
        schemes, blocks=args.blocks, runs=args.runs, warmup=args.warmup, seed=args.seed, showprogress=args.progress
    )
    if args.csv is not None:
        write_csv(reports, args.csv)
    print(reports_to_frame(reports).to_string(index=False, na_rep="N/A"))
    return EXIT_OK


def cmd_scenario(args) -> int:
    scenario = load_scenario(args.file)
    report = run_scenario(scenario, showprogress=args.progress)
    print(format_report(report))
    if args.report is not None:
        with open(args.report, "w", encoding="utf-8") as f:
            f.write(report.to_json() + "\n")
    return EXIT_OK


def cmd_memory(args) -> int:
    state = args.state_size if args.state_size is not None else get_hash(args.hash).state_size
    footprint = memory_footprint(MemoryParams(hash_state=state, dual=args.mode == "dual"))
    print(f"global:     {footprint.global_bytes} bytes")
    print(f"peak local: {footprint.peak_local_bytes} bytes")
    print(f"total:      {footprint.total_bytes} bytes")
    return EXIT_OK


##########
# Parser
##########


def build_parser() -> argparse.ArgumentParser:
    parser = FogCryptArgumentParser(prog="fogcrypt", description="Hash-based encryption for IoT to fog links.")
    subparsers = parser.add_subparsers(dest="command", required=True)

    p = subparsers.add_parser("keygen", help="Generate a key and the device and fog state files.")
    p.add_argument("--out", required=True, help="Device state file; the fog copy is written to <out>.peer.")
    p.add_argument("--seed", type=int, default=None, help="Deterministic key for tests.")
    p.add_argument("--force", action="store_true", help="Overwrite existing state files.")
    p.add_argument("--id", default=None, help="Device id as 16 hex digits. Random when omitted.")
    p.add_argument("--mode", default="dual", choices=["dual", "single"])
    p.add_argument("--window", type=int, default=DEFAULT_RESYNC_WINDOW)
    p.add_argument("--hash", default="blake2s")
    p.set_defaults(func=cmd_keygen)

    p = subparsers.add_parser("send", help="Encrypt input into tuples.")
    p.add_argument("--state", required=True)
    p.add_argument("--in", dest="input", default="-")
    p.add_argument("--out", default=None)
    p.add_argument("--hex", action="store_true", help="Write one hex tuple per line.")
    p.add_argument("--device", default=None)
    p.set_defaults(func=cmd_send)

    p = subparsers.add_parser("recv", help="Decrypt tuples.")
    p.add_argument("--state", required=True)
    p.add_argument("--in", dest="input", default="-")
    p.add_argument("--out", default=None)
    p.add_argument("--hex", action="store_true", help="Read one hex tuple per line.")
    p.add_argument("--window", type=int, default=None, help="Override the stored resync window.")
    p.set_defaults(func=cmd_recv)

    p = subparsers.add_parser("vectors", help="Write known-answer keystream vectors.")
    p.add_argument("--hash", default="blake2s")
    p.add_argument("--count", type=int, default=16)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_vectors)

    p = subparsers.add_parser("bench", help="Time the protocol against AES baselines.")
    p.add_argument("--schemes", default=",".join(DEFAULT_SCHEMES), help=f"Comma separated subset of {BENCH_SCHEMES}.")
    p.add_argument("--blocks", type=int, default=100_000)
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--warmup", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv", default=None)
    p.add_argument("--progress", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = subparsers.add_parser("scenario", help="Run an adversarial channel scenario.")
    p.add_argument("--file", required=True, help="Scenario JSON file or bundled scenario name.")
    p.add_argument("--report", default=None, help="Write the report as JSON.")
    p.add_argument("--progress", action="store_true")
    p.set_defaults(func=cmd_scenario)

    p = subparsers.add_parser("memory", help="Print the memory footprint formula.")
    p.add_argument("--hash", default="blake2s")
    p.add_argument("--mode", default="single", choices=["dual", "single"])
    p.add_argument("--state-size", type=int, default=None)
    p.set_defaults(func=cmd_memory)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except IntegrityError as e:
        _status(f"error: {e}")
        return EXIT_REJECT
    except OSError as e:
        _status(f"error: {e}")
        return EXIT_IO
    except (FogCryptError, ValueError, KeyError) as e:
        _status(f"error: {e}")
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
