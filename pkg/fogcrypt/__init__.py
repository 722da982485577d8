from .protocol import *
from .registry import (
    DeviceRecord,
    Registry,
    TupleResult,
    encrypt_for_device,
    handle_tuple,
    load_state,
    register_device,
    remove_device,
    save_state,
    stale_devices,
)
from .netsim import (
    Adversary,
    BitflipCensus,
    ScenarioReport,
    available_scenarios,
    bitflip_census,
    forgery_trial,
    format_report,
    load_scenario,
    run_scenario,
)
from .benchmarking import BenchReport, run_bench, write_csv
