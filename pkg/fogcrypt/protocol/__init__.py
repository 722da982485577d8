from .configuration_fogcrypt import AdversaryAction, FogCryptConfig, ScenarioConfig
from .fogcrypt_utils import (
    BLOCK_SIZE,
    DATA_SIZE,
    DEFAULT_RESYNC_WINDOW,
    DEVICE_ID_SIZE,
    MAX_COUNTER,
    MAX_RESYNC_WINDOW,
    SK_SIZE,
    TUPLE_SIZE,
    ConfigurationError,
    CounterOverflowError,
    DuplicateDeviceError,
    FogCryptError,
    FramingError,
    InputLengthError,
    IntegrityError,
    InvalidCounterError,
    PayloadTooLongError,
    RekeyRequiredError,
    SecretKey,
    StateFileError,
    UnknownDeviceError,
    UnknownHashError,
    as_device_id,
    counter_to_bytes,
    xor_bytes,
)

from .hashing_fogcrypt import (
    FOGCRYPT_HASH_REGISTRY,
    HashFn,
    KeystreamVector,
    PrecomputedKeystream,
    available_hashes,
    derive_keystream,
    generate_vectors,
    get_hash,
    hash32,
    precompute_keystream,
    read_vectors,
    register_hash,
    verify_vectors,
    write_vectors,
)

from .framing_fogcrypt import (
    PlainBlock,
    WireTuple,
    decode_tuple,
    deframe_message,
    encode_tuple,
    frame_message,
)

from .session_fogcrypt import (
    FogCryptSession,
    MemoryFootprint,
    MemoryParams,
    ResyncOutput,
    counters_remaining,
    decrypt_next,
    decrypt_with_resync,
    encrypt_next,
    forgery_bound,
    memory_footprint,
    new_session,
    peek_counters,
    window_exposure_bytes,
)
