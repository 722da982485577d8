import os

import pytest

from fogcrypt import SecretKey


DATA_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data")
KAT_BLAKE2S = os.path.join(DATA_DIR, "kat_blake2s_zero_key.txt")


@pytest.fixture
def sk():
    return SecretKey(bytes(range(27)))


@pytest.fixture
def other_sk():
    return SecretKey(bytes(range(100, 127)))


@pytest.fixture
def zero_sk():
    return SecretKey(bytes(27))
