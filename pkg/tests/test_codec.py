import hashlib
import struct

import pytest
from hypothesis import given, strategies as st

from snapchain import codec
from snapchain.ledger import (
    compute_block_hash,
    compute_data_hash,
    make_genesis_block,
)

# Golden values computed with a hand-rolled struct+hashlib oracle, independent
# of the package's encoder (see test_block_hash_matches_reference_construction).
GOLDEN_EMPTY_DATA_HASH = "df3f619804a92fdb4057192dc43dd748ea778adc52bc498ce80524c014b81119"
GOLDEN_GENESIS_HASH = "0d79263f702da8f4835ea400cd9f030f40d40091d06ea087a3e2f1f9d2f894cd"


def test_block_hash_matches_reference_construction():
    def lp(b):
        return struct.pack(">I", len(b)) + b

    data_hash = hashlib.sha256(struct.pack(">I", 0)).digest()
    header = lp(struct.pack(">Q", 0)) + lp(b"\x00" * 32) + lp(data_hash)
    expected = hashlib.sha256(header).digest()

    assert compute_data_hash(()) == data_hash
    assert compute_block_hash((0, b"\x00" * 32, data_hash)) == expected
    assert data_hash.hex() == GOLDEN_EMPTY_DATA_HASH
    assert expected.hex() == GOLDEN_GENESIS_HASH


def test_genesis_block_pins_golden_hash():
    genesis = make_genesis_block()
    assert genesis.number == 0
    assert genesis.prev_hash == b"\x00" * 32
    assert genesis.header_hash().hex() == GOLDEN_GENESIS_HASH


def test_identical_headers_hash_identically():
    h1 = compute_block_hash((7, b"\x11" * 32, b"\x22" * 32))
    h2 = compute_block_hash((7, b"\x11" * 32, b"\x22" * 32))
    assert h1 == h2


def test_single_byte_change_changes_hash():
    base = compute_block_hash((7, b"\x11" * 32, b"\x22" * 32))
    assert compute_block_hash((8, b"\x11" * 32, b"\x22" * 32)) != base
    assert compute_block_hash((7, b"\x11" * 31 + b"\x12", b"\x22" * 32)) != base
    assert compute_block_hash((7, b"\x11" * 32, b"\x22" * 31 + b"\x23")) != base


json_values = st.recursive(
    st.none()
    | st.booleans()
    | st.integers(min_value=-(2**63), max_value=2**63 - 1)
    | st.text(max_size=40)
    | st.binary(max_size=40),
    lambda children: st.lists(children, max_size=5)
    | st.dictionaries(st.text(max_size=10), children, max_size=5),
    max_leaves=25,
)


@given(json_values)
def test_value_codec_round_trip(value):
    encoded = codec.encode_value(value)
    decoded = codec.decode_value(encoded)
    if isinstance(value, tuple):
        value = list(value)
    assert decoded == value
    # canonical: re-encoding the decoded value is byte-identical
    assert codec.encode_value(decoded) == encoded


@given(json_values, json_values)
def test_value_codec_injective_on_samples(a, b):
    if codec.encode_value(a) == codec.encode_value(b):
        assert codec.decode_value(codec.encode_value(a)) == codec.decode_value(
            codec.encode_value(b)
        )


def test_dict_key_order_is_canonical():
    assert codec.encode_value({"b": 1, "a": 2}) == codec.encode_value({"a": 2, "b": 1})


def test_decode_rejects_trailing_bytes():
    data = codec.encode_value(5) + b"x"
    with pytest.raises(codec.DecodeError):
        codec.decode_value(data)


def test_decode_rejects_truncation():
    data = codec.encode_value("hello world")[:-3]
    with pytest.raises(codec.DecodeError):
        codec.decode_value(data)


def test_non_string_dict_keys_rejected():
    with pytest.raises(TypeError):
        codec.encode_value({1: "x"})
