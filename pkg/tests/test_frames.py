"""Wire-format codec: worked hex examples, round-trips, and failure taxonomy."""

from __future__ import annotations

import random

import pytest
from hypothesis import given, settings, strategies as st

from slotmesh.frames import (
    BAD_FIELD,
    BAD_TYPE,
    BAD_VERSION,
    LENGTH_MISMATCH,
    MAX_PAYLOAD,
    TRUNCATED,
    Beacon,
    DataFrame,
    FrameError,
    decode,
    encode,
)


def _hex(s: str) -> bytes:
    return bytes.fromhex(s.replace(" ", ""))


# ---------------------------------------------------------------- hex oracles
# These byte strings are frozen copies of the worked examples in FORMAT.md.

MINIMAL_BEACON = _hex("01 01 01 01 00 00")
TWO_NEIGHBOR_BEACON = _hex("01 01 05 03 02 02 02 01 07 04")
SMALL_DATA = _hex("01 02 02 03 01 01 01 02 09 01 02 01 02 68 69")


def test_minimal_beacon_decodes():
    frame = decode(MINIMAL_BEACON)
    assert isinstance(frame, Beacon)
    assert (frame.sender, frame.slot, frame.hop) == (1, 1, 0)
    assert frame.neighbors == []


def test_minimal_beacon_encodes():
    assert encode(Beacon(1, 1, 0, [])) == MINIMAL_BEACON


def test_two_neighbor_beacon_round_trip():
    frame = decode(TWO_NEIGHBOR_BEACON)
    assert isinstance(frame, Beacon)
    assert (frame.sender, frame.slot, frame.hop) == (5, 3, 2)
    assert frame.neighbors == [(2, 1), (7, 4)]
    assert encode(frame) == TWO_NEIGHBOR_BEACON


def test_data_frame_hex_example():
    frame = decode(SMALL_DATA)
    assert isinstance(frame, DataFrame)
    assert (frame.sender, frame.slot, frame.hop) == (2, 3, 1)
    assert frame.neighbors == [(1, 2)]
    assert (frame.origin, frame.sequence, frame.next_hop) == (9, 258, 1)
    assert frame.payload == b"hi"
    assert encode(frame) == SMALL_DATA


# ---------------------------------------------------------------- round-trips

neighbor_lists = st.lists(
    st.tuples(st.integers(1, 255), st.integers(1, 255)), max_size=40
)

beacons = st.builds(
    Beacon,
    sender=st.integers(1, 255),
    slot=st.integers(1, 255),
    hop=st.integers(0, 255),
    neighbors=neighbor_lists,
)


def _data_frames():
    def build(sender, slot, hop, neighbors, origin, sequence, next_hop, payload):
        return DataFrame(sender, slot, hop, neighbors, origin, sequence, next_hop, payload)

    return st.builds(
        build,
        sender=st.integers(1, 255),
        slot=st.integers(1, 255),
        hop=st.integers(0, 255),
        neighbors=neighbor_lists,
        origin=st.integers(1, 255),
        sequence=st.integers(0, 0xFFFF),
        next_hop=st.integers(0, 255),
        payload=st.binary(max_size=MAX_PAYLOAD),
    ).filter(lambda f: f.next_hop != f.sender)


@settings(max_examples=300, deadline=None)
@given(beacons)
def test_beacon_round_trip(frame):
    assert decode(encode(frame)) == frame


@settings(max_examples=300, deadline=None)
@given(_data_frames())
def test_data_round_trip(frame):
    assert decode(encode(frame)) == frame


@settings(max_examples=300, deadline=None)
@given(st.binary(max_size=80))
def test_reencode_identity_on_accepted_buffers(buf):
    """Any buffer the decoder accepts re-encodes to the identical bytes."""
    try:
        frame = decode(buf)
    except FrameError:
        return
    assert encode(frame) == buf


# ---------------------------------------------------------------- error codes


@pytest.mark.parametrize(
    "buf,code",
    [
        (b"", TRUNCATED),
        (b"\x01", TRUNCATED),
        (_hex("01 01 01 01 00"), TRUNCATED),  # header cut short
        (_hex("01 01 01 01 00 02 02 01"), TRUNCATED),  # neighbor list cut short
        (_hex("01 02 02 03 01 00 09 01 02"), TRUNCATED),  # data fields cut short
        (_hex("01 02 02 03 01 00 09 01 02 01 05 68"), TRUNCATED),  # payload cut short
        (_hex("02 01 01 01 00 00"), BAD_VERSION),
        (_hex("01 03 01 01 00 00"), BAD_TYPE),
        (_hex("01 01 01 01 00 00 ff"), LENGTH_MISMATCH),  # trailing byte
        (_hex("01 02 02 03 01 00 09 01 02 01 01 68 69"), LENGTH_MISMATCH),
        (_hex("01 01 00 01 00 00"), BAD_FIELD),  # sender 0
        (_hex("01 01 01 00 00 00"), BAD_FIELD),  # slot 0
        (_hex("01 01 01 01 00 01 00 05"), BAD_FIELD),  # neighbor id 0
        (_hex("01 01 01 01 00 01 05 00"), BAD_FIELD),  # neighbor slot 0
        (_hex("01 02 02 03 01 00 00 01 02 01 00"), BAD_FIELD),  # origin 0
        (_hex("01 02 02 03 01 00 09 01 02 02 00"), BAD_FIELD),  # next_hop == sender
    ],
)
def test_decode_error_codes(buf, code):
    with pytest.raises(FrameError) as err:
        decode(buf)
    assert err.value.code == code


@pytest.mark.parametrize(
    "frame",
    [
        Beacon(0, 1, 0, []),
        Beacon(1, 0, 0, []),
        Beacon(1, 1, 256, []),
        Beacon(1, 1, 0, [(0, 1)]),
        Beacon(1, 1, 0, [(1, 0)]),
        Beacon(1, 1, 0, [(1, 1)] * 256),
        DataFrame(1, 1, 0, [], 0, 0, 2, b""),
        DataFrame(1, 1, 0, [], 1, 0x10000, 2, b""),
        DataFrame(1, 1, 0, [], 1, 0, 1, b""),  # next_hop == sender
        DataFrame(1, 1, 0, [], 1, 0, 2, b"x" * (MAX_PAYLOAD + 1)),
    ],
)
def test_encode_rejects_uncarriable_fields(frame):
    with pytest.raises(FrameError) as err:
        encode(frame)
    assert err.value.code == BAD_FIELD


def test_payload_len_field_capped():
    # A declared payload_len beyond the cap is rejected even if bytes are present.
    buf = _hex("01 02 02 03 01 00 09 01 02 01") + bytes([MAX_PAYLOAD + 1]) + b"x" * (MAX_PAYLOAD + 1)
    with pytest.raises(FrameError) as err:
        decode(buf)
    assert err.value.code == BAD_FIELD


# ---------------------------------------------------------------- fuzz safety


def test_fuzz_decoder_only_frame_errors():
    """Structured fuzz: random buffers, random mutations of valid frames."""
    rng = random.Random(0xF0220)
    valid = [MINIMAL_BEACON, TWO_NEIGHBOR_BEACON, SMALL_DATA]
    for _ in range(20_000):
        if rng.random() < 0.5:
            buf = rng.randbytes(rng.randint(0, 40))
        else:
            base = bytearray(rng.choice(valid))
            for _ in range(rng.randint(1, 4)):
                base[rng.randrange(len(base))] = rng.randrange(256)
            if rng.random() < 0.3:
                base = base[: rng.randint(0, len(base))]
            buf = bytes(base)
        try:
            frame = decode(buf)
        except FrameError:
            continue
        assert encode(frame) == buf
