import random

import pytest

from tasnic.fabric import GridCoord, mac_of
from tasnic.frame import (
    ETHERTYPE_RUNTIME,
    Frame,
    crc32,
    pad_payload,
    serialization_ticks,
    serialization_time_ns,
)


def crc32_reference(data: bytes) -> int:
    """Bit-at-a-time IEEE CRC-32, the independent oracle."""
    crc = 0xFFFFFFFF
    for byte in data:
        crc ^= byte
        for _ in range(8):
            crc = (crc >> 1) ^ 0xEDB88320 if crc & 1 else crc >> 1
    return crc ^ 0xFFFFFFFF


def test_crc32_fixed_vectors():
    assert crc32(b"123456789") == 0xCBF43926
    assert crc32(b"") == 0x00000000
    assert crc32(b"\x00") == 0xD202EF8D


def test_crc32_fixed_vectors_match_reference():
    for vec in (b"123456789", b"", b"\x00"):
        assert crc32(vec) == crc32_reference(vec)


def test_crc32_matches_reference_on_random_inputs():
    rng = random.Random(1234)
    for _ in range(100):
        data = rng.randbytes(rng.randrange(0, 128))
        assert crc32(data) == crc32_reference(data)


def _frame(payload=b"x" * 100, pcp=2):
    return Frame(dst_mac=mac_of(GridCoord(0, 1)), src_mac=mac_of(GridCoord(0, 0)),
                 pcp=pcp, ethertype=ETHERTYPE_RUNTIME, payload=payload)


def test_wire_length_accounting():
    frame = _frame(payload=bytes(1500))
    assert frame.wire_bytes == 1522
    assert _frame(payload=bytes(46)).wire_bytes == 68


def test_payload_bounds_enforced():
    with pytest.raises(ValueError):
        _frame(payload=bytes(45))
    with pytest.raises(ValueError):
        _frame(payload=bytes(1501))
    with pytest.raises(ValueError):
        _frame(pcp=8)


def test_pad_payload_reaches_minimum():
    assert len(pad_payload(b"abc")) == 46
    assert pad_payload(b"abc")[:3] == b"abc"
    assert len(pad_payload(bytes(100))) == 100


def test_fcs_round_trip_and_single_bit_detection():
    frame = _frame()
    frame.stamp_fcs()
    assert frame.fcs_ok()
    original = frame.payload
    for bit_position in (0, 7, 101, 799):
        corrupted = bytearray(original)
        corrupted[bit_position // 8] ^= 1 << (bit_position % 8)
        frame.payload = bytes(corrupted)
        assert not frame.fcs_ok(), f"bit {bit_position} not detected"
        frame.payload = original
    assert frame.fcs_ok()


def test_header_corruption_detected():
    frame = _frame()
    frame.stamp_fcs()
    frame.pcp ^= 1
    assert not frame.fcs_ok()


def test_serialization_arithmetic():
    assert serialization_time_ns(64, 10_000_000_000) == pytest.approx(51.2)
    assert serialization_time_ns(1522, 10_000_000_000) == pytest.approx(1217.6)
    # the engine rounds up to whole nanoseconds
    assert serialization_ticks(64, 10_000_000_000) == 52
    assert serialization_ticks(1522, 10_000_000_000) == 1218
    assert serialization_ticks(1250, 10_000_000_000) == 1000
