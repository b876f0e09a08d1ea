"""Reduced S7 codec: TPKT + COTP data TPDU + S7 header/parameter/data.

Covers read-var (0x04) and write-var (0x05) jobs and their acks over data
blocks, which is the whole surface the plant exposes. Connection setup
(COTP CR/CC and the setup-communication exchange) is a fixed scripted
handshake handled at the transport layer, not here.

Hex interchange starts at the TPKT version byte, i.e. the whole
ISO-on-TCP payload.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

from .errors import InvalidItem, LengthMismatch, Truncated

PDU_TYPE_JOB = 0x01
PDU_TYPE_ACK_DATA = 0x03

FUNC_READ_VAR = 0x04
FUNC_WRITE_VAR = 0x05

AREA_DATA_BLOCK = 0x84

TRANSPORT_BIT = 0x01
TRANSPORT_WORD = 0x04

# Data item return codes (subset).
RET_SUCCESS = 0xFF
RET_INVALID_VALUE = 0x03
RET_ADDRESS_OUT_OF_RANGE = 0x05
RET_OBJECT_MISSING = 0x0A

# Data item transport sizes (distinct from the parameter item ones).
DATA_TRANSPORT_BIT = 0x03    # length counted in bits
DATA_TRANSPORT_BYTES = 0x04  # length counted in bits, byte-aligned payload

COTP_DATA = bytes.fromhex("02f080")

# Scripted handshake frames (fixed class-0 connect and a 240-byte PDU
# setup-communication exchange).
COTP_CONNECT_REQUEST = bytes.fromhex("0300001611e00000000100c0010ac1020100c2020102")
COTP_CONNECT_CONFIRM = bytes.fromhex("0300001611d00001000100c0010ac1020100c2020102")
S7_SETUP_JOB = bytes.fromhex("0300001902f08032010000000000080000f0000001000100f0")
S7_SETUP_ACK = bytes.fromhex("0300001b02f080320300000000000800000000f0000001000100f0")


@dataclass(frozen=True)
class S7Item:
    """Any-type addressing item in a read/write-var parameter block."""
    transport_size: int
    count: int
    db_number: int
    area: int
    start: int  # bit address: byte_offset * 8 + bit

    def word_address(self) -> int:
        return self.start // 16

    def bit_address(self) -> int:
        return self.start


@dataclass(frozen=True)
class S7DataItem:
    return_code: int
    transport_size: int
    values: bytes

    def length_bits(self) -> int:
        if self.transport_size == DATA_TRANSPORT_BIT:
            return len(self.values)
        return len(self.values) * 8


@dataclass(frozen=True)
class S7Frame:
    pdu_type: int
    pdu_ref: int
    function: int
    items: tuple[S7Item, ...] = ()
    data_items: tuple[S7DataItem, ...] = ()
    write_ack_codes: tuple[int, ...] = ()  # ack-data for write-var: one code per item
    error_class: int = 0
    error_code: int = 0


def _encode_param(frame: S7Frame) -> bytes:
    if frame.pdu_type == PDU_TYPE_ACK_DATA:
        # Ack parameters carry only function + item count.
        count = len(frame.data_items) or len(frame.write_ack_codes)
        return struct.pack(">BB", frame.function, count)
    if not frame.items:
        raise InvalidItem("job frame requires at least one item")
    out = bytearray(struct.pack(">BB", frame.function, len(frame.items)))
    for item in frame.items:
        if item.count < 1:
            raise InvalidItem(f"item count must be >= 1, got {item.count}")
        if not 0 <= item.start < (1 << 24):
            raise InvalidItem(f"item start address out of range: {item.start}")
        out += struct.pack(">BBBBHHB", 0x12, 0x0A, 0x10, item.transport_size,
                           item.count, item.db_number, item.area)
        out += item.start.to_bytes(3, "big")
    return bytes(out)


def _encode_data(frame: S7Frame) -> bytes:
    out = bytearray()
    if frame.pdu_type == PDU_TYPE_ACK_DATA and frame.function == FUNC_WRITE_VAR:
        return bytes(frame.write_ack_codes)
    items = frame.data_items
    for i, d in enumerate(items):
        out += struct.pack(">BBH", d.return_code, d.transport_size, d.length_bits())
        out += d.values
        if len(d.values) % 2 and i != len(items) - 1:
            out += b"\x00"  # items are even-aligned except the last
    return bytes(out)


def encode_s7(frame: S7Frame) -> str:
    """Serialize an S7Frame to canonical hex; all length fields recomputed."""
    if frame.function not in (FUNC_READ_VAR, FUNC_WRITE_VAR):
        raise InvalidItem(f"unsupported S7 function {frame.function:#x}")
    param = _encode_param(frame)
    data = _encode_data(frame)
    if frame.pdu_type == PDU_TYPE_JOB:
        header = struct.pack(">BBHHHH", 0x32, PDU_TYPE_JOB, 0, frame.pdu_ref,
                             len(param), len(data))
    elif frame.pdu_type == PDU_TYPE_ACK_DATA:
        header = struct.pack(">BBHHHHBB", 0x32, PDU_TYPE_ACK_DATA, 0, frame.pdu_ref,
                             len(param), len(data), frame.error_class, frame.error_code)
    else:
        raise InvalidItem(f"unsupported PDU type {frame.pdu_type}")
    body = COTP_DATA + header + param + data
    tpkt = struct.pack(">BBH", 3, 0, 4 + len(body))
    return (tpkt + body).hex()


def _decode_items(param: bytes) -> tuple[S7Item, ...]:
    count = param[1]
    items = []
    off = 2
    for _ in range(count):
        if off + 12 > len(param):
            raise Truncated("S7 parameter item list truncated")
        spec, length, syntax, transport, n, db, area = struct.unpack(
            ">BBBBHHB", param[off:off + 9])
        if spec != 0x12 or length != 0x0A or syntax != 0x10:
            raise InvalidItem("unsupported item specification header")
        start = int.from_bytes(param[off + 9:off + 12], "big")
        items.append(S7Item(transport, n, db, area, start))
        off += 12
    if off != len(param):
        raise LengthMismatch("S7 parameter length disagrees with item list")
    return tuple(items)


def _decode_data_items(data: bytes, count: int) -> tuple[S7DataItem, ...]:
    items = []
    off = 0
    for i in range(count):
        if off + 4 > len(data):
            raise Truncated("S7 data item header truncated")
        ret, transport, bits = struct.unpack(">BBH", data[off:off + 4])
        nbytes = bits if transport == DATA_TRANSPORT_BIT else (bits + 7) // 8
        off += 4
        if off + nbytes > len(data):
            raise Truncated("S7 data item payload truncated")
        items.append(S7DataItem(ret, transport, bytes(data[off:off + nbytes])))
        off += nbytes
        if nbytes % 2 and i != count - 1:
            off += 1  # skip alignment pad
    if off != len(data):
        raise LengthMismatch("S7 data length disagrees with data items")
    return tuple(items)


def decode_s7(hex_text: str) -> S7Frame:
    """Parse canonical hex (starting at the TPKT byte) into an S7Frame."""
    try:
        data = bytes.fromhex(hex_text.strip().lower())
    except ValueError as exc:
        raise Truncated(f"not a hex string: {exc}") from None
    if len(data) < 4:
        raise Truncated("TPKT header truncated")
    version, _, tpkt_len = struct.unpack(">BBH", data[:4])
    if version != 3:
        raise Truncated(f"TPKT version must be 3, got {version}")
    if tpkt_len != len(data):
        raise LengthMismatch(f"TPKT length {tpkt_len} but frame is {len(data)} bytes")
    if len(data) < 7:
        raise Truncated("COTP header truncated")
    if data[4:7] != COTP_DATA:
        raise Truncated("not a COTP data TPDU")
    body = data[7:]
    if len(body) < 10:
        raise Truncated("S7 header truncated")
    proto, pdu_type, _, pdu_ref, param_len, data_len = struct.unpack(">BBHHHH", body[:10])
    if proto != 0x32:
        raise Truncated(f"S7 protocol id must be 0x32, got {proto:#x}")
    off = 10
    error_class = error_code = 0
    if pdu_type == PDU_TYPE_ACK_DATA:
        if len(body) < 12:
            raise Truncated("S7 ack header truncated")
        error_class, error_code = body[10], body[11]
        off = 12
    elif pdu_type != PDU_TYPE_JOB:
        raise InvalidItem(f"unsupported PDU type {pdu_type}")
    param = body[off:off + param_len]
    payload = body[off + param_len:off + param_len + data_len]
    if len(param) != param_len or len(payload) != data_len:
        raise LengthMismatch("S7 param/data lengths run past the frame")
    if len(param) < 2:
        raise Truncated("S7 parameter truncated")
    function, item_count = param[0], param[1]
    if function not in (FUNC_READ_VAR, FUNC_WRITE_VAR):
        raise InvalidItem(f"unsupported S7 function {function:#x}")

    if pdu_type == PDU_TYPE_JOB:
        items = _decode_items(param)
        if not items:
            raise InvalidItem("job frame with zero items")
        data_items = ()
        if function == FUNC_WRITE_VAR:
            data_items = _decode_data_items(payload, len(items))
        elif payload:
            raise LengthMismatch("read-var job must not carry data")
        return S7Frame(pdu_type, pdu_ref, function, items, data_items)

    # ack_data: parameter is function + count only.
    if len(param) != 2:
        raise LengthMismatch("S7 ack parameter must be 2 bytes")
    if function == FUNC_WRITE_VAR:
        if len(payload) != item_count:
            raise LengthMismatch("write ack carries one return code per item")
        return S7Frame(pdu_type, pdu_ref, function,
                       write_ack_codes=tuple(payload),
                       error_class=error_class, error_code=error_code)
    data_items = _decode_data_items(payload, item_count)
    return S7Frame(pdu_type, pdu_ref, function, data_items=data_items,
                   error_class=error_class, error_code=error_code)
