"""Modbus/TCP frame codec for function codes 1, 3, 5, 6, 15, 16.

Frames are interchanged as canonical hex strings: lowercase, even length,
no separators. Canonical form matters because byte-exact comparison is
the strictest evaluation metric downstream.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Union

from .errors import (
    BadProtocolId,
    InvalidPdu,
    InvalidRequest,
    LengthMismatch,
    Truncated,
    UnknownFunction,
)

READ_COILS = 1
READ_HOLDING_REGISTERS = 3
WRITE_SINGLE_COIL = 5
WRITE_SINGLE_REGISTER = 6
WRITE_MULTIPLE_COILS = 15
WRITE_MULTIPLE_REGISTERS = 16

# Table-2 function surface; everything else is UnknownFunction.
SUPPORTED_FUNCTIONS = frozenset(
    {READ_COILS, READ_HOLDING_REGISTERS, WRITE_SINGLE_COIL,
     WRITE_SINGLE_REGISTER, WRITE_MULTIPLE_COILS, WRITE_MULTIPLE_REGISTERS}
)
DIGITAL_FUNCTIONS = frozenset({READ_COILS, WRITE_SINGLE_COIL, WRITE_MULTIPLE_COILS})
READ_FUNCTIONS = frozenset({READ_COILS, READ_HOLDING_REGISTERS})
WRITE_FUNCTIONS = SUPPORTED_FUNCTIONS - READ_FUNCTIONS

# Standard exception codes.
EXC_ILLEGAL_FUNCTION = 0x01
EXC_ILLEGAL_ADDRESS = 0x02
EXC_ILLEGAL_VALUE = 0x03
EXC_SERVER_FAILURE = 0x04

COIL_ON = 0xFF00
COIL_OFF = 0x0000

# Protocol quantity ceilings (Modbus application protocol spec).
MAX_READ_BITS = 2000
MAX_READ_REGISTERS = 125
MAX_WRITE_BITS = 1968
MAX_WRITE_REGISTERS = 123


def canonical_hex(text: str) -> str:
    """Normalize hex text to the canonical lowercase/no-separator form."""
    s = text.strip().lower()
    if len(s) % 2 != 0:
        raise Truncated("hex string has odd length")
    try:
        bytes.fromhex(s)
    except ValueError as exc:
        raise Truncated(f"not a hex string: {exc}") from None
    return s


@dataclass(frozen=True)
class MbapHeader:
    transaction_id: int
    protocol_id: int
    length: int
    unit_id: int


@dataclass(frozen=True)
class ReadRequest:
    address: int
    quantity: int


@dataclass(frozen=True)
class ReadResponse:
    byte_count: int
    values: bytes


@dataclass(frozen=True)
class WriteSingle:
    address: int
    value: int


@dataclass(frozen=True)
class WriteMultiple:
    address: int
    quantity: int
    byte_count: int
    values: bytes


@dataclass(frozen=True)
class WriteAck:
    address: int
    value: int  # echoed value for fc 5/6, quantity for fc 15/16


@dataclass(frozen=True)
class ExceptionPdu:
    exception_code: int


PduBody = Union[ReadRequest, ReadResponse, WriteSingle, WriteMultiple, WriteAck, ExceptionPdu]


@dataclass(frozen=True)
class ModbusPdu:
    function_code: int
    body: PduBody


@dataclass(frozen=True)
class Frame:
    hex: str
    header: MbapHeader
    pdu: ModbusPdu


def pack_bits(bits) -> bytes:
    """Pack coil states 8 per byte, LSB first, final byte zero-padded."""
    out = bytearray((len(bits) + 7) // 8)
    for i, b in enumerate(bits):
        if b:
            out[i // 8] |= 1 << (i % 8)
    return bytes(out)


def unpack_bits(data: bytes, count: int) -> list[int]:
    return [(data[i // 8] >> (i % 8)) & 1 for i in range(count)]


def _u16(value: int, field: str) -> None:
    if not 0 <= value <= 0xFFFF:
        raise InvalidPdu(f"{field} out of u16 range: {value}")


def _pdu_bytes(pdu: ModbusPdu) -> bytes:
    fc = pdu.function_code
    body = pdu.body
    if isinstance(body, ExceptionPdu):
        if not fc & 0x80:
            raise InvalidPdu("exception body requires function code with 0x80 set")
        if not 1 <= body.exception_code <= 0xFF:
            raise InvalidPdu(f"exception_code out of range: {body.exception_code}")
        return struct.pack(">BB", fc, body.exception_code)
    if fc not in SUPPORTED_FUNCTIONS:
        raise UnknownFunction(f"function code {fc} not supported")
    if isinstance(body, ReadRequest):
        if body.quantity < 1:
            raise InvalidPdu("quantity must be >= 1")
        _u16(body.address, "address")
        _u16(body.quantity, "quantity")
        return struct.pack(">BHH", fc, body.address, body.quantity)
    if isinstance(body, ReadResponse):
        if body.byte_count != len(body.values):
            raise InvalidPdu(
                f"byte_count {body.byte_count} != len(values) {len(body.values)}")
        return struct.pack(">BB", fc, body.byte_count) + body.values
    if isinstance(body, WriteSingle):
        _u16(body.address, "address")
        _u16(body.value, "value")
        return struct.pack(">BHH", fc, body.address, body.value)
    if isinstance(body, WriteAck):
        _u16(body.address, "address")
        _u16(body.value, "value")
        return struct.pack(">BHH", fc, body.address, body.value)
    if isinstance(body, WriteMultiple):
        if body.quantity < 1:
            raise InvalidPdu("quantity must be >= 1")
        expected = (
            (body.quantity + 7) // 8 if fc == WRITE_MULTIPLE_COILS else 2 * body.quantity
        )
        if body.byte_count != expected or len(body.values) != expected:
            raise InvalidPdu(
                f"byte_count {body.byte_count} inconsistent with quantity {body.quantity}")
        _u16(body.address, "address")
        return struct.pack(">BHHB", fc, body.address, body.quantity,
                           body.byte_count) + body.values
    raise InvalidPdu(f"unsupported PDU body type {type(body).__name__}")


def encode(header: MbapHeader, pdu: ModbusPdu) -> Frame:
    """Serialize header+PDU to a Frame; the MBAP length field is recomputed."""
    pdu_bytes = _pdu_bytes(pdu)
    length = 1 + len(pdu_bytes)
    raw = struct.pack(">HHHB", header.transaction_id, 0, length,
                      header.unit_id) + pdu_bytes
    fixed = MbapHeader(header.transaction_id, 0, length, header.unit_id)
    return Frame(hex=raw.hex(), header=fixed, pdu=pdu)


def _decode_pdu(fc: int, body: bytes, role: str) -> ModbusPdu:
    if fc & 0x80:
        base = fc & 0x7F
        if base not in SUPPORTED_FUNCTIONS:
            raise UnknownFunction(f"exception for unsupported function {base}")
        if len(body) != 1:
            raise LengthMismatch("exception PDU body must be exactly 1 byte")
        if body[0] == 0:
            raise InvalidPdu("exception code 0 is not defined")
        return ModbusPdu(fc, ExceptionPdu(body[0]))
    if fc not in SUPPORTED_FUNCTIONS:
        raise UnknownFunction(f"function code {fc} not supported")

    if fc in READ_FUNCTIONS:
        looks_like_request = len(body) == 4
        if role == "response":
            looks_like_request = False
        if looks_like_request:
            addr, qty = struct.unpack(">HH", body)
            if qty < 1:
                raise InvalidPdu("quantity must be >= 1")
            return ModbusPdu(fc, ReadRequest(addr, qty))
        if len(body) < 1 or body[0] != len(body) - 1:
            raise LengthMismatch("read response byte_count disagrees with payload")
        if fc == READ_HOLDING_REGISTERS and body[0] % 2 != 0:
            raise InvalidPdu("register payload must have even byte count")
        return ModbusPdu(fc, ReadResponse(body[0], bytes(body[1:])))

    if fc in (WRITE_SINGLE_COIL, WRITE_SINGLE_REGISTER):
        if len(body) != 4:
            raise LengthMismatch("write-single PDU body must be 4 bytes")
        addr, value = struct.unpack(">HH", body)
        if role == "response":
            return ModbusPdu(fc, WriteAck(addr, value))
        return ModbusPdu(fc, WriteSingle(addr, value))

    # fc 15/16: request carries byte_count+values, ack is addr+quantity.
    if len(body) == 4 and role != "request":
        addr, qty = struct.unpack(">HH", body)
        if qty < 1:
            raise InvalidPdu("quantity must be >= 1")
        return ModbusPdu(fc, WriteAck(addr, qty))
    if len(body) < 6:
        raise Truncated("write-multiple request body too short")
    addr, qty, byte_count = struct.unpack(">HHB", body[:5])
    if qty < 1:
        raise InvalidPdu("quantity must be >= 1")
    expected = (qty + 7) // 8 if fc == WRITE_MULTIPLE_COILS else 2 * qty
    if byte_count != expected:
        raise InvalidPdu(f"byte_count {byte_count} inconsistent with quantity {qty}")
    if len(body) - 5 != byte_count:
        raise LengthMismatch("write-multiple values length disagrees with byte_count")
    return ModbusPdu(fc, WriteMultiple(addr, qty, byte_count, bytes(body[5:])))


def decode(hex_text: str, role: str = "auto") -> Frame:
    """Parse canonical hex into a Frame.

    role disambiguates read PDUs whose request and response shapes can
    collide (fc 1 with byte_count 3): "request", "response", or "auto"
    (prefer the request reading when both fit).
    """
    s = canonical_hex(hex_text)
    data = bytes.fromhex(s)
    if len(data) < 8:
        raise Truncated(f"frame is {len(data)} bytes, minimum is 8 (MBAP + function code + 1)")
    tid, pid, length, uid = struct.unpack(">HHHB", data[:7])
    if pid != 0:
        raise BadProtocolId(f"protocol_id must be 0, got {pid}")
    if length != len(data) - 6:
        raise LengthMismatch(
            f"MBAP length {length} but {len(data) - 6} bytes follow the length field")
    pdu = _decode_pdu(data[7], data[8:], role)
    return Frame(hex=s, header=MbapHeader(tid, pid, length, uid), pdu=pdu)


def make_exception(request: "Frame | str", exception_code: int) -> Frame:
    """Build the exception response for a request, echoing its identifiers."""
    if isinstance(request, str):
        try:
            request = decode(request, role="request")
        except Exception as exc:
            raise InvalidRequest(f"request does not decode: {exc}") from None
    if not 1 <= exception_code <= 0xFF:
        raise InvalidRequest(f"exception codes start at 1, got {exception_code}")
    fc = request.pdu.function_code | 0x80
    return encode(
        MbapHeader(request.header.transaction_id, 0, 0, request.header.unit_id),
        ModbusPdu(fc, ExceptionPdu(exception_code)),
    )
