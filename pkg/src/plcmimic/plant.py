"""Simulated PLC: memory map, math blocks, control loops, and a TCP server.

The plant is the ground truth everything else probes: dataset generation
talks to it over TCP, the response validator reuses its verdict logic,
and the honeypot's oracle responder embeds it directly.
"""
from __future__ import annotations

import json
import math
import socket
import socketserver
import threading
import time
from typing import Optional

import numpy as np

from . import modbus, s7
from .config import ControlLoopSpec, MathBlockSpec, ProtocolConfig
from .errors import BindError, InvalidRequest


def eval_block(kind: str, x: float) -> float:
    """Evaluate one of the supported math-block functions at x."""
    if kind == "sgn":
        return float((x > 0) - (x < 0))
    if kind == "sigmoid":
        return 1.0 / (1.0 + math.exp(-x))
    if kind == "cauchy":
        return 1.0 / (math.pi * (1.0 + x * x))
    if kind == "expo10":
        try:
            return 10.0 ** x
        except OverflowError:
            return math.inf
    if kind == "cosh":
        try:
            return math.cosh(x)
        except OverflowError:
            return math.inf
    raise ValueError(f"unknown block kind {kind!r}")


def modbus_verdict(cfg: ProtocolConfig, frame: modbus.Frame) -> Optional[int]:
    """Exception code the configured PLC must answer with, or None for a
    normal response. Shared by the plant and the response validator."""
    fc = frame.pdu.function_code
    body = frame.pdu.body
    if fc not in cfg.functions:
        return modbus.EXC_ILLEGAL_FUNCTION
    digital = fc in modbus.DIGITAL_FUNCTIONS
    low, high = cfg.addr_low, cfg.addr_high(digital)
    if isinstance(body, modbus.ReadRequest):
        max_qty = modbus.MAX_READ_BITS if digital else modbus.MAX_READ_REGISTERS
        if not 1 <= body.quantity <= max_qty:
            return modbus.EXC_ILLEGAL_VALUE
        if body.address < low or body.address + body.quantity - 1 > high:
            return modbus.EXC_ILLEGAL_ADDRESS
        return None
    if isinstance(body, modbus.WriteSingle):
        if fc == modbus.WRITE_SINGLE_COIL and body.value not in (modbus.COIL_ON, modbus.COIL_OFF):
            return modbus.EXC_ILLEGAL_VALUE
        if not low <= body.address <= high:
            return modbus.EXC_ILLEGAL_ADDRESS
        if fc == modbus.WRITE_SINGLE_REGISTER and not cfg.val_low <= body.value <= cfg.val_high:
            return modbus.EXC_ILLEGAL_VALUE
        return None
    if isinstance(body, modbus.WriteMultiple):
        max_qty = modbus.MAX_WRITE_BITS if digital else modbus.MAX_WRITE_REGISTERS
        if not 1 <= body.quantity <= max_qty:
            return modbus.EXC_ILLEGAL_VALUE
        if body.address < low or body.address + body.quantity - 1 > high:
            return modbus.EXC_ILLEGAL_ADDRESS
        if fc == modbus.WRITE_MULTIPLE_REGISTERS:
            for i in range(body.quantity):
                word = int.from_bytes(body.values[2 * i:2 * i + 2], "big")
                if not cfg.val_low <= word <= cfg.val_high:
                    return modbus.EXC_ILLEGAL_VALUE
        return None
    raise InvalidRequest(f"PDU body {type(body).__name__} is not a request")


def s7_item_verdict(cfg: ProtocolConfig, item: s7.S7Item,
                    values: bytes | None = None) -> int:
    """Expected data-item return code for one read/write item."""
    digital = item.transport_size == s7.TRANSPORT_BIT
    low, high = cfg.addr_low, cfg.addr_high(digital)
    if digital:
        first, last = item.start, item.start + item.count - 1
    else:
        if item.start % 16 != 0:
            return s7.RET_ADDRESS_OUT_OF_RANGE
        first = item.word_address()
        last = first + item.count - 1
    if first < low or last > high:
        return s7.RET_ADDRESS_OUT_OF_RANGE
    if values is not None and not digital:
        for i in range(item.count):
            word = int.from_bytes(values[2 * i:2 * i + 2], "big")
            if not cfg.val_low <= word <= cfg.val_high:
                return s7.RET_INVALID_VALUE
    return s7.RET_SUCCESS


def s7_verdict(cfg: ProtocolConfig, frame: s7.S7Frame):
    """Expected ack shape: ("header_error", class, code) or a list of
    per-item return codes for a normal ack."""
    if frame.function not in cfg.functions:
        return ("header_error", 0x81, 0x01)
    codes = []
    for i, item in enumerate(frame.items):
        vals = None
        if frame.function == s7.FUNC_WRITE_VAR and i < len(frame.data_items):
            vals = frame.data_items[i].values
        codes.append(s7_item_verdict(cfg, item, vals))
    return codes


class Plant:
    """One PLC memory image plus attached blocks and loops.

    Not thread-safe by itself; PlantServer serializes access.
    """

    def __init__(self, cfg: ProtocolConfig):
        self.cfg = cfg
        size = cfg.max_addr + 1
        self.coils = [0] * size
        self.discrete_inputs = [0] * size
        # registers start at val_low so every readable value is in range
        self.holding_registers = [cfg.val_low] * size
        self.input_registers = [cfg.val_low] * size
        self.blocks = list(cfg.blocks)
        self.loops = list(cfg.loops)
        self._loop_states = [
            np.array(sp.x0 if sp.x0 is not None else [0.0] * len(sp.a), dtype=float)
            for sp in self.loops
        ]

    # -- physics -----------------------------------------------------------

    def _store_physics(self, addr: int, counts: int) -> None:
        # physics outputs stay inside the configured value range so the
        # plant's own read responses always validate
        self.holding_registers[addr] = max(self.cfg.val_low,
                                           min(self.cfg.val_high, counts))

    def _run_block(self, block: MathBlockSpec) -> None:
        x = block.decode_in(self.holding_registers[block.in_addr])
        y = eval_block(block.kind, x)
        if math.isinf(y):  # unbounded functions saturate at the clamp bound
            counts = block.clamp_high if y > 0 else block.clamp_low
        else:
            counts = block.encode_out(y)
        self._store_physics(block.out_addr, counts)

    def step_loop(self, index: int) -> None:
        sp = self.loops[index]
        a = np.array(sp.a)
        b = np.array(sp.b)
        c = np.array(sp.c)
        u = np.array([sp.decode(self.holding_registers[addr]) for addr in sp.u_addrs])
        x = a @ self._loop_states[index] + b @ u
        self._loop_states[index] = x
        y = c @ x
        for addr, val in zip(sp.y_addrs, y):
            self._store_physics(addr, sp.encode(float(val)))

    def _after_register_writes(self, written: set[int]) -> None:
        for block in self.blocks:
            if block.in_addr in written:
                self._run_block(block)
        for i, sp in enumerate(self.loops):
            if sp.trigger == "write" and written & set(sp.u_addrs):
                self.step_loop(i)

    def tick(self) -> None:
        """Advance every tick-triggered loop one step."""
        for i, sp in enumerate(self.loops):
            if sp.trigger == "tick":
                self.step_loop(i)

    # -- request handling --------------------------------------------------

    def handle_request(self, request_hex: str) -> Optional[str]:
        """Answer one request frame; None means undecodable (drop)."""
        if self.cfg.protocol == "modbus":
            return self._handle_modbus(request_hex)
        return self._handle_s7(request_hex)

    def _handle_modbus(self, request_hex: str) -> Optional[str]:
        try:
            frame = modbus.decode(request_hex, role="request")
        except Exception:
            return None
        try:
            code = modbus_verdict(self.cfg, frame)
        except InvalidRequest:
            return None
        if code is not None:
            return modbus.make_exception(frame, code).hex
        fc = frame.pdu.function_code
        body = frame.pdu.body
        header = modbus.MbapHeader(frame.header.transaction_id, 0, 0,
                                   frame.header.unit_id)
        if fc == modbus.READ_COILS:
            bits = self.coils[body.address:body.address + body.quantity]
            payload = modbus.pack_bits(bits)
            pdu = modbus.ModbusPdu(fc, modbus.ReadResponse(len(payload), payload))
        elif fc == modbus.READ_HOLDING_REGISTERS:
            words = self.holding_registers[body.address:body.address + body.quantity]
            payload = b"".join(w.to_bytes(2, "big") for w in words)
            pdu = modbus.ModbusPdu(fc, modbus.ReadResponse(len(payload), payload))
        elif fc == modbus.WRITE_SINGLE_COIL:
            self.coils[body.address] = 1 if body.value == modbus.COIL_ON else 0
            pdu = modbus.ModbusPdu(fc, modbus.WriteAck(body.address, body.value))
        elif fc == modbus.WRITE_SINGLE_REGISTER:
            self.holding_registers[body.address] = body.value
            self._after_register_writes({body.address})
            pdu = modbus.ModbusPdu(fc, modbus.WriteAck(body.address, body.value))
        elif fc == modbus.WRITE_MULTIPLE_COILS:
            for i, bit in enumerate(modbus.unpack_bits(body.values, body.quantity)):
                self.coils[body.address + i] = bit
            pdu = modbus.ModbusPdu(fc, modbus.WriteAck(body.address, body.quantity))
        else:  # WRITE_MULTIPLE_REGISTERS
            written = set()
            for i in range(body.quantity):
                word = int.from_bytes(body.values[2 * i:2 * i + 2], "big")
                self.holding_registers[body.address + i] = word
                written.add(body.address + i)
            self._after_register_writes(written)
            pdu = modbus.ModbusPdu(fc, modbus.WriteAck(body.address, body.quantity))
        response = modbus.encode(header, pdu).hex
        if any(sp.trigger == "tick" for sp in self.loops):
            self.tick()
        return response

    def _handle_s7(self, request_hex: str) -> Optional[str]:
        try:
            frame = s7.decode_s7(request_hex)
        except Exception:
            return None
        if frame.pdu_type != s7.PDU_TYPE_JOB:
            return None
        verdict = s7_verdict(self.cfg, frame)
        if isinstance(verdict, tuple):
            _, err_class, err_code = verdict
            ack = s7.S7Frame(s7.PDU_TYPE_ACK_DATA, frame.pdu_ref, frame.function,
                             error_class=err_class, error_code=err_code)
            return s7.encode_s7(ack)
        if frame.function == s7.FUNC_READ_VAR:
            data_items = []
            for item, code in zip(frame.items, verdict):
                if code != s7.RET_SUCCESS:
                    data_items.append(s7.S7DataItem(code, s7.DATA_TRANSPORT_BYTES, b""))
                elif item.transport_size == s7.TRANSPORT_BIT:
                    bits = bytes(
                        self.coils[item.start + i] for i in range(item.count))
                    data_items.append(s7.S7DataItem(s7.RET_SUCCESS,
                                                    s7.DATA_TRANSPORT_BIT, bits))
                else:
                    base = item.word_address()
                    payload = b"".join(
                        self.holding_registers[base + i].to_bytes(2, "big")
                        for i in range(item.count))
                    data_items.append(s7.S7DataItem(s7.RET_SUCCESS,
                                                    s7.DATA_TRANSPORT_BYTES, payload))
            ack = s7.S7Frame(s7.PDU_TYPE_ACK_DATA, frame.pdu_ref, frame.function,
                             data_items=tuple(data_items))
            return s7.encode_s7(ack)
        # write-var
        written: set[int] = set()
        for item, data, code in zip(frame.items, frame.data_items, verdict):
            if code != s7.RET_SUCCESS:
                continue
            if item.transport_size == s7.TRANSPORT_BIT:
                for i in range(item.count):
                    self.coils[item.start + i] = 1 if data.values[i] else 0
            else:
                base = item.word_address()
                for i in range(item.count):
                    word = int.from_bytes(data.values[2 * i:2 * i + 2], "big")
                    self.holding_registers[base + i] = word
                    written.add(base + i)
        if written:
            self._after_register_writes(written)
        ack = s7.S7Frame(s7.PDU_TYPE_ACK_DATA, frame.pdu_ref, frame.function,
                         write_ack_codes=tuple(verdict))
        response = s7.encode_s7(ack)
        if any(sp.trigger == "tick" for sp in self.loops):
            self.tick()
        return response


def recv_exact(sock: socket.socket, n: int) -> Optional[bytes]:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return None
        buf += chunk
    return buf


def read_message(sock: socket.socket, protocol: str) -> Optional[bytes]:
    """Read one protocol message using its own length field for framing."""
    if protocol == "modbus":
        head = recv_exact(sock, 7)
        if head is None:
            return None
        length = int.from_bytes(head[4:6], "big")
        if length < 1 or length > 0x100:
            raise ValueError("implausible MBAP length")
        rest = recv_exact(sock, length - 1)
        if rest is None:
            return None
        return head + rest
    head = recv_exact(sock, 4)
    if head is None:
        return None
    if head[0] != 3:
        raise ValueError("bad TPKT version")
    length = int.from_bytes(head[2:4], "big")
    if length < 5 or length > 0x2000:
        raise ValueError("implausible TPKT length")
    rest = recv_exact(sock, length - 4)
    if rest is None:
        return None
    return head + rest


def s7_scripted_reply(raw: bytes) -> Optional[bytes]:
    """Fixed handshake answers: COTP connect and setup-communication."""
    if len(raw) >= 6 and raw[5] == 0xE0:
        return s7.COTP_CONNECT_CONFIRM
    if len(raw) >= 18 and raw[4:7] == s7.COTP_DATA and raw[7] == 0x32 and raw[17] == 0xF0:
        return s7.S7_SETUP_ACK
    return None


class CaptureLog:
    """Append-only JSONL sink: {ts, peer, dir, hex} per line."""

    def __init__(self, path):
        self._f = open(path, "a")
        self._lock = threading.Lock()

    def write(self, peer: str, direction: str, hex_payload: str) -> None:
        rec = {"ts": time.time(), "peer": peer, "dir": direction, "hex": hex_payload}
        with self._lock:
            self._f.write(json.dumps(rec) + "\n")
            self._f.flush()

    def close(self) -> None:
        with self._lock:
            self._f.close()


class PlantServer:
    """Threaded TCP front of a Plant; one lock serializes state mutation."""

    def __init__(self, plant: Plant, host: str = "127.0.0.1", port: int = 0,
                 capture_log: Optional[str] = None):
        self.plant = plant
        self.log = CaptureLog(capture_log) if capture_log else None
        self._lock = threading.Lock()
        outer = self

        class Handler(socketserver.BaseRequestHandler):
            def handle(self):
                peer = f"{self.client_address[0]}:{self.client_address[1]}"
                protocol = outer.plant.cfg.protocol
                while True:
                    try:
                        raw = read_message(self.request, protocol)
                    except (ValueError, OSError):
                        if outer.log:
                            outer.log.write(peer, "error", "")
                        return
                    if raw is None:
                        return
                    if outer.log:
                        outer.log.write(peer, "in", raw.hex())
                    if protocol == "s7comm":
                        scripted = s7_scripted_reply(raw)
                        if scripted is not None:
                            self.request.sendall(scripted)
                            if outer.log:
                                outer.log.write(peer, "out", scripted.hex())
                            continue
                    with outer._lock:
                        response = outer.plant.handle_request(raw.hex())
                    if response is None:
                        if outer.log:
                            outer.log.write(peer, "drop", raw.hex())
                        return
                    self.request.sendall(bytes.fromhex(response))
                    if outer.log:
                        outer.log.write(peer, "out", response)

        class Server(socketserver.ThreadingTCPServer):
            allow_reuse_address = True
            daemon_threads = True

        try:
            self._server = Server((host, port), Handler)
        except OSError as exc:
            raise BindError(f"cannot bind {host}:{port}: {exc}") from None
        self.host, self.port = self._server.server_address
        self._thread: Optional[threading.Thread] = None

    def start(self) -> "PlantServer":
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self.log:
            self.log.close()

    def __enter__(self) -> "PlantServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
