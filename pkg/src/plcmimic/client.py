"""Probe clients: build request frames, send them to a live plant (or real
PLC), and capture request/response hex pairs."""
from __future__ import annotations

import socket
from typing import Optional, Sequence

from . import modbus, s7
from .config import ProtocolConfig
from .errors import ConnectionLost, ProbeTimeout
from .plant import read_message


class ProbeClient:
    """Base TCP client with per-request retry (3 tries, then skip-and-log)."""

    RETRIES = 3

    def __init__(self, host: str, port: int, cfg: ProtocolConfig,
                 timeout: float = 5.0, unit_id: int = 1):
        self.host = host
        self.port = port
        self.cfg = cfg
        self.timeout = timeout
        self.unit_id = unit_id
        self.skipped: list[str] = []
        self._sock: Optional[socket.socket] = None
        self.connect()

    def connect(self) -> None:
        try:
            self._sock = socket.create_connection((self.host, self.port),
                                                  timeout=self.timeout)
        except OSError as exc:
            raise ConnectionLost(f"cannot connect to {self.host}:{self.port}: {exc}")

    def close(self) -> None:
        if self._sock is not None:
            self._sock.close()
            self._sock = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _roundtrip_once(self, request_hex: str) -> str:
        self._sock.sendall(bytes.fromhex(request_hex))
        raw = read_message(self._sock, self.cfg.protocol)
        if raw is None:
            raise ConnectionLost("server closed the connection")
        return raw.hex()

    def exchange(self, request_hex: str) -> str:
        """Send one request; retry on timeout, reconnecting as needed."""
        last: Exception | None = None
        for _ in range(self.RETRIES):
            try:
                return self._roundtrip_once(request_hex)
            except (socket.timeout, TimeoutError) as exc:
                last = exc
            except (OSError, ConnectionLost, ValueError) as exc:
                last = exc
                self.close()
                self.connect()
        self.skipped.append(request_hex)
        raise ProbeTimeout(f"request failed after {self.RETRIES} tries: {last}")


class ModbusProbeClient(ProbeClient):
    def __init__(self, *args, **kwargs):
        self._tid = 0
        super().__init__(*args, **kwargs)

    def _next_tid(self) -> int:
        self._tid = (self._tid + 1) & 0xFFFF
        return self._tid

    def _send(self, pdu: modbus.ModbusPdu) -> tuple[str, str]:
        header = modbus.MbapHeader(self._next_tid(), 0, 0, self.unit_id)
        request = modbus.encode(header, pdu).hex
        return request, self.exchange(request)

    def read(self, address: int, count: int, digital: bool) -> tuple[str, str]:
        fc = modbus.READ_COILS if digital else modbus.READ_HOLDING_REGISTERS
        return self._send(modbus.ModbusPdu(fc, modbus.ReadRequest(address, count)))

    def write(self, address: int, values: Sequence[int], digital: bool) -> tuple[str, str]:
        if digital:
            bits = [v & 1 for v in values]
            if len(bits) == 1 and modbus.WRITE_SINGLE_COIL in self.cfg.functions:
                value = modbus.COIL_ON if bits[0] else modbus.COIL_OFF
                pdu = modbus.ModbusPdu(modbus.WRITE_SINGLE_COIL,
                                       modbus.WriteSingle(address, value))
            else:
                payload = modbus.pack_bits(bits)
                pdu = modbus.ModbusPdu(
                    modbus.WRITE_MULTIPLE_COILS,
                    modbus.WriteMultiple(address, len(bits), len(payload), payload))
        else:
            if len(values) == 1 and modbus.WRITE_SINGLE_REGISTER in self.cfg.functions:
                pdu = modbus.ModbusPdu(modbus.WRITE_SINGLE_REGISTER,
                                       modbus.WriteSingle(address, values[0] & 0xFFFF))
            else:
                payload = b"".join((v & 0xFFFF).to_bytes(2, "big") for v in values)
                pdu = modbus.ModbusPdu(
                    modbus.WRITE_MULTIPLE_REGISTERS,
                    modbus.WriteMultiple(address, len(values), len(payload), payload))
        return self._send(pdu)


class S7ProbeClient(ProbeClient):
    def __init__(self, *args, **kwargs):
        self._ref = 0
        super().__init__(*args, **kwargs)
        self._handshake()

    def _handshake(self) -> None:
        self._sock.sendall(s7.COTP_CONNECT_REQUEST)
        read_message(self._sock, "s7comm")
        self._sock.sendall(s7.S7_SETUP_JOB)
        read_message(self._sock, "s7comm")

    def connect(self) -> None:
        super().connect()
        if self._ref:  # reconnect after the first session needs a new handshake
            self._handshake()

    def _next_ref(self) -> int:
        self._ref = (self._ref + 1) & 0xFFFF
        return self._ref

    @staticmethod
    def _item(address: int, count: int, digital: bool) -> s7.S7Item:
        if digital:
            return s7.S7Item(s7.TRANSPORT_BIT, count, 1, s7.AREA_DATA_BLOCK, address)
        return s7.S7Item(s7.TRANSPORT_WORD, count, 1, s7.AREA_DATA_BLOCK, address * 16)

    def read(self, address: int, count: int, digital: bool) -> tuple[str, str]:
        frame = s7.S7Frame(s7.PDU_TYPE_JOB, self._next_ref(), s7.FUNC_READ_VAR,
                           items=(self._item(address, count, digital),))
        request = s7.encode_s7(frame)
        return request, self.exchange(request)

    def write(self, address: int, values: Sequence[int], digital: bool) -> tuple[str, str]:
        if digital:
            payload = bytes(v & 1 for v in values)
            data = s7.S7DataItem(0, s7.DATA_TRANSPORT_BIT, payload)
        else:
            payload = b"".join((v & 0xFFFF).to_bytes(2, "big") for v in values)
            data = s7.S7DataItem(0, s7.DATA_TRANSPORT_BYTES, payload)
        frame = s7.S7Frame(s7.PDU_TYPE_JOB, self._next_ref(), s7.FUNC_WRITE_VAR,
                           items=(self._item(address, len(values), digital),),
                           data_items=(data,))
        request = s7.encode_s7(frame)
        return request, self.exchange(request)


def make_client(host: str, port: int, cfg: ProtocolConfig, **kwargs) -> ProbeClient:
    if cfg.protocol == "modbus":
        return ModbusProbeClient(host, port, cfg, **kwargs)
    return S7ProbeClient(host, port, cfg, **kwargs)
