"""Deployable decoy: protocol listener with a pluggable responder, a
response deadline with fallback, per-connection context isolation, and
append-only JSONL interaction logging."""
from __future__ import annotations

import json
import queue
import socket
import socketserver
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional

from . import modbus, s7
from .capture import build_context
from .config import ProtocolConfig
from .dataset import SamplePair
from .errors import BindError
from .metrics import request_of_record
from .plant import Plant, read_message, s7_scripted_reply


@dataclass
class ResponderBinding:
    kind: str  # oracle | model
    deadline_ms: int = 500
    fallback: str = "exception"  # exception | drop
    model_host: str = "127.0.0.1"
    model_port: int = 0
    context_len: int = 0

    def __post_init__(self):
        if self.kind not in ("oracle", "model"):
            raise ValueError(f"unknown responder kind {self.kind!r}")
        if self.deadline_ms <= 0:
            raise ValueError("deadline_ms must be > 0")
        if self.fallback not in ("exception", "drop"):
            raise ValueError(f"unknown fallback {self.fallback!r}")


class OracleResponder:
    """Exact responder: an embedded plant answers every request."""

    def __init__(self, cfg: ProtocolConfig):
        self.plant = Plant(cfg)
        self._lock = threading.Lock()

    def __call__(self, source_text: str) -> str:
        request_hex = request_of_record(source_text)
        with self._lock:
            response = self.plant.handle_request(request_hex)
        return response or ""


class ModelResponder:
    """Forwards hex lines to an external inference service over TCP.

    Wire format: one ASCII hex request per newline-terminated line, one
    hex response line back.
    """

    def __init__(self, host: str, port: int, timeout_s: float = 5.0):
        self.host = host
        self.port = port
        self.timeout_s = timeout_s
        self._sock: Optional[socket.socket] = None
        self._buf = b""
        self._lock = threading.Lock()

    def _connect(self) -> None:
        self._sock = socket.create_connection((self.host, self.port),
                                              timeout=self.timeout_s)
        self._buf = b""

    def close(self) -> None:
        if self._sock is not None:
            self._sock.close()
            self._sock = None

    def _readline(self) -> str:
        while b"\n" not in self._buf:
            chunk = self._sock.recv(4096)
            if not chunk:
                raise ConnectionError("inference service closed the connection")
            self._buf += chunk
        line, self._buf = self._buf.split(b"\n", 1)
        return line.decode("ascii", errors="replace").strip()

    def __call__(self, source_text: str) -> str:
        with self._lock:
            if self._sock is None:
                self._connect()
            try:
                self._sock.sendall(source_text.encode("ascii") + b"\n")
                return self._readline()
            except Exception:
                self.close()
                raise


class ConnectionContext:
    """Rolling per-connection history window for the model responder."""

    def __init__(self, context_len: int):
        self.context_len = context_len
        self.history: deque[SamplePair] = deque(maxlen=max(context_len, 1))

    def frame_request(self, request_hex: str) -> str:
        if self.context_len == 0:
            return request_hex
        pairs = list(self.history)[-self.context_len:]
        windowed = build_context(pairs + [SamplePair(request_hex, "")],
                                 len(pairs))
        return windowed[-1].source_text

    def record(self, request_hex: str, response_hex: str) -> None:
        if self.context_len > 0:
            self.history.append(SamplePair(request_hex, response_hex))


class InteractionLog:
    """Single-writer JSONL queue; order preserved per connection."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._queue: queue.Queue = queue.Queue()
        self._thread = threading.Thread(target=self._drain, daemon=True)
        self._closed = threading.Event()
        self._thread.start()

    def _drain(self) -> None:
        with open(self.path, "a") as f:
            while True:
                try:
                    rec = self._queue.get(timeout=0.1)
                except queue.Empty:
                    if self._closed.is_set():
                        return
                    continue
                if rec is None:
                    return
                try:
                    f.write(json.dumps(rec) + "\n")
                    f.flush()
                except OSError as exc:  # degrade to stderr, never drop service
                    import sys
                    print(f"log sink failure: {exc}: {rec}", file=sys.stderr)

    def emit(self, **rec) -> None:
        self._queue.put(rec)

    def close(self) -> None:
        self._queue.put(None)
        self._closed.set()
        self._thread.join(timeout=5)


def _now_ts() -> float:
    return time.time()


class HoneypotServer:
    """Listens on a protocol port and answers through the bound responder."""

    def __init__(self, cfg: ProtocolConfig, binding: ResponderBinding,
                 log_path: str | Path, host: str = "127.0.0.1", port: int = 0):
        self.cfg = cfg
        self.binding = binding
        self.log = InteractionLog(log_path)
        if binding.kind == "oracle":
            self.responder: Callable[[str], str] = OracleResponder(cfg)
        else:
            self.responder = ModelResponder(binding.model_host, binding.model_port,
                                            timeout_s=binding.deadline_ms / 1000.0)
        outer = self

        class Handler(socketserver.BaseRequestHandler):
            def handle(self):
                peer = f"{self.client_address[0]}:{self.client_address[1]}"
                context = ConnectionContext(outer.binding.context_len)
                protocol = outer.cfg.protocol
                while True:
                    try:
                        raw = read_message(self.request, protocol)
                    except (ValueError, OSError):
                        outer.log.emit(ts=_now_ts(), peer=peer, dir="drop", hex="")
                        return
                    if raw is None:
                        return
                    request_hex = raw.hex()
                    outer.log.emit(ts=_now_ts(), peer=peer, dir="in", hex=request_hex)
                    if protocol == "s7comm":
                        scripted = s7_scripted_reply(raw)
                        if scripted is not None:
                            self.request.sendall(scripted)
                            outer.log.emit(ts=_now_ts(), peer=peer, dir="out",
                                           hex=scripted.hex(), latency_us=0,
                                           responder="oracle")
                            continue
                    response, responder_kind, latency_us = outer._respond(
                        request_hex, context)
                    if not response:
                        outer.log.emit(ts=_now_ts(), peer=peer, dir="drop",
                                       hex=request_hex)
                        return
                    self.request.sendall(bytes.fromhex(response))
                    outer.log.emit(ts=_now_ts(), peer=peer, dir="out", hex=response,
                                   latency_us=latency_us, responder=responder_kind)

        class Server(socketserver.ThreadingTCPServer):
            allow_reuse_address = True
            daemon_threads = True

        try:
            self._server = Server((host, port), Handler)
        except OSError as exc:
            raise BindError(f"cannot bind {host}:{port}: {exc}") from None
        self.host, self.port = self._server.server_address
        self._thread: Optional[threading.Thread] = None

    def _fallback(self, request_hex: str) -> str:
        if self.binding.fallback == "drop":
            return ""
        if self.cfg.protocol == "modbus":
            try:
                return modbus.make_exception(request_hex,
                                             modbus.EXC_SERVER_FAILURE).hex
            except Exception:
                return ""
        try:
            job = s7.decode_s7(request_hex)
            ack = s7.S7Frame(s7.PDU_TYPE_ACK_DATA, job.pdu_ref, job.function,
                             error_class=0x81, error_code=0x04)
            return s7.encode_s7(ack)
        except Exception:
            return ""

    def _respond(self, request_hex: str,
                 context: ConnectionContext) -> tuple[str, str, int]:
        deadline_s = self.binding.deadline_ms / 1000.0
        framed = (context.frame_request(request_hex)
                  if self.binding.kind == "model" else request_hex)
        start = time.monotonic()
        try:
            response = self.responder(framed)
        except Exception:
            response = ""
        elapsed = time.monotonic() - start
        latency_us = int(elapsed * 1e6)
        if not response or elapsed > deadline_s:
            response = self._fallback(request_hex)
            context.record(request_hex, response)
            return response, "fallback", latency_us
        context.record(request_hex, response)
        return response, self.binding.kind, latency_us

    def start(self) -> "HoneypotServer":
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if isinstance(self.responder, ModelResponder):
            self.responder.close()
        self.log.close()

    def __enter__(self) -> "HoneypotServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


def summarize_logs(paths: Iterable[str | Path]) -> dict:
    """Per-peer counts and first/last seen plus latency percentiles."""
    peers: dict[str, dict] = {}
    latencies: list[int] = []
    for path in paths:
        with open(path) as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                ip = str(rec.get("peer", "")).rsplit(":", 1)[0]
                if not ip:
                    continue
                info = peers.setdefault(ip, {"records": 0,
                                             "first_seen": rec["ts"],
                                             "last_seen": rec["ts"]})
                info["records"] += 1
                info["first_seen"] = min(info["first_seen"], rec["ts"])
                info["last_seen"] = max(info["last_seen"], rec["ts"])
                if rec.get("dir") == "out" and "latency_us" in rec:
                    latencies.append(rec["latency_us"])

    def percentile(sorted_values: list[int], q: float) -> Optional[float]:
        if not sorted_values:
            return None
        if len(sorted_values) == 1:
            return float(sorted_values[0])
        pos = q * (len(sorted_values) - 1)
        lo = int(pos)
        hi = min(lo + 1, len(sorted_values) - 1)
        return sorted_values[lo] + (pos - lo) * (sorted_values[hi] - sorted_values[lo])

    latencies.sort()
    return {
        "unique_peers": len(peers),
        "peers": peers,
        "latency_us": {
            "p50": percentile(latencies, 0.50),
            "p90": percentile(latencies, 0.90),
            "p99": percentile(latencies, 0.99),
        },
    }
