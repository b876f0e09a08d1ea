"""Capture parsing: PCAP/JSONL to aligned request-response CSV datasets,
context-window construction, and train/validation/test splitting."""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .dataset import SamplePair
from .errors import BadPcap, InsufficientHistory, NoMatchingTraffic

CSV_HEADER = "source_text,target_text"

REQUEST = "request"
RESPONSE = "response"


@dataclass(frozen=True)
class CaptureEntry:
    direction: str  # request | response
    hex: str
    timestamp: float


def _pcap_packets(data: bytes):
    if len(data) < 24:
        raise BadPcap("file shorter than the PCAP global header")
    magic = data[:4]
    if magic == b"\xa1\xb2\xc3\xd4":
        endian, ts_div = ">", 1e6
    elif magic == b"\xd4\xc3\xb2\xa1":
        endian, ts_div = "<", 1e6
    elif magic == b"\xa1\xb2\x3c\x4d":
        endian, ts_div = ">", 1e9
    elif magic == b"\x4d\x3c\xb2\xa1":
        endian, ts_div = "<", 1e9
    else:
        raise BadPcap(f"unknown magic {magic.hex()}")
    linktype = struct.unpack(endian + "I", data[20:24])[0]
    off = 24
    while off < len(data):
        if off + 16 > len(data):
            raise BadPcap("truncated packet record header")
        sec, frac, incl, _orig = struct.unpack(endian + "IIII", data[off:off + 16])
        off += 16
        if off + incl > len(data):
            raise BadPcap("truncated packet record body")
        yield sec + frac / ts_div, linktype, data[off:off + incl]
        off += incl


def _tcp_segment(linktype: int, pkt: bytes):
    """(src, dst, sport, dport, seq, payload) for IPv4/TCP packets, else None."""
    if linktype == 1:  # ethernet
        if len(pkt) < 14 or pkt[12:14] != b"\x08\x00":
            return None
        ip = pkt[14:]
    elif linktype == 101:  # raw IP
        ip = pkt
    else:
        raise BadPcap(f"unsupported link type {linktype}")
    if len(ip) < 20 or ip[0] >> 4 != 4:
        return None
    ihl = (ip[0] & 0xF) * 4
    if ip[9] != 6:  # not TCP
        return None
    total_len = struct.unpack(">H", ip[2:4])[0]
    src, dst = ip[12:16], ip[16:20]
    tcp = ip[ihl:total_len]
    if len(tcp) < 20:
        return None
    sport, dport = struct.unpack(">HH", tcp[:4])
    seq = struct.unpack(">I", tcp[4:8])[0]
    data_off = (tcp[12] >> 4) * 4
    return src, dst, sport, dport, seq, tcp[data_off:]


def _reassemble(segments: list[tuple[int, float, bytes]]) -> tuple[bytes, list[tuple[int, float]]]:
    """Merge TCP segments into one stream; returns (stream, offsets->ts)."""
    segments.sort(key=lambda s: s[0])
    stream = bytearray()
    marks: list[tuple[int, float]] = []  # (stream offset, timestamp)
    next_seq = None
    for seq, ts, payload in segments:
        if not payload:
            continue
        if next_seq is None:
            next_seq = seq
        if seq + len(payload) <= next_seq:
            continue  # pure retransmission
        if seq < next_seq:
            payload = payload[next_seq - seq:]
            seq = next_seq
        marks.append((len(stream), ts))
        stream += payload
        next_seq = seq + len(payload)
    return bytes(stream), marks


def _message_length(stream: bytes, off: int, protocol: str) -> int | None:
    """Bytes in the next protocol message at off, or None if incomplete."""
    if protocol == "modbus":
        if off + 7 > len(stream):
            return None
        length = struct.unpack(">H", stream[off + 4:off + 6])[0]
        return 6 + length
    if off + 4 > len(stream):
        return None
    return struct.unpack(">H", stream[off + 2:off + 4])[0]


def _ts_at(marks: list[tuple[int, float]], offset: int) -> float:
    ts = marks[0][1] if marks else 0.0
    for mark_off, mark_ts in marks:
        if mark_off <= offset:
            ts = mark_ts
        else:
            break
    return ts


def parse_capture(path: str | Path, protocol: str, port: int) -> list[CaptureEntry]:
    """Extract protocol-layer payloads above TCP for the given port,
    reassembling across segment boundaries, in capture order."""
    data = Path(path).read_bytes()
    streams: dict[tuple, list[tuple[int, float, bytes]]] = {}
    order: list[tuple] = []
    for ts, linktype, pkt in _pcap_packets(data):
        seg = _tcp_segment(linktype, pkt)
        if seg is None:
            continue
        src, dst, sport, dport, seq, payload = seg
        if dport != port and sport != port:
            continue
        key = (src, sport, dst, dport)
        if key not in streams:
            streams[key] = []
            order.append(key)
        streams[key].append((seq, ts, payload))

    entries: list[CaptureEntry] = []
    for key in order:
        _, sport, _, dport = key
        direction = REQUEST if dport == port else RESPONSE
        stream, marks = _reassemble(streams[key])
        off = 0
        while True:
            msg_len = _message_length(stream, off, protocol)
            if msg_len is None or off + msg_len > len(stream):
                break
            entries.append(CaptureEntry(direction, stream[off:off + msg_len].hex(),
                                        _ts_at(marks, off)))
            off += msg_len
    if not entries:
        raise NoMatchingTraffic(f"no {protocol} traffic on port {port}")
    entries.sort(key=lambda e: e.timestamp)
    return entries


def parse_jsonl_log(path: str | Path) -> list[CaptureEntry]:
    """Read a plant/honeypot capture log ({ts, peer, dir, hex} lines)."""
    entries = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if rec.get("dir") not in ("in", "out") or not rec.get("hex"):
                continue
            direction = REQUEST if rec["dir"] == "in" else RESPONSE
            entries.append(CaptureEntry(direction, rec["hex"], rec["ts"]))
    return entries


def _modbus_key(hex_text: str):
    raw = bytes.fromhex(hex_text)
    return (int.from_bytes(raw[0:2], "big"), raw[6])  # (transaction_id, unit_id)


def _s7_key(hex_text: str):
    raw = bytes.fromhex(hex_text)
    if len(raw) < 13 or raw[7] != 0x32:
        return None
    return int.from_bytes(raw[11:13], "big")  # pdu_ref


@dataclass
class PairingResult:
    pairs: list[SamplePair]
    orphan_requests: list[CaptureEntry]
    orphan_responses: list[CaptureEntry]


def pair_transactions(entries: Iterable[CaptureEntry],
                      protocol: str = "modbus") -> PairingResult:
    """Align each request with its nearest following response sharing the
    same id key; unpaired entries are reported, not dropped."""
    key_fn = _modbus_key if protocol == "modbus" else _s7_key
    pending: dict[object, list[int]] = {}
    requests: list[CaptureEntry] = []
    matches: dict[int, str] = {}
    orphan_responses: list[CaptureEntry] = []
    for entry in entries:
        try:
            key = key_fn(entry.hex)
        except Exception:
            key = None
        if key is None:
            if entry.direction == RESPONSE:
                orphan_responses.append(entry)
            else:
                requests.append(entry)  # unkeyable request becomes an orphan
            continue
        if entry.direction == REQUEST:
            pending.setdefault(key, []).append(len(requests))
            requests.append(entry)
        else:
            queue = pending.get(key)
            if queue:
                matches[queue.pop(0)] = entry.hex
            else:
                orphan_responses.append(entry)
    pairs = [SamplePair(req.hex, matches[i])
             for i, req in enumerate(requests) if i in matches]
    orphan_requests = [req for i, req in enumerate(requests) if i not in matches]
    return PairingResult(pairs, orphan_requests, orphan_responses)


def to_csv(pairs: Iterable[SamplePair]) -> str:
    # hex and the context separators ':'/'|' never contain commas, so the
    # CSV needs no quoting
    lines = [CSV_HEADER]
    lines.extend(f"{p.source_text},{p.target_text}" for p in pairs)
    return "\n".join(lines) + "\n"


def from_csv(text: str) -> list[SamplePair]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"expected header {CSV_HEADER!r}")
    out = []
    for ln in lines[1:]:
        source, target = ln.split(",", 1)
        out.append(SamplePair(source, target))
    return out


def build_context(pairs: list[SamplePair], context_len: int) -> list[SamplePair]:
    """Serialize rolling history windows: "q1:r1|...|qL:rL|q:" -> r."""
    if context_len < 0:
        raise ValueError("context_len must be >= 0")
    if len(pairs) < context_len + 1:
        raise InsufficientHistory(
            f"need at least {context_len + 1} pairs, got {len(pairs)}")
    out = []
    for i in range(context_len, len(pairs)):
        history = pairs[i - context_len:i]
        source = "|".join(
            [f"{p.source_text}:{p.target_text}" for p in history]
            + [f"{pairs[i].source_text}:"])
        out.append(SamplePair(source, pairs[i].target_text))
    return out


def split_context(source_text: str) -> tuple[list[SamplePair], str]:
    """Invert one window's source serialization: (history pairs, query)."""
    sessions = source_text.split("|")
    query = sessions[-1]
    if not query.endswith(":"):
        raise ValueError("window source must end with 'query:'")
    history = []
    for session in sessions[:-1]:
        q, r = session.split(":", 1)
        history.append(SamplePair(q, r))
    return history, query[:-1]


def context_windows_to_pairs(windows: list[SamplePair],
                             context_len: int) -> list[SamplePair]:
    """Recover the original pair sequence from consecutive windows."""
    if not windows:
        return []
    history, first_query = split_context(windows[0].source_text)
    pairs = list(history)
    pairs.append(SamplePair(first_query, windows[0].target_text))
    for w in windows[1:]:
        _, query = split_context(w.source_text)
        pairs.append(SamplePair(query, w.target_text))
    return pairs


def split_dataset(pairs: list[SamplePair],
                  ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
                  seed: int | None = None) -> dict[str, list[SamplePair]]:
    """Shuffled partition; validation/test get floor(n*ratio), remainder
    goes to train. Deterministic under seed."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("ratios must sum to 1")
    rng = np.random.default_rng(seed)
    index = rng.permutation(len(pairs))
    n_val = int(len(pairs) * ratios[1])
    n_test = int(len(pairs) * ratios[2])
    n_train = len(pairs) - n_val - n_test
    shuffled = [pairs[i] for i in index]
    return {
        "train": shuffled[:n_train],
        "validation": shuffled[n_train:n_train + n_val],
        "test": shuffled[n_train + n_val:],
    }
