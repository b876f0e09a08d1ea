import json
import socket
import socketserver
import threading
import time

import pytest

from plcmimic import modbus
from plcmimic.config import ProtocolConfig
from plcmimic.honeypot import (
    ConnectionContext,
    HoneypotServer,
    ModelResponder,
    OracleResponder,
    ResponderBinding,
    summarize_logs,
)
from plcmimic.plant import Plant, PlantServer

from frame_fixtures import scripted_requests


class MockModelService:
    """Line-oriented TCP stub standing in for the inference service."""

    def __init__(self, reply_fn, delay_s=0.0):
        outer = self

        class Handler(socketserver.StreamRequestHandler):
            def handle(self):
                for line in self.rfile:
                    text = line.decode("ascii").strip()
                    if outer.delay_s:
                        time.sleep(outer.delay_s)
                    self.wfile.write(outer.reply_fn(text).encode("ascii") + b"\n")
                    self.wfile.flush()

        class Server(socketserver.ThreadingTCPServer):
            allow_reuse_address = True
            daemon_threads = True

        self.reply_fn = reply_fn
        self.delay_s = delay_s
        self._server = Server(("127.0.0.1", 0), Handler)
        self.host, self.port = self._server.server_address
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        daemon=True)

    def __enter__(self):
        self._thread.start()
        return self

    def __exit__(self, *exc):
        self._server.shutdown()
        self._server.server_close()


def _exchange(sock, request_hex):
    sock.sendall(bytes.fromhex(request_hex))
    raw = sock.recv(4096)
    return raw.hex()


def test_binding_validation():
    with pytest.raises(ValueError):
        ResponderBinding("llm")
    with pytest.raises(ValueError):
        ResponderBinding("oracle", deadline_ms=0)
    with pytest.raises(ValueError):
        ResponderBinding("oracle", fallback="retry")


def test_oracle_responder_answers_like_a_plant(cfg):
    plant = Plant(cfg)
    responder = OracleResponder(cfg)
    for request in scripted_requests(cfg, 20, seed=1):
        assert responder(request) == plant.handle_request(request)


def test_connection_context_framing():
    context = ConnectionContext(2)
    assert context.frame_request("q1") == "q1:"
    context.record("q1", "r1")
    assert context.frame_request("q2") == "q1:r1|q2:"
    context.record("q2", "r2")
    context.record("q3", "r3")
    assert context.frame_request("q4") == "q2:r2|q3:r3|q4:"


def test_connection_context_disabled_at_zero():
    context = ConnectionContext(0)
    assert context.frame_request("q1") == "q1"
    context.record("q1", "r1")
    assert context.frame_request("q2") == "q2"


def test_honeypot_oracle_matches_plant_transcript(cfg, tmp_path):
    requests = scripted_requests(cfg, 100, seed=2)
    with PlantServer(Plant(cfg)) as plant_srv:
        with socket.create_connection((plant_srv.host, plant_srv.port)) as sock:
            plant_transcript = [_exchange(sock, r) for r in requests]
    binding = ResponderBinding("oracle")
    log = tmp_path / "interactions.jsonl"
    with HoneypotServer(cfg, binding, log) as honeypot:
        with socket.create_connection((honeypot.host, honeypot.port)) as sock:
            honeypot_transcript = [_exchange(sock, r) for r in requests]
    assert honeypot_transcript == plant_transcript


def test_honeypot_model_responder_end_to_end(cfg, tmp_path):
    oracle = OracleResponder(cfg)
    with MockModelService(oracle) as service:
        binding = ResponderBinding("model", model_host=service.host,
                                   model_port=service.port)
        log = tmp_path / "interactions.jsonl"
        with HoneypotServer(cfg, binding, log) as honeypot:
            request = scripted_requests(cfg, 1, seed=5)[0]
            with socket.create_connection((honeypot.host, honeypot.port)) as sock:
                response = _exchange(sock, request)
    assert response == Plant(cfg).handle_request(request)
    records = [json.loads(l) for l in log.read_text().splitlines()]
    out = [r for r in records if r["dir"] == "out"]
    assert out and out[0]["responder"] == "model"


def test_stalling_model_falls_back_to_exception(cfg, tmp_path):
    with MockModelService(lambda s: "", delay_s=0.5) as service:
        binding = ResponderBinding("model", deadline_ms=100,
                                   model_host=service.host,
                                   model_port=service.port)
        log = tmp_path / "interactions.jsonl"
        with HoneypotServer(cfg, binding, log) as honeypot:
            request = scripted_requests(cfg, 1, seed=6)[0]
            with socket.create_connection((honeypot.host, honeypot.port)) as sock:
                response = _exchange(sock, request)
    frame = modbus.decode(response, role="response")
    assert frame.pdu.function_code & 0x80
    assert frame.pdu.body.exception_code == modbus.EXC_SERVER_FAILURE
    records = [json.loads(l) for l in log.read_text().splitlines()]
    out = [r for r in records if r["dir"] == "out"]
    assert out[0]["responder"] == "fallback"


def test_model_responder_round_trips_lines():
    with MockModelService(lambda s: s[::-1]) as service:
        responder = ModelResponder(service.host, service.port)
        try:
            assert responder("abcd") == "dcba"
            assert responder("0102") == "2010"
        finally:
            responder.close()


def test_interaction_log_accounts_for_every_request(cfg, tmp_path):
    requests = scripted_requests(cfg, 25, seed=7)
    log = tmp_path / "interactions.jsonl"
    with HoneypotServer(cfg, ResponderBinding("oracle"), log) as honeypot:
        with socket.create_connection((honeypot.host, honeypot.port)) as sock:
            for r in requests:
                _exchange(sock, r)
    records = [json.loads(l) for l in log.read_text().splitlines()]
    ins = [r for r in records if r["dir"] == "in"]
    outs = [r for r in records if r["dir"] == "out"]
    assert len(ins) == len(outs) == len(requests)
    assert [r["hex"] for r in ins] == requests
    assert all(r["latency_us"] >= 0 and r["responder"] == "oracle" for r in outs)
    assert all(":" in r["peer"] for r in records)


def test_summarize_logs_percentiles(tmp_path):
    path = tmp_path / "log.jsonl"
    records = []
    for i, latency in enumerate([100, 200, 300, 400, 500]):
        records.append({"ts": float(i), "peer": f"10.0.0.{i % 2}:5",
                        "dir": "out", "hex": "00", "latency_us": latency})
    path.write_text("\n".join(json.dumps(r) for r in records) + "\n")
    summary = summarize_logs([path])
    assert summary["unique_peers"] == 2
    assert summary["latency_us"]["p50"] == 300
    assert summary["peers"]["10.0.0.0"]["records"] == 3
    assert summary["peers"]["10.0.0.1"]["first_seen"] == 1.0


def test_s7_honeypot_scripted_handshake(s7_cfg, tmp_path):
    from plcmimic import s7
    log = tmp_path / "interactions.jsonl"
    with HoneypotServer(s7_cfg, ResponderBinding("oracle"), log) as honeypot:
        with socket.create_connection((honeypot.host, honeypot.port)) as sock:
            sock.sendall(s7.COTP_CONNECT_REQUEST)
            assert sock.recv(4096) == s7.COTP_CONNECT_CONFIRM
            sock.sendall(s7.S7_SETUP_JOB)
            assert sock.recv(4096) == s7.S7_SETUP_ACK
            item = s7.S7Item(s7.TRANSPORT_WORD, 1, 1, s7.AREA_DATA_BLOCK, 0)
            request = s7.encode_s7(s7.S7Frame(s7.PDU_TYPE_JOB, 1,
                                              s7.FUNC_READ_VAR, items=(item,)))
            response = _exchange(sock, request)
    frame = s7.decode_s7(response)
    assert frame.pdu_type == s7.PDU_TYPE_ACK_DATA
    assert frame.data_items[0].values == b"\x00\x00"
