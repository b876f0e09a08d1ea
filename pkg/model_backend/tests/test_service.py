import socket
import time

import pytest

from model_backend.service import InferenceServer, Responder


def _ask(sock_file, sock, line):
    sock.sendall(line.encode("ascii") + b"\n")
    return sock_file.readline().decode("ascii").strip()


def test_responder_reproduces_training_pairs(memorized_checkpoint):
    checkpoint_dir, pairs = memorized_checkpoint
    responder = Responder(checkpoint_dir)
    for source, target in pairs:
        assert responder(source) == target


def test_responder_rejects_malformed_sources(memorized_checkpoint):
    checkpoint_dir, _ = memorized_checkpoint
    responder = Responder(checkpoint_dir)
    assert responder("not hex at all!") == ""
    assert responder("") == ""
    assert responder("aa" * 200) == ""  # over the source cap


def test_server_round_trip_and_latency(memorized_checkpoint):
    checkpoint_dir, pairs = memorized_checkpoint
    with InferenceServer(checkpoint_dir) as server:
        with socket.create_connection((server.host, server.port)) as sock:
            f = sock.makefile("rb")
            for source, target in pairs[:3]:
                start = time.monotonic()
                reply = _ask(f, sock, source)
                elapsed = time.monotonic() - start
                assert reply == target
                assert elapsed < 0.5
            assert _ask(f, sock, "zz!") == ""


def test_honeypot_integration_answers_within_deadline(memorized_checkpoint):
    plcmimic = pytest.importorskip("plcmimic")
    from plcmimic.config import ProtocolConfig
    from plcmimic.honeypot import HoneypotServer, ResponderBinding

    checkpoint_dir, pairs = memorized_checkpoint
    cfg = ProtocolConfig()
    with InferenceServer(checkpoint_dir) as inference:
        binding = ResponderBinding("model", deadline_ms=500,
                                   model_host=inference.host,
                                   model_port=inference.port)
        import tempfile
        from pathlib import Path
        with tempfile.TemporaryDirectory() as tmp:
            log = Path(tmp) / "interactions.jsonl"
            with HoneypotServer(cfg, binding, log) as honeypot:
                source, target = pairs[0]
                with socket.create_connection((honeypot.host,
                                               honeypot.port)) as sock:
                    start = time.monotonic()
                    sock.sendall(bytes.fromhex(source))
                    reply = sock.recv(4096)
                    elapsed = time.monotonic() - start
    assert reply.hex() == target
    assert elapsed < 0.5
