"""Inference service speaking the hex-line wire protocol.

One newline-terminated ASCII request line in, one response line out.
Generations are post-filtered: anything that is not a clean hex payload
is answered with an empty line so the caller can apply its fallback.
"""
from __future__ import annotations

import socketserver
import threading
from pathlib import Path
from typing import Optional

from .data import is_hex_payload, is_valid_source
from .training import greedy_decode, load_checkpoint


class Responder:
    """Checkpoint-backed request/response function with FIFO generation."""

    def __init__(self, checkpoint_dir: str | Path):
        self.model, self.tokenizer, self.cfg = load_checkpoint(checkpoint_dir)
        self._lock = threading.Lock()

    def __call__(self, source_text: str) -> str:
        source = source_text.strip().lower()
        if not is_valid_source(source):
            return ""
        if len(source) > self.cfg.source_max_token_len:
            return ""
        with self._lock:  # one generation at a time, arrival order
            pred = greedy_decode(self.model, self.tokenizer, [source],
                                 self.cfg.target_max_token_len)[0]
        return pred if is_hex_payload(pred) else ""


class InferenceServer:
    """TCP front of a Responder; speaks one hex line per request."""

    def __init__(self, checkpoint_dir: str | Path, host: str = "127.0.0.1",
                 port: int = 0):
        self.responder = Responder(checkpoint_dir)
        outer = self

        class Handler(socketserver.StreamRequestHandler):
            def handle(self):
                for line in self.rfile:
                    try:
                        text = line.decode("ascii", errors="replace").strip()
                    except Exception:
                        text = ""
                    reply = outer.responder(text)
                    self.wfile.write(reply.encode("ascii") + b"\n")
                    self.wfile.flush()

        class Server(socketserver.ThreadingTCPServer):
            allow_reuse_address = True
            daemon_threads = True

        self._server = Server((host, port), Handler)
        self.host, self.port = self._server.server_address
        self._thread: Optional[threading.Thread] = None

    def start(self) -> "InferenceServer":
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self) -> "InferenceServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


def serve_inference(checkpoint_dir: str | Path, host: str = "127.0.0.1",
                    port: int = 0) -> InferenceServer:
    return InferenceServer(checkpoint_dir, host, port).start()
