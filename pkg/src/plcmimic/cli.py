"""Command line entry points."""
from __future__ import annotations

import json
import signal
import sys
from pathlib import Path

import click

from .capture import (build_context, pair_transactions, parse_capture,
                      parse_jsonl_log, split_dataset, to_csv, from_csv)
from .client import make_client
from .config import ProtocolConfig
from .dataset import generate_boundary_dataset
from .honeypot import (HoneypotServer, ModelResponder, OracleResponder,
                       ResponderBinding, summarize_logs)
from .metrics import DEFAULT_EPS_GRID, evaluate
from .plant import Plant, PlantServer


def _parse_target(target: str) -> tuple[str, int]:
    host, _, port = target.rpartition(":")
    return host or "127.0.0.1", int(port)


@click.group()
def main():
    """PLC behavior cloning toolkit."""


@main.command("serve-plant")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--host", default="0.0.0.0", show_default=True)
@click.option("--port", type=int, default=None, help="Defaults to the protocol port.")
@click.option("--capture-log", type=click.Path(), default=None,
              help="Append request/response traffic to this JSONL file.")
def serve_plant(config_path, host, port, capture_log):
    """Run the simulated PLC server."""
    cfg = ProtocolConfig.load(config_path)
    server = PlantServer(Plant(cfg), host=host, port=port or cfg.port,
                         capture_log=capture_log)
    server.start()
    click.echo(f"plant ({cfg.protocol}) listening on {server.host}:{server.port}")
    signal.sigwait({signal.SIGINT, signal.SIGTERM})
    server.stop()


@main.command("gen-dataset")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--target", required=True, help="host:port of the plant or PLC.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--split/--no-split", default=True, show_default=True,
              help="Also write shuffled train/validation/test CSVs.")
def gen_dataset(config_path, target, seed, out_dir, split):
    """Probe a live target and write a boundary-method corpus."""
    cfg = ProtocolConfig.load(config_path)
    host, port = _parse_target(target)
    with make_client(host, port, cfg) as client:
        pairs = generate_boundary_dataset(client, cfg, seed=seed)
    if cfg.context_len > 0:
        pairs = build_context(pairs, cfg.context_len)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "dataset.csv").write_text(to_csv(pairs))
    if split:
        for name, subset in split_dataset(pairs, seed=seed).items():
            (out / f"{name}.csv").write_text(to_csv(subset))
    click.echo(f"wrote {len(pairs)} pairs to {out}")


@main.command("parse-capture")
@click.option("--capture", "capture_path", required=True, type=click.Path(exists=True))
@click.option("--protocol", type=click.Choice(["modbus", "s7comm"]), default="modbus")
@click.option("--port", type=int, default=502, show_default=True)
@click.option("--jsonl", is_flag=True, help="Input is a plant JSONL log, not PCAP.")
@click.option("--context-len", type=int, default=0, show_default=True)
@click.option("--out", "out_csv", required=True, type=click.Path())
def parse_capture_cmd(capture_path, protocol, port, jsonl, context_len, out_csv):
    """Convert a capture into an aligned source/target CSV."""
    entries = (parse_jsonl_log(capture_path) if jsonl
               else parse_capture(capture_path, protocol, port))
    result = pair_transactions(entries, protocol)
    pairs = result.pairs
    if context_len > 0:
        pairs = build_context(pairs, context_len)
    Path(out_csv).write_text(to_csv(pairs))
    click.echo(f"{len(pairs)} pairs, {len(result.orphan_requests)} orphan requests, "
               f"{len(result.orphan_responses)} orphan responses")


@main.command("eval")
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--responder", default="oracle", show_default=True,
              help="'oracle' or 'model:host:port'.")
@click.option("--eps", default=",".join(str(e) for e in DEFAULT_EPS_GRID),
              show_default=True, help="Comma-separated epsilon grid.")
@click.option("--out", "out_json", type=click.Path(), default=None)
@click.option("--curve-csv", type=click.Path(), default=None,
              help="Write the (eps, accuracy) curve as CSV.")
def eval_cmd(dataset_path, config_path, responder, eps, out_json, curve_csv):
    """Score a responder against a labeled dataset."""
    cfg = ProtocolConfig.load(config_path)
    pairs = from_csv(Path(dataset_path).read_text())
    if responder == "oracle":
        fn = OracleResponder(cfg)
    elif responder.startswith("model:"):
        host, port = _parse_target(responder[len("model:"):])
        fn = ModelResponder(host, port)
    else:
        raise click.UsageError(f"unknown responder {responder!r}")
    eps_grid = [int(e) for e in eps.split(",") if e.strip()]
    report = evaluate(fn, pairs, cfg, eps_grid)
    if out_json:
        Path(out_json).write_text(report.to_json())
    if curve_csv:
        Path(curve_csv).write_text(report.curve_csv())
    click.echo(report.to_json())


@main.command("honeypot")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--responder", default="oracle", show_default=True,
              help="'oracle' or 'model:host:port'.")
@click.option("--deadline-ms", type=int, default=500, show_default=True)
@click.option("--context-len", type=int, default=0, show_default=True)
@click.option("--host", default="0.0.0.0", show_default=True)
@click.option("--port", type=int, default=None)
@click.option("--log", "log_dir", required=True, type=click.Path())
def honeypot(config_path, responder, deadline_ms, context_len, host, port, log_dir):
    """Run the honeypot listener."""
    cfg = ProtocolConfig.load(config_path)
    log_path = Path(log_dir)
    log_path.mkdir(parents=True, exist_ok=True)
    if responder == "oracle":
        binding = ResponderBinding("oracle", deadline_ms=deadline_ms,
                                   context_len=context_len)
    elif responder.startswith("model:"):
        mhost, mport = _parse_target(responder[len("model:"):])
        binding = ResponderBinding("model", deadline_ms=deadline_ms,
                                   model_host=mhost, model_port=mport,
                                   context_len=context_len)
    else:
        raise click.UsageError(f"unknown responder {responder!r}")
    server = HoneypotServer(cfg, binding, log_path / "interactions.jsonl",
                            host=host, port=port or cfg.port)
    server.start()
    click.echo(f"honeypot ({cfg.protocol}) on {server.host}:{server.port}, "
               f"responder={binding.kind}")
    signal.sigwait({signal.SIGINT, signal.SIGTERM})
    server.stop()


@main.command("summarize-logs")
@click.argument("logs", nargs=-1, required=True, type=click.Path(exists=True))
def summarize_logs_cmd(logs):
    """Aggregate honeypot interaction logs."""
    click.echo(json.dumps(summarize_logs(logs), indent=2))


if __name__ == "__main__":
    sys.exit(main())
