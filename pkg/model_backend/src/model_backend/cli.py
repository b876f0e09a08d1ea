"""Command line entry points for training and serving."""
from __future__ import annotations

import signal

import click

from .service import InferenceServer
from .training import TrainConfig, finetune


@click.group()
def main():
    """Byte-level response-model trainer and inference service."""


@main.command()
@click.option("--train", "train_csv", required=True, type=click.Path(exists=True))
@click.option("--val", "val_csv", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--source-max-len", type=int, default=256, show_default=True)
@click.option("--target-max-len", type=int, default=64, show_default=True)
@click.option("--patience", type=int, default=10, show_default=True)
@click.option("--batch-size", type=int, default=32, show_default=True)
@click.option("--learning-rate", type=float, default=5e-4, show_default=True)
@click.option("--max-epochs", type=int, default=200, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def train(train_csv, val_csv, out_dir, source_max_len, target_max_len,
          patience, batch_size, learning_rate, max_epochs, seed):
    """Finetune on a source/target CSV corpus with early stopping."""
    cfg = TrainConfig(source_max_token_len=source_max_len,
                      target_max_token_len=target_max_len,
                      patience=patience, batch_size=batch_size,
                      learning_rate=learning_rate, max_epochs=max_epochs,
                      seed=seed)
    result = finetune(train_csv, val_csv, cfg, out_dir, log=click.echo)
    click.echo(f"checkpoint: {result.checkpoint_dir} "
               f"(stopped_early={result.stopped_early}, "
               f"best_val_loss={result.best_val_loss:.4f})")


@main.command()
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=7175, show_default=True)
def serve(checkpoint, host, port):
    """Serve the checkpoint over the hex-line TCP protocol."""
    server = InferenceServer(checkpoint, host=host, port=port)
    server.start()
    click.echo(f"inference service on {server.host}:{server.port}")
    signal.sigwait({signal.SIGINT, signal.SIGTERM})
    server.stop()


if __name__ == "__main__":
    main()
