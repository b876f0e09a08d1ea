"""Finetuning loop for a byte-level encoder-decoder response model.

The model is a small randomly initialized T5 variant with a byte
tokenizer, trained from scratch on request/response hex pairs. Early
stopping watches validation loss; a byte-exact accuracy probe runs every
epoch on the validation split.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional

import torch
from transformers import ByT5Tokenizer, T5Config, T5ForConditionalGeneration

from .data import check_lengths, read_corpus

GENERATION_SLACK = 2  # room for the EOS token past the target cap


@dataclass
class TrainConfig:
    source_max_token_len: int = 256
    target_max_token_len: int = 64
    patience: int = 10
    batch_size: int = 32
    learning_rate: float = 5e-4
    seed: int = 0
    max_epochs: int = 200
    # stop as soon as validation byte-exact accuracy reaches this level
    target_bca: Optional[float] = None
    d_model: int = 192
    d_ff: int = 384
    num_layers: int = 2
    num_heads: int = 4

    def __post_init__(self):
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.source_max_token_len < 1 or self.target_max_token_len < 1:
            raise ValueError("token-length caps must be >= 1")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("batch_size and max_epochs must be >= 1")


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float
    bca: float
    validity: Optional[float] = None


@dataclass
class TrainResult:
    checkpoint_dir: str
    epochs: list[EpochStats] = field(default_factory=list)
    stopped_early: bool = False
    best_val_loss: float = float("inf")

    def to_json(self) -> str:
        return json.dumps({
            "checkpoint_dir": self.checkpoint_dir,
            "stopped_early": self.stopped_early,
            "best_val_loss": self.best_val_loss,
            "epochs": [asdict(e) for e in self.epochs],
        }, indent=2)


def build_model(cfg: TrainConfig) -> tuple[T5ForConditionalGeneration, ByT5Tokenizer]:
    tokenizer = ByT5Tokenizer()
    torch.manual_seed(cfg.seed)
    model_cfg = T5Config(
        vocab_size=len(tokenizer),
        d_model=cfg.d_model,
        d_ff=cfg.d_ff,
        d_kv=cfg.d_model // cfg.num_heads,
        num_layers=cfg.num_layers,
        num_decoder_layers=cfg.num_layers,
        num_heads=cfg.num_heads,
        dropout_rate=0.0,
        decoder_start_token_id=tokenizer.pad_token_id,
        pad_token_id=tokenizer.pad_token_id,
        eos_token_id=tokenizer.eos_token_id,
    )
    return T5ForConditionalGeneration(model_cfg), tokenizer


def _encode_batch(tokenizer, sources, targets, source_cap, target_cap):
    enc = tokenizer(list(sources), return_tensors="pt", padding=True,
                    truncation=True, max_length=source_cap + 1)
    dec = tokenizer(list(targets), return_tensors="pt", padding=True,
                    truncation=True, max_length=target_cap + 1)
    labels = dec.input_ids.clone()
    labels[labels == tokenizer.pad_token_id] = -100
    return enc.input_ids, enc.attention_mask, labels


def greedy_decode(model, tokenizer, sources, target_cap, batch_size=64):
    """Deterministic generation for a batch of source texts."""
    model.eval()
    out: list[str] = []
    with torch.no_grad():
        for i in range(0, len(sources), batch_size):
            chunk = list(sources[i:i + batch_size])
            enc = tokenizer(chunk, return_tensors="pt", padding=True)
            gen = model.generate(input_ids=enc.input_ids,
                                 attention_mask=enc.attention_mask,
                                 max_new_tokens=target_cap + GENERATION_SLACK,
                                 do_sample=False, num_beams=1)
            out.extend(tokenizer.batch_decode(gen, skip_special_tokens=True))
    return out


def _epoch_loss(model, tokenizer, pairs, cfg, optimizer=None, generator=None):
    training = optimizer is not None
    model.train(training)
    order = (torch.randperm(len(pairs), generator=generator).tolist()
             if training else range(len(pairs)))
    shuffled = [pairs[i] for i in order]
    total, seen = 0.0, 0
    for i in range(0, len(shuffled), cfg.batch_size):
        batch = shuffled[i:i + cfg.batch_size]
        ids, mask, labels = _encode_batch(
            tokenizer, [s for s, _ in batch], [t for _, t in batch],
            cfg.source_max_token_len, cfg.target_max_token_len)
        if training:
            optimizer.zero_grad()
            loss = model(input_ids=ids, attention_mask=mask, labels=labels).loss
            loss.backward()
            optimizer.step()
        else:
            with torch.no_grad():
                loss = model(input_ids=ids, attention_mask=mask, labels=labels).loss
        total += float(loss.detach()) * len(batch)
        seen += len(batch)
    return total / max(seen, 1)


def finetune(train_csv: str | Path, val_csv: str | Path, cfg: TrainConfig,
             out_dir: str | Path,
             validity_hook: Optional[Callable[[list[str], list[str]], float]] = None,
             log: Optional[Callable[[str], None]] = None) -> TrainResult:
    """Train until validation loss stops improving for cfg.patience epochs.

    validity_hook, when given, receives (source_texts, predictions) for the
    validation split each epoch and returns a protocol-validity rate; this
    keeps protocol knowledge outside this package.
    """
    train_pairs = read_corpus(train_csv)
    val_pairs = read_corpus(val_csv)
    check_lengths(train_pairs, cfg.source_max_token_len,
                  cfg.target_max_token_len, name=str(train_csv))
    check_lengths(val_pairs, cfg.source_max_token_len,
                  cfg.target_max_token_len, name=str(val_csv))

    model, tokenizer = build_model(cfg)
    generator = torch.Generator().manual_seed(cfg.seed)
    optimizer = torch.optim.AdamW(model.parameters(), lr=cfg.learning_rate)
    scheduler = torch.optim.lr_scheduler.CosineAnnealingLR(
        optimizer, T_max=cfg.max_epochs)

    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)
    result = TrainResult(checkpoint_dir=str(out_path))
    stale = 0
    val_sources = [s for s, _ in val_pairs]
    val_targets = [t for _, t in val_pairs]
    for epoch in range(1, cfg.max_epochs + 1):
        train_loss = _epoch_loss(model, tokenizer, train_pairs, cfg,
                                 optimizer=optimizer, generator=generator)
        scheduler.step()
        val_loss = _epoch_loss(model, tokenizer, val_pairs, cfg)
        preds = greedy_decode(model, tokenizer, val_sources,
                              cfg.target_max_token_len)
        bca = sum(p == t for p, t in zip(preds, val_targets)) / len(val_targets)
        validity = validity_hook(val_sources, preds) if validity_hook else None
        stats = EpochStats(epoch, train_loss, val_loss, bca, validity)
        result.epochs.append(stats)
        if log:
            log(f"epoch {epoch}: train={train_loss:.4f} val={val_loss:.4f} "
                f"bca={bca:.3f}")
        if cfg.target_bca is not None and bca >= cfg.target_bca:
            result.best_val_loss = min(result.best_val_loss, val_loss)
            model.save_pretrained(out_path)
            break
        if val_loss < result.best_val_loss:
            result.best_val_loss = val_loss
            stale = 0
            model.save_pretrained(out_path)
        else:
            stale += 1
            if stale >= cfg.patience:
                result.stopped_early = True
                break
    with open(out_path / "train_config.json", "w") as f:
        json.dump(asdict(cfg), f, indent=2)
    with open(out_path / "training_log.json", "w") as f:
        f.write(result.to_json())
    return result


def load_checkpoint(checkpoint_dir: str | Path):
    """(model, tokenizer, TrainConfig) for a saved checkpoint directory."""
    path = Path(checkpoint_dir)
    with open(path / "train_config.json") as f:
        cfg = TrainConfig(**json.load(f))
    model = T5ForConditionalGeneration.from_pretrained(path)
    model.eval()
    return model, ByT5Tokenizer(), cfg
