"""Corpus loading for the source_text/target_text CSV interchange format.

The format is intentionally quote-free: payloads are hex strings plus the
context separators ':' and '|', none of which can contain a comma.
"""
from __future__ import annotations

from pathlib import Path

from .errors import BadCorpus, CorpusTooLong

CSV_HEADER = "source_text,target_text"

# Everything a framed source line may contain: hex payload plus the
# history separators.
SOURCE_ALPHABET = frozenset("0123456789abcdef:|")
HEX_ALPHABET = frozenset("0123456789abcdef")


def read_corpus(path: str | Path) -> list[tuple[str, str]]:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines or lines[0] != CSV_HEADER:
        raise BadCorpus(f"{path}: expected header {CSV_HEADER!r}")
    out = []
    for ln in lines[1:]:
        if "," not in ln:
            raise BadCorpus(f"{path}: malformed row {ln!r}")
        source, target = ln.split(",", 1)
        out.append((source, target))
    return out


def check_lengths(pairs: list[tuple[str, str]], source_cap: int,
                  target_cap: int, name: str = "corpus") -> None:
    """Reject any record longer than the configured caps, naming the row."""
    for row, (source, target) in enumerate(pairs, start=2):  # row 1 is the header
        if len(source) > source_cap:
            raise CorpusTooLong(
                f"{name} row {row}: source is {len(source)} chars, cap is {source_cap}")
        if len(target) > target_cap:
            raise CorpusTooLong(
                f"{name} row {row}: target is {len(target)} chars, cap is {target_cap}")


def is_hex_payload(text: str) -> bool:
    return bool(text) and len(text) % 2 == 0 and set(text) <= HEX_ALPHABET


def is_valid_source(text: str) -> bool:
    return bool(text) and set(text) <= SOURCE_ALPHABET
