"""Training-corpus generation by probing a live plant.

Three probing strategies: boundary-triplet probing of the protocol
surface, derivative-weighted sampling of math blocks, and evenly spaced
sweeps of control-loop inputs. Plus the iterative dataset-sizing loop
that doubles the corpus until the quality metric plateaus.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .client import ProbeClient
from .config import MathBlockSpec, ProtocolConfig
from .errors import EmptyRange, ProbeTimeout, TrainerUnavailable

MIN_MEANINGFUL_SIZE = 200


@dataclass(frozen=True)
class SamplePair:
    source_text: str
    target_text: str


def triplet(low: int, high: int, elem: int, rng: np.random.Generator) -> list[int]:
    """Boundary triplet [low, middle, high - elem] with a random middle
    drawn uniformly from (low, high - elem - 1]."""
    if high - elem <= low + 1:
        raise EmptyRange(f"no triplet in [{low}, {high}] with elem={elem}")
    middle = int(rng.integers(low + 1, high - elem - 1, endpoint=True))
    return [low, middle, high - elem]


def combs(val_low: int, val_high: int, elem: int, rng: np.random.Generator,
          width_offset: int = 0) -> dict[int, tuple[int, ...]]:
    """All value combinations over the boundary triplet, indexed.

    Tuple width is elem + width_offset; the default width_offset of 0 is
    the reading consistent with the per-pass sample-count constant.
    """
    if elem + width_offset < 1:
        raise EmptyRange("zero-width value tuples are not writable")
    bounds = triplet(val_low, val_high, 0, rng)
    product = itertools.product(bounds, repeat=elem + width_offset)
    return {index: comb for index, comb in enumerate(product)}


def _areas(cfg: ProtocolConfig) -> list[bool]:
    """Probed areas as digital? flags, in digital-then-analog order."""
    if cfg.protocol == "modbus":
        digital = bool(set(cfg.functions) & {1, 5, 15})
        analog = bool(set(cfg.functions) & {3, 6, 16})
    else:
        digital = analog = True
    out = []
    if digital and cfg.digital_count > 1:
        out.append(True)
    if analog and cfg.analog_count > 1:
        out.append(False)
    if not out:
        raise EmptyRange("no probe-able area in the configuration")
    return out


def pairs_per_pass(cfg: ProtocolConfig) -> int:
    """Sample count of one boundary pass: sum over widths of 6 * 3^w * 2."""
    return sum(6 * 3 ** (elem + cfg.combs_width_offset) * 2
               for elem in range(1, cfg.m_elem + 1))


def execute_boundaries(client: ProbeClient, cfg: ProtocolConfig,
                       rng: np.random.Generator,
                       digital: bool = False) -> list[SamplePair]:
    """One full boundary pass against one memory area.

    For every element width, probes three in-range and three exception-range
    boundary addresses with every boundary value combination; each probe is
    a write followed by a read, both captured.
    """
    pairs: list[SamplePair] = []
    addr_high = cfg.addr_high(digital)
    for elem in range(1, cfg.m_elem + 1):
        bounds = triplet(cfg.addr_low, addr_high, cfg.m_elem, rng)
        e_bounds = triplet(addr_high + 1, cfg.max_addr, cfg.m_elem, rng)
        for addr in bounds + e_bounds:
            combinations = combs(cfg.val_low, cfg.val_high, elem, rng,
                                 cfg.combs_width_offset)
            for data in combinations.values():
                try:
                    pairs.append(SamplePair(*client.write(addr, data, digital)))
                    pairs.append(SamplePair(*client.read(addr, len(data), digital)))
                except ProbeTimeout:
                    continue  # skip-and-log is handled inside the client
    return pairs


def generate_boundary_dataset(client: ProbeClient, cfg: ProtocolConfig,
                              seed: int | None = None) -> list[SamplePair]:
    """Repeat boundary passes (alternating areas) until dataset_size, then
    truncate to it exactly."""
    rng = np.random.default_rng(seed)
    areas = _areas(cfg)
    pairs: list[SamplePair] = []
    i = 0
    while len(pairs) < cfg.dataset_size:
        pairs.extend(execute_boundaries(client, cfg, rng, digital=areas[i % len(areas)]))
        i += 1
    return pairs[:cfg.dataset_size]


def probe_math(client: ProbeClient, xs: Iterable[float],
               block: MathBlockSpec) -> list[SamplePair]:
    """Write each x to the block input then read its output: 2 pairs per x.

    Out-of-range write responses (exceptions) are kept in the corpus.
    """
    pairs: list[SamplePair] = []
    for x in xs:
        counts = block.encode_in(float(x))
        try:
            pairs.append(SamplePair(*client.write(block.in_addr, [counts], False)))
            pairs.append(SamplePair(*client.read(block.out_addr, 1, False)))
        except ProbeTimeout:
            continue
    return pairs


def probe_process(client: ProbeClient, cfg: ProtocolConfig,
                  rng: np.random.Generator,
                  interval: tuple[int, int] = (0, 100),
                  points: int = 5,
                  digital_inputs: Sequence[int] = (),
                  analog_inputs: Sequence[int] = ()) -> list[SamplePair]:
    """Control-loop probing: evenly spaced valid sweeps plus exception-range
    boundary probes, in session order."""
    pairs: list[SamplePair] = []
    lo, hi = interval
    sweep = [round(lo + (hi - lo) * i / (points - 1)) for i in range(points)] \
        if points > 1 else [lo]

    def _sweep(addrs: Sequence[int], digital: bool) -> None:
        for elem in range(1, cfg.m_elem + 1):
            for start in range(0, max(len(addrs) - elem + 1, 0)):
                base = addrs[start]
                for v in sweep:
                    values = [v] * elem
                    try:
                        pairs.append(SamplePair(*client.write(base, values, digital)))
                        pairs.append(SamplePair(*client.read(base, elem, digital)))
                    except ProbeTimeout:
                        continue

    _sweep(list(digital_inputs), True)
    _sweep(list(analog_inputs), False)

    # exception_function: boundary addresses beyond the valid scope
    for digital in _areas(cfg):
        addr_high = cfg.addr_high(digital)
        for elem in range(1, cfg.m_elem + 1):
            e_bounds = triplet(addr_high + 1, cfg.max_addr, cfg.m_elem, rng)
            for addr in e_bounds:
                for data in combs(cfg.val_low, cfg.val_high, elem, rng).values():
                    try:
                        pairs.append(SamplePair(*client.write(addr, data, digital)))
                        pairs.append(SamplePair(*client.read(addr, len(data), digital)))
                    except ProbeTimeout:
                        continue
    return pairs


@dataclass
class SizingReport:
    best_size: int
    best_score: float
    history: list[tuple[int, float]] = field(default_factory=list)


def iterative_sizing(trainer: Callable[[list[SamplePair]], float],
                     generate: Callable[[int], list[SamplePair]],
                     start: int = MIN_MEANINGFUL_SIZE,
                     patience: int = 2,
                     max_size: int = 102400) -> SizingReport:
    """Double the corpus until the trainer's quality score stops improving.

    trainer maps a corpus to its evaluation score (higher is better, e.g.
    an epsilon-tolerant validity rate); a tie counts as non-improving.
    """
    if trainer is None:
        raise TrainerUnavailable("no trainer handle provided")
    size = start
    best_size, best_score = start, float("-inf")
    stale = 0
    history: list[tuple[int, float]] = []
    while size <= max_size:
        score = trainer(generate(size))
        history.append((size, score))
        if score > best_score:
            best_score, best_size = score, size
            stale = 0
        else:
            stale += 1
            if stale >= patience:
                break
        size *= 2
    return SizingReport(best_size, best_score, history)
