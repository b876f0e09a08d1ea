"""Configuration schema driving the client, server, generator, and validator."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

MODBUS_DEFAULT_PORT = 502
S7_DEFAULT_PORT = 102

MODBUS_FUNCTION_SET = frozenset({1, 3, 5, 6, 15, 16})
S7_FUNCTION_SET = frozenset({0x04, 0x05})


@dataclass
class MathBlockSpec:
    """Register-wired math function: out updates after every write to in_addr.

    Real values map to 16-bit counts by value = counts * scale + offset;
    the block computes out = clamp(round((f(in_value) - offset_out) / scale_out)).
    """
    kind: str  # sgn | expo10 | cosh | sigmoid | cauchy
    in_addr: int
    out_addr: int
    scale_in: float = 1e-3
    scale_out: float = 1e-3
    offset_in: float = 0.0
    offset_out: float = 0.0
    clamp_low: int = 0
    clamp_high: int = 0xFFFF

    def __post_init__(self):
        if self.kind not in ("sgn", "expo10", "cosh", "sigmoid", "cauchy"):
            raise ValueError(f"unknown math block kind {self.kind!r}")
        if self.scale_in == 0 or self.scale_out == 0:
            raise ValueError("scale factors must be nonzero")

    def decode_in(self, counts: int) -> float:
        return counts * self.scale_in + self.offset_in

    def encode_in(self, x: float) -> int:
        return max(0, min(0xFFFF, round((x - self.offset_in) / self.scale_in)))

    def encode_out(self, y: float) -> int:
        counts = round((y - self.offset_out) / self.scale_out)
        return max(self.clamp_low, min(self.clamp_high, counts))

    def decode_out(self, counts: int) -> float:
        return counts * self.scale_out + self.offset_out


@dataclass
class ControlLoopSpec:
    """Discrete-time linear loop x <- Ax + Bu, y = Cx over mapped registers."""
    a: list[list[float]]
    b: list[list[float]]
    c: list[list[float]]
    u_addrs: list[int]
    y_addrs: list[int]
    scale: float = 1e-3
    offset: float = 0.0
    trigger: str = "write"  # write | tick
    x0: list[float] | None = None

    def __post_init__(self):
        n = len(self.a)
        if any(len(row) != n for row in self.a):
            raise ValueError("A must be square")
        if len(self.b) != n or any(len(row) != len(self.u_addrs) for row in self.b):
            raise ValueError("B must be n x len(u_addrs)")
        if any(len(row) != n for row in self.c) or len(self.c) != len(self.y_addrs):
            raise ValueError("C must be len(y_addrs) x n")
        if self.trigger not in ("write", "tick"):
            raise ValueError(f"unknown trigger {self.trigger!r}")

    def decode(self, counts: int) -> float:
        return counts * self.scale + self.offset

    def encode(self, v: float) -> int:
        return max(0, min(0xFFFF, round((v - self.offset) / self.scale)))


@dataclass
class ProtocolConfig:
    protocol: str = "modbus"  # modbus | s7comm
    functions: list[int] = field(default_factory=lambda: [1, 5, 15, 3, 6, 16])
    digital_count: int = 40
    analog_count: int = 40
    addr_low: int = 0
    max_addr: int = 0xFFFF
    val_low: int = 0
    val_high: int = 9
    m_elem: int = 2
    dataset_size: int = 1600
    context_len: int = 0
    # 0 follows the sample-count constant (value tuples of width elem);
    # 1 selects the wider cartesian product (width elem + 1).
    combs_width_offset: int = 0
    port: int | None = None
    blocks: list[MathBlockSpec] = field(default_factory=list)
    loops: list[ControlLoopSpec] = field(default_factory=list)

    def __post_init__(self):
        if self.protocol not in ("modbus", "s7comm"):
            raise ValueError(f"unknown protocol {self.protocol!r}")
        allowed = MODBUS_FUNCTION_SET if self.protocol == "modbus" else S7_FUNCTION_SET
        bad = set(self.functions) - allowed
        if bad:
            raise ValueError(f"unsupported function codes for {self.protocol}: {sorted(bad)}")
        if self.digital_count < 0 or self.analog_count < 0:
            raise ValueError("point counts must be nonnegative")
        if not (0 <= self.addr_low <= self.max_addr <= 0xFFFF):
            raise ValueError("require 0 <= addr_low <= max_addr <= 0xffff")
        for high in (self.digital_high, self.analog_high):
            if high > self.max_addr:
                raise ValueError("valid address range exceeds max_addr")
        if self.val_low > self.val_high:
            raise ValueError("require val_low <= val_high")
        if not (0 <= self.val_low and self.val_high <= 0xFFFF):
            raise ValueError("value range must fit u16")
        if self.m_elem < 1:
            raise ValueError("m_elem must be >= 1")
        if self.context_len < 0:
            raise ValueError("context_len must be >= 0")
        if self.port is None:
            self.port = MODBUS_DEFAULT_PORT if self.protocol == "modbus" else S7_DEFAULT_PORT
        self.blocks = [
            b if isinstance(b, MathBlockSpec) else MathBlockSpec(**b) for b in self.blocks
        ]
        self.loops = [
            l if isinstance(l, ControlLoopSpec) else ControlLoopSpec(**l) for l in self.loops
        ]

    @property
    def digital_high(self) -> int:
        return self.addr_low + max(self.digital_count, 1) - 1

    @property
    def analog_high(self) -> int:
        return self.addr_low + max(self.analog_count, 1) - 1

    def addr_high(self, digital: bool) -> int:
        return self.digital_high if digital else self.analog_high

    @classmethod
    def from_dict(cls, d: dict) -> "ProtocolConfig":
        return cls(**d)

    @classmethod
    def load(cls, path: str | Path) -> "ProtocolConfig":
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def to_dict(self) -> dict:
        return asdict(self)

    def dump(self, path: str | Path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)
