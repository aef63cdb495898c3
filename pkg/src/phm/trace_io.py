"""Packet-header trace files (binary PHT1 and CSV) and synthetic trace generation.

PHT1 layout: the 4 magic bytes ``PHT1``, an 8-byte big-endian record count,
then one 13-byte record per header (SA 4, SP 2, DA 4, DP 2, PROT 1, all
big-endian).

Synthetic traces use SplitMix64 so they can be reproduced bit-for-bit by
any implementation; see :func:`generate_trace` for the exact draw order.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence

import numpy as np

from .header_codec import Header5Tuple, Rule, RuleParseError, encode_header, parse_header_fields

MAGIC = b"PHT1"
RECORD_SIZE = 13
_COUNT = struct.Struct(">Q")
HEADER_SIZE = len(MAGIC) + _COUNT.size

BINARY = "binary"
CSV = "csv"

_MASK64 = (1 << 64) - 1


class TraceFormatError(ValueError):
    pass


@dataclass
class TraceFile:
    headers: List[Header5Tuple]
    source_format: str = BINARY

    def __len__(self):
        return len(self.headers)

    def to_array(self) -> np.ndarray:
        """Headers packed as an ``(N, 13)`` uint8 array (the PHT1 record bytes)."""
        return headers_to_array(self.headers)


def headers_to_array(headers: Sequence[Header5Tuple]) -> np.ndarray:
    data = b"".join(h.to_bytes() for h in headers)
    return np.frombuffer(data, dtype=np.uint8).reshape(-1, RECORD_SIZE)


def encode_binary(headers: Sequence[Header5Tuple]) -> bytes:
    return MAGIC + _COUNT.pack(len(headers)) + b"".join(h.to_bytes() for h in headers)


def decode_binary(data: bytes) -> List[Header5Tuple]:
    if data[:4] != MAGIC:
        raise TraceFormatError(f"byte 0: bad magic {data[:4]!r}, expected {MAGIC!r}")
    if len(data) < HEADER_SIZE:
        raise TraceFormatError(f"byte {len(data)}: truncated record count")
    (count,) = _COUNT.unpack_from(data, 4)
    body = len(data) - HEADER_SIZE
    if body % RECORD_SIZE:
        whole = body // RECORD_SIZE
        raise TraceFormatError(
            f"byte {HEADER_SIZE + whole * RECORD_SIZE}: truncated record {whole} "
            f"({body % RECORD_SIZE} of {RECORD_SIZE} bytes)")
    if body // RECORD_SIZE != count:
        raise TraceFormatError(
            f"byte 4: count field says {count} records, file holds {body // RECORD_SIZE}")
    return [Header5Tuple.from_bytes(data[off:off + RECORD_SIZE])
            for off in range(HEADER_SIZE, len(data), RECORD_SIZE)]


def encode_csv(headers: Sequence[Header5Tuple]) -> str:
    return "".join(h.to_csv() + "\n" for h in headers)


def decode_csv(text: str) -> List[Header5Tuple]:
    headers = []
    for lineno, line in enumerate(text.split("\n"), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            headers.append(parse_header_fields(line.split(","), lineno))
        except RuleParseError as exc:
            raise TraceFormatError(str(exc)) from None
    return headers


def read_trace(path) -> TraceFile:
    """Read a trace, telling binary from CSV by the magic bytes."""
    data = Path(path).read_bytes()
    if data[:4] == MAGIC:
        return TraceFile(decode_binary(data), BINARY)
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise TraceFormatError(f"byte {exc.start}: neither PHT1 nor UTF-8 CSV") from None
    return TraceFile(decode_csv(text), CSV)


def write_trace(headers: Sequence[Header5Tuple], path, fmt: str = BINARY) -> None:
    if fmt == BINARY:
        Path(path).write_bytes(encode_binary(headers))
    elif fmt == CSV:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(encode_csv(headers))
    else:
        raise ValueError(f"unknown trace format {fmt!r}")


class SplitMix64:
    """SplitMix64 (Steele, Lea & Flood 2014): 64-bit output per step."""

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Value in ``[0, n)`` as ``next() % n``."""
        return self.next() % n


@dataclass(frozen=True)
class TraceGenSpec:
    count: int
    seed: int
    match_fraction: float = 0.1
    rules: Sequence[Rule] = ()

    def __post_init__(self):
        if self.count < 0:
            raise ValueError(f"count must be >= 0, got {self.count}")
        if not 0.0 <= self.match_fraction <= 1.0:
            raise ValueError(f"match_fraction must lie in [0, 1], got {self.match_fraction}")

    @property
    def match_count(self) -> int:
        return math.floor(self.count * self.match_fraction)


def random_header(rng: SplitMix64) -> Header5Tuple:
    # one draw per field, top bits kept
    return Header5Tuple(rng.next() >> 32, rng.next() >> 48, rng.next() >> 32,
                        rng.next() >> 48, rng.next() >> 56)


def generate_trace(spec: TraceGenSpec) -> TraceFile:
    """Deterministic synthetic trace.

    Draw order from ``SplitMix64(seed)``: first ``match_count`` rule picks
    (``below(len(rules))``), then random headers (5 draws each: SA, SP, DA,
    DP, PROT, shifted right by 32, 48, 32, 48, 56) redrawn while they equal
    a rule, then a Fisher-Yates shuffle swapping ``i`` with ``below(i + 1)``
    for ``i`` from ``count - 1`` down to 1.
    """
    rules = list(spec.rules)
    n_match = spec.match_count
    if spec.match_fraction > 0 and not rules:
        raise ValueError("match_fraction > 0 requires a non-empty rule set")
    rng = SplitMix64(spec.seed)
    rule_headers = [r.header for r in rules]
    taken = set(rule_headers)
    headers = [rule_headers[rng.below(len(rules))] for _ in range(n_match)]
    for _ in range(spec.count - n_match):
        h = random_header(rng)
        while h in taken:
            h = random_header(rng)
        headers.append(h)
    for i in range(len(headers) - 1, 0, -1):
        j = rng.below(i + 1)
        headers[i], headers[j] = headers[j], headers[i]
    return TraceFile(headers, BINARY)


def generate_rules(count: int, seed: int) -> List[Rule]:
    """Distinct random rules with ids 1..count (uniform per field)."""
    rng = SplitMix64(seed)
    seen = set()
    rules = []
    while len(rules) < count:
        h = random_header(rng)
        if h not in seen:
            seen.add(h)
            rules.append(Rule(len(rules) + 1, encode_header(h)))
    return rules
