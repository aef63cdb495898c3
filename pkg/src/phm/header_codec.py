"""Packet header parsing and bipolar encoding.

A header is the IPv4 5-tuple (SA, SP, DA, DP, PROT), 104 bits in network
byte order. For weight math it is extended with a single trailing zero bit
(105 bits = 35 chunks of 3) and mapped 0 -> -1, 1 -> +1.
"""
from __future__ import annotations

import ipaddress
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple

HEADER_BITS = 104
SEQUENCE_LENGTH = HEADER_BITS + 1
CHUNK_SIZE = 3
NUM_CHUNKS = SEQUENCE_LENGTH // CHUNK_SIZE

_RECORD = struct.Struct(">IHIHB")

BipolarSequence = Tuple[int, ...]
ChunkPattern = Tuple[int, int, int]


class RuleParseError(ValueError):
    """Raised for a malformed rule line or an inconsistent rule file."""

    def __init__(self, message: str, lineno: Optional[int] = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Header5Tuple:
    src_addr: int
    src_port: int
    dst_addr: int
    dst_port: int
    protocol: int

    def __post_init__(self):
        for name, width in (("src_addr", 32), ("src_port", 16), ("dst_addr", 32),
                            ("dst_port", 16), ("protocol", 8)):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool):
                raise TypeError(f"{name} must be an int, got {type(value).__name__}")
            if not 0 <= value < (1 << width):
                raise ValueError(f"{name}={value} does not fit in {width} bits")

    @classmethod
    def from_fields(cls, sa: str, sp, da: str, dp, proto) -> "Header5Tuple":
        return cls(int(ipaddress.IPv4Address(sa)), int(sp), int(ipaddress.IPv4Address(da)),
                   int(dp), int(proto))

    @classmethod
    def from_bytes(cls, record: bytes) -> "Header5Tuple":
        return cls(*_RECORD.unpack(record))

    @classmethod
    def from_int(cls, value: int) -> "Header5Tuple":
        """Inverse of :meth:`to_int`."""
        return cls.from_bytes(value.to_bytes(13, "big"))

    def to_bytes(self) -> bytes:
        return _RECORD.pack(self.src_addr, self.src_port, self.dst_addr,
                            self.dst_port, self.protocol)

    def to_int(self) -> int:
        """The 104 header bits as one integer, SA in the most significant bits."""
        return int.from_bytes(self.to_bytes(), "big")

    def to_bitstring(self) -> str:
        return format(self.to_int(), f"0{HEADER_BITS}b")

    def to_csv(self) -> str:
        return (f"{ipaddress.IPv4Address(self.src_addr)},{self.src_port},"
                f"{ipaddress.IPv4Address(self.dst_addr)},{self.dst_port},{self.protocol}")


@dataclass(frozen=True)
class Rule:
    id: int
    bits: BipolarSequence

    @property
    def header(self) -> Header5Tuple:
        return decode_sequence(self.bits)

    @property
    def bitstring(self) -> str:
        """The 104-character 0/1 text form, pad bit excluded."""
        return "".join("1" if b > 0 else "0" for b in self.bits[:HEADER_BITS])


def encode_header(h: Header5Tuple) -> BipolarSequence:
    """Encode a header as 105 bipolar values (104 header bits then a -1 pad)."""
    return tuple(1 if c == "1" else -1 for c in h.to_bitstring()) + (-1,)


def bitstring_to_sequence(bits: str) -> BipolarSequence:
    return tuple(1 if c == "1" else -1 for c in bits) + (-1,)


def decode_sequence(seq: Sequence[int]) -> Header5Tuple:
    if len(seq) != SEQUENCE_LENGTH:
        raise ValueError(f"expected {SEQUENCE_LENGTH} elements, got {len(seq)}")
    value = 0
    for b in seq[:HEADER_BITS]:
        value = (value << 1) | (1 if b > 0 else 0)
    return Header5Tuple.from_int(value)


def chunks(seq: Sequence[int]) -> List[ChunkPattern]:
    """Split a bipolar sequence into consecutive non-overlapping triples."""
    if len(seq) % CHUNK_SIZE:
        raise ValueError(f"sequence length {len(seq)} is not a multiple of {CHUNK_SIZE}")
    return [tuple(seq[i:i + CHUNK_SIZE]) for i in range(0, len(seq), CHUNK_SIZE)]


def _parse_uint(text: str, name: str, limit: int, lineno: Optional[int]) -> int:
    text = text.strip()
    if not (text.isascii() and text.isdigit()):
        raise RuleParseError(f"malformed {name} {text!r}", lineno)
    value = int(text)
    if value > limit:
        raise RuleParseError(f"{name} {value} exceeds {limit}", lineno)
    return value


def _parse_addr(text: str, name: str, lineno: Optional[int]) -> int:
    try:
        return int(ipaddress.IPv4Address(text.strip()))
    except ValueError:
        raise RuleParseError(f"malformed {name} {text.strip()!r}", lineno) from None


def parse_header_fields(fields: Sequence[str], lineno: Optional[int] = None) -> Header5Tuple:
    """Parse ``sa,sp,da,dp,proto`` text fields into a header."""
    if len(fields) != 5:
        raise RuleParseError(f"expected 5 header fields, got {len(fields)}", lineno)
    sa, sp, da, dp, proto = fields
    return Header5Tuple(
        _parse_addr(sa, "source address", lineno),
        _parse_uint(sp, "source port", 65535, lineno),
        _parse_addr(da, "destination address", lineno),
        _parse_uint(dp, "destination port", 65535, lineno),
        _parse_uint(proto, "protocol", 255, lineno),
    )


def parse_rule_line(line: str, lineno: Optional[int] = None) -> Rule:
    """Parse ``id,sa,sp,da,dp,proto`` or ``id,B:<104 bits>``."""
    fields = line.strip().split(",")
    rule_id = _parse_uint(fields[0], "rule id", 2**63 - 1, lineno)
    if len(fields) == 2 and fields[1].strip().startswith("B:"):
        raw = fields[1].strip()[2:]
        if len(raw) != HEADER_BITS:
            raise RuleParseError(f"raw rule has {len(raw)} bits, expected {HEADER_BITS}", lineno)
        bad = next((c for c in raw if c not in "01"), None)
        if bad is not None:
            raise RuleParseError(f"raw rule contains non-binary character {bad!r}", lineno)
        return Rule(rule_id, bitstring_to_sequence(raw))
    if len(fields) != 6:
        raise RuleParseError(f"expected 6 comma-separated fields, got {len(fields)}", lineno)
    return Rule(rule_id, encode_header(parse_header_fields(fields[1:], lineno)))


def render_rule(rule: Rule, raw: bool = False) -> str:
    if raw:
        return f"{rule.id},B:{rule.bitstring}"
    return f"{rule.id},{rule.header.to_csv()}"


def _iter_records(lines: Iterable[str]) -> Iterator[Tuple[int, str]]:
    for lineno, line in enumerate(lines, 1):
        stripped = line.strip()
        if stripped and not stripped.startswith("#"):
            yield lineno, stripped


def parse_rules(lines: Iterable[str]) -> List[Rule]:
    """Parse rule lines, rejecting duplicate ids and duplicate bitstrings."""
    rules: List[Rule] = []
    ids = {}
    seen = {}
    for lineno, text in _iter_records(lines):
        rule = parse_rule_line(text, lineno)
        if rule.id in ids:
            raise RuleParseError(f"duplicate rule id {rule.id} (first on line {ids[rule.id]})",
                                 lineno)
        if rule.bits in seen:
            raise RuleParseError(
                f"rule {rule.id} duplicates the bitstring of rule {seen[rule.bits]}", lineno)
        ids[rule.id] = lineno
        seen[rule.bits] = rule.id
        rules.append(rule)
    return rules


def load_rules(path) -> List[Rule]:
    with open(path, encoding="utf-8") as fh:
        return parse_rules(fh)


def write_rules(rules: Iterable[Rule], path, raw: bool = False) -> None:
    Path(path).write_text("".join(render_rule(r, raw) + "\n" for r in rules), encoding="utf-8")
