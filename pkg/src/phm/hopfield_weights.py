"""Hopfield weights for 3-bit bipolar chunks and the energy function.

Each chunk pattern p gets the weight matrix p.p^T with a zeroed diagonal.
A pattern and its complement share the same matrix, so the eight patterns
collapse onto four stored matrices; the sign of the element sum tells the
two members of a pair apart.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Dict, List, Sequence, Tuple

from .header_codec import ChunkPattern

WeightMatrix = Tuple[Tuple[int, int, int], Tuple[int, int, int], Tuple[int, int, int]]

# Energy of a pattern against its own (or its complement's) weight matrix.
STABLE_ENERGY = -3


def outer_product(p: Sequence[int]) -> WeightMatrix:
    return tuple(tuple(0 if i == j else p[i] * p[j] for j in range(3)) for i in range(3))


def weight_index(p: Sequence[int]) -> int:
    """Read a bipolar chunk as a 3-bit big-endian number (-1 counts as 0)."""
    return (p[0] > 0) << 2 | (p[1] > 0) << 1 | (p[2] > 0)


def pattern_of(index: int) -> ChunkPattern:
    """Inverse of :func:`weight_index`."""
    if not 0 <= index < 8:
        raise ValueError(f"weight index {index} outside [0, 8)")
    return tuple(1 if index >> shift & 1 else -1 for shift in (2, 1, 0))


def sign_sum(p: Sequence[int]) -> int:
    # three odd terms never sum to zero
    return 1 if sum(p) > 0 else -1


def energy(x: Sequence[int], w: Sequence[Sequence[int]]) -> int:
    total = 0
    for i in range(3):
        for j in range(3):
            total += x[i] * x[j] * w[i][j]
    # symmetric with zero diagonal: the double sum is always even
    return -(total // 2)


def matrix_bits(w: WeightMatrix) -> Tuple[int, int, int]:
    """The three upper-triangle entries as bits (+1 -> 1, -1 -> 0)."""
    return tuple(int(w[i][j] > 0) for i, j in ((0, 1), (0, 2), (1, 2)))


@dataclass(frozen=True)
class WeightEntry:
    matrix_id: int
    sign: int


@dataclass(frozen=True)
class WeightStore:
    """The deduplicated weight matrices and the index -> (matrix, sign) map."""

    matrices: Tuple[WeightMatrix, ...]
    index_map: Tuple[WeightEntry, ...]

    def matrix(self, index: int) -> WeightMatrix:
        return self.matrices[self.index_map[index].matrix_id]

    def sign(self, index: int) -> int:
        return self.index_map[index].sign

    @property
    def storage_bits(self) -> int:
        return 3 * len(self.matrices)

    def chunk_matches(self, x: Sequence[int], index: int) -> bool:
        """Energy test plus sign check of chunk ``x`` against stored weight ``index``."""
        return (energy(x, self.matrix(index)) == STABLE_ENERGY
                and sign_sum(x) == self.sign(index))

    def match_table(self) -> List[List[bool]]:
        """``table[a][b]``: whether chunk pattern ``a`` passes the test against weight ``b``.

        Precomputed once so hot loops can test chunks by lookup.
        """
        return [[self.chunk_matches(pattern_of(a), b) for b in range(8)] for a in range(8)]


def build_weight_store() -> WeightStore:
    matrices: List[WeightMatrix] = []
    ids: Dict[WeightMatrix, int] = {}
    entries = []
    for bits in product((-1, 1), repeat=3):
        w = outer_product(bits)
        if w not in ids:
            ids[w] = len(matrices)
            matrices.append(w)
        entries.append(WeightEntry(ids[w], sign_sum(bits)))
    # product() enumerates in weight-index order: (-1,-1,-1) is 0, (1,1,1) is 7
    return WeightStore(tuple(matrices), tuple(entries))
