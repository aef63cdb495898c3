"""Packet Header Matching: weight-grouped rule table, group descent, learning cache."""
from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numba import njit

from .header_codec import NUM_CHUNKS, ChunkPattern, Header5Tuple, Rule, chunks, encode_header
from .hopfield_weights import (STABLE_ENERGY, WeightStore, build_weight_store, energy,
                               pattern_of, sign_sum, weight_index)

NUM_GROUPS = 8
NO_MATCH = -1


@dataclass(frozen=True)
class CompiledRule:
    id: int
    weights: Tuple[int, ...]
    signs: Tuple[int, ...]

    @property
    def group(self) -> int:
        return self.weights[0]


@dataclass(frozen=True)
class MatchResult:
    rule_id: Optional[int]
    energy_evals: int = 0

    @property
    def matched(self) -> bool:
        return self.rule_id is not None


class LearningCache:
    """First-chunk pattern -> group memo, capped at the eight possible patterns.

    Inserts are atomic insert-if-absent, so one instance may be shared by
    concurrent workers.
    """

    capacity = 8

    def __init__(self):
        self._entries: Dict[ChunkPattern, int] = {}
        self._lock = threading.Lock()
        self.hits = 0

    def __len__(self):
        return len(self._entries)

    def __contains__(self, pattern):
        return tuple(pattern) in self._entries

    def lookup(self, pattern: Sequence[int]) -> Optional[int]:
        return self._entries.get(tuple(pattern))

    def insert(self, pattern: Sequence[int], group: int) -> None:
        pattern = tuple(pattern)
        assert group == weight_index(pattern), f"group {group} is not the index of {pattern}"
        with self._lock:
            if len(self._entries) < self.capacity:
                self._entries.setdefault(pattern, group)

    def record_hit(self) -> None:
        with self._lock:
            self.hits += 1

    def items(self) -> List[Tuple[ChunkPattern, int]]:
        return list(self._entries.items())

    def to_array(self) -> np.ndarray:
        """Group per weight index, -1 where the pattern has not been learned."""
        arr = np.full(NUM_GROUPS, -1, dtype=np.int8)
        for pattern, group in self._entries.items():
            arr[weight_index(pattern)] = group
        return arr

    def absorb(self, arr: np.ndarray, hits: int = 0) -> None:
        """Merge entries learned by a batch kernel back into this cache."""
        for index, group in enumerate(arr):
            if group >= 0:
                self.insert(pattern_of(index), int(group))
        with self._lock:
            self.hits += hits


class RuleGroupTable:
    """Compiled rules bucketed by first-chunk weight index (groups 0..7)."""

    def __init__(self, groups: Sequence[Sequence[CompiledRule]], store: WeightStore):
        self.groups: Tuple[Tuple[CompiledRule, ...], ...] = tuple(tuple(g) for g in groups)
        self.store = store
        self._match_table = np.array(store.match_table(), dtype=np.bool_)
        # representatives for the descent: matrix and sign of pattern g
        self.representatives = tuple((store.matrix(g), store.sign(g)) for g in range(NUM_GROUPS))
        self._arrays = None

    def __len__(self):
        return sum(len(g) for g in self.groups)

    def descending(self):
        """(group index, rules) pairs from group 7 down to group 0."""
        for g in range(NUM_GROUPS - 1, -1, -1):
            yield g, self.groups[g]

    @property
    def match_table(self) -> np.ndarray:
        return self._match_table

    def arrays(self):
        """Flat group-sorted views of the table for the batch kernel."""
        if self._arrays is None:
            starts = np.zeros(NUM_GROUPS + 1, dtype=np.int64)
            weights = np.zeros((len(self), NUM_CHUNKS), dtype=np.int8)
            ids = np.zeros(len(self), dtype=np.int64)
            row = 0
            for g in range(NUM_GROUPS):
                starts[g] = row
                for rule in self.groups[g]:
                    weights[row] = rule.weights
                    ids[row] = rule.id
                    row += 1
            starts[NUM_GROUPS] = row
            self._arrays = (starts, weights, ids)
        return self._arrays


def compile_rule(rule: Rule) -> CompiledRule:
    pats = chunks(rule.bits)
    return CompiledRule(rule.id, tuple(weight_index(p) for p in pats),
                        tuple(sign_sum(p) for p in pats))


def compile_rules(rules: Sequence[Rule], store: Optional[WeightStore] = None) -> RuleGroupTable:
    store = store or build_weight_store()
    groups: List[List[CompiledRule]] = [[] for _ in range(NUM_GROUPS)]
    for rule in rules:
        compiled = compile_rule(rule)
        groups[compiled.group].append(compiled)
    return RuleGroupTable(groups, store)


def classify_with_count(x: Sequence[int], table: RuleGroupTable,
                        cache: Optional[LearningCache] = None) -> Tuple[int, int]:
    """Classify a first chunk, returning ``(group, energy evaluations)``."""
    x = tuple(x)
    if cache is not None:
        cached = cache.lookup(x)
        if cached is not None:
            cache.record_hit()
            return cached, 0
    group, evals = 0, 0
    x_sign = sign_sum(x)
    for g in range(NUM_GROUPS - 1, 0, -1):
        matrix, sign = table.representatives[g]
        evals += 1
        if energy(x, matrix) == STABLE_ENERGY and x_sign == sign:
            group = g
            break
    if cache is not None:
        cache.insert(x, group)
    return group, evals


def classify_first_chunk(x: Sequence[int], table: RuleGroupTable,
                         cache: Optional[LearningCache] = None) -> int:
    return classify_with_count(x, table, cache)[0]


def match_header(h: Header5Tuple, table: RuleGroupTable,
                 cache: Optional[LearningCache] = None) -> MatchResult:
    pats = chunks(encode_header(h))
    group, evals = classify_with_count(pats[0], table, cache)
    store = table.store
    rest = pats[1:]
    for rule in table.groups[group]:
        for x, w in zip(rest, rule.weights[1:]):
            evals += 1
            if not store.chunk_matches(x, w):
                break
        else:
            return MatchResult(rule.id, evals)
    return MatchResult(None, evals)


def header_weights(records: np.ndarray) -> np.ndarray:
    """Per-chunk weight indices for an ``(N, 13)`` uint8 array of packed headers."""
    records = np.ascontiguousarray(records, dtype=np.uint8).reshape(-1, 13)
    bits = np.unpackbits(records, axis=1)
    bits = np.concatenate([bits, np.zeros((len(bits), 1), dtype=np.uint8)], axis=1)
    return (bits.reshape(-1, NUM_CHUNKS, 3) @ np.array([4, 2, 1], dtype=np.uint8)).astype(np.int8)


@njit(cache=True, nogil=True)
def _match_kernel(header_w, starts, rule_w, rule_ids, table, cache, out_ids, out_evals):
    hits = 0
    n_chunks = header_w.shape[1]
    for n in range(header_w.shape[0]):
        x = header_w[n, 0]
        evals = 0
        group = cache[x]
        if group >= 0:
            hits += 1
        else:
            group = 0
            for g in range(7, 0, -1):
                evals += 1
                if table[x, g]:
                    group = g
                    break
            cache[x] = group
        found = -1
        for r in range(starts[group], starts[group + 1]):
            ok = True
            for k in range(1, n_chunks):
                evals += 1
                if not table[header_w[n, k], rule_w[r, k]]:
                    ok = False
                    break
            if ok:
                found = rule_ids[r]
                break
        out_ids[n] = found
        out_evals[n] = evals
    return hits


@dataclass
class TraceMatch:
    """Per-header outcomes of a batch run; ``rule_ids`` holds -1 for no match."""

    rule_ids: np.ndarray
    energy_evals: np.ndarray
    cache_hits: int = 0

    @property
    def match_count(self) -> int:
        return int(np.count_nonzero(self.rule_ids != NO_MATCH))

    def result(self, i: int) -> MatchResult:
        rid = int(self.rule_ids[i])
        return MatchResult(None if rid == NO_MATCH else rid, int(self.energy_evals[i]))


def match_weights(header_w: np.ndarray, table: RuleGroupTable,
                  cache: Optional[LearningCache] = None) -> TraceMatch:
    """Batch PHM over precomputed header weight indices (see :func:`header_weights`)."""
    starts, rule_w, rule_ids = table.arrays()
    cache_arr = cache.to_array() if cache is not None else np.full(NUM_GROUPS, -1, np.int8)
    out_ids = np.empty(len(header_w), dtype=np.int64)
    out_evals = np.empty(len(header_w), dtype=np.int64)
    hits = _match_kernel(header_w, starts, rule_w, rule_ids, table.match_table,
                         cache_arr, out_ids, out_evals)
    if cache is not None:
        cache.absorb(cache_arr, hits)
    return TraceMatch(out_ids, out_evals, hits)


def match_trace(records: np.ndarray, table: RuleGroupTable,
                cache: Optional[LearningCache] = None) -> TraceMatch:
    return match_weights(header_weights(records), table, cache)
