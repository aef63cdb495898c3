"""Exact string matching baseline (Boyer-Moore / Horspool over 0/1 text).

Each rule becomes a 104-character bit string; a header matches a rule when
the rule's pattern is found at offset 0 of the header's text. Equality is
deliberately tested through a full string search so the baseline pays the
usual per-pattern search cost.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from numba import njit

from .header_codec import HEADER_BITS, Header5Tuple, Rule
from .matcher import MatchResult, TraceMatch

BOYER_MOORE = "boyer-moore"
HORSPOOL = "horspool"
ALGORITHMS = (BOYER_MOORE, HORSPOOL)
ALPHABET = 256


def as_bytes(text) -> np.ndarray:
    if isinstance(text, np.ndarray):
        return text.astype(np.uint8, copy=False)
    if isinstance(text, str):
        text = text.encode("latin-1")
    return np.frombuffer(bytes(text), dtype=np.uint8)


def bad_character_table(pattern: Sequence[int]) -> np.ndarray:
    """Shift keyed by the text byte aligned with the pattern's last position."""
    m = len(pattern)
    table = np.full(ALPHABET, m, dtype=np.int32)
    for i in range(m - 1):
        table[pattern[i]] = m - 1 - i
    return table


def _suffixes(pattern: Sequence[int]) -> List[int]:
    m = len(pattern)
    suff = [0] * m
    suff[m - 1] = m
    g = m - 1
    f = 0
    for i in range(m - 2, -1, -1):
        if i > g and suff[i + m - 1 - f] < i - g:
            suff[i] = suff[i + m - 1 - f]
        else:
            if i < g:
                g = i
            f = i
            while g >= 0 and pattern[g] == pattern[g + m - 1 - f]:
                g -= 1
            suff[i] = f - g
    return suff


def good_suffix_table(pattern: Sequence[int]) -> np.ndarray:
    """Strong good-suffix shifts, indexed by the mismatch position."""
    m = len(pattern)
    if m == 0:
        return np.zeros(0, dtype=np.int32)
    suff = _suffixes(pattern)
    gs = [m] * m
    j = 0
    for i in range(m - 1, -1, -1):
        if suff[i] == i + 1:
            while j < m - 1 - i:
                if gs[j] == m:
                    gs[j] = m - 1 - i
                j += 1
    for i in range(m - 1):
        gs[m - 1 - suff[i]] = m - 1 - i
    return np.array(gs, dtype=np.int32)


@njit(cache=True, nogil=True)
def boyer_moore_search(text, pattern, bad_char, good_suffix):
    """First occurrence of ``pattern`` in ``text``, or -1."""
    n = text.shape[0]
    m = pattern.shape[0]
    if m == 0:
        return 0
    j = 0
    while j <= n - m:
        i = m - 1
        while i >= 0 and pattern[i] == text[i + j]:
            i -= 1
        if i < 0:
            return j
        bc_shift = bad_char[text[i + j]] - m + 1 + i
        gs_shift = good_suffix[i]
        j += gs_shift if gs_shift > bc_shift else bc_shift
    return -1


@njit(cache=True, nogil=True)
def horspool_search(text, pattern, bad_char):
    n = text.shape[0]
    m = pattern.shape[0]
    if m == 0:
        return 0
    j = 0
    while j <= n - m:
        i = m - 1
        while i >= 0 and pattern[i] == text[i + j]:
            i -= 1
        if i < 0:
            return j
        j += bad_char[text[j + m - 1]]
    return -1


def naive_search(text, pattern) -> int:
    n, m = len(text), len(pattern)
    for j in range(n - m + 1):
        if all(text[j + i] == pattern[i] for i in range(m)):
            return j
    return -1


@dataclass
class BaselinePatternSet:
    patterns: List[Tuple[int, str]]
    algorithm: str
    pattern_bytes: np.ndarray
    bad_char: np.ndarray
    good_suffix: np.ndarray
    ids: np.ndarray

    def __len__(self):
        return len(self.patterns)


def compile_baseline(rules: Sequence[Rule], algorithm: str = BOYER_MOORE) -> BaselinePatternSet:
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown baseline algorithm {algorithm!r}; choose from {ALGORITHMS}")
    patterns = [(r.id, r.bitstring) for r in rules]
    n = len(patterns)
    pattern_bytes = np.zeros((n, HEADER_BITS), dtype=np.uint8)
    bad_char = np.zeros((n, ALPHABET), dtype=np.int32)
    good_suffix = np.zeros((n, HEADER_BITS), dtype=np.int32)
    for row, (_, text) in enumerate(patterns):
        pat = as_bytes(text)
        pattern_bytes[row] = pat
        bad_char[row] = bad_character_table(pat)
        if algorithm == BOYER_MOORE:
            good_suffix[row] = good_suffix_table(pat)
    ids = np.array([rid for rid, _ in patterns], dtype=np.int64)
    return BaselinePatternSet(patterns, algorithm, pattern_bytes, bad_char, good_suffix, ids)


def baseline_match(h: Header5Tuple, pset: BaselinePatternSet) -> MatchResult:
    text = as_bytes(h.to_bitstring())
    bm = pset.algorithm == BOYER_MOORE
    for row, (rid, _) in enumerate(pset.patterns):
        if bm:
            pos = boyer_moore_search(text, pset.pattern_bytes[row], pset.bad_char[row],
                                     pset.good_suffix[row])
        else:
            pos = horspool_search(text, pset.pattern_bytes[row], pset.bad_char[row])
        if pos == 0:
            return MatchResult(rid)
    return MatchResult(None)


def header_texts(records: np.ndarray) -> np.ndarray:
    """``(N, 104)`` ASCII '0'/'1' texts for an ``(N, 13)`` array of packed headers."""
    records = np.ascontiguousarray(records, dtype=np.uint8).reshape(-1, 13)
    return np.unpackbits(records, axis=1) + np.uint8(ord("0"))


@njit(cache=True, nogil=True)
def _baseline_kernel(texts, patterns, bad_char, good_suffix, ids, use_bm, out_ids):
    for n in range(texts.shape[0]):
        text = texts[n]
        found = -1
        for r in range(patterns.shape[0]):
            if use_bm:
                pos = boyer_moore_search(text, patterns[r], bad_char[r], good_suffix[r])
            else:
                pos = horspool_search(text, patterns[r], bad_char[r])
            if pos == 0:
                found = ids[r]
                break
        out_ids[n] = found


def match_texts(texts: np.ndarray, pset: BaselinePatternSet) -> TraceMatch:
    """Batch baseline over precomputed header texts (see :func:`header_texts`)."""
    out = np.empty(len(texts), dtype=np.int64)
    _baseline_kernel(texts, pset.pattern_bytes, pset.bad_char, pset.good_suffix, pset.ids,
                     pset.algorithm == BOYER_MOORE, out)
    return TraceMatch(out, np.zeros(len(texts), dtype=np.int64))


def match_trace(records: np.ndarray, pset: BaselinePatternSet) -> TraceMatch:
    return match_texts(header_texts(records), pset)
