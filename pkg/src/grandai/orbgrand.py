"""Logistic-weight pattern generation and ORBGRAND decoders.

A pattern is a set of reliability ranks (1 = least reliable). Patterns are
emitted in non-decreasing logistic weight, the sum of their ranks. Inside a
weight class, patterns with more elements come first, and ties are broken
lexicographically on the sorted ranks. So weight 3 yields ``{1, 2}`` before
``{3}`` and weight 4 yields ``{1, 3}`` before ``{4}``.

The decoders share one search loop (:func:`substitution_search`). The
received word is cut into blocks of bits. Each candidate replaces one block,
and a pattern that touches the same block twice is discarded without a
codebook query. For a :class:`~grandai.codebook.LinearCode` the loop
works on packed syndromes in chunks of patterns. Any other object with an
``is_member`` method is queried one word at a time.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .codebook import LinearCode
from .modem import Constellation, nearest_indices


@dataclass(frozen=True)
class WeightPattern:
    ranks: tuple[int, ...]

    @property
    def logistic_weight(self) -> int:
        return sum(self.ranks)


def logistic_weight(pattern) -> int:
    ranks = pattern.ranks if isinstance(pattern, WeightPattern) else pattern
    return int(sum(ranks))


def _distinct_parts(total: int, count: int, lo: int, hi: int) -> Iterator[tuple[int, ...]]:
    """Ascending ``count``-tuples of distinct ints in ``[lo, hi]`` summing to ``total``."""
    if count == 0:
        if total == 0:
            yield ()
        return
    if count == 1:
        if lo <= total <= hi:
            yield (total,)
        return
    c = count - 1
    for a in range(lo, hi + 1):
        rest = total - a
        if rest < c * a + c * (c + 1) // 2:
            break
        if rest > c * hi - c * (c - 1) // 2:
            continue
        for tail in _distinct_parts(rest, c, a + 1, hi):
            yield (a,) + tail


def _weight_class(w: int, n: int) -> Iterator[tuple[int, ...]]:
    cmax = 0
    while (cmax + 1) * (cmax + 2) // 2 <= w:
        cmax += 1
    for c in range(cmax, 0, -1):
        yield from _distinct_parts(w, c, 1, n)


def iter_patterns(n: int) -> Iterator[tuple[int, ...]]:
    """Every subset of ``{1..n}`` exactly once, ordered as described above."""
    yield ()
    for w in range(1, n * (n + 1) // 2 + 1):
        yield from _weight_class(w, n)


def pattern_sequence(n: int, max_weight: int | None = None, max_count: int | None = None):
    """Yield :class:`WeightPattern` objects, starting with the empty pattern."""
    for count, ranks in enumerate(iter_patterns(n)):
        if max_count is not None and count >= max_count:
            return
        if max_weight is not None and sum(ranks) > max_weight:
            return
        yield WeightPattern(ranks)


class PatternTable:
    """Lazily extended array form of ``iter_patterns(n)``.

    Rows hold ranks padded with zeros. Tables are cached per ``n`` because
    the pattern order does not depend on the received signal.
    """

    _cache: dict[int, "PatternTable"] = {}

    def __init__(self, n: int):
        self.n = n
        self._it = iter_patterns(n)
        self._arr = np.zeros((0, 1), dtype=np.int64)
        self._card = np.zeros(0, dtype=np.int64)
        self._exhausted = False

    @classmethod
    def for_size(cls, n: int) -> "PatternTable":
        table = cls._cache.get(n)
        if table is None:
            table = cls._cache[n] = cls(n)
        return table

    def __len__(self):
        return len(self._card)

    def ensure(self, count: int) -> int:
        """Generate up to ``count`` rows; returns how many exist."""
        have = len(self._card)
        if have >= count or self._exhausted:
            return have
        # grow geometrically so repeated small requests stay cheap
        want = max(count, 2 * have, 1024)
        new = list(itertools.islice(self._it, want - have))
        if len(new) < want - have:
            self._exhausted = True
        card = np.fromiter((len(r) for r in new), dtype=np.int64, count=len(new))
        width = max(self._arr.shape[1], int(card.max(initial=1)))
        block = np.zeros((len(new), width), dtype=np.int64)
        for i, r in enumerate(new):
            block[i, : len(r)] = r
        old = self._arr
        if old.shape[1] < width:
            old = np.pad(old, ((0, 0), (0, width - old.shape[1])))
        self._arr = np.concatenate([old, block])
        self._card = np.concatenate([self._card, card])
        return len(self._card)

    def rows(self, start: int, stop: int) -> np.ndarray:
        stop = min(stop, self.ensure(stop))
        if start >= stop:
            return self._arr[:0, :1]
        width = max(1, int(self._card[start:stop].max()))
        return self._arr[start:stop, :width]


# -- shared search ------------------------------------------------------------


@dataclass
class SearchResult:
    word: np.ndarray | None
    queries: int
    patterns: int
    conflicts: int
    pattern: tuple[int, ...] | None = None


def substitution_search(
    code,
    base_bits: np.ndarray,
    block_width: int,
    cand_block: np.ndarray,
    cand_bits: np.ndarray,
    budget: int,
    first_chunk: int = 32,
    max_chunk: int = 8192,
) -> SearchResult:
    """Try ranked block substitutions on ``base_bits`` until a codeword appears.

    ``cand_block[r]`` and ``cand_bits[r]`` describe the candidate of rank
    ``r + 1``. At most ``budget`` patterns are drawn, the empty one included,
    and discarded patterns count towards the budget.
    """
    base_bits = np.asarray(base_bits, dtype=np.uint8)
    K = len(cand_block)
    table = PatternTable.for_size(K)
    if not isinstance(code, LinearCode):
        return _generic_search(code, base_bits, block_width, cand_block, cand_bits, budget, table)

    nblk = len(base_bits) // block_width
    base_blocks = base_bits.reshape(nblk, block_width)
    cols = code.syndrome_columns.reshape(nblk, block_width)
    s0 = np.uint64(code.syndrome(base_bits))
    if K:
        delta = (cand_bits != base_blocks[cand_block]).astype(bool)
        cand_syn = np.bitwise_xor.reduce(np.where(delta, cols[cand_block], np.uint64(0)), axis=1)
    else:
        cand_syn = np.zeros(0, dtype=np.uint64)
    # rank 0 is padding: zero syndrome and a unique block id per column
    syn = np.concatenate([[np.uint64(0)], cand_syn]).astype(np.uint64)
    blk = np.concatenate([[-1], np.asarray(cand_block, dtype=np.int64)])

    queries = conflicts = 0
    start, size = 0, first_chunk
    while start < budget:
        stop = min(budget, start + size)
        rows = table.rows(start, stop)
        got = len(rows)
        if got == 0:
            break
        s = np.bitwise_xor.reduce(syn[rows], axis=1)
        b = blk[rows]
        pad = rows == 0
        b = np.where(pad, -1 - np.arange(rows.shape[1])[None, :], b)
        bs = np.sort(b, axis=1)
        clash = np.any(bs[:, 1:] == bs[:, :-1], axis=1) if rows.shape[1] > 1 else np.zeros(len(rows), bool)
        hit = (~clash) & (s == s0)
        if hit.any():
            i = int(np.argmax(hit))
            queries += int(np.count_nonzero(~clash[: i + 1]))
            conflicts += int(np.count_nonzero(clash[:i]))
            ranks = tuple(int(r) for r in rows[i] if r)
            word = base_bits.copy()
            for r in ranks:
                c = r - 1
                word[cand_block[c] * block_width : (cand_block[c] + 1) * block_width] = cand_bits[c]
            return SearchResult(word, queries, start + i + 1, conflicts, ranks)
        queries += int(np.count_nonzero(~clash))
        conflicts += int(np.count_nonzero(clash))
        if got < stop - start:
            start += got
            break
        start += got
        size = min(size * 4, max_chunk)
    return SearchResult(None, queries, start, conflicts)


def _generic_search(code, base_bits, width, cand_block, cand_bits, budget, table) -> SearchResult:
    queries = conflicts = patterns = 0
    for ranks in itertools.islice(iter_patterns(table.n), budget):
        patterns += 1
        blocks = [int(cand_block[r - 1]) for r in ranks]
        if len(set(blocks)) < len(blocks):
            conflicts += 1
            continue
        word = base_bits.copy()
        for r, bk in zip(ranks, blocks):
            word[bk * width : (bk + 1) * width] = cand_bits[r - 1]
        queries += 1
        if code.is_member(word):
            return SearchResult(word, queries, patterns, conflicts, ranks)
    return SearchResult(None, queries, patterns, conflicts)


# -- decoders -----------------------------------------------------------------


def orbgrand_decode_bits(llr_magnitudes, hard_bits, code, max_queries: int):
    """Bit-level ORBGRAND; returns ``(codeword, queries)`` or ``None``."""
    llr = np.asarray(llr_magnitudes, dtype=float)
    hard = np.asarray(hard_bits, dtype=np.uint8)
    order = np.argsort(llr, kind="stable")
    res = substitution_search(code, hard, 1, order, (1 - hard[order])[:, None], max_queries)
    if res.word is None:
        return None
    return res.word, res.queries


def orbgrand_decode_symbols(
    candidates: Sequence,
    base,
    code,
    constellation: Constellation,
    max_queries: int,
):
    """Symbol-level ORBGRAND over a ranked list of substitutions.

    ``base`` holds the hard-decision symbols. Each candidate needs a
    ``block_index`` and a ``symbols`` tuple. All candidates must cover
    blocks of the same length.
    """
    base = np.asarray(base, dtype=complex)
    m = constellation.bits_per_symbol
    b = len(candidates[0].symbols) if candidates else 1
    base_idx = nearest_indices(constellation, base)
    base_bits = constellation.labels[base_idx].reshape(-1)
    cand_block = np.array([c.block_index for c in candidates], dtype=np.int64)
    cand_bits = np.array(
        [constellation.labels[nearest_indices(constellation, c.symbols)].reshape(-1) for c in candidates],
        dtype=np.uint8,
    ).reshape(len(candidates), b * m)
    res = substitution_search(code, base_bits, b * m, cand_block, cand_bits, max_queries)
    if res.word is None:
        return None
    return res.word, res.queries


def hard_grand_decode(hard_bits, code, max_queries: int):
    """Hard-detection GRAND: flip patterns by Hamming weight, then position."""
    hard = np.asarray(hard_bits, dtype=np.uint8)
    if code.is_member(hard):
        return hard.copy(), 1
    queries = 1
    n = len(hard)
    cols = code.syndrome_columns
    s0 = code.syndrome(hard)
    for w in range(1, n + 1):
        for flips in itertools.combinations(range(n), w):
            if queries >= max_queries:
                return None
            queries += 1
            s = 0
            for f in flips:
                s ^= int(cols[f])
            if s == s0:
                word = hard.copy()
                word[list(flips)] ^= 1
                return word, queries
    return None
