"""Baseline coders and the benchmark drivers.

Two kinds of runs: theoretical rows evaluate stationary expected lengths
straight from the codebooks, simulation rows draw seeded random
sequences, push them through the actual codecs, and average the emitted
bits per symbol (termination included for the forest codes, flush bytes
for the range coder).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .builder import (
    BuildConfig,
    construct,
    construct_aifvm,
    expected_code_length,
    folded_codebook_size,
    huffman,
    huffman_lengths,
)
from .forest import encode
from .sources import SourceDistribution, entropy, relative_redundancy, sample_inversion

RANGE_TOP = 1 << 24
RANGE_BOT = 1 << 16
RANGE_MASK = (1 << 32) - 1
FREQ_TOTAL = 1 << 16


class RangeCodingError(ValueError):
    pass


@dataclass(frozen=True)
class ExtendedHuffman:
    """Huffman code over n-symbol blocks of the base alphabet."""

    base_m: int
    order: int
    lengths: tuple[int, ...]  # per block, blocks in lexicographic order
    per_symbol_expected: float


def extended_huffman(p, order: int) -> ExtendedHuffman:
    probs = tuple(p)
    m = len(probs)
    if order < 1:
        raise ValueError("block order must be at least 1")
    if m ** order > 10 ** 6:
        raise ValueError("block alphabet too large")
    blocks = list(itertools.product(range(m), repeat=order))
    block_probs = [1.0 for _ in blocks]
    for i, block in enumerate(blocks):
        for s in block:
            block_probs[i] *= probs[s]
    lengths = huffman_lengths(tuple(block_probs))
    expected = sum(q * ln for q, ln in zip(block_probs, lengths)) / order
    return ExtendedHuffman(m, order, tuple(lengths), expected)


def scaled_frequencies(p) -> list[int]:
    """Probabilities as integer frequencies summing to exactly 2**16."""
    probs = tuple(p)
    freqs = [max(1, round(x * FREQ_TOTAL)) for x in probs]
    freqs[freqs.index(max(freqs))] += FREQ_TOTAL - sum(freqs)
    if min(freqs) < 1:
        raise RangeCodingError("distribution too skewed for a 16-bit table")
    return freqs


class _RangeEncoder:
    def __init__(self):
        self.low = 0
        self.span = RANGE_MASK
        self.out = bytearray()

    def _normalize(self):
        while True:
            if (self.low ^ (self.low + self.span)) < RANGE_TOP:
                pass
            elif self.span < RANGE_BOT:
                self.span = (-self.low) & (RANGE_BOT - 1)
            else:
                break
            self.out.append((self.low >> 24) & 0xFF)
            self.span = (self.span << 8) & RANGE_MASK
            self.low = (self.low << 8) & RANGE_MASK

    def encode(self, cum_low: int, freq: int, total: int):
        r = self.span // total
        self.low = (self.low + cum_low * r) & RANGE_MASK
        self.span = freq * r
        self._normalize()

    def finish(self) -> bytes:
        for _ in range(4):
            self.out.append((self.low >> 24) & 0xFF)
            self.low = (self.low << 8) & RANGE_MASK
        return bytes(self.out)


class _RangeDecoder:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0
        self.low = 0
        self.span = RANGE_MASK
        self.code = 0
        for _ in range(4):
            self.code = ((self.code << 8) | self._byte()) & RANGE_MASK

    def _byte(self) -> int:
        b = self.data[self.pos] if self.pos < len(self.data) else 0
        self.pos += 1
        return b

    def _normalize(self):
        while True:
            if (self.low ^ (self.low + self.span)) < RANGE_TOP:
                pass
            elif self.span < RANGE_BOT:
                self.span = (-self.low) & (RANGE_BOT - 1)
            else:
                break
            self.code = ((self.code << 8) | self._byte()) & RANGE_MASK
            self.span = (self.span << 8) & RANGE_MASK
            self.low = (self.low << 8) & RANGE_MASK

    def cum_value(self, total: int) -> int:
        r = self.span // total
        v = (self.code - self.low) & RANGE_MASK
        cum = v // r
        if cum >= total:
            raise RangeCodingError("corrupt range-coded stream")
        return cum

    def consume(self, cum_low: int, freq: int, total: int):
        r = self.span // total
        self.low = (self.low + cum_low * r) & RANGE_MASK
        self.span = freq * r
        self._normalize()


def range_encode(p, symbols) -> bytes:
    """32-bit range coder with a static 16-bit frequency table."""
    freqs = scaled_frequencies(p)
    cums = [0]
    for f in freqs:
        cums.append(cums[-1] + f)
    enc = _RangeEncoder()
    for s in symbols:
        enc.encode(cums[s], freqs[s], FREQ_TOTAL)
    return enc.finish()


def range_decode(p, data: bytes, count: int) -> list[int]:
    freqs = scaled_frequencies(p)
    cums = [0]
    for f in freqs:
        cums.append(cums[-1] + f)
    dec = _RangeDecoder(data)
    out = []
    for _ in range(count):
        v = dec.cum_value(FREQ_TOTAL)
        s = 0
        while cums[s + 1] <= v:
            s += 1
        dec.consume(cums[s], freqs[s], FREQ_TOTAL)
        out.append(s)
    return out


# ---------------------------------------------------------------------------
# experiment drivers

CSV_HEADER = ("source,coder,N_or_m,codebook_size,seq_len,trials,seed,"
              "mean_bits_per_sym,entropy,rel_redundancy")


@dataclass(frozen=True)
class ExperimentRow:
    source: str
    coder: str
    n_or_m: int
    codebook_size: int
    seq_len: int
    trials: int
    seed: int
    mean_bits_per_sym: float
    entropy: float
    rel_redundancy: float

    def csv(self) -> str:
        return (f"{self.source},{self.coder},{self.n_or_m},{self.codebook_size},"
                f"{self.seq_len},{self.trials},{self.seed},"
                f"{self.mean_bits_per_sym!r},{self.entropy!r},{self.rel_redundancy!r}")


def rows_to_csv(rows) -> str:
    return "\n".join([CSV_HEADER] + [r.csv() for r in rows]) + "\n"


@dataclass(frozen=True)
class TheoreticalRun:
    sources: tuple[tuple[str, SourceDistribution], ...]
    aifv_delays: tuple[int, ...] = ()
    aifvm_orders: tuple[int, ...] = ()
    ext_huffman_orders: tuple[int, ...] = ()
    include_huffman: bool = True
    tolerance: float = 1e-14
    max_depth: int | None = None


@dataclass(frozen=True)
class SimulationRun:
    sources: tuple[tuple[str, SourceDistribution], ...]
    seq_sizes: tuple[int, ...]
    trials: int
    seed: int
    aifv_delays: tuple[int, ...] = ()
    aifvm_orders: tuple[int, ...] = ()
    include_huffman: bool = True
    include_range: bool = True
    tolerance: float = 1e-14
    max_depth: int | None = None


def _forest_for(label_cache, dist, kind, value, tolerance, max_depth):
    key = (dist.probs, kind, value)
    if key not in label_cache:
        cfg = BuildConfig(n=value, tolerance=tolerance, max_depth=max_depth)
        if kind == "aifv":
            forest, _ = construct(dist.probs, cfg)
        else:
            forest, _ = construct_aifvm(dist.probs, value, cfg)
        label_cache[key] = forest
    return label_cache[key]


def run_theoretical(cfg: TheoreticalRun) -> list[ExperimentRow]:
    rows = []
    cache: dict = {}
    for label, dist in cfg.sources:
        h = entropy(dist)
        if cfg.include_huffman:
            hf = huffman(dist.probs)
            length = expected_code_length(hf, dist.probs)
            rows.append(ExperimentRow(label, "huffman", 1, dist.m, 0, 0, 0,
                                      length, h, relative_redundancy(length, h)))
        for order in cfg.ext_huffman_orders:
            ext = extended_huffman(dist.probs, order)
            rows.append(ExperimentRow(label, f"ext-huffman-{order}", order,
                                      dist.m ** order, 0, 0, 0,
                                      ext.per_symbol_expected, h,
                                      relative_redundancy(ext.per_symbol_expected, h)))
        for kind, values in (("aifv", cfg.aifv_delays), ("aifvm", cfg.aifvm_orders)):
            for value in values:
                forest = _forest_for(cache, dist, kind, value, cfg.tolerance, cfg.max_depth)
                length = expected_code_length(forest, dist.probs)
                rows.append(ExperimentRow(label, f"{kind}-{value}", value,
                                          folded_codebook_size(forest), 0, 0, 0,
                                          length, h, relative_redundancy(length, h)))
    return rows


def run_simulation(cfg: SimulationRun) -> list[ExperimentRow]:
    """Average coded bits per symbol over seeded trials.

    Trial ``t`` of every (source, size) cell draws its sequence with seed
    ``cfg.seed + t``, so runs are reproducible and cells are comparable.
    """
    rows = []
    cache: dict = {}
    for label, dist in cfg.sources:
        h = entropy(dist)
        coders = []
        if cfg.include_huffman:
            hf = huffman(dist.probs)
            coders.append(("huffman", 1, dist.m,
                           lambda seq, f=hf: len(encode(f, seq))))
        for kind, values in (("aifv", cfg.aifv_delays), ("aifvm", cfg.aifvm_orders)):
            for value in values:
                forest = _forest_for(cache, dist, kind, value, cfg.tolerance, cfg.max_depth)
                coders.append((f"{kind}-{value}", value, folded_codebook_size(forest),
                               lambda seq, f=forest: len(encode(f, seq))))
        if cfg.include_range:
            coders.append(("range", 32, dist.m,
                           lambda seq, d=dist: 8 * len(range_encode(d.probs, seq))))
        for size in cfg.seq_sizes:
            sequences = [
                [int(s) for s in sample_inversion(dist.probs, size, cfg.seed + t)]
                for t in range(cfg.trials)
            ]
            for name, n_or_m, book, count_bits in coders:
                mean = sum(count_bits(seq) / size for seq in sequences) / cfg.trials
                rows.append(ExperimentRow(label, name, n_or_m, book, size,
                                          cfg.trials, cfg.seed, mean, h,
                                          relative_redundancy(mean, h)))
    return rows
