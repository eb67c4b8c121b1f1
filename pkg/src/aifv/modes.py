"""Decoder-query sets (modes), their enumeration and interval identities.

A mode is the prefix-free string set a decoder queries to resolve one
symbol.  The basic family for delay ``n`` is obtained by reducing
``'0' + Lb  union  '1' + Ub`` over all non-empty ``Lb, Ub`` of length
``n - 1``.  Modes whose probability-interval image is one contiguous
interval form the continuous subfamily, identified by a pair ``(k1, k2)``
with interval ``[k1 / 2**n, 1 - k2 / 2**n)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from .bitstrings import (
    BitString,
    DyadicInterval,
    EMPTY,
    WordSet,
    append,
    expand_to_length,
    flip_words,
    interval_of,
    merge_intervals,
    reduced,
)

# Full basic-family enumeration explodes as (2**2**(n-1) - 1)**2; four is
# the last size a desk machine enumerates comfortably.
MAX_BASIC_DELAY = 4
MAX_CONTINUOUS_DELAY = 8


@dataclass(frozen=True)
class Mode:
    """A prefix-free query set together with its delay bound."""

    words: WordSet
    n: int

    def render(self) -> str:
        return ",".join(w.render() for w in sorted(self.words, key=lambda w: w.text))

    def sort_key(self) -> tuple[str, ...]:
        return tuple(sorted(w.text for w in self.words))

    def __str__(self) -> str:
        return self.render()


class ContinuousModeId(NamedTuple):
    k1: int
    k2: int

    def render(self) -> str:
        return f"({self.k1},{self.k2})"


def is_basic_mode(words: WordSet, n: int) -> bool:
    """Membership test for the delay-``n`` basic family.

    Equivalent to being the reduction of a two-sided length-``n`` leaf
    set: reduced, member lengths at most ``n``, and (unless the set is
    the bare empty string) covering both first bits.
    """
    if not words:
        return False
    if any(w.length > n for w in words):
        return False
    if reduced(words) != words:
        return False
    if words == frozenset({EMPTY}):
        return True
    first_bits = {w.bit(0) for w in words}
    return first_bits == {0, 1}


def enumerate_basic_modes(n: int) -> list[Mode]:
    """All basic modes for delay ``n``, canonically ordered."""
    if not 1 <= n <= MAX_BASIC_DELAY:
        raise ValueError(f"basic-mode enumeration supports 1..{MAX_BASIC_DELAY}, got {n}")
    half = [BitString(n - 1, v) for v in range(1 << (n - 1))]
    zero, one = BitString(1, 0), BitString(1, 1)
    seen: set[WordSet] = set()
    out: list[Mode] = []
    for lb_mask in range(1, 1 << len(half)):
        lbs = frozenset(append(zero, half[i]) for i in range(len(half)) if lb_mask >> i & 1)
        for ub_mask in range(1, 1 << len(half)):
            ubs = frozenset(append(one, half[i]) for i in range(len(half)) if ub_mask >> i & 1)
            words = reduced(lbs | ubs)
            if words not in seen:
                seen.add(words)
                out.append(Mode(words, n))
    expected = ((1 << (1 << (n - 1))) - 1) ** 2
    if len(out) != expected:
        raise AssertionError(f"basic-mode count {len(out)} != {expected}")
    out.sort(key=Mode.sort_key)
    return out


def enumerate_continuous_ids(n: int) -> list[ContinuousModeId]:
    if not 1 <= n <= MAX_CONTINUOUS_DELAY:
        raise ValueError(f"continuous enumeration supports 1..{MAX_CONTINUOUS_DELAY}, got {n}")
    r = 1 << (n - 1)
    return [ContinuousModeId(k1, k2) for k1 in range(r) for k2 in range(r)]


def leaf_number(w: BitString) -> int:
    """Position of a length-``n`` leaf on its side of the tree.

    Leaves under '0' count up toward the midpoint, leaves under '1'
    count down from it, so number ``j`` on either side sits ``j`` cells
    away from the outer edge and both sides end at ``2**(n-1) - 1``
    beside the midpoint.
    """
    n = w.length
    if n < 1:
        raise ValueError("leaf must have length >= 1")
    tail = w.value & ((1 << (n - 1)) - 1)
    if w.bit(0) == 0:
        return tail
    return ((1 << (n - 1)) - 1) ^ tail


def mode_from_id(n: int, cid: ContinuousModeId) -> Mode:
    r = 1 << (n - 1)
    if not (0 <= cid.k1 < r and 0 <= cid.k2 < r):
        raise ValueError(f"id {cid} out of range for delay {n}")
    keep = [w for w in (BitString(n, v) for v in range(1 << n))
            if (leaf_number(w) >= cid.k1 if w.bit(0) == 0 else leaf_number(w) >= cid.k2)]
    return Mode(reduced(frozenset(keep)), n)


def id_of_mode(mode: Mode) -> ContinuousModeId | None:
    """Inverse of :func:`mode_from_id`; ``None`` for discontinuous modes."""
    if not is_basic_mode(mode.words, mode.n):
        raise ValueError(f"not a basic mode for delay {mode.n}: {mode}")
    leaves = expand_to_length(mode.words, mode.n)
    top = (1 << (mode.n - 1)) - 1
    zero_side = sorted(leaf_number(w) for w in leaves if w.bit(0) == 0)
    one_side = sorted(leaf_number(w) for w in leaves if w.bit(0) == 1)
    for side in (zero_side, one_side):
        if not side or side[-1] != top or side != list(range(side[0], top + 1)):
            return None
    return ContinuousModeId(zero_side[0], one_side[0])


def mode_interval(mode: Mode) -> tuple[DyadicInterval, ...]:
    """Union of the members' probability intervals, merged."""
    return merge_intervals(interval_of(w) for w in mode.words)


def id_interval(n: int, cid: ContinuousModeId) -> DyadicInterval:
    return DyadicInterval(cid.k1, (1 << n) - cid.k2, n)


def flip_mode(mode: Mode) -> Mode:
    return Mode(flip_words(mode.words), mode.n)


def flip_id(cid: ContinuousModeId) -> ContinuousModeId:
    return ContinuousModeId(cid.k2, cid.k1)
