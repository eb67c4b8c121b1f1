"""Exact single-tree optimisation.

One tree of a forest assigns each symbol a codeword and a link, paying
``len(codeword) + cost(linked mode)`` weighted by the symbol probability.
Restricted to continuous link modes, a feasible tree is exactly an
abutting tiling of the tree's own interval ``[K1/2^n, 1 - K2/2^n)`` by
per-symbol intervals of the form ``cell(codeword)`` shrunk by the linked
mode's margins.  That tiling view drives both halves of this module:

* an explicit integer model over binary variables (symbol depth
  selectors, link selectors, chain-adjacency indicators, codeword bits)
  with every coefficient scaled by ``2**(d_max + n)`` so feasibility is
  checked in exact integer arithmetic, and
* a best-first branch-and-bound that walks the tiling left to right,
  bounded below by a width-entropy relaxation, returning a provably
  optimal tree whose variable assignment is then verified against every
  row of the model.

For binary alphabets and small delays an independent partition search
over the mode's full leaf set covers discontinuous link modes as well.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

from .bitstrings import BitString, WordSet, common_prefix, expand_to_length, reduced, strip_prefix_all
from .forest import CodeTree
from .modes import ContinuousModeId, Mode, is_basic_mode, mode_from_id

NODE_BUDGET_DEFAULT = 10_000_000

# Safety margin subtracted from float lower bounds so rounding can never
# prune the true optimum; final objectives are compared at 1e-12.
BOUND_SLACK = 1e-9


class ResourceLimitError(RuntimeError):
    """The branch-and-bound node budget was exhausted."""


class ModelError(AssertionError):
    """An assignment or model is internally inconsistent (a bug)."""


def initial_costs(n: int) -> dict[ContinuousModeId, float]:
    """Starting link costs: the log-measure a mode's margins take away.

    A tree whose interval keeps the fraction ``(2^n - k1 - k2) / 2^n``
    of the unit interval produces codewords about that many bits longer,
    which prices the link before any iteration has run.
    """
    if n < 1:
        raise ValueError("delay must be at least 1")
    out = {}
    for k1 in range(1 << (n - 1)):
        for k2 in range(1 << (n - 1)):
            out[ContinuousModeId(k1, k2)] = n - math.log2((1 << n) - k1 - k2)
    return out


def aifvm_link_ids(n: int) -> list[ContinuousModeId]:
    """Link modes available to the classic m-tree construction: the empty
    mode plus the one-sided powers of two."""
    ids = [ContinuousModeId(0, 0)]
    ids += [ContinuousModeId(1 << j, 0) for j in range(n - 1) if (1 << j) < (1 << (n - 1))]
    return ids


@dataclass(frozen=True)
class Row:
    tag: str
    coeffs: dict
    sense: str  # 'le' or 'eq'
    rhs: int
    scale: int


@dataclass
class IlpModel:
    n: int
    m_symbols: int
    d_max: int
    mode_id: ContinuousModeId
    probs: tuple[float, ...]
    costs: dict[ContinuousModeId, float]
    aifvm: bool
    variables: dict  # name tuple -> upper bound (1 for binaries)
    rows: list[Row]
    objective: dict  # name tuple -> float coefficient

    @property
    def allowed_links(self) -> list[ContinuousModeId]:
        r = 1 << (self.n - 1)
        all_ids = [ContinuousModeId(a, b) for a in range(r) for b in range(r)]
        if not self.aifvm:
            return all_ids
        allowed = set(aifvm_link_ids(self.n))
        return [cid for cid in all_ids if cid in allowed]


def build_ilp(
    n: int,
    m: int,
    mode_id: ContinuousModeId,
    probs: Sequence[float],
    costs: Mapping[ContinuousModeId, float],
    d_max: int,
    aifvm: bool = False,
) -> IlpModel:
    """Assemble the integer model for one tree of the given mode.

    Variables: ``t[m,d]`` symbol depth selectors, ``u[m,k1,k2]`` link
    selectors, ``w/wb[m,i]`` codeword bits and their flips, ``v`` chain
    adjacency indicators, and ``k[j,m,d]`` carrying the linked margins at
    the active depth.  Interval rows are scaled by ``2**(d_max + n)``.
    """
    if d_max < 1:
        raise ValueError("depth bound must be at least 1")
    if len(probs) != m:
        raise ValueError("one probability per symbol required")
    r = 1 << (n - 1)
    if not (0 <= mode_id.k1 < r and 0 <= mode_id.k2 < r):
        raise ValueError(f"mode id {mode_id} out of range for delay {n}")
    scale = 1 << (d_max + n)
    link_ids = [ContinuousModeId(a, b) for a in range(r) for b in range(r)]

    variables: dict = {}
    for sym in range(m):
        for d in range(d_max + 1):
            variables[("t", sym, d)] = 1
        for cid in link_ids:
            variables[("u", sym, cid.k1, cid.k2)] = 1
        for i in range(d_max):
            variables[("w", sym, i)] = 1
            variables[("wb", sym, i)] = 1
        for j in (1, 2):
            for d in range(d_max + 1):
                variables[("k", j, sym, d)] = r - 1
        variables[("vL", sym)] = 1
        variables[("vR", sym)] = 1
    for sym in range(m):
        for sym2 in range(m):
            if sym != sym2:
                variables[("v", sym, sym2)] = 1

    rows: list[Row] = []

    def le(tag, coeffs, rhs, scale_=1):
        rows.append(Row(tag, coeffs, "le", rhs, scale_))

    def eq(tag, coeffs, rhs, scale_=1):
        rows.append(Row(tag, coeffs, "eq", rhs, scale_))

    for sym in range(m):
        for i in range(d_max):
            le(f"cw_consis1[{sym},{i}]", {("w", sym, i): 1, ("wb", sym, i): 1}, 1)
        for i in range(d_max - 1):
            le(f"cw_consis2[{sym},{i}]",
               {("w", sym, i + 1): 1, ("wb", sym, i + 1): 1,
                ("w", sym, i): -1, ("wb", sym, i): -1}, 0)
        eq(f"pick_t[{sym}]", {("t", sym, d): 1 for d in range(d_max + 1)}, 1)
        eq(f"pick_u[{sym}]", {("u", sym, c.k1, c.k2): 1 for c in link_ids}, 1)
        eq(f"chain_in[{sym}]",
           {("v", s2, sym): 1 for s2 in range(m) if s2 != sym} | {("vL", sym): 1}, 1)
        eq(f"chain_out[{sym}]",
           {("v", sym, s2): 1 for s2 in range(m) if s2 != sym} | {("vR", sym): 1}, 1)
        depth_coeffs = {("w", sym, i): 1 for i in range(d_max)}
        depth_coeffs |= {("wb", sym, i): 1 for i in range(d_max)}
        depth_coeffs |= {("t", sym, d): -d for d in range(d_max + 1) if d}
        eq(f"depth[{sym}]", depth_coeffs, 0)
        for j in (1, 2):
            for d in range(d_max + 1):
                le(f"k_gate[{j},{sym},{d}]",
                   {("k", j, sym, d): 1, ("t", sym, d): -(r - 1)}, 0)
            sel = {("u", sym, c.k1, c.k2): (c.k1 if j == 1 else c.k2)
                   for c in link_ids if (c.k1 if j == 1 else c.k2)}
            sel |= {("k", j, sym, d): -1 for d in range(d_max + 1)}
            eq(f"k_select[{j},{sym}]", sel, 0)
    eq("pick_vL", {("vL", sym): 1 for sym in range(m)}, 1)
    eq("pick_vR", {("vR", sym): 1 for sym in range(m)}, 1)

    cw = [1 << (d_max + n - i - 1) for i in range(d_max)]
    kc = [1 << (d_max - d) for d in range(d_max + 1)]
    for sym in range(m):
        for sym2 in range(m):
            if sym == sym2:
                continue
            neg = {("wb", sym, i): -cw[i] for i in range(d_max)}
            neg |= {("w", sym2, i): -cw[i] for i in range(d_max)}
            neg |= {("k", 2, sym, d): -kc[d] for d in range(d_max + 1)}
            neg |= {("k", 1, sym2, d): -kc[d] for d in range(d_max + 1)}
            le(f"adjacency[{sym},{sym2}]", neg | {("v", sym, sym2): scale}, 0, scale)
            pos = {name: -c for name, c in neg.items()}
            le(f"adjacency_full[{sym},{sym2}]",
               pos | {("v", sym, sym2): scale}, 2 * scale, scale)
        neg_l = {("w", sym, i): -cw[i] for i in range(d_max)}
        neg_l |= {("k", 1, sym, d): -kc[d] for d in range(d_max + 1)}
        le(f"left[{sym}]", neg_l | {("vL", sym): scale},
           scale - (mode_id.k1 << d_max), scale)
        le(f"left_full[{sym}]",
           {name: -c for name, c in neg_l.items()} | {("vL", sym): scale},
           scale + (mode_id.k1 << d_max), scale)
        neg_r = {("wb", sym, i): -cw[i] for i in range(d_max)}
        neg_r |= {("k", 2, sym, d): -kc[d] for d in range(d_max + 1)}
        le(f"right[{sym}]", neg_r | {("vR", sym): scale},
           scale - (mode_id.k2 << d_max), scale)
        le(f"right_full[{sym}]",
           {name: -c for name, c in neg_r.items()} | {("vR", sym): scale},
           scale + (mode_id.k2 << d_max), scale)

    if aifvm:
        allowed = set(aifvm_link_ids(n))
        for sym in range(m):
            eq(f"aifvm[{sym}]",
               {("u", sym, c.k1, c.k2): 1 for c in link_ids if c in allowed}, 1)

    objective = {}
    for sym in range(m):
        for d in range(d_max + 1):
            if d:
                objective[("t", sym, d)] = probs[sym] * d
        for c in link_ids:
            objective[("u", sym, c.k1, c.k2)] = probs[sym] * costs[c]

    return IlpModel(
        n=n, m_symbols=m, d_max=d_max, mode_id=mode_id,
        probs=tuple(float(x) for x in probs),
        costs={c: float(costs[c]) for c in link_ids},
        aifvm=aifvm, variables=variables, rows=rows, objective=objective,
    )


def check_assignment(model: IlpModel, assignment: Mapping) -> list[str]:
    """Every violated row tag, evaluated in exact integer arithmetic."""
    bad = []
    for name, value in assignment.items():
        if name not in model.variables:
            bad.append(f"unknown variable {name}")
        elif not 0 <= value <= model.variables[name]:
            bad.append(f"variable {name} out of bounds: {value}")
    for row in model.rows:
        val = sum(c * assignment.get(name, 0) for name, c in row.coeffs.items())
        ok = val <= row.rhs if row.sense == "le" else val == row.rhs
        if not ok:
            bad.append(f"{row.tag}: value {val} vs rhs {row.rhs}")
    return bad


def dump_model(model: IlpModel) -> str:
    """Textual model: one constraint per line, integer coefficients."""
    lines = [
        f"# tree model: delay={model.n} symbols={model.m_symbols} "
        f"depth<={model.d_max} mode=({model.mode_id.k1},{model.mode_id.k2})",
        f"# interval rows scaled by 2^(d_max+n) = {1 << (model.d_max + model.n)}",
        "min " + " + ".join(
            f"{c:.12g}*{'.'.join(map(str, name))}" for name, c in model.objective.items()
        ),
    ]
    for row in model.rows:
        terms = " + ".join(f"{c}*{'.'.join(map(str, name))}" for name, c in row.coeffs.items())
        op = "<=" if row.sense == "le" else "=="
        lines.append(f"{row.tag}: {terms} {op} {row.rhs}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class TreeSolution:
    codewords: tuple[BitString, ...]
    link_ids: tuple[ContinuousModeId, ...]
    objective: float
    order: tuple[int, ...]  # symbols in left-to-right interval order
    assignment: dict


def _assignment_from_pieces(model: IlpModel, pieces: list[tuple], order: list[int]) -> dict:
    assignment: dict = {}
    for sym, (d, v, k1, k2) in enumerate(pieces):
        assignment[("t", sym, d)] = 1
        for i in range(d):
            bit = (v >> (d - 1 - i)) & 1
            assignment[("w", sym, i)] = bit
            assignment[("wb", sym, i)] = 1 - bit
        assignment[("u", sym, k1, k2)] = 1
        if k1:
            assignment[("k", 1, sym, d)] = k1
        if k2:
            assignment[("k", 2, sym, d)] = k2
    assignment[("vL", order[0])] = 1
    assignment[("vR", order[-1])] = 1
    for a, b in zip(order, order[1:]):
        assignment[("v", a, b)] = 1
    return assignment


def solve_ilp(model: IlpModel, node_budget: int = NODE_BUDGET_DEFAULT) -> TreeSolution:
    """Provably optimal tree for the model.

    A greedy first-feasible dive supplies the incumbent (so a feasible
    model can never be reported infeasible), then best-first search over
    (interval position, placed-symbol set) states runs to proof.  States
    are deduplicated by position and placed set; symbols of equal
    probability are placed in ascending index order.  Deterministic:
    ties in the bound fall back to insertion order.
    """
    n, d_max, m = model.n, model.d_max, model.m_symbols
    probs = model.probs
    scale = 1 << (d_max + n)
    start = model.mode_id.k1 << d_max
    end = ((1 << n) - model.mode_id.k2) << d_max
    r = 1 << (n - 1)

    allowed = model.allowed_links
    by_k1: dict[int, list[tuple[int, float]]] = {}
    for cid in allowed:
        by_k1.setdefault(cid.k1, []).append((cid.k2, model.costs[cid]))
    for lst in by_k1.values():
        lst.sort()
    min_width = min((1 << n) - c.k1 - c.k2 for c in allowed)
    max_width = max((1 << n) - c.k1 - c.k2 for c in allowed) << d_max
    min_cost = min(model.costs[c] for c in allowed)
    alpha_min = min(
        model.costs[c] + math.log2(((1 << n) - c.k1 - c.k2) / (1 << n)) for c in allowed
    )

    full_mask = (1 << m) - 1
    psum = [0.0] * (1 << m)
    hsum = [0.0] * (1 << m)
    for mask in range(1, 1 << m):
        low = mask & -mask
        sym = low.bit_length() - 1
        psum[mask] = psum[mask ^ low] + probs[sym]
        hsum[mask] = hsum[mask ^ low] - probs[sym] * math.log2(probs[sym])

    def lower_bound(x: int, rem_mask: int) -> float:
        if not rem_mask:
            return 0.0
        p_total = psum[rem_mask]
        frac = (end - x) / scale
        ent = hsum[rem_mask] + p_total * (math.log2(p_total) - math.log2(frac) + alpha_min)
        return max(ent, p_total * min_cost) - BOUND_SLACK

    def pieces_at(x: int):
        for d in range(d_max + 1):
            shift = n + d_max - d
            v = x >> shift
            off = x - (v << shift)
            g = 1 << (d_max - d)
            if off & (g - 1):
                continue
            k1 = off >> (d_max - d)
            if k1 >= r:
                continue
            entries = by_k1.get(k1)
            if not entries:
                continue
            for k2, cost in entries:
                piece_end = x + (((1 << n) - k1 - k2) << (d_max - d))
                if piece_end <= end:
                    yield d, v, k1, k2, piece_end, d + cost

    def candidates(used_mask: int, key):
        cands = []
        for sym in range(m):
            if used_mask >> sym & 1:
                continue
            dup = any(
                not (used_mask >> s2 & 1) and probs[s2] == probs[sym]
                for s2 in range(sym)
            )
            if not dup:
                cands.append(sym)
        cands.sort(key=key)
        return cands

    nodes = 0

    def spend() -> None:
        nonlocal nodes
        nodes += 1
        if nodes > node_budget:
            raise ResourceLimitError(f"node budget {node_budget} exhausted")

    def dive() -> tuple[float, tuple] | None:
        # first feasible solution, largest pieces first for big symbols
        stack = [(start, 0, 0.0, ())]
        while stack:
            x, used, g, path = stack.pop()
            spend()
            if used == full_mask:
                if x == end:
                    return g, path
                continue
            children = []
            for sym in candidates(used, key=lambda s: (-probs[s], s)):
                left = full_mask ^ used ^ (1 << sym)
                rem_after = bin(left).count("1")
                for d, v, k1, k2, pe, cost in pieces_at(x):
                    if left:
                        if end - pe < min_width * rem_after or end - pe > max_width * rem_after:
                            continue
                    elif pe != end:
                        continue
                    children.append(((pe - x, -cost), (sym, d, v, k1, k2, pe, cost)))
            children.sort(key=lambda c: c[0])
            for _, (sym, d, v, k1, k2, pe, cost) in children:
                stack.append((pe, used | (1 << sym), g + probs[sym] * cost,
                              path + ((sym, d, v, k1, k2),)))
        return None

    # The dive gives the incumbent; g accumulates p * (depth + link cost).
    best: tuple[float, tuple] | None = None
    dived = dive()
    if dived is not None:
        best = dived

    heap: list = []
    seq = 0
    g0 = 0.0
    heapq.heappush(heap, (lower_bound(start, full_mask), seq, start, 0, g0, ()))
    closed: dict[tuple[int, int], float] = {}
    while heap:
        f, _, x, used, g, path = heapq.heappop(heap)
        spend()
        if best is not None and f >= best[0] - 1e-15:
            break
        state = (x, used)
        prev = closed.get(state)
        if prev is not None and prev <= g:
            continue
        closed[state] = g
        if used == full_mask:
            if x == end and (best is None or g < best[0]):
                best = (g, path)
            continue
        for sym in candidates(used, key=lambda s: s):
            new_used = used | (1 << sym)
            left = full_mask ^ new_used
            rem_after = bin(left).count("1")
            for d, v, k1, k2, pe, cost in pieces_at(x):
                if left:
                    if end - pe < min_width * rem_after or end - pe > max_width * rem_after:
                        continue
                elif pe != end:
                    continue
                g2 = g + probs[sym] * cost
                f2 = g2 + lower_bound(pe, left)
                if best is not None and f2 >= best[0] - 1e-15:
                    continue
                seq += 1
                heapq.heappush(heap, (f2, seq, pe, new_used, g2, path + ((sym, d, v, k1, k2),)))

    if best is None:
        raise ModelError(f"no feasible tree for mode {model.mode_id} (model bug)")

    objective, path = best
    order = [sym for sym, *_ in path]
    pieces = [None] * m
    for sym, d, v, k1, k2 in path:
        pieces[sym] = (d, v, k1, k2)
    assignment = _assignment_from_pieces(model, pieces, order)
    bad = check_assignment(model, assignment)
    if bad:
        raise ModelError(f"solver output violates the model: {bad[:3]}")
    codewords = tuple(BitString(d, v) for d, v, _, _ in pieces)
    link_ids = tuple(ContinuousModeId(k1, k2) for _, _, k1, k2 in pieces)
    recomputed = sum(
        probs[s] * (pieces[s][0] + model.costs[link_ids[s]]) for s in range(m)
    )
    if abs(recomputed - objective) > 1e-9:
        raise ModelError("objective mismatch between search and recomputation")
    return TreeSolution(codewords, link_ids, float(recomputed), tuple(order), assignment)


def decode_solution(
    model: IlpModel,
    assignment: Mapping,
    index_of: Callable[[ContinuousModeId], int] | None = None,
) -> CodeTree:
    """Read a feasible assignment back into a code tree.

    Links are resolved to forest indices through ``index_of``; the
    default is the canonical continuous ordering ``k1 * 2^(n-1) + k2``.
    """
    if index_of is None:
        index_of = lambda cid: cid.k1 * (1 << (model.n - 1)) + cid.k2  # noqa: E731
    codewords, links = [], []
    for sym in range(model.m_symbols):
        depths = [d for d in range(model.d_max + 1) if assignment.get(("t", sym, d))]
        if len(depths) != 1:
            raise ModelError(f"symbol {sym} has {len(depths)} active depths")
        d = depths[0]
        value = 0
        for i in range(d):
            w = assignment.get(("w", sym, i), 0)
            wb = assignment.get(("wb", sym, i), 0)
            if w + wb != 1:
                raise ModelError(f"symbol {sym} bit {i} unset inside codeword")
            value = (value << 1) | w
        chosen = [c for c in model.allowed_links
                  if assignment.get(("u", sym, c.k1, c.k2))]
        if len(chosen) != 1:
            raise ModelError(f"symbol {sym} has {len(chosen)} active links")
        cid = chosen[0]
        for j, kj in ((1, cid.k1), (2, cid.k2)):
            if assignment.get(("k", j, sym, d), 0) != kj:
                raise ModelError(f"margin variable k[{j},{sym},{d}] inconsistent")
        codewords.append(BitString(d, value))
        links.append(index_of(cid))
    return CodeTree(tuple(codewords), tuple(links),
                    mode_from_id(model.n, model.mode_id))


# ---------------------------------------------------------------------------
# binary brute force over full leaf-set partitions

_PARTITION_CACHE: dict[tuple[int, WordSet], list] = {}


def _partition_table(n: int, mode: Mode) -> list[tuple[int, WordSet, int, WordSet]]:
    """All ordered two-way partitions of the mode's length-``n`` leaf set,
    each reduced to (codeword length, linked words) for both symbols."""
    key = (n, mode.words)
    cached = _PARTITION_CACHE.get(key)
    if cached is not None:
        return cached
    leaves = sorted(expand_to_length(mode.words, n), key=lambda w: w.value)
    table = []
    for mask in range(1, (1 << len(leaves)) - 1):
        w_set = frozenset(leaves[i] for i in range(len(leaves)) if mask >> i & 1)
        wbar = frozenset(leaves[i] for i in range(len(leaves)) if not mask >> i & 1)
        entry = []
        for part in (w_set, wbar):
            head = common_prefix(part)
            linked = reduced(strip_prefix_all(head, part))
            entry.extend((head.length, linked))
        table.append(tuple(entry))
    _PARTITION_CACHE[key] = table
    return table


def brute_force_binary(
    n: int,
    mode: Mode,
    probs: Sequence[float],
    costs: Mapping[WordSet, float],
    index_of: Mapping[WordSet, int],
) -> tuple[CodeTree, float]:
    """Optimal binary-alphabet tree for one mode by trying every split of
    its leaf set; links may be any basic mode present in ``costs``.
    Ties keep the first partition in mask order.
    """
    if len(probs) != 2:
        raise ValueError("partition search requires a binary alphabet")
    if not 1 <= n <= 3:
        raise ValueError("partition search supports delays 1..3")
    if not is_basic_mode(mode.words, n):
        raise ValueError(f"not a basic mode: {mode}")
    p0, p1 = probs
    best = None
    best_mask = -1
    for mask_index, entry in enumerate(_partition_table(n, mode)):
        len0, linked0, len1, linked1 = entry
        value = p0 * (len0 + costs[linked0]) + p1 * (len1 + costs[linked1])
        if best is None or value < best:
            best = value
            best_mask = mask_index + 1
    leaves = sorted(expand_to_length(mode.words, n), key=lambda w: w.value)
    w_set = frozenset(leaves[i] for i in range(len(leaves)) if best_mask >> i & 1)
    wbar = frozenset(leaves[i] for i in range(len(leaves)) if not best_mask >> i & 1)
    head0, head1 = common_prefix(w_set), common_prefix(wbar)
    linked0 = reduced(strip_prefix_all(head0, w_set))
    linked1 = reduced(strip_prefix_all(head1, wbar))
    tree = CodeTree(
        codewords=(head0, head1),
        links=(index_of[linked0], index_of[linked1]),
        mode=mode,
    )
    return tree, float(best)
