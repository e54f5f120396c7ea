"""Greedy value-rate lottery mechanism for concave additive valuations.

The greedy branch ranks (seller, unit) pairs by marginal value per unit of
bid, buys the longest prefix whose last pair still satisfies the
proportional budget-share inequality, and pays each bought unit its exact
critical bid.  A three-way lottery mixes this branch with buying one unit
from the highest-margin seller at the full budget, and buying nothing.

The symmetric-valuation variant ranks units by bid alone and buys the
longest prefix with bid <= budget/rank; its thresholds are found by exact
search over the rule's breakpoints.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import log

from .core import (
    Instance,
    NoThreshold,
    Outcome,
    Rat,
    WrongValuationClass,
    unit_vector,
)
from .valuations import BoundedKnapsack, ConcaveAdditive, Symmetric

BRANCHES = ("greedy", "star", "bot")


@dataclass(frozen=True)
class RankedPair:
    """One unit of one seller in the greedy ranking."""

    seller: int  # 0-based
    unit: int  # 1-based
    value: object  # marginal value of this unit
    bid: object  # the seller's announced per-unit cost

    @property
    def rate(self):
        """Value per unit of bid; None encodes +infinity (zero bid)."""
        return None if self.bid == 0 else self.value / self.bid

    def sort_key(self):
        # Infinite-rate pairs first, then rate decreasing, ties by (i, j).
        if self.bid == 0:
            return (0, 0, self.seller, self.unit)
        return (1, -(self.value / self.bid), self.seller, self.unit)


@dataclass(frozen=True)
class AddLottery:
    """Branch probabilities and the fixed star seller of the lottery."""

    p_greedy: float
    p_star: float
    p_bot: float
    star_seller: int


def _positive_margins(inst: Instance):
    """Per-seller margin lists with zero-value units stripped.

    Requires a concave additive (or bounded-knapsack) valuation, where
    zero margins always form a suffix of each item's list.
    """
    v = inst.valuation
    if not isinstance(v, (BoundedKnapsack, ConcaveAdditive)):
        raise WrongValuationClass(
            "mechanism requires a concave additive or bounded-knapsack valuation"
        )
    return [[x for x in mm if x > 0] for mm in v.margins(inst.units)]


def _checked_bids(inst: Instance, bids):
    if bids is None:
        return inst.costs
    bids = tuple(Rat(b) for b in bids)
    if len(bids) != inst.m:
        raise ValueError("bid profile length mismatch")
    if any(b < 0 for b in bids):
        raise ValueError("bids must be >= 0")
    return bids


def ranked_pairs(inst: Instance, bids=None, exclude=None):
    """All positive-value (seller, unit) pairs in greedy rank order."""
    bids = _checked_bids(inst, bids)
    margs = _positive_margins(inst)
    pairs = [
        RankedPair(i, j, mm[j - 1], bids[i])
        for i, mm in enumerate(margs)
        if i != exclude
        for j in range(1, len(mm) + 1)
    ]
    pairs.sort(key=RankedPair.sort_key)
    return pairs


def greedy_allocate(inst: Instance, bids=None):
    """Allocation bought by the greedy branch under the given bids."""
    bids = _checked_bids(inst, bids)
    pairs = ranked_pairs(inst, bids)
    budget = inst.budget
    prefix = Rat(0)
    k = 0
    for rank, pr in enumerate(pairs, start=1):
        prefix += pr.value
        # bid/value <= B/prefix, cross-multiplied to stay exact.
        if pr.bid * prefix <= budget * pr.value:
            k = rank
    counts = [0] * inst.m
    for pr in pairs[:k]:
        counts[pr.seller] += 1
    return tuple(counts)


def pickup_flags(inst: Instance, bids=None):
    """Per-rank pick-up test: each pair against its own prefix inequality.

    Equivalent to the longest-prefix rule of greedy_allocate; exposed so
    tests can check the equivalence directly.
    """
    bids = _checked_bids(inst, bids)
    pairs = ranked_pairs(inst, bids)
    flags = []
    prefix = Rat(0)
    for pr in pairs:
        prefix += pr.value
        flags.append((pr, pr.bid * prefix <= inst.budget * pr.value))
    return flags


def threshold(inst: Instance, i: int, j: int, bids=None):
    """Exact critical bid for seller i's j-th unit in the greedy branch.

    Bidding below the returned value keeps the unit bought, bidding above
    loses it.  Raises NoThreshold when the unit is not bought under the
    given bids (including zero-value units stripped before ranking).
    """
    bids = _checked_bids(inst, bids)
    margs = _positive_margins(inst)
    if not 0 <= i < inst.m:
        raise IndexError(f"seller index {i} out of range")
    if not 1 <= j <= len(margs[i]):
        raise NoThreshold(f"unit {j} of seller {i} is never bought")
    if greedy_allocate(inst, bids)[i] < j:
        raise NoThreshold(
            f"unit {j} of seller {i} is not bought under these bids"
        )
    v_ij = margs[i][j - 1]
    own_prefix = sum(margs[i][:j], Rat(0))
    others = ranked_pairs(inst, bids, exclude=i)
    count = len(others)
    others_prefix = [Rat(0)]
    for pr in others:
        others_prefix.append(others_prefix[-1] + pr.value)

    def crossing(alpha):
        # Largest bid placing the unit after the alpha-th foreign pair.
        pr = others[alpha - 1]
        return v_ij * pr.bid / pr.value

    budget = inst.budget
    for alpha in range(count, -1, -1):
        t_in = v_ij * budget / (own_prefix + others_prefix[alpha])
        t_rank = crossing(alpha) if alpha >= 1 else Rat(0)
        if t_in < t_rank:
            continue
        t_next = crossing(alpha + 1) if alpha + 1 <= count else None
        if t_next is None or t_in <= t_next:
            return t_in
        return t_next
    raise AssertionError("threshold scan fell through")  # pragma: no cover


def greedy_payments(inst: Instance, bids=None):
    """Threshold payments for the greedy-branch allocation."""
    bids = _checked_bids(inst, bids)
    alloc = greedy_allocate(inst, bids)
    payments = []
    for i, a in enumerate(alloc):
        payments.append(
            sum((threshold(inst, i, j, bids) for j in range(1, a + 1)), Rat(0))
        )
    return alloc, tuple(payments)


def star_seller(inst: Instance) -> int:
    """Seller whose first unit has the highest marginal value (lowest index wins)."""
    v = inst.valuation
    if isinstance(v, Symmetric):
        return 0
    firsts = [mm[0] for mm in v.margins(inst.units)]
    best = 0
    for i, x in enumerate(firsts):
        if x > firsts[best]:
            best = i
    return best


def lottery(inst: Instance) -> AddLottery:
    n = inst.total_units
    p_greedy = 1.0 / (2.0 * (1.0 + log(n)))
    p_star = 0.5
    return AddLottery(p_greedy, p_star, 1.0 - p_greedy - p_star, star_seller(inst))


def _star_outcome(inst: Instance) -> Outcome:
    i = star_seller(inst)
    payments = [Rat(0)] * inst.m
    payments[i] = inst.budget
    return Outcome(unit_vector(inst.m, i), tuple(payments))


def run_m_add(inst: Instance, bids, branch: str) -> Outcome:
    """One deterministic branch of the concave-additive lottery mechanism."""
    if branch == "greedy":
        alloc, payments = greedy_payments(inst, bids)
        return Outcome(alloc, payments)
    if branch == "star":
        _positive_margins(inst)  # class check even on the posted branch
        return _star_outcome(inst)
    if branch == "bot":
        return inst.empty_outcome()
    raise ValueError(f"unknown branch {branch!r}")


# Symmetric variant: units are interchangeable, so ranking is by bid alone.


def _require_symmetric(inst: Instance):
    if not isinstance(inst.valuation, Symmetric):
        raise WrongValuationClass("mechanism requires a symmetric valuation")


def sym_allocate(inst: Instance, bids=None):
    """Buy the longest cheap prefix: rank units by bid, keep while bid <= B/rank."""
    _require_symmetric(inst)
    bids = _checked_bids(inst, bids)
    pairs = [
        (bids[i], i, j)
        for i in range(inst.m)
        for j in range(1, inst.units[i] + 1)
    ]
    pairs.sort()
    k = 0
    for rank, (bid, _, _) in enumerate(pairs, start=1):
        if bid * rank <= inst.budget:
            k = rank
    counts = [0] * inst.m
    for bid, i, _ in pairs[:k]:
        counts[i] += 1
    return tuple(counts)


def threshold_by_search(sold, candidates):
    """Exact threshold of a monotone sold-below/lost-above bid predicate.

    ``candidates`` must contain every bid at which the predicate can flip;
    probes run strictly between consecutive candidates so ties never bite.
    """
    cands = sorted({Rat(c) for c in candidates if c > 0})
    if not cands or not sold(cands[0] / 2):
        raise NoThreshold("not sold at any positive bid")

    def sold_above(t: int) -> bool:
        probe = (
            cands[t] + 1 if t == len(cands) - 1 else (cands[t] + cands[t + 1]) / 2
        )
        return sold(probe)

    if sold_above(len(cands) - 1):
        raise AssertionError("candidate set misses a breakpoint")
    lo, hi = 0, len(cands) - 1  # invariant: sold_above(hi) is False
    while lo < hi:
        mid = (lo + hi) // 2
        if sold_above(mid):
            lo = mid + 1
        else:
            hi = mid
    return cands[lo]


def sym_threshold(inst: Instance, i: int, j: int, bids=None):
    """Critical bid for seller i's j-th unit under the symmetric rule."""
    _require_symmetric(inst)
    bids = _checked_bids(inst, bids)
    if sym_allocate(inst, bids)[i] < j:
        raise NoThreshold(f"unit {j} of seller {i} is not bought under these bids")
    candidates = {inst.budget / rank for rank in range(1, inst.total_units + 1)}
    candidates |= {b for idx, b in enumerate(bids) if idx != i and b > 0}

    def sold(bid) -> bool:
        probe = bids[:i] + (bid,) + bids[i + 1 :]
        return sym_allocate(inst, probe)[i] >= j

    return threshold_by_search(sold, candidates)


def sym_payments(inst: Instance, bids=None):
    bids = _checked_bids(inst, bids)
    alloc = sym_allocate(inst, bids)
    payments = []
    for i, a in enumerate(alloc):
        payments.append(
            sum((sym_threshold(inst, i, j, bids) for j in range(1, a + 1)), Rat(0))
        )
    return alloc, tuple(payments)


def run_m_sym(inst: Instance, bids, branch: str) -> Outcome:
    """One deterministic branch of the symmetric-valuation lottery mechanism."""
    _require_symmetric(inst)
    if branch == "greedy":
        alloc, payments = sym_payments(inst, bids)
        return Outcome(alloc, payments)
    if branch == "star":
        return _star_outcome(inst)
    if branch == "bot":
        return inst.empty_outcome()
    raise ValueError(f"unknown branch {branch!r}")
