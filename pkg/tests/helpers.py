"""Independent oracles used to cross-check mechanism internals."""

from itertools import product

from procure.core import Rat
from procure.mech_additive import (
    greedy_allocate,
    ranked_pairs,
    threshold_by_search,
)


def independent_threshold(inst, seller, unit, bids=None):
    """Exact critical bid for a greedy-branch unit, by probing the
    allocation rule over its breakpoint set.

    Candidates are the bids where the unit's rank can cross a rival pair
    and where its own prefix-share inequality can become tight; the rule is
    probed strictly between candidates, so no case analysis is shared with
    the closed-form threshold algorithm under test.
    """
    bids = inst.costs if bids is None else tuple(Rat(b) for b in bids)
    rivals = ranked_pairs(inst, bids, exclude=seller)
    own = [p for p in ranked_pairs(inst, bids) if p.seller == seller]
    v_unit = next(p.value for p in own if p.unit == unit)
    own_prefix = sum((p.value for p in own if p.unit <= unit), Rat(0))
    candidates = set()
    running = Rat(0)
    candidates.add(v_unit * inst.budget / own_prefix)
    for pr in rivals:
        running += pr.value
        candidates.add(v_unit * inst.budget / (own_prefix + running))
        candidates.add(v_unit * pr.bid / pr.value)

    def sold(bid):
        probe = bids[:seller] + (bid,) + bids[seller + 1 :]
        return greedy_allocate(inst, probe)[seller] >= unit

    return threshold_by_search(sold, candidates)


def brute_force_optimum(inst):
    """Exhaustive budget-constrained optimum, lexicographically smallest."""
    best = None
    for alloc in product(*(range(n + 1) for n in inst.units)):
        cost = sum(
            (a * c for a, c in zip(alloc, inst.costs)), Rat(0)
        )
        if cost > inst.budget:
            continue
        v = inst.valuation.value(alloc)
        if best is None or v > best[1]:
            best = (alloc, v)
    return best


def brute_force_demand(valuation, prices, caps):
    """Exhaustive demand maximizer, lexicographically smallest."""
    best = None
    for alloc in product(*(range(c + 1) for c in caps)):
        obj = valuation.value(alloc) - sum(
            (a * p for a, p in zip(alloc, prices)), Rat(0)
        )
        if best is None or obj > best[1]:
            best = (alloc, obj)
    return best[0]
