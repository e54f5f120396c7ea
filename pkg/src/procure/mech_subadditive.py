"""Demand-oracle mechanisms for sub-additive valuations.

``a_max`` approximates the best budget-feasible allocation over a seller
subset to within a factor of 8: it anchors a value grid on the best
affordable single-item bundle, prices each grid point proportionally to
cost, asks the demand oracle, and keeps the most valuable budget-feasible
prefix of the answer.

``run_m_rand`` samples half the sellers to calibrate a value target, then
posts uniform unit prices B/k to the other half for k = 1, 2, ... and
accepts the first round whose a_max allocation clears the target scaled by
loglog(n)/(64 log(n)).  Mixing it 1:1 with the best-single-seller
mechanism gives the sub-additive mechanism proper.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import log2

from .core import Instance, Outcome, Rat, ifloor
from .mech_single_item import run_m_one
from .valuations import demand

ACCEPT_EPS = 1e-12


def phi(total_units: int) -> float:
    """Acceptance factor loglog/64log in base 2, floored at n=4.

    Below n=4 the raw formula is non-positive and would accept anything;
    the guard keeps it positive and is recorded in verification reports.
    """
    n = max(total_units, 4)
    return log2(log2(n)) / (64.0 * log2(n))


@dataclass(frozen=True)
class MaxRun:
    """One a_max execution: caps, value grid, per-grid candidates, winner."""

    members: tuple
    capped_units: tuple
    anchor_value: object
    grid: tuple
    candidates: tuple
    winner: tuple
    winner_value: object


def a_max(valuation, budget, units, costs, members) -> MaxRun:
    """Deterministic 8-approximation of the budget-feasible optimum on a subset.

    ``units`` and ``costs`` are full-length profiles; sellers outside
    ``members`` are ignored.  Zero costs get the +inf floor convention
    (capped at the full supply).
    """
    budget = Rat(budget)
    members = tuple(sorted(set(members)))
    m = len(units)
    zero_alloc = (0,) * m
    capped = [0] * m
    for i in members:
        c = costs[i]
        capped[i] = units[i] if c == 0 else min(units[i], ifloor(budget / c))
    capped = tuple(capped)
    if not members:
        return MaxRun((), capped, Rat(0), (), (), zero_alloc, Rat(0))

    anchor = Rat(0)
    for i in members:
        v = valuation.value(tuple(capped[i] if j == i else 0 for j in range(m)))
        if v > anchor:
            anchor = v
    if anchor == 0:
        grid = (Rat(0),)
    else:
        grid = tuple(k * anchor for k in range(len(members), 0, -1))

    zero = Rat(0)
    candidates = []
    winner, winner_value = zero_alloc, zero
    for target in grid:
        prices = tuple(
            target * costs[i] / (2 * budget) if i in members else zero
            for i in range(m)
        )
        asked = demand(valuation, prices, capped)
        candidate = zero_alloc
        if valuation.value(asked) >= target / 2:
            spend = sorted(
                ((-(asked[i] * costs[i]), i) for i in members),
            )
            chosen = []
            cum = zero
            for neg_cost, i in spend:
                cum -= neg_cost
                if cum > budget:
                    break
                chosen.append(i)
            counts = [0] * m
            for i in chosen:
                counts[i] = asked[i]
            candidate = tuple(counts)
        candidates.append(candidate)
        v = valuation.value(candidate)
        if v > winner_value:
            winner, winner_value = candidate, v
    return MaxRun(
        members, capped, anchor, grid, tuple(candidates), winner, winner_value
    )


@dataclass(frozen=True)
class RandRun:
    """One realization of the random-sampling mechanism."""

    sample_group: tuple
    sample_value: object
    accepted_round: int | None
    unit_price: object | None
    outcome: Outcome


def _checked_bids(inst: Instance, bids):
    if bids is None:
        return inst.costs
    bids = tuple(Rat(b) for b in bids)
    if len(bids) != inst.m or any(b < 0 for b in bids):
        raise ValueError("bad bid profile")
    return bids


def m_rand_detail(inst: Instance, bids, sample_group) -> RandRun:
    """Run the posted-price rounds for a fixed sample-group realization.

    ``sample_group`` is the set of sellers sampled away for calibration;
    only its complement can sell.  When the calibrated value is zero, a
    round is accepted only for a strictly positive allocation value.
    """
    bids = _checked_bids(inst, bids)
    group = tuple(sorted(set(sample_group)))
    if any(not 0 <= i < inst.m for i in group):
        raise ValueError("sample group indices out of range")
    rest = tuple(i for i in range(inst.m) if i not in set(group))
    calib = a_max(inst.valuation, inst.budget, inst.units, bids, group)
    target = calib.winner_value
    factor = phi(inst.total_units)
    rounds = sum(inst.units[i] for i in rest)
    for k in range(1, rounds + 1):
        price = inst.budget / k
        posted = tuple(i for i in rest if bids[i] <= price)
        if not posted:
            continue
        posted_set = set(posted)
        costs_k = tuple(
            price if i in posted_set else bids[i] for i in range(inst.m)
        )
        run = a_max(inst.valuation, inst.budget, inst.units, costs_k, posted)
        value = run.winner_value
        # A zero-value allocation never accepts: with a positive target the
        # exact inequality would require a positive value anyway, and with a
        # zero target acceptance is defined as strictly positive value.
        if value <= 0:
            accepted = False
        elif target == 0:
            accepted = True
        else:
            accepted = float(value) >= factor * float(target) - ACCEPT_EPS
        if accepted:
            payments = tuple(x * price for x in run.winner)
            return RandRun(
                group, target, k, price, Outcome(run.winner, payments)
            )
    return RandRun(group, target, None, None, inst.empty_outcome())


def run_m_rand(inst: Instance, bids, sample_group) -> Outcome:
    return m_rand_detail(inst, bids, sample_group).outcome


def group_from_mask(mask: int, m: int) -> tuple:
    """Decode a sample-group bitmask: bit i set means seller i is sampled away."""
    if not 0 <= mask < (1 << m):
        raise ValueError(f"mask {mask:#b} out of range for {m} sellers")
    return tuple(i for i in range(m) if mask >> i & 1)


def mask_from_group(group, m: int) -> int:
    mask = 0
    for i in group:
        mask |= 1 << i
    return mask


def parse_scenario(descriptor: str, m: int):
    """Parse a replay descriptor: ``one:fire``, ``one:skip``, or ``rand:<mask>``."""
    kind, _, arg = descriptor.partition(":")
    if kind == "one" and arg in ("fire", "skip"):
        return ("one", arg)
    if kind == "rand":
        try:
            mask = int(arg, 0)
        except ValueError as exc:
            raise ValueError(f"bad sample-group mask {arg!r}") from exc
        return ("rand", group_from_mask(mask, m))
    raise ValueError(f"unknown scenario descriptor {descriptor!r}")


def run_m_sub(inst: Instance, bids, descriptor: str) -> Outcome:
    """Dispatch one scenario of the 1:1 mix of m_rand and m_one."""
    kind, arg = parse_scenario(descriptor, inst.m)
    if kind == "one":
        return run_m_one(inst, bids, arg)
    return run_m_rand(inst, bids, arg)
