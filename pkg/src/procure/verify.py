"""Scenario enumeration, exact expectations, and the property harness.

Every mechanism here is a lottery over deterministic branches, so exact
expectations come from enumerating the branch space (3 branches for the
additive lotteries, 2 for the single-item one, 2^m sample groups for the
random-sampling one, and the 1:1 product mix).  Per-branch payments and
values stay rational; only the probability weighting is floating point.

The harness checks dominant-strategy truthfulness on deviation grids built
from the allocation rules' breakpoints, individual rationality, per-branch
and expected budget feasibility, and measured approximation ratios against
the exact optimum oracle.  Every failure carries a replayable witness.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from math import log

from . import mech_additive, mech_single_item, mech_subadditive
from .core import (
    Instance,
    Outcome,
    Rat,
    SearchSpaceTooLarge,
    format_rat,
    unit_vector,
    utility,
)
from .mech_subadditive import group_from_mask, phi
from .oracles import optimal_allocation
from .valuations import BoundedKnapsack, ConcaveAdditive, Symmetric

MECHANISM_IDS = ("m_add", "m_sym", "m_one", "m_rand", "m_sub")
# Deliberately non-truthful fixture (pay-as-bid on the greedy rule); it
# exists so the test suite can prove the DST checker catches violations.
FIXTURE_IDS = ("m_add_firstprice",)

GROUP_ENUM_MAX_SELLERS = 16
BUDGET_SLACK = 1e-9
PROBABILITY_SLACK = 1e-9


@dataclass(frozen=True)
class Scenario:
    """One deterministic branch of a mechanism and its probability."""

    mechanism: str
    branch: str
    probability: float


@dataclass(frozen=True)
class Check:
    """A named pass/fail verdict; failures carry a replayable witness."""

    name: str
    passed: bool
    witness: dict | None = None


def mechanism_applicable(mech: str, inst: Instance) -> str | None:
    """None when the mechanism can run on the instance, else the reason."""
    v = inst.valuation
    if mech in ("m_add", "m_add_firstprice") and not isinstance(
        v, (BoundedKnapsack, ConcaveAdditive)
    ):
        return "requires a concave additive or bounded-knapsack valuation"
    if mech == "m_sym" and not isinstance(v, Symmetric):
        return "requires a symmetric valuation"
    if mech in ("m_rand", "m_sub") and inst.m > GROUP_ENUM_MAX_SELLERS:
        return f"sample-group enumeration needs m <= {GROUP_ENUM_MAX_SELLERS}"
    return None


def enumerate_scenarios(mech: str, inst: Instance) -> list:
    """Exhaustive branch list with probabilities summing to 1."""
    n = inst.total_units
    if mech in ("m_add", "m_sym", "m_add_firstprice"):
        lot = mech_additive.lottery(inst)
        return [
            Scenario(mech, "greedy", lot.p_greedy),
            Scenario(mech, "star", lot.p_star),
            Scenario(mech, "bot", lot.p_bot),
        ]
    if mech == "m_one":
        p = 1.0 / (1.0 + log(n))
        return [Scenario(mech, "fire", p), Scenario(mech, "skip", 1.0 - p)]
    if mech == "m_rand":
        if inst.m > GROUP_ENUM_MAX_SELLERS:
            raise SearchSpaceTooLarge(
                f"2^{inst.m} sample groups exceed the enumeration guard"
            )
        p = 0.5**inst.m
        return [
            Scenario(mech, f"rand:{mask:#b}", p) for mask in range(1 << inst.m)
        ]
    if mech == "m_sub":
        inner = enumerate_scenarios("m_rand", inst)
        p_fire = 1.0 / (1.0 + log(n))
        return (
            [
                Scenario(mech, "one:fire", 0.5 * p_fire),
                Scenario(mech, "one:skip", 0.5 * (1.0 - p_fire)),
            ]
            + [Scenario(mech, s.branch, 0.5 * s.probability) for s in inner]
        )
    raise ValueError(f"unknown mechanism {mech!r}")


def _run_firstprice(inst: Instance, bids, branch: str) -> Outcome:
    bids = inst.costs if bids is None else tuple(Rat(b) for b in bids)
    if branch == "greedy":
        alloc = mech_additive.greedy_allocate(inst, bids)
        return Outcome(alloc, tuple(a * b for a, b in zip(alloc, bids)))
    return mech_additive.run_m_add(inst, bids, branch)


def run_scenario(mech: str, inst: Instance, bids, branch: str) -> Outcome:
    if mech == "m_add":
        return mech_additive.run_m_add(inst, bids, branch)
    if mech == "m_sym":
        return mech_additive.run_m_sym(inst, bids, branch)
    if mech == "m_one":
        return mech_single_item.run_m_one(inst, bids, branch)
    if mech == "m_rand":
        kind, group = mech_subadditive.parse_scenario(branch, inst.m)
        if kind != "rand":
            raise ValueError(f"bad m_rand scenario {branch!r}")
        return mech_subadditive.run_m_rand(inst, bids, group)
    if mech == "m_sub":
        return mech_subadditive.run_m_sub(inst, bids, branch)
    if mech == "m_add_firstprice":
        return _run_firstprice(inst, bids, branch)
    raise ValueError(f"unknown mechanism {mech!r}")


def scenario_outcomes(mech: str, inst: Instance, bids=None):
    bids = inst.costs if bids is None else tuple(Rat(b) for b in bids)
    return [
        (s, run_scenario(mech, inst, bids, s.branch))
        for s in enumerate_scenarios(mech, inst)
    ]


def expected_value(mech: str, inst: Instance, bids=None) -> float:
    return sum(
        s.probability * float(inst.value(out.allocation))
        for s, out in scenario_outcomes(mech, inst, bids)
    )


def expected_payment(mech: str, inst: Instance, bids=None) -> float:
    return sum(
        s.probability * float(out.total_payment)
        for s, out in scenario_outcomes(mech, inst, bids)
    )


def deviation_breakpoints(mech: str, inst: Instance, bids, seller: int):
    """Bids at which the allocation rule can change for this seller.

    Utility is piecewise constant between breakpoints, so straddling each
    one catches every allocation change a uniform grid could miss.
    """
    budget = inst.budget
    points = {budget / rank for rank in range(1, inst.total_units + 1)}
    if mech in ("m_add", "m_add_firstprice"):
        pairs = mech_additive.ranked_pairs(inst, bids)
        own = [p for p in pairs if p.seller == seller]
        rest = [p for p in pairs if p.seller != seller]
        for po in own:
            for pr in rest:
                points.add(po.value * pr.bid / pr.value)
        alloc = mech_additive.greedy_allocate(inst, bids)
        for j in range(1, alloc[seller] + 1):
            points.add(mech_additive.threshold(inst, seller, j, bids))
    elif mech == "m_sym":
        points |= {b for i, b in enumerate(bids) if i != seller}
        alloc = mech_additive.sym_allocate(inst, bids)
        for j in range(1, alloc[seller] + 1):
            points.add(mech_additive.sym_threshold(inst, seller, j, bids))
    return points


def deviation_grid(mech, inst, bids, seller, resolution: int = 64):
    """Deviation bids: the truthful bid, breakpoints straddled by one
    millionth, and a uniform grid on (0, B]."""
    grid = {bids[seller]}
    for bp in deviation_breakpoints(mech, inst, bids, seller):
        if bp > 0:
            delta = bp / 10**6
            grid |= {bp - delta, bp, bp + delta}
    grid |= {
        inst.budget * t / resolution for t in range(1, resolution + 1)
    }
    return sorted(grid)


def check_dst(
    mech: str,
    inst: Instance,
    resolution: int = 64,
    strict: bool = False,
    runner=None,
) -> list:
    """Per-scenario, per-seller truthfulness on the deviation grid.

    Compares exact utilities; any strictly profitable deviation fails the
    check and is recorded with a replayable witness.  Opponents bid
    truthfully; ``strict`` additionally sweeps opponent bid grids on
    instances with at most two sellers.
    """
    runner = runner or run_scenario
    costs = inst.costs
    checks = []
    for scen in enumerate_scenarios(mech, inst):
        truth_out = runner(mech, inst, costs, scen.branch)
        for i in range(inst.m):
            u_true = utility(truth_out, costs, i)
            witness = None
            for dev in deviation_grid(mech, inst, costs, i, resolution):
                if dev == costs[i]:
                    continue
                profile = costs[:i] + (dev,) + costs[i + 1 :]
                u_dev = utility(runner(mech, inst, profile, scen.branch), costs, i)
                if u_dev > u_true:
                    witness = _witness(scen, i, costs, dev, u_true, u_dev)
                    break
            checks.append(
                Check(f"dst:{scen.branch}:seller{i}", witness is None, witness)
            )
    if strict and inst.m <= 2:
        checks.extend(_check_dst_strict(mech, inst, resolution, runner))
    return checks


def _witness(scen, seller, bids, deviation, u_true, u_dev) -> dict:
    return {
        "scenario": scen.branch,
        "seller": seller,
        "bids": [format_rat(b) for b in bids],
        "deviation": format_rat(deviation),
        "u_true": format_rat(u_true),
        "u_dev": format_rat(u_dev),
    }


def _check_dst_strict(mech, inst, resolution, runner) -> list:
    # Approximate the full dominant-strategy quantifier on tiny instances:
    # opponents range over their own (truth-anchored) deviation grids.
    costs = inst.costs
    checks = []
    opp_grids = [
        deviation_grid(mech, inst, costs, i, max(8, resolution // 8))
        for i in range(inst.m)
    ]
    for scen in enumerate_scenarios(mech, inst):
        for i in range(inst.m):
            others = [j for j in range(inst.m) if j != i]
            witness = None
            for opp_bids in itertools.product(*(opp_grids[j] for j in others)):
                base = list(costs)
                for j, b in zip(others, opp_bids):
                    base[j] = b
                base[i] = costs[i]
                u_true = utility(
                    runner(mech, inst, tuple(base), scen.branch), costs, i
                )
                for dev in opp_grids[i]:
                    if dev == costs[i]:
                        continue
                    base[i] = dev
                    u_dev = utility(
                        runner(mech, inst, tuple(base), scen.branch), costs, i
                    )
                    base[i] = costs[i]
                    if u_dev > u_true:
                        witness = _witness(
                            scen, i, tuple(base), dev, u_true, u_dev
                        )
                        break
                if witness:
                    break
            checks.append(
                Check(
                    f"dst-strict:{scen.branch}:seller{i}",
                    witness is None,
                    witness,
                )
            )
    return checks


def check_ir(mech: str, inst: Instance) -> list:
    """Individual rationality under truthful bids, per scenario, exact."""
    costs = inst.costs
    checks = []
    for scen, out in scenario_outcomes(mech, inst):
        witness = None
        for i in range(inst.m):
            u = utility(out, costs, i)
            if u < 0:
                witness = {
                    "scenario": scen.branch,
                    "seller": i,
                    "utility": format_rat(u),
                }
                break
        checks.append(Check(f"ir:{scen.branch}", witness is None, witness))
    return checks


def check_budget(mech: str, inst: Instance) -> list:
    """Per-branch payment bounds plus the expected-payment budget test."""
    budget = inst.budget
    harmonic_cap = (1.0 + log(inst.total_units)) * float(budget)
    checks = []
    expected = 0.0
    for scen, out in scenario_outcomes(mech, inst):
        total = out.total_payment
        expected += scen.probability * float(total)
        branch = scen.branch
        if branch in ("bot", "skip", "one:skip"):
            ok = total == 0
        elif branch == "star":
            ok = total == budget
        elif branch in ("greedy", "fire", "one:fire"):
            ok = float(total) <= harmonic_cap + BUDGET_SLACK
        else:  # posted-price rounds pay at most B exactly
            ok = total <= budget
        checks.append(
            Check(
                f"budget:{branch}",
                ok,
                None
                if ok
                else {"scenario": branch, "total_payment": format_rat(total)},
            )
        )
    checks.append(
        Check(
            "budget:expected",
            expected <= float(budget) + BUDGET_SLACK,
            None
            if expected <= float(budget) + BUDGET_SLACK
            else {"expected_payment": expected},
        )
    )
    return checks


@dataclass(frozen=True)
class RatioReport:
    """Measured approximation ratio against the relevant benchmark."""

    mechanism: str
    benchmark: str
    expected_value: float
    optimum: object
    ratio: float
    bound: float | None


def measure_ratio(mech: str, inst: Instance) -> RatioReport:
    """Exact-expectation ratio; the bound is asserted only where proven."""
    n = inst.total_units
    ev = expected_value(mech, inst)
    if mech == "m_one":
        plan = mech_single_item.plan_m_one(inst)
        opt = inst.value(unit_vector(inst.m, plan.winner, plan.count))
        benchmark = "single-item-optimum"
        bound = 1.0 + log(n)
    else:
        opt = optimal_allocation(inst)[1]
        benchmark = "budget-optimum"
        bound = (
            4.0 * (1.0 + log(n)) if mech in ("m_add", "m_sym") else None
        )
    if ev > 0:
        ratio = float(opt) / ev
    else:
        ratio = 0.0 if opt == 0 else float("inf")
    return RatioReport(mech, benchmark, ev, opt, ratio, bound)


@dataclass(frozen=True)
class GreedyStep:
    """One step of the marginal value-rate greedy: state, marginals, pick."""

    before: tuple
    marginals: tuple
    chosen: int
    after: tuple


def greedy_marginal(inst: Instance, bids=None) -> list:
    """Marginal value-rate greedy trace (value-oracle only).

    Repeatedly buys one unit of the affordable, uncapped item with the
    highest marginal value per unit of bid (rate ties go to the lowest
    index) until nothing affordable remains.  Not monotone in bids; the
    regression suite pins the canonical counterexample.
    """
    bids = inst.costs if bids is None else tuple(Rat(b) for b in bids)
    units = inst.units
    alloc = (0,) * inst.m
    remaining = inst.budget
    steps = []
    while True:
        marginals = []
        base = inst.value(alloc)
        for i in range(inst.m):
            if alloc[i] >= units[i]:
                marginals.append(Rat(0))
            else:
                bumped = alloc[:i] + (alloc[i] + 1,) + alloc[i + 1 :]
                marginals.append(inst.value(bumped) - base)
        afford = [
            i
            for i in range(inst.m)
            if alloc[i] < units[i] and bids[i] <= remaining
        ]
        if not afford:
            break
        best = afford[0]
        for i in afford[1:]:
            # rate comparison marg/bid done by cross-multiplication
            if marginals[i] * bids[best] > marginals[best] * bids[i]:
                best = i
        after = alloc[:best] + (alloc[best] + 1,) + alloc[best + 1 :]
        steps.append(GreedyStep(alloc, tuple(marginals), best, after))
        alloc = after
        remaining -= bids[best]
    return steps


def partition_success_frequency(inst: Instance):
    """Exact fraction of sample groups where the kept half dominates.

    Counts groups T with opt(complement) >= opt(T) >= opt/8, over all 2^m
    equiprobable groups; returned as an exact rational.
    """
    if inst.m > GROUP_ENUM_MAX_SELLERS:
        raise SearchSpaceTooLarge("too many sellers for group enumeration")
    opt = optimal_allocation(inst)[1]
    hits = 0
    for mask in range(1 << inst.m):
        group = group_from_mask(mask, inst.m)
        rest = tuple(i for i in range(inst.m) if i not in set(group))
        v_group = optimal_allocation(inst, members=group)[1]
        v_rest = optimal_allocation(inst, members=rest)[1]
        if v_rest >= v_group and 8 * v_group >= opt:
            hits += 1
    return Rat(hits, 1 << inst.m)


def partition_chain_records(inst: Instance):
    """Per-group record of the two-stage sampling argument.

    For every sample group: whether the dominance event holds (kept half's
    optimum at least the sampled half's, itself at least opt/8), and whether
    the realized value plus the single-item benchmark clears the acceptance
    factor times the calibrated value.  The second flag is what makes the
    whole mechanism's expectation chain go through when the first holds.
    """
    from .mech_subadditive import m_rand_detail

    if inst.m > GROUP_ENUM_MAX_SELLERS:
        raise SearchSpaceTooLarge("too many sellers for group enumeration")
    opt = optimal_allocation(inst)[1]
    plan = mech_single_item.plan_m_one(inst)
    single = inst.value(unit_vector(inst.m, plan.winner, plan.count))
    factor = phi(inst.total_units)
    records = []
    for mask in range(1 << inst.m):
        group = group_from_mask(mask, inst.m)
        rest = tuple(i for i in range(inst.m) if i not in set(group))
        v_group = optimal_allocation(inst, members=group)[1]
        v_rest = optimal_allocation(inst, members=rest)[1]
        event = v_rest >= v_group and 8 * v_group >= opt
        detail = m_rand_detail(inst, None, group)
        realized = inst.value(detail.outcome.allocation)
        chain_ok = (
            float(realized + single)
            >= factor * float(detail.sample_value) - BUDGET_SLACK
        )
        records.append((event, chain_ok))
    return records


@dataclass
class Report:
    """All verdicts for one (instance, mechanism) pair."""

    instance_digest: str
    mechanism: str
    checks: list
    ratio: RatioReport | None = None
    notes: dict | None = None

    @property
    def pass_count(self) -> int:
        return sum(1 for c in self.checks if c.passed)

    @property
    def fail_count(self) -> int:
        return sum(1 for c in self.checks if not c.passed)

    def json_lines(self) -> list:
        lines = [
            json.dumps(
                {
                    "instance": self.instance_digest,
                    "mechanism": self.mechanism,
                    "check": c.name,
                    "pass": c.passed,
                    "witness": c.witness,
                },
                sort_keys=True,
            )
            for c in self.checks
        ]
        summary = {
            "instance": self.instance_digest,
            "mechanism": self.mechanism,
            "check": "measured",
            "pass": self.fail_count == 0,
        }
        if self.ratio is not None:
            summary.update(
                expected_value=self.ratio.expected_value,
                optimum=format_rat(self.ratio.optimum),
                ratio=self.ratio.ratio,
                bound=self.ratio.bound,
                benchmark=self.ratio.benchmark,
            )
        if self.notes:
            summary["notes"] = self.notes
        lines.append(json.dumps(summary, sort_keys=True))
        return lines

    def csv_row(self) -> list:
        ratio = self.ratio.ratio if self.ratio else ""
        bound = (
            self.ratio.bound
            if self.ratio and self.ratio.bound is not None
            else ""
        )
        return [
            self.instance_digest,
            self.mechanism,
            ratio,
            bound,
            self.pass_count,
            self.fail_count,
        ]


CSV_HEADER = ["instance", "mechanism", "ratio", "bound", "pass_count", "fail_count"]


def verify_instance(
    inst: Instance,
    mechanisms,
    resolution: int = 64,
    strict: bool = False,
    digest: str = "",
) -> list:
    """Run the full check battery for each applicable mechanism."""
    reports = []
    for mech in mechanisms:
        reason = mechanism_applicable(mech, inst)
        notes = {}
        if mech in ("m_rand", "m_sub"):
            notes["phi"] = phi(inst.total_units)
            notes["phi_guard_active"] = inst.total_units < 4
        if reason is not None:
            reports.append(
                Report(digest, mech, [], None, {"skipped": reason})
            )
            continue
        try:
            checks = (
                check_dst(mech, inst, resolution, strict)
                + check_ir(mech, inst)
                + check_budget(mech, inst)
            )
            ratio = measure_ratio(mech, inst)
        except SearchSpaceTooLarge as exc:
            reports.append(
                Report(digest, mech, [], None, {"skipped": str(exc)})
            )
            continue
        reports.append(Report(digest, mech, checks, ratio, notes or None))
    return reports


def replay_witness(mech: str, inst: Instance, witness: dict) -> bool:
    """Re-run a DST witness; True iff it reproduces the recorded violation."""
    from .core import parse_rat

    bids = tuple(parse_rat(b) for b in witness["bids"])
    seller = witness["seller"]
    branch = witness["scenario"]
    dev = parse_rat(witness["deviation"])
    u_true = utility(run_scenario(mech, inst, bids, branch), inst.costs, seller)
    profile = bids[:seller] + (dev,) + bids[seller + 1 :]
    u_dev = utility(run_scenario(mech, inst, profile, branch), inst.costs, seller)
    return (
        u_dev > u_true
        and format_rat(u_true) == witness["u_true"]
        and format_rat(u_dev) == witness["u_dev"]
    )
