import random

import pytest

from procure.core import Instance, Rat, Seller, utility
from procure.instances import gen_explicit_monotone
from procure.mech_single_item import (
    affordable_count,
    plan_m_one,
    run_m_one,
    single_item_values,
)
from procure.oracles import adversarial_single_seller
from procure.valuations import BoundedKnapsack, ConcaveAdditive

from corpora import m_one_corpus


@pytest.fixture
def tie_blocked():
    # at B/2 the winner's value ties the rival's 7 and loses on index
    return Instance(
        (Seller(3, Rat(1)), Seller(4, Rat(1))),
        Rat(3),
        ConcaveAdditive(
            ((Rat(5), Rat(1), Rat(1)), (Rat(4), Rat(3), Rat(2), Rat(1)))
        ),
    )


def test_plan_example(tie_blocked):
    plan = plan_m_one(tie_blocked)
    assert (plan.winner, plan.count, plan.crossover) == (1, 3, 3)
    assert plan.thresholds == (Rat(1), Rat(1), Rat(1))


def test_plan_harmonic_single_seller():
    inst = adversarial_single_seller(5, 5, 5)  # cost 1 = B/5
    plan = plan_m_one(inst)
    assert (plan.winner, plan.count, plan.crossover) == (0, 5, 1)
    b = inst.budget
    assert plan.thresholds == (b, b / 2, b / 3, b / 4, b / 5)
    fire = run_m_one(inst, None, "fire")
    assert fire.allocation == (5,)
    assert fire.payments[0] == b * Rat(137, 60)


def test_plan_empty_when_unaffordable():
    inst = Instance(
        (Seller(2, Rat(9)), Seller(1, Rat(8))),
        Rat(7),
        BoundedKnapsack((Rat(1), Rat(1))),
    )
    plan = plan_m_one(inst)
    assert plan.count == 0 and plan.thresholds == ()
    assert run_m_one(inst, None, "fire").allocation == (0, 0)


def test_run_m_one_skip(tie_blocked):
    out = run_m_one(tie_blocked, None, "skip")
    assert out.allocation == (0, 0) and out.total_payment == 0
    with pytest.raises(ValueError):
        run_m_one(tie_blocked, None, "nope")


def test_thresholds_non_increasing_and_ir():
    for inst in m_one_corpus()[:80]:
        plan = plan_m_one(inst)
        th = plan.thresholds
        assert all(x >= y for x, y in zip(th, th[1:]))
        c = inst.costs[plan.winner]
        assert all(t >= c for t in th)
        assert plan.total_payment >= plan.count * c


def test_threshold_flip_semantics():
    for inst in m_one_corpus()[:40]:
        plan = plan_m_one(inst)
        if plan.count == 0:
            continue
        bids = list(inst.costs)
        for rank in (1, plan.crossover, plan.count):
            theta = plan.thresholds[rank - 1]
            delta = theta / 10**6
            bids[plan.winner] = theta - delta
            low = plan_m_one(inst, tuple(bids))
            assert low.winner == plan.winner and low.count >= rank
            bids[plan.winner] = theta + delta
            high = plan_m_one(inst, tuple(bids))
            sold = high.count if high.winner == plan.winner else 0
            assert sold < rank
            bids[plan.winner] = inst.costs[plan.winner]


def test_monotone_in_winner_bid():
    rng = random.Random(3)
    for inst in m_one_corpus()[:40]:
        plan = plan_m_one(inst)
        bid = inst.costs[plan.winner]
        if bid == 0:
            continue
        bids = list(inst.costs)
        bids[plan.winner] = bid * Rat(rng.randint(1, 9), 10)
        lower = plan_m_one(inst, tuple(bids))
        assert lower.winner == plan.winner
        assert lower.count >= plan.count


def test_ordering_tie_goes_to_lower_index():
    inst = Instance(
        (Seller(2, Rat(1)), Seller(2, Rat(1))),
        Rat(2),
        BoundedKnapsack((Rat(3), Rat(3))),
    )
    assert plan_m_one(inst).winner == 0


def test_zero_cost_winner():
    inst = Instance(
        (Seller(3, Rat(0)),), Rat(2), BoundedKnapsack((Rat(1),))
    )
    plan = plan_m_one(inst)
    assert (plan.winner, plan.count) == (0, 3)
    assert plan.total_payment >= 0
    assert utility(run_m_one(inst, None, "fire"), inst.costs, 0) >= 0


class _PerItemMonotone:
    """Monotone along each item's axis but not globally monotone."""

    def __init__(self):
        b = {
            (0, 0): Rat(0),
            (1, 0): Rat(6),
            (2, 0): Rat(8),
            (0, 1): Rat(5),
            (1, 1): Rat(4),  # mixing items destroys value
            (2, 1): Rat(5),
        }
        self.table = b

    def check_units(self, units):
        assert units == (2, 1)

    def value(self, alloc):
        return self.table[tuple(alloc)]


def test_plan_needs_only_per_item_monotonicity():
    inst = Instance(
        (Seller(2, Rat(1)), Seller(1, Rat(1))),
        Rat(2),
        _PerItemMonotone(),
    )
    plan = plan_m_one(inst)
    assert (plan.winner, plan.count) == (0, 2)
    values = single_item_values(inst)
    assert values == (Rat(8), Rat(5))
    out = run_m_one(inst, None, "fire")
    assert out.allocation == (2, 0)
    # posted thresholds stay a dominant strategy on a bid grid
    truth_u = utility(out, inst.costs, 0)
    for dev in (Rat(1, 2), Rat(3, 2), Rat(2), Rat(3)):
        dev_out = run_m_one(inst, (dev, Rat(1)), "fire")
        assert utility(dev_out, inst.costs, 0) <= truth_u


def test_affordable_count_floor():
    inst = Instance(
        (Seller(5, Rat(3)),), Rat(10), BoundedKnapsack((Rat(1),))
    )
    assert affordable_count(inst, 0, Rat(3)) == 3
    assert affordable_count(inst, 0, Rat(0)) == 5
    assert affordable_count(inst, 0, Rat(11)) == 0


def test_explicit_nonconcave_corpus_members_work():
    inst = gen_explicit_monotone(123)
    plan = plan_m_one(inst)
    assert 0 <= plan.count <= inst.units[plan.winner]
