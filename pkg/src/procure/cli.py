"""Command-line interface: run mechanisms, verify properties, generate
instances, and sweep measured ratios into CSV."""

from __future__ import annotations

import csv
import json
import os
import random
import sys
from math import log

import click

from .core import ProcurementError, format_rat
from .instances import (
    gen_bounded_knapsack,
    gen_concave_additive,
    gen_explicit_subadditive,
    gen_symmetric,
    instance_digest,
    load_instance,
    save_instance,
    serialize_instance,
)
from .mech_subadditive import phi
from .oracles import adversarial_single_seller, optimal_allocation
from .verify import (
    CSV_HEADER,
    FIXTURE_IDS,
    MECHANISM_IDS,
    enumerate_scenarios,
    expected_value,
    run_scenario,
    verify_instance,
)

ALL_IDS = MECHANISM_IDS + FIXTURE_IDS


def sample_scenario(mech: str, inst, seed: int) -> str:
    """Deterministically sample a branch descriptor from the seed.

    Draw order (documented for replay): additive lotteries take one
    uniform draw against (p_greedy, p_star); the single-item mechanism one
    draw against p_fire; the sampling mechanism m bits; the mix one draw
    for the 1:2 coin, then the sub-draw.
    """
    rng = random.Random(seed)
    if mech in ("m_add", "m_sym", "m_add_firstprice"):
        scens = enumerate_scenarios(mech, inst)
        r = rng.random()
        acc = 0.0
        for s in scens:
            acc += s.probability
            if r < acc:
                return s.branch
        return scens[-1].branch
    if mech == "m_one":
        p = 1.0 / (1.0 + log(inst.total_units))
        return "fire" if rng.random() < p else "skip"
    if mech == "m_rand":
        return f"rand:{rng.getrandbits(inst.m):#b}"
    if mech == "m_sub":
        if rng.random() < 0.5:
            return f"rand:{rng.getrandbits(inst.m):#b}"
        p = 1.0 / (1.0 + log(inst.total_units))
        return "one:fire" if rng.random() < p else "one:skip"
    raise click.UsageError(f"unknown mechanism {mech}")


@click.group()
def main():
    """Budget-feasible multi-unit procurement mechanisms."""


@main.command("run")
@click.argument("instance_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--mechanism", "-m", required=True, type=click.Choice(ALL_IDS))
@click.option("--scenario", default=None, help="Replay a fixed branch descriptor.")
@click.option("--seed", default=0, show_default=True, type=int)
def cmd_run(instance_path, mechanism, scenario, seed):
    """Run one (sampled or replayed) realization and print the outcome."""
    try:
        inst, bids = load_instance(instance_path)
        branch = scenario or sample_scenario(mechanism, inst, seed)
        outcome = run_scenario(mechanism, inst, bids, branch)
    except ProcurementError as exc:
        raise click.ClickException(str(exc))
    click.echo(
        json.dumps(
            {
                "instance": instance_digest(inst),
                "mechanism": mechanism,
                "scenario": branch,
                "allocation": list(outcome.allocation),
                "payments": [format_rat(p) for p in outcome.payments],
                "value": format_rat(inst.value(outcome.allocation)),
                "total_payment": format_rat(outcome.total_payment),
                "budget_feasible": outcome.total_payment <= inst.budget,
            },
            indent=2,
        )
    )


_GENERATORS = {
    "concave-additive": gen_concave_additive,
    "bounded-knapsack": gen_bounded_knapsack,
    "symmetric": gen_symmetric,
    "explicit-subadditive": gen_explicit_subadditive,
}


def _verify_targets(specs):
    """Yield instances from file paths or gen:<family>:<count>:<seed> specs."""
    for spec in specs:
        if spec.startswith("gen:"):
            try:
                _, family, count, seed = spec.split(":")
                generator = _GENERATORS[family]
                count, seed = int(count), int(seed)
            except (ValueError, KeyError):
                raise click.UsageError(
                    f"bad generator spec {spec!r}; use "
                    "gen:<family>:<count>:<first-seed>"
                )
            for s in range(seed, seed + count):
                yield generator(s)
        else:
            try:
                inst, _ = load_instance(spec)
            except (ProcurementError, OSError) as exc:
                raise click.ClickException(f"{spec}: {exc}")
            yield inst


@main.command("verify")
@click.argument("targets", nargs=-1, required=True)
@click.option(
    "--mechanism",
    "mechanisms",
    multiple=True,
    type=click.Choice(ALL_IDS),
    help="Mechanisms to check (default: all five).",
)
@click.option("--grid", default=64, show_default=True, help="Uniform deviation grid size.")
@click.option("--strict", is_flag=True, help="Sweep opponent bids on tiny instances.")
@click.option("--out", type=click.Path(file_okay=False), default=None)
def cmd_verify(targets, mechanisms, grid, strict, out):
    """Check truthfulness, IR, budget bounds, and ratios; exit 0 iff clean.

    TARGETS are instance files or seeded batches written as
    gen:<family>:<count>:<first-seed>.
    """
    mechanisms = mechanisms or MECHANISM_IDS
    reports = []
    for inst in _verify_targets(targets):
        digest = instance_digest(inst)
        reports.extend(
            verify_instance(inst, mechanisms, grid, strict, digest=digest)
        )
    failures = 0
    for rep in reports:
        status = "skip" if rep.notes and "skipped" in rep.notes else (
            "ok" if rep.fail_count == 0 else "FAIL"
        )
        ratio = f" ratio={rep.ratio.ratio:.4g}" if rep.ratio else ""
        click.echo(
            f"{rep.instance_digest} {rep.mechanism}: {status} "
            f"pass={rep.pass_count} fail={rep.fail_count}{ratio}"
        )
        failures += rep.fail_count
    if out:
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, "reports.jsonl"), "w") as fh:
            for rep in reports:
                fh.write("\n".join(rep.json_lines()) + "\n")
        with open(os.path.join(out, "summary.csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_HEADER)
            for rep in reports:
                writer.writerow(rep.csv_row())
    sys.exit(0 if failures == 0 else 1)


FAMILIES = (
    "concave-additive",
    "bounded-knapsack",
    "symmetric",
    "explicit-subadditive",
    "adversarial",
)


@main.command("generate")
@click.option("--family", required=True, type=click.Choice(FAMILIES))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--sellers", default=3, show_default=True, type=int)
@click.option("--n", default=8, show_default=True, type=int, help="Adversarial: total units.")
@click.option("--k", default=None, type=int, help="Adversarial: cost = budget/k (default n).")
@click.option("--budget", default=None, help="Adversarial: budget as p/q (default n).")
@click.option("--out", "-o", type=click.Path(dir_okay=False), default=None)
def cmd_generate(family, seed, sellers, n, k, budget, out):
    """Generate a seeded instance file (stdout unless --out)."""
    try:
        if family == "concave-additive":
            inst = gen_concave_additive(seed, max_sellers=sellers)
        elif family == "bounded-knapsack":
            inst = gen_bounded_knapsack(seed, max_sellers=sellers)
        elif family == "symmetric":
            inst = gen_symmetric(seed, max_sellers=sellers)
        elif family == "explicit-subadditive":
            inst = gen_explicit_subadditive(seed, max_items=sellers)
        else:
            from .core import parse_rat

            inst = adversarial_single_seller(
                n, parse_rat(budget) if budget else n, k if k is not None else n
            )
    except (ProcurementError, ValueError) as exc:
        raise click.ClickException(str(exc))
    if out:
        save_instance(out, inst)
        click.echo(f"wrote {out} ({instance_digest(inst)})")
    else:
        click.echo(serialize_instance(inst), nl=False)


@main.command("ratio-sweep")
@click.option("--n-min", default=4, show_default=True, type=int)
@click.option("--n-max", default=64, show_default=True, type=int)
@click.option(
    "--mechanism",
    "mechanisms",
    multiple=True,
    type=click.Choice(("m_add", "m_sub")),
    help="Default: both.",
)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def cmd_ratio_sweep(n_min, n_max, mechanisms, out):
    """Measured ratio vs n on the single-seller worst-case family (k = n)."""
    mechanisms = mechanisms or ("m_add", "m_sub")
    rows = []
    for n in range(n_min, n_max + 1):
        inst = adversarial_single_seller(n, n, n)
        opt = optimal_allocation(inst)[1]
        for mech in mechanisms:
            ev = expected_value(mech, inst)
            ratio = float(opt) / ev if ev > 0 else float("inf")
            rows.append(
                [
                    n,
                    mech,
                    ev,
                    format_rat(opt),
                    ratio,
                    4.0 * (1.0 + log(n)),
                    phi(n),
                ]
            )
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["n", "mechanism", "expected_value", "optimum", "ratio",
             "greedy_lottery_bound", "acceptance_factor"]
        )
        writer.writerows(rows)
    click.echo(f"wrote {out} ({len(rows)} rows)")


if __name__ == "__main__":
    main()
