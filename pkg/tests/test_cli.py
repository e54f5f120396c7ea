import csv
import json
import os

import pytest
from click.testing import CliRunner

from procure.cli import main
from procure.instances import (
    load_instance,
    parse_instance,
    save_instance,
    serialize_instance,
    gen_concave_additive,
    greedy_nonmonotone_instance,
)
from procure.mech_subadditive import run_m_rand


@pytest.fixture
def runner():
    return CliRunner()


def _generate(runner, tmp_path, name, *args):
    path = tmp_path / name
    result = runner.invoke(main, ["generate", "--out", str(path), *args])
    assert result.exit_code == 0, result.output
    return path


def test_generate_deterministic(runner, tmp_path):
    a = _generate(runner, tmp_path, "a.json", "--family", "concave-additive", "--seed", "7")
    b = _generate(runner, tmp_path, "b.json", "--family", "concave-additive", "--seed", "7")
    assert a.read_bytes() == b.read_bytes()
    c = _generate(runner, tmp_path, "c.json", "--family", "concave-additive", "--seed", "8")
    assert a.read_bytes() != c.read_bytes()


def test_generate_adversarial(runner, tmp_path):
    path = _generate(
        runner, tmp_path, "adv.json", "--family", "adversarial",
        "--n", "8", "--k", "8", "--budget", "8",
    )
    inst, _ = load_instance(path)
    assert inst.costs == (1,)
    assert inst.total_units == 8


def test_generate_explicit_subadditive(runner, tmp_path):
    from procure.valuations import classify

    path = _generate(
        runner, tmp_path, "sub.json", "--family", "explicit-subadditive",
        "--seed", "1",
    )
    inst, _ = load_instance(path)
    assert "subadditive" in classify(inst.valuation, inst.units)


def test_instance_file_round_trip(tmp_path):
    from procure.instances import gen_bounded_knapsack, gen_symmetric

    cases = [gen_concave_additive(s) for s in (1, 2, 3)]
    cases += [gen_bounded_knapsack(4), gen_symmetric(5)]
    for inst in cases:
        text = serialize_instance(inst)
        parsed, bids = parse_instance(text)
        assert bids is None
        assert serialize_instance(parsed) == text


def test_instance_file_round_trip_explicit():
    inst = greedy_nonmonotone_instance()
    text = serialize_instance(inst, bids=inst.costs)
    parsed, bids = parse_instance(text)
    assert bids == inst.costs
    assert serialize_instance(parsed, bids) == text


def test_parse_errors_name_path():
    from procure.instances import InstanceFormatError

    with pytest.raises(InstanceFormatError, match=r"\$\.budget"):
        parse_instance(json.dumps({"version": "1", "budget": "x",
                                   "sellers": [], "valuation": {}}))
    with pytest.raises(InstanceFormatError, match=r"sellers\[0\]"):
        parse_instance(json.dumps({
            "version": "1", "budget": "4",
            "sellers": [{"units": "two", "cost": "1"}],
            "valuation": {"type": "bounded_knapsack", "values": ["1"]},
        }))
    with pytest.raises(InstanceFormatError, match="version"):
        parse_instance(json.dumps({"version": "9", "budget": "4",
                                   "sellers": [], "valuation": {}}))


def test_run_replay_matches_library(runner, tmp_path):
    inst = greedy_nonmonotone_instance()
    path = tmp_path / "ex.json"
    save_instance(path, inst)
    result = runner.invoke(
        main,
        ["run", str(path), "--mechanism", "m_rand", "--scenario", "rand:0b101"],
    )
    assert result.exit_code == 0, result.output
    payload = json.loads(result.output)
    direct = run_m_rand(inst, None, (0, 2))
    assert tuple(payload["allocation"]) == direct.allocation
    assert payload["scenario"] == "rand:0b101"
    assert payload["budget_feasible"] is True


def test_run_sampled_scenario_deterministic(runner, tmp_path):
    inst = gen_concave_additive(21)
    path = tmp_path / "c.json"
    save_instance(path, inst)
    outs = [
        runner.invoke(
            main, ["run", str(path), "--mechanism", "m_add", "--seed", "5"]
        ).output
        for _ in range(2)
    ]
    assert outs[0] == outs[1]


def test_run_star_scenario_buys_top_first_margin(runner, tmp_path):
    from procure.mech_additive import star_seller

    inst = gen_concave_additive(44)
    path = tmp_path / "c.json"
    save_instance(path, inst)
    result = runner.invoke(
        main, ["run", str(path), "--mechanism", "m_add", "--scenario", "star"]
    )
    payload = json.loads(result.output)
    star = star_seller(inst)
    expect = [1 if i == star else 0 for i in range(inst.m)]
    assert payload["allocation"] == expect
    assert payload["payments"][star] == str(inst.budget)


def test_verify_m_sub_on_explicit_table(runner, tmp_path):
    from procure.instances import gen_explicit_subadditive

    inst = gen_explicit_subadditive(51)
    path = tmp_path / "sub.json"
    save_instance(path, inst)
    result = runner.invoke(
        main,
        ["verify", str(path), "--mechanism", "m_sub", "--grid", "8"],
    )
    assert result.exit_code == 0, result.output
    assert "m_sub: ok" in result.output


def test_run_m_sub_skip(runner, tmp_path):
    inst = gen_concave_additive(22)
    path = tmp_path / "c.json"
    save_instance(path, inst)
    result = runner.invoke(
        main,
        ["run", str(path), "--mechanism", "m_sub", "--scenario", "one:skip"],
    )
    payload = json.loads(result.output)
    assert payload["total_payment"] == "0"
    assert all(a == 0 for a in payload["allocation"])


def test_verify_exit_codes(runner, tmp_path):
    inst = gen_concave_additive(31, max_sellers=2, max_total_units=4)
    path = tmp_path / "ok.json"
    save_instance(path, inst)
    good = runner.invoke(
        main,
        ["verify", str(path), "--mechanism", "m_add", "--grid", "16",
         "--out", str(tmp_path / "rep")],
    )
    assert good.exit_code == 0, good.output
    assert (tmp_path / "rep" / "reports.jsonl").exists()
    with open(tmp_path / "rep" / "summary.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["instance", "mechanism", "ratio", "bound",
                       "pass_count", "fail_count"]
    assert len(rows) == 2

    broken = runner.invoke(
        main,
        ["verify", str(path), "--mechanism", "m_add_firstprice", "--grid", "16"],
    )
    assert broken.exit_code == 1


def test_verify_generator_spec(runner):
    result = runner.invoke(
        main,
        ["verify", "gen:concave-additive:6:1000", "--mechanism", "m_add",
         "--grid", "16"],
    )
    assert result.exit_code == 0, result.output
    assert result.output.count("m_add: ok") == 6
    bad = runner.invoke(main, ["verify", "gen:nope:2:0"])
    assert bad.exit_code != 0


def test_verify_skips_inapplicable(runner, tmp_path):
    inst = gen_concave_additive(33, max_sellers=2, max_total_units=4)
    path = tmp_path / "c.json"
    save_instance(path, inst)
    result = runner.invoke(
        main, ["verify", str(path), "--mechanism", "m_sym", "--grid", "8"]
    )
    assert result.exit_code == 0
    assert "skip" in result.output


def test_ratio_sweep(runner, tmp_path):
    out = tmp_path / "sweep.csv"
    result = runner.invoke(
        main, ["ratio-sweep", "--n-min", "4", "--n-max", "8", "--out", str(out)]
    )
    assert result.exit_code == 0, result.output
    with open(out) as fh:
        rows = list(csv.reader(fh))
    assert rows[0][0] == "n"
    assert len(rows) == 1 + 5 * 2  # n in 4..8, two mechanisms
    by_n = {(r[0], r[1]): r for r in rows[1:]}
    assert ("4", "m_add") in by_n and ("8", "m_sub") in by_n
