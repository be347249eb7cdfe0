"""
Experiment harness tests: configuration, matched budgets, drops, sweeps,
tables, persistence and the command line
"""
import json
import math
import tempfile
from dataclasses import replace
from pathlib import Path
from unittest import mock

import numpy as np
import pandas as pd

from src.acceptance import (REDUCED_TREND, check_adc_table, check_beam_variance,
                            check_bref_trend, check_determinism, check_energy_trend,
                            random_instance)
from src.aqnm import INF_BITS
from src.bench import (SWEEP_COLUMNS, ExperimentConfig, cost_model, drop_instance, matched_budget,
                       run_drop, run_sweep, solve, summarize_tables, write_csv)
from src.cli import main as cli_main
from src.instance import UserState, build_instance
from src.io_utils import (instance_from_dict, instance_to_dict, load_csv, load_instance,
                          save_instance, selection_from_json, selection_to_json)
from src.rate import BeamTuple, RateEvaluator, Selection, prune
from src.selection import (CostModel, GroundSet, algorithm1, dynamic_range, greedy_fixed_bits,
                           selection_cost)

CONFIG_DIR = Path(__file__).parent.parent / "configs"


def tiny_config(**changes) -> ExperimentConfig:
    return replace(ExperimentConfig.from_json(CONFIG_DIR / "tiny.json"), **changes)


def synthetic_sweep() -> pd.DataFrame:
    rows = []
    for value, (j_energy, q_energy) in ((1, (5.0, 10.0)), (3, (8.0, 8.0))):
        for algo, energy, evals in (("joint", j_energy, 30.0), ("qafas", q_energy, 60.0)):
            rows.append({"axis_name": "b_ref", "axis_value": value, "algo": algo,
                         "mean_wsr_bps_hz": 1.0, "se_wsr": 0.0, "mean_energy": energy,
                         "se_energy": 0.0, "mean_active_chains": 3.0 if algo == "joint" else 4.0,
                         "mean_bits_per_chain": 2.5, "mean_hprime_evals": evals,
                         "mean_runtime_ms": math.nan, "n_drops": 2, "seed": 0})
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)


def test_config(results):
    """Test configuration loading and validation"""
    print("\n📊 Testing Experiment Configuration...")

    config = tiny_config()
    results.add_test("Tiny config loads from JSON",
                     config.n_rx == 8 and config.tx_power_dbm == (0.0, 10.0) and config.n_drops == 3)
    results.add_test("Power values list the sweep", config.power_values() == [0.0, 10.0])
    results.add_test("Scalar power is a one-point sweep",
                     ExperimentConfig().power_values() == [5.0])

    queued = replace(config, weights=(2.0, 1.0, 1.0), queues=("inf", 3.0, 4.0))
    results.add_test("Queue strings parse to infinity", math.isinf(queued.queues[0]))
    restored = ExperimentConfig.from_dict(json.loads(json.dumps(queued.to_dict())))
    results.add_test("Config survives a JSON round trip", restored == queued)

    bad = [("unknown scenario", {"scenario": "indoor"}),
           ("chain cap above chains", {"chain_cap": 5}),
           ("b_ref above 12", {"b_ref": 13}),
           ("b_ref_values below 1", {"b_ref_values": (0, 3)}),
           ("negative delta", {"delta": -1}),
           ("zero drops", {"n_drops": 0}),
           ("unknown algorithm", {"algorithms": ("joint", "exhaustive")}),
           ("weights of the wrong length", {"weights": (1.0, 1.0)}),
           ("reversed SNR range", {"snr_range_db": (20.0, -5.0)}),
           ("a negative gain floor", {"min_gain_rel": -0.1}),
           ("a gain floor of one", {"min_gain_rel": 1.0})]
    for name, changes in bad:
        results.expect_error(f"Config rejects {name}", ValueError, replace, config, **changes)
    results.expect_error("Unknown config keys are rejected", ValueError,
                         ExperimentConfig.from_dict, {"n_rx": 8, "n_beams": 8})


def test_budgets(results):
    """Test the matched-budget protocol"""
    print("\n📊 Testing Matched Budgets...")

    cm = CostModel(theta=1.0 / 16.0, b_ref=4, budget_E=1.0, budget_M=10, eps_default=1.0)
    results.add_test("Ten 4-bit chains cost 20", matched_budget(cm, 10, 4) == 20.0)
    unit = CostModel(theta=1.0, b_ref=2, budget_E=1.0, budget_M=4, eps_default=1.0)
    results.add_test("Four 2-bit chains at theta = 1 cost 20", matched_budget(unit, 4, 2) == 20.0)
    switching = CostModel(theta=1.0 / 16.0, b_ref=4, budget_E=1.0, budget_M=10, eps_default=1.0,
                          eps_switch={(4, 4): 0.5})
    results.add_test("An explicit (b_ref, b_ref) switching cost is charged",
                     matched_budget(switching, 10, 4) == 25.0)

    config = tiny_config(eps_switch=0.5)
    base = cost_model(config, 3)
    results.add_test("Only off-reference resolutions pay the switching cost",
                     base.switch_cost(3) == 0.0 and base.switch_cost(5) == 0.5)
    results.add_test("The reference-resolution budget ignores switching",
                     matched_budget(base, 4, 3) == 4 * (1.0 + 0.0625 * 8))


def test_drops(results, full):
    """Test single drops and the per-algorithm accounting"""
    print("\n📊 Testing Drops...")

    config = tiny_config(n_drops=1)
    first = pd.DataFrame(run_drop(config, 0).rows())
    second = pd.DataFrame(run_drop(config, 0).rows())
    results.add_test("A drop is reproducible from (seed, drop index)", first.equals(second))
    other = pd.DataFrame(run_drop(config, 1).rows())
    results.add_test("Different drops see different channels",
                     not np.allclose(first["wsr_bits"], other["wsr_bits"]))

    result = run_drop(config, 0)
    joint, qafas = result.outcomes["joint"], result.outcomes["qafas"]
    results.add_test("Joint energy stays within the matched budget",
                     joint.energy <= result.budget_E + 1e-9,
                     f"{joint.energy} > {result.budget_E}")
    results.add_test("QAFAS spends the matched budget",
                     abs(qafas.energy - result.budget_E) < 1e-9 and qafas.active_chains == 4)
    results.add_test("Active chains respect the cap",
                     all(o.active_chains <= config.chain_cap for o in result.outcomes.values()))
    cm = cost_model(config, config.b_ref, result.budget_E)
    results.add_test("Reported energy is the cost of the pruned selection",
                     all(abs(o.energy - selection_cost(o.selection, cm)) < 1e-12
                         for o in result.outcomes.values()))
    top_bits = max((t.bits for t in joint.selection), default=0)
    if joint.active_chains < qafas.active_chains and top_bits <= config.b_ref:
        results.add_test("Fewer chains at no more than b_ref spend less than QAFAS",
                         joint.energy < qafas.energy)
    results.add_test("Random draws only b_ref tuples",
                     all(t.bits == config.b_ref for t in result.outcomes["random"].selection))
    results.add_test("FAS runs every chain at b_ref",
                     result.outcomes["fas"].bits_per_chain == float(config.b_ref))
    results.add_test("Runtime is left out unless requested",
                     all(math.isnan(o.runtime_ms) for o in result.outcomes.values()))
    timed = run_drop(replace(config, record_runtime=True), 0, algorithms=("qafas",))
    results.add_test("Requested runtimes are recorded", timed.outcomes["qafas"].runtime_ms >= 0.0)

    low, _ = drop_instance(config, 0, 0.0)
    high, _ = drop_instance(config, 0, 10.0)
    results.add_test("Power sweeps reuse the drop's channel",
                     np.array_equal(low.channel.taps, high.channel.taps))
    results.add_test("A 10 dB power step scales every load by 10",
                     np.allclose(high.power.loads, 10.0 * low.power.loads, rtol=1e-12))

    exact = replace(config, b_ref=2, delta=1, algorithms=("joint", "brute"))
    outcome = run_drop(exact, 0)
    results.add_test("The oracle dominates the joint selector on a drop",
                     outcome.outcomes["brute"].wsr_bits >= outcome.outcomes["joint"].wsr_bits - 1e-9)

    behind = 0
    n_rich = 20 if full else 5
    for drop in range(n_rich):
        instance, _ = drop_instance(config, drop)
        ev = RateEvaluator(instance)
        rich = CostModel(theta=1.0 / 16.0, b_ref=12, budget_E=1e9, budget_M=3, eps_default=1.0)
        ground = GroundSet.build(range(8), dynamic_range(12, 3), rich)
        joint_value = ev.wsr(prune(algorithm1(ev, ground, rich)))
        behind += int(joint_value < ev.wsr(greedy_fixed_bits(ev, range(8), 12, 3)) - 1e-9)
    results.add_test("With an unbounded energy budget the joint scheme matches greedy at 12 bits",
                     behind == 0, f"{behind}/{n_rich} drops behind")

    rows = solve(config, "qafas", seed=5)
    results.add_test("solve() gives one row per drop for the chosen algorithm",
                     len(rows) == 1 and list(rows["algo"]) == ["qafas"])
    results.add_test("solve() is reproducible", rows.equals(solve(config, "qafas", seed=5)))
    results.expect_error("solve() rejects unknown algorithms", ValueError, solve, config, "greedy")


def test_sweeps(results, full):
    """Test sweep aggregation and the summary tables"""
    print("\n📊 Testing Sweeps and Tables...")

    config = tiny_config(n_drops=1)
    sweep = run_sweep(config, "power")
    results.add_test("Sweep columns are fixed", list(sweep.columns) == SWEEP_COLUMNS)
    results.add_test("One row per power value and algorithm", len(sweep) == 2 * 4)
    results.add_test("A single drop has zero standard error",
                     (sweep["se_wsr"] == 0.0).all() and (sweep["se_energy"] == 0.0).all())
    results.add_test("Sweep runtime is NaN when not recorded", sweep["mean_runtime_ms"].isna().all())

    bref = run_sweep(tiny_config(n_drops=2, algorithms=("joint", "qafas")), "bref")
    results.add_test("b_ref sweep covers every reference resolution",
                     sorted(set(bref["axis_value"])) == [1, 3, 5] and (bref["axis_name"] == "b_ref").all())
    results.expect_error("Unknown sweep axes are rejected", ValueError, run_sweep, config, "delta")

    pair = tiny_config(n_drops=3, algorithms=("joint", "qafas", "random"))
    power = run_sweep(pair, "power")
    per_drop = pd.DataFrame([row for d in range(3)
                             for row in run_drop(pair, d, tx_power_dbm=0.0).rows()])
    at_zero = power.query("axis_value == 0.0 and algo == 'joint'").iloc[0]
    expected = per_drop[per_drop["algo"] == "joint"]
    results.add_test("Sweep means equal the mean of the per-drop values",
                     np.isclose(at_zero["mean_wsr_bps_hz"], expected["wsr_bps_hz"].mean(), rtol=1e-12)
                     and np.isclose(at_zero["mean_energy"], expected["energy"].mean(), rtol=1e-12))
    falling = []
    for algo in pair.algorithms:
        low, high = (power.query(f"algo == '{algo}' and axis_value == {v}").iloc[0] for v in (0.0, 10.0))
        if high["mean_wsr_bps_hz"] < low["mean_wsr_bps_hz"] - high["se_wsr"]:
            falling.append(algo)
    results.add_test("Mean rate grows with transmit power", not falling, f"Falling: {falling}")

    table = summarize_tables(synthetic_sweep())
    results.add_test("Tables carry one column per axis value",
                     list(table.columns) == ["metric", "b_ref=1", "b_ref=3"])
    by_metric = table.set_index("metric")
    results.add_test("Energy ratio is joint over QAFAS",
                     by_metric.at["energy_ratio", "b_ref=1"] == 0.5
                     and by_metric.at["energy_ratio", "b_ref=3"] == 1.0)
    results.add_test("Complexity ratio compares h' evaluations",
                     by_metric.at["complexity_ratio", "b_ref=1"] == 0.5)
    results.add_test("Average chains come from the joint rows",
                     by_metric.at["avg_active_chains", "b_ref=3"] == 3.0)
    results.expect_error("Tables need QAFAS rows", ValueError, summarize_tables,
                         synthetic_sweep().query("algo == 'joint'"))

    results.add_test(*_as_test(check_determinism()))
    results.add_test(*_as_test(check_beam_variance(200 if full else 20)))
    if full:
        trend = (check_adc_table(), check_bref_trend(), check_energy_trend())
    else:
        trend = (check_bref_trend(REDUCED_TREND["bref_drops"], REDUCED_TREND["bref_values"]),
                 check_energy_trend(REDUCED_TREND["energy_drops"]))
    for check in trend:
        results.add_test(*_as_test(check))


def _as_test(check):
    return check.name, check.passed, check.detail


def test_persistence(results):
    """Test instance, selection and CSV persistence"""
    print("\n📊 Testing Persistence...")

    inst = random_instance(12, 4, 3, 2, 4)
    inst = build_instance(inst.channel, inst.power, inst.codebook,
                          UserState([1.0, 3.0, 2.0], [np.inf, 5.0, 7.5]))
    sel = Selection.of([(0, 2), (3, 5)])
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "instance.json"
        save_instance(inst, path)
        loaded = load_instance(path)
        save_instance(inst, Path(tmp) / "dft.json", codebook_as_dft=True)
        dft = load_instance(Path(tmp) / "dft.json")
    results.add_test("Instance taps survive a JSON round trip",
                     np.array_equal(loaded.channel.taps, inst.channel.taps))
    results.add_test("User order and queues survive a JSON round trip",
                     np.array_equal(loaded.users.order, inst.users.order)
                     and np.array_equal(loaded.users.queues, inst.users.queues))
    results.add_test("Reloaded instances give the same h'",
                     RateEvaluator(loaded).wsr(sel) == RateEvaluator(inst).wsr(sel))
    results.add_test("A DFT codebook can be stored by name",
                     np.allclose(dft.codebook.beams, inst.codebook.beams, atol=1e-12))

    data = instance_to_dict(inst)
    data["n_rx"] = 5
    results.expect_error("Dimension mismatches are rejected", ValueError, instance_from_dict, data)
    data = instance_to_dict(inst)
    del data["taps"]
    results.expect_error("Missing fields are rejected", ValueError, instance_from_dict, data)

    mixed = Selection.of([(2, 3), (0, INF_BITS), (2, 5)])
    text = selection_to_json(mixed)
    results.add_test("Selections serialize in (beam, bits) order",
                     json.loads(text) == [{"beam": 0, "bits": "inf"}, {"beam": 2, "bits": 3},
                                          {"beam": 2, "bits": 5}])
    results.add_test("Selections parse back", selection_from_json(text) == mixed)
    results.add_test("Parsed tuples are BeamTuples",
                     BeamTuple(0, INF_BITS) in selection_from_json(text).tuples)
    results.expect_error("Malformed selections are rejected", ValueError,
                         selection_from_json, '[{"beam": 1}]')

    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "sweep.csv"
        write_csv(synthetic_sweep(), path)
        results.add_test("Sweep CSVs load back", len(load_csv(path, required=SWEEP_COLUMNS)) == 4)
        results.expect_error("Missing CSV columns are rejected", ValueError,
                             load_csv, path, ("axis_name", "wsr_bits"))


def test_cli(results):
    """Test the command line"""
    print("\n📊 Testing Command Line...")

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        write_csv(synthetic_sweep(), tmp / "sweep.csv")
        code = cli_main(["tables", "--in", str(tmp / "sweep.csv"), "--out", str(tmp / "tables.csv")])
        table = pd.read_csv(tmp / "tables.csv") if code == 0 else None
        results.add_test("tables writes the summary CSV",
                         code == 0 and list(table["metric"])[0] == "energy_ratio", f"exit {code}")

        code = cli_main(["solve", "--config", str(CONFIG_DIR / "tiny.json"), "--algo", "joint",
                         "--out", str(tmp / "joint.csv")])
        rows = pd.read_csv(tmp / "joint.csv") if code == 0 else None
        results.add_test("solve writes one row per drop",
                         code == 0 and len(rows) == 3 and "selection" in rows.columns, f"exit {code}")

        bad = tmp / "bad.json"
        bad.write_text(json.dumps({"n_rx": 8, "n_beams": 8}), encoding="utf-8")
        code = cli_main(["sweep", "--config", str(bad), "--axis", "power", "--out", str(tmp / "x.csv")])
        results.add_test("A bad config exits with code 2", code == 2, f"exit {code}")
        code = cli_main(["solve", "--config", str(tmp / "missing.json"), "--algo", "joint",
                         "--out", str(tmp / "y.csv")])
        results.add_test("A missing config exits with code 2", code == 2, f"exit {code}")

        with mock.patch("src.cli.solve", side_effect=RuntimeError("zeta overflow")):
            code = cli_main(["solve", "--config", str(CONFIG_DIR / "tiny.json"), "--algo", "joint",
                             "--out", str(tmp / "z.csv")])
        results.add_test("An internal consistency failure exits with code 1", code == 1, f"exit {code}")


def run(results, full: bool = False):
    test_config(results)
    test_budgets(results)
    test_drops(results, full)
    test_sweeps(results, full)
    test_persistence(results)
    test_cli(results)
