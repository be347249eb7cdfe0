"""
Selection tests: costs and constraints, the joint selector, baselines and
the exact oracle
"""
import math
from typing import List

import numpy as np

from src.acceptance import (check_lazy_fidelity, check_oracle_gap, fixed_bits_subset_optimum,
                            random_subset, tiny_problem)
from src.aqnm import INF_BITS
from src.instance import (ChannelRealization, UserState, build_instance, dft_codebook,
                          flat_power_profile)
from src.rate import BeamTuple, ProblemSizeError, RateEvaluator, Selection, prune
from src.selection import (AlgorithmStep, CostModel, GroundSet, LazyMarginals, SearchState,
                           algorithm1, brute_force_opt, c_prime, d_prime, dynamic_range,
                           exhaustive_argmax, fas_select, greedy_fixed_bits, qafas_select,
                           random_select, selection_cost, tuple_cost)


def single_tuple_trap():
    """
    One strong beam that uses almost the whole budget and three weak cheap
    beams; the weak beams win on ratio and then block the strong one.
    """
    codebook = dft_codebook(4)
    strength = np.sqrt([1000.0, 0.1, 0.1, 0.1])
    taps = (codebook.beams.conj().T @ strength).reshape(1, 4, 1)
    instance = build_instance(ChannelRealization(taps, 1), flat_power_profile(1, [1.0]),
                              codebook, UserState.full_buffer([1.0]))
    theta = 1e-6
    cm = CostModel(theta=theta, b_ref=12, budget_E=1.0, budget_M=4,
                   eps_default=0.01 - theta * 4096, eps_beam={0: 0.98 - theta * 4096})
    return instance, GroundSet.build(range(4), [12], cm), cm


def test_costs(results):
    """Test tuple costs and the c', d' constraints"""
    print("\n📊 Testing Costs and Constraints...")

    unit = CostModel(theta=1.0, b_ref=3, budget_E=10.0, budget_M=1)
    results.add_test("theta = 1, b = 3 costs 8", tuple_cost(BeamTuple(0, 3), unit) == 8.0)
    cm = CostModel(theta=0.25, b_ref=2, budget_E=10.0, budget_M=2, eps_default=4.0)
    results.add_test("Tuple cost eps + theta 2^b = 8", tuple_cost(BeamTuple(0, 4), cm) == 8.0)
    trio = [BeamTuple(0, 1), BeamTuple(0, 3), BeamTuple(2, 2)]
    results.add_test("Selection cost is the sum of tuple costs",
                     selection_cost(trio, cm) == sum(tuple_cost(t, cm) for t in trio))
    cm2 = CostModel(theta=0.25, b_ref=2, budget_E=10.0, budget_M=2, eps_default=4.0,
                    eps_beam={1: 2.0}, eps_switch={(4, 2): 0.5})
    results.add_test("Per-beam and switching costs apply",
                     tuple_cost(BeamTuple(1, 4), cm2) == 6.5,
                     f"Got {tuple_cost(BeamTuple(1, 4), cm2)}")
    results.add_test("Switching cost is keyed on (b, b_ref)",
                     tuple_cost(BeamTuple(1, 3), cm2) == 4.0)
    results.expect_error("Infinite-resolution tuples have no cost", ValueError,
                         tuple_cost, BeamTuple(0, INF_BITS), cm)
    results.expect_error("Zero bits are rejected", ValueError, tuple_cost, BeamTuple(0, 0), cm)
    for name, kwargs in (("theta", {"theta": 0.0}), ("budget_E", {"budget_E": 0.0}),
                         ("budget_M", {"budget_M": 0}), ("eps_default", {"eps_default": -1.0})):
        base = {"theta": 0.25, "b_ref": 2, "budget_E": 1.0, "budget_M": 1}
        base.update(kwargs)
        results.expect_error(f"Invalid {name} is rejected", ValueError, CostModel, **base)

    cm3 = CostModel(theta=0.5, b_ref=3, budget_E=20.0, budget_M=4, eps_default=2.0)
    results.add_test("c' of one 4-bit tuple is 0.5", c_prime([(0, 4)], cm3) == 0.5)
    results.add_test("c' charges a beam only its costliest tuple",
                     c_prime([(0, 4), (0, 2)], cm3) == 0.5)
    results.add_test("c' adds across beams", abs(c_prime([(0, 4), (1, 3)], cm3) - 0.8) < 1e-15)
    results.add_test("d' counts distinct beams", d_prime([(0, 1), (0, 2), (3, 1)], cm3) == 0.5)
    results.add_test("Empty selection has zero c' and d'",
                     c_prime([], cm3) == 0.0 and d_prime([], cm3) == 0.0)

    rng = np.random.default_rng(31)
    ground = GroundSet.build(range(6), range(1, 5), cm3)
    violations = 0
    for _ in range(300):
        big = random_subset(rng, ground, 8)
        small = Selection(frozenset(t for t in big.tuples if rng.random() < 0.5))
        e = ground.tuples[int(rng.integers(len(ground)))]
        for fn in (c_prime, d_prime):
            gain_small = fn(small.with_tuple(e), cm3) - fn(small, cm3)
            gain_big = fn(big.with_tuple(e), cm3) - fn(big, cm3)
            violations += int(gain_big > gain_small + 1e-12 or fn(small, cm3) > fn(big, cm3) + 1e-12)
    results.add_test("c' and d' are monotone submodular on 300 random triples", violations == 0,
                     f"{violations} violations")
    feasible = Selection.of([(0, 2), (3, 4)])
    results.add_test("c' equals c / E on matroid-feasible selections",
                     abs(c_prime(feasible, cm3) - selection_cost(feasible, cm3) / 20.0) < 1e-15)


def test_ground_set(results):
    """Test ground-set construction"""
    print("\n📊 Testing Ground Set...")

    cm = CostModel(theta=0.25, b_ref=2, budget_E=4.0, budget_M=2, eps_default=1.0)
    ground = GroundSet.build(range(4), range(1, 5), cm)
    results.add_test("Tuples above the budget are removed",
                     len(ground) == 12 and ground.n_removed == 4,
                     f"Size {len(ground)}, removed {ground.n_removed}")
    results.add_test("Options list the surviving resolutions", ground.options(2) == [1, 2, 3])
    results.add_test("Max-bits selection takes each beam at its top resolution",
                     ground.max_bits_selection() == Selection.of((b, 3) for b in range(4)))
    empty = GroundSet.build(range(4), range(1, 5), cm.with_budgets(budget_E=0.5))
    results.add_test("An unaffordable budget empties the ground set", len(empty) == 0)

    results.add_test("Dynamic range is clamped below", dynamic_range(3, 3) == [1, 2, 3, 4, 5, 6])
    results.add_test("Dynamic range is clamped above", dynamic_range(11, 3) == [8, 9, 10, 11, 12])
    results.add_test("Zero spread gives the reference only", dynamic_range(5, 0) == [5])


def test_algorithm1(results, full):
    """Test the joint beam and bit selector"""
    print("\n📊 Testing Joint Selector...")

    inst, ground, cm = tiny_problem(0)
    evaluator = RateEvaluator(inst)

    wide = cm.with_budgets(budget_E=1e6, budget_M=8)
    loose = GroundSet.build(range(8), range(1, 5), wide)
    results.add_test("Vacuous budgets select every beam at maximal bits",
                     algorithm1(evaluator, loose, wide) == Selection.of((b, 4) for b in range(8)))
    empty = GroundSet.build(range(8), range(1, 5), cm.with_budgets(budget_E=0.5))
    results.add_test("Empty ground set gives the empty selection",
                     len(algorithm1(evaluator, empty, cm)) == 0)

    trap, trap_ground, trap_cm = single_tuple_trap()
    trap_eval = RateEvaluator(trap)
    lazy_pick = algorithm1(trap_eval, trap_ground, trap_cm)
    full_pick = algorithm1(trap_eval, trap_ground, trap_cm, lazy=False)
    results.add_test("Best single tuple overrides a weak accumulation",
                     lazy_pick == Selection.of([(0, 12)]) and full_pick == lazy_pick,
                     f"Lazy {lazy_pick.ordered()}, exhaustive {full_pick.ordered()}")

    single = cm.with_budgets(budget_E=1.2)
    one_bit = GroundSet.build(range(8), range(1, 5), single)
    chosen = algorithm1(evaluator, one_bit, single)
    best_single = max(evaluator.wsr(Selection.of([t])) for t in one_bit.tuples)
    results.add_test("Single-tuple budget yields the best single tuple",
                     len(chosen) == 1 and evaluator.wsr(chosen) == best_single)

    n_seeds = 20 if full else 6
    infeasible = below_single = zeta_errors = value_errors = 0
    for seed in range(n_seeds):
        inst_s, ground_s, cm_s = tiny_problem(500 + seed, finite_queues=seed % 2 == 1)
        ev = RateEvaluator(inst_s)
        trace: List[AlgorithmStep] = []
        sel = algorithm1(ev, ground_s, cm_s, trace=trace)
        if (c_prime(sel, cm_s) > 1 + 1e-12 or d_prime(sel, cm_s) > 1 + 1e-12 or
                selection_cost(prune(sel), cm_s) > cm_s.budget_E * (1 + 1e-12)):
            infeasible += 1
        single_best = max(ev.wsr(Selection.of([t])) for t in ground_s.tuples)
        below_single += int(ev.wsr(sel) < single_best - 1e-12)
        if not trace:
            continue
        dc = np.cumsum([s.c_marginal for s in trace])
        dd = np.cumsum([s.d_marginal for s in trace])
        zc = np.array([s.zeta_c for s in trace])
        zd = np.array([s.zeta_d for s in trace])
        if (not np.allclose(zc, 2.0 ** dc, rtol=1e-12) or not np.allclose(zd, 2.0 ** dd, rtol=1e-12)
                or np.any(zc[:-1] > 2.0) or np.any(zd[:-1] > 2.0) or zc[-1] > 4.0 or zd[-1] > 4.0):
            zeta_errors += 1
        accumulated = Selection.of(s.chosen for s in trace)
        if abs(trace[-1].value - ev.wsr(accumulated)) > 1e-9 or any(s.gain <= 0 for s in trace):
            value_errors += 1
    results.add_test("Selections satisfy both budgets", infeasible == 0,
                     f"{infeasible}/{n_seeds} infeasible")
    results.add_test("Selections never fall below the best single tuple", below_single == 0)
    results.add_test("Weights follow theta^(accumulated marginals) and stay below theta^2",
                     zeta_errors == 0, f"{zeta_errors}/{n_seeds} traces off")
    results.add_test("Trace values telescope to h' of the accumulation", value_errors == 0)

    steps: List[AlgorithmStep] = []
    algorithm1(evaluator, ground, cm, trace=steps)
    results.add_test("Trace lines report the iteration and weights",
                     bool(steps) and steps[0].line().startswith("iter=1 tuple=(") and "zeta2=" in steps[0].line())

    mismatches = rounds = 0
    for seed in range(20 if full else 4):
        inst_s, ground_s, cm_s = tiny_problem(600 + seed)
        state = SearchState(RateEvaluator(inst_s), ground_s, cm_s)
        queue = LazyMarginals(state)
        while state.running(2.0):
            lazy = queue.argmax(state)
            scan = exhaustive_argmax(state)
            if lazy is None or scan is None:
                mismatches += int(lazy is not scan)
                break
            rounds += 1
            same_ratio = lazy.ratio == scan.ratio or abs(lazy.ratio - scan.ratio) <= 1e-12 * abs(scan.ratio)
            mismatches += int(lazy.tuple != scan.tuple or not same_ratio)
            new_beam = lazy.tuple.beam not in state.beam_cost
            state.augment(lazy, 2.0)
            if new_beam:
                queue.beam_selected(state, lazy.tuple.beam)
    results.add_test("Lazy argmax matches the exhaustive scan every round", mismatches == 0,
                     f"{mismatches} mismatches in {rounds} rounds")

    below_floor = lazy_split = 0
    for seed in range(10 if full else 4):
        inst_s, ground_s, cm_s = tiny_problem(700 + seed)
        ev = RateEvaluator(inst_s)
        steps_s: List[AlgorithmStep] = []
        floored = algorithm1(ev, ground_s, cm_s, trace=steps_s, min_gain_rel=0.05)
        below_floor += sum(s.gain <= 0.05 * (s.value - s.gain) for s in steps_s)
        lazy_split += int(floored != algorithm1(ev, ground_s, cm_s, lazy=False, min_gain_rel=0.05))
    results.add_test("A relative gain floor rejects negligible augmentations", below_floor == 0,
                     f"{below_floor} steps at or under the floor")
    results.add_test("Lazy and exhaustive scans agree under a gain floor", lazy_split == 0)
    results.expect_error("Negative gain floors are rejected", ValueError,
                         algorithm1, evaluator, ground, cm, min_gain_rel=-0.1)

    for check in (check_lazy_fidelity(100 if full else 3), check_oracle_gap(200 if full else 6)):
        results.add_test(check.name, check.passed, check.detail)


def test_oracle(results):
    """Test the exact enumeration oracle"""
    print("\n📊 Testing Brute-Force Oracle...")

    inst, ground, cm = tiny_problem(7)
    evaluator = RateEvaluator(inst)

    wide = cm.with_budgets(budget_E=1e6, budget_M=5)
    loose = GroundSet.build(range(5), range(1, 5), wide)
    sel, value = brute_force_opt(evaluator, loose, wide)
    results.add_test("Vacuous budgets: the oracle takes every beam at maximal bits",
                     sel == loose.max_bits_selection() and value == evaluator.wsr(sel))

    single = cm.with_budgets(budget_E=1.2)
    one_bit = GroundSet.build(range(8), range(1, 5), single)
    sel, value = brute_force_opt(evaluator, one_bit, single)
    best_single = max(evaluator.wsr(Selection.of([t])) for t in one_bit.tuples)
    results.add_test("Single-tuple budget: the oracle returns the best single tuple",
                     len(sel) == 1 and value == best_single)

    dominated = 0
    for seed in range(6):
        inst_s, ground_s, cm_s = tiny_problem(700 + seed)
        ev = RateEvaluator(inst_s)
        opt_sel, opt = brute_force_opt(ev, ground_s, cm_s)
        joint = ev.wsr(algorithm1(ev, ground_s, cm_s))
        feasible = (selection_cost(opt_sel, cm_s) <= cm_s.budget_E * (1 + 1e-12) and
                    opt_sel.is_matroid_feasible() and len(opt_sel) <= cm_s.budget_M)
        dominated += int(opt >= joint - 1e-9 and feasible)
    results.add_test("Oracle optimum is feasible and dominates the joint selector", dominated == 6,
                     f"{dominated}/6 instances")

    too_wide = GroundSet.build(range(11), [1], cm.with_budgets(budget_E=100.0))
    results.expect_error("More than 10 beams is refused", ProblemSizeError,
                         brute_force_opt, evaluator, too_wide, cm)
    too_fine = GroundSet.build(range(4), range(1, 6), cm.with_budgets(budget_E=100.0))
    results.expect_error("More than 4 resolutions is refused", ProblemSizeError,
                         brute_force_opt, evaluator, too_fine, cm)


def test_baselines(results):
    """Test fixed-resolution greedy, FAS and random selection"""
    print("\n📊 Testing Baselines...")

    inst, ground, cm = tiny_problem(3)
    evaluator = RateEvaluator(inst)

    everything = greedy_fixed_bits(evaluator, range(8), 3, 8)
    results.add_test("Greedy with M' >= |W| selects every beam",
                     everything == Selection.of((b, 3) for b in range(8)))
    first = greedy_fixed_bits(evaluator, range(8), 3, 1)
    best = max(evaluator.wsr(Selection.of([(b, 3)])) for b in range(8))
    results.add_test("Greedy with M' = 1 picks the best single beam",
                     len(first) == 1 and evaluator.wsr(first) == best)

    worst = math.inf
    for seed in range(5):
        inst_s, _, _ = tiny_problem(900 + seed, finite_queues=seed % 2 == 0)
        ev = RateEvaluator(inst_s)
        greedy = ev.wsr(greedy_fixed_bits(ev, range(8), 2, 3))
        opt = fixed_bits_subset_optimum(ev, range(8), 2, 3)
        worst = min(worst, greedy / opt)
    results.add_test("Greedy reaches (1 - 1/e) of the fixed-resolution optimum",
                     worst >= 1 - 1 / math.e - 1e-12, f"Worst ratio {worst:.4f}")

    results.add_test("QAFAS is greedy at the reference resolution",
                     qafas_select(evaluator, range(8), 2, 3) == greedy_fixed_bits(evaluator, range(8), 2, 3))
    fas = fas_select(evaluator, range(8), 2, 3)
    ideal = greedy_fixed_bits(evaluator, range(8), INF_BITS, 3)
    results.add_test("FAS reports its beams at the reference resolution",
                     len(fas) == 3 and all(t.bits == 2 for t in fas.tuples)
                     and fas.beams() == ideal.beams())

    results.add_test("Random selection is reproducible from its seed",
                     random_select(ground, cm, 42) == random_select(ground, cm, 42))
    bad = 0
    for seed in range(20):
        sel = random_select(ground, cm, seed)
        spent = selection_cost(sel, cm)
        fits_more = len(sel) < cm.budget_M and any(
            t.beam not in sel.beams() and spent + ground.costs[t] <= cm.budget_E * (1 + 1e-12)
            for t in ground.tuples)
        bad += int(spent > cm.budget_E * (1 + 1e-12) or not sel.is_matroid_feasible()
                   or len(sel) > cm.budget_M or fits_more)
    results.add_test("Random selections are feasible and maximal", bad == 0, f"{bad}/20 bad")


def run(results, full: bool = False):
    test_costs(results)
    test_ground_set(results)
    test_algorithm1(results, full)
    test_oracle(results)
    test_baselines(results)
