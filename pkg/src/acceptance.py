"""
Acceptance Checks
Oracle and property checks over seeded random problems, each reporting a
CheckResult; quick mode uses reduced sample counts
"""
import filecmp
import logging
import math
import tempfile
from dataclasses import dataclass, replace
from itertools import combinations
from pathlib import Path
from typing import Callable, List, NamedTuple, Optional

import numpy as np
from scipy.optimize import linprog

from src.aqnm import AdcTable, beam_variance, beam_variance_time_domain, effective_gain
from src.bench import ExperimentConfig, run_drop, run_sweep
from src.instance import (PowerProfile, ProblemInstance, UserState, build_instance,
                          dft_codebook, generate_rayleigh, snr_power_profile)
from src.rate import RateEvaluator, Selection, prune
from src.selection import AlgorithmStep, CostModel, GroundSet, algorithm1, brute_force_opt

logger = logging.getLogger(__name__)

ORACLE_GAP_BOUND = 0.155
NEAR_OPTIMAL_GAP = 0.02

FULL_COUNTS = {"oracle": 200, "submod_instances": 20, "submod_triples": 1000, "prune": 500,
               "corner": 50, "lemma": 200, "lazy": 100, "bench_drops": 50}
QUICK_COUNTS = {"oracle": 20, "submod_instances": 5, "submod_triples": 100, "prune": 60,
                "corner": 10, "lemma": 25, "lazy": 12}
REDUCED_TREND = {"bref_drops": 3, "bref_values": (1, 3, 8), "energy_drops": 5}


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


class Problem(NamedTuple):
    instance: ProblemInstance
    ground: GroundSet
    cm: CostModel


# ==================== RANDOM PROBLEMS ====================

def random_users(rng: np.random.Generator, n_users: int, finite_queues: bool = False) -> UserState:
    weights = rng.uniform(0.5, 2.0, n_users)
    queues = rng.uniform(1.0, 20.0, n_users) if finite_queues else np.full(n_users, np.inf)
    return UserState(weights, queues)


def random_instance(seed: int, n_rx: int, n_users: int, n_taps: int, n_subcarriers: int,
                    finite_queues: bool = False) -> ProblemInstance:
    rng = np.random.default_rng(seed)
    channel = generate_rayleigh(n_rx, n_users, n_taps, n_subcarriers, rng_seed=rng)
    power = snr_power_profile(n_subcarriers, n_users, (0.0, 15.0), rng_seed=rng)
    return build_instance(channel, power, dft_codebook(n_rx), random_users(rng, n_users, finite_queues))


def tiny_problem(seed: int, finite_queues: bool = False) -> Problem:
    """|W| = 8, B = {1, 2, 3, 4}, K = 3, N = 4, M' = 3, random energy budget."""
    instance = random_instance(seed, 8, 3, 2, 4, finite_queues)
    rng = np.random.default_rng([seed, 1])
    cm = CostModel(theta=1.0 / 16.0, b_ref=2, budget_E=float(rng.uniform(1.2, 6.0)),
                   budget_M=3, eps_default=1.0)
    return Problem(instance, GroundSet.build(range(8), range(1, 5), cm), cm)


def medium_problem(seed: int) -> Problem:
    """|W| = 16, B = 1..6, K = 4, N = 4, M' = 6 with a six-chain 3-bit budget."""
    instance = random_instance(seed, 16, 4, 2, 4)
    cm = CostModel(theta=1.0 / 16.0, b_ref=3, budget_E=6 * 1.5, budget_M=6, eps_default=1.0)
    return Problem(instance, GroundSet.build(range(16), range(1, 7), cm), cm)


def random_subset(rng: np.random.Generator, ground: GroundSet, max_size: int) -> Selection:
    size = int(rng.integers(0, max_size + 1))
    picks = rng.choice(len(ground), size=min(size, len(ground)), replace=False)
    return Selection(frozenset(ground.tuples[i] for i in picks))


# ==================== ORACLES ====================

def grid_lloyd_max_alpha(bits: int, n_grid: int = 200_001, span: float = 10.0,
                         n_iter: int = 3000) -> float:
    """alpha = 1 - distortion of a Lloyd-Max quantizer run on a dense Gaussian grid."""
    x = np.linspace(-span, span, n_grid)
    p = np.exp(-0.5 * x * x)
    p /= p.sum()
    cdf = np.cumsum(p)
    n_levels = 2 ** bits
    levels = np.interp((np.arange(n_levels) + 0.5) / n_levels, cdf, x)
    for _ in range(n_iter):
        edges = 0.5 * (levels[1:] + levels[:-1])
        cell = np.searchsorted(edges, x)
        mass = np.bincount(cell, weights=p, minlength=n_levels)
        updated = np.bincount(cell, weights=p * x, minlength=n_levels) / np.maximum(mass, 1e-300)
        if np.max(np.abs(updated - levels)) < 1e-12:
            levels = updated
            break
        levels = updated
    cell = np.searchsorted(0.5 * (levels[1:] + levels[:-1]), x)
    distortion = float(np.sum(p * (x - levels[cell]) ** 2))
    return 1.0 - distortion


def polymatroid_lp_wsr(evaluator: RateEvaluator, selection: Selection) -> float:
    """max sum w_k R_k over {R >= 0, R(A) <= f(A) for all A, R_k <= Q_k} by linear programming."""
    users = evaluator.users
    k = users.n_users
    rows, rhs = [], []
    for size in range(1, k + 1):
        for subset in combinations(range(1, k + 1), size):
            row = np.zeros(k)
            row[[u - 1 for u in subset]] = 1.0
            rows.append(row)
            rhs.append(evaluator.f_set(selection, subset))
    bounds = [(0.0, None if math.isinf(q) else float(q)) for q in users.queues]
    res = linprog(-users.weights, A_ub=np.array(rows), b_ub=np.array(rhs),
                  bounds=bounds, method="highs")
    if not res.success:
        raise RuntimeError(f"polymatroid LP failed: {res.message}")
    return float(-res.fun)


def fixed_bits_subset_optimum(evaluator: RateEvaluator, beams, bits, n_select: int) -> float:
    best = 0.0
    for size in range(1, n_select + 1):
        for subset in combinations(beams, size):
            best = max(best, evaluator.wsr(Selection.of((b, bits) for b in subset)))
    return best


# ==================== CHECKS ====================

def check_oracle_gap(n_instances: int = 200) -> CheckResult:
    ratios, worst = [], math.inf
    for seed in range(n_instances):
        inst, ground, cm = tiny_problem(seed)
        evaluator = RateEvaluator(inst)
        chosen = algorithm1(evaluator, ground, cm)
        value = evaluator.wsr(chosen)
        _, opt = brute_force_opt(evaluator, ground, cm)
        if opt <= 0:
            continue
        ratio = value / opt
        ratios.append(ratio)
        worst = min(worst, ratio)
    passed = bool(ratios) and worst >= ORACLE_GAP_BOUND
    return CheckResult("oracle gap", passed,
                       f"mean ratio {np.mean(ratios):.4f}, worst {worst:.4f} "
                       f"(bound {ORACLE_GAP_BOUND}) over {len(ratios)} instances")


def check_submodularity(n_instances: int = 20, n_triples: int = 1000) -> CheckResult:
    rng = np.random.default_rng(7)
    dr_violations = mono_violations = 0
    per_instance = max(1, n_triples // n_instances)
    for seed in range(n_instances):
        inst, ground, _ = tiny_problem(1000 + seed, finite_queues=seed % 2 == 1)
        evaluator = RateEvaluator(inst)
        for _ in range(per_instance):
            big = random_subset(rng, ground, 6)
            small = Selection(frozenset(t for t in big.tuples if rng.random() < 0.5))
            e = ground.tuples[int(rng.integers(len(ground)))]
            h_small, h_big = evaluator.wsr(small), evaluator.wsr(big)
            gain_small = evaluator.wsr(small.with_tuple(e)) - h_small
            gain_big = evaluator.wsr(big.with_tuple(e)) - h_big
            if gain_big - gain_small > 1e-7 * max(1.0, abs(h_big)):
                dr_violations += 1
            if h_small - h_big > 1e-9 * max(1.0, abs(h_big)):
                mono_violations += 1
    total = per_instance * n_instances
    return CheckResult("submodularity and monotonicity", dr_violations == 0 and mono_violations == 0,
                       f"{dr_violations} diminishing-returns and {mono_violations} monotonicity "
                       f"violations in {total} triples")


def check_pruning(n_sets: int = 500) -> CheckResult:
    rng = np.random.default_rng(11)
    mismatches = 0
    for i in range(n_sets):
        inst, ground, _ = tiny_problem(2000 + i % 10, finite_queues=i % 3 == 0)
        chosen = random_subset(rng, ground, 10)
        if RateEvaluator(inst).wsr(chosen) != RateEvaluator(inst).wsr(prune(chosen)):
            mismatches += 1
    return CheckResult("pruning equivalence", mismatches == 0,
                       f"{mismatches} mismatches in {n_sets} sets")


def check_corner_point(n_instances: int = 50) -> CheckResult:
    worst_lp = worst_prefix = 0.0
    queue_violations = 0
    for seed in range(n_instances):
        inst = random_instance(3000 + seed, 4, 3, 2, 2, finite_queues=True)
        evaluator = RateEvaluator(inst)
        selection = Selection.of([(0, 3), (1, 4), (2, 2)])
        value = evaluator.wsr(selection)
        worst_lp = max(worst_lp, abs(value - polymatroid_lp_wsr(evaluator, selection)))
        rates = evaluator.corner_rates(selection).rates
        prefix = np.cumsum(rates)
        worst_prefix = max(worst_prefix, float(np.max(np.abs(prefix - evaluator.levels(selection)))))
        queue_violations += int(np.sum(rates > inst.users.queues + 1e-9))
    passed = worst_lp <= 1e-6 and worst_prefix <= 1e-9 and queue_violations == 0
    return CheckResult("queue-constrained corner point", passed,
                       f"max |wsr - LP| {worst_lp:.2e}, max prefix error {worst_prefix:.2e}, "
                       f"{queue_violations} queue violations")


def check_beam_variance(n_instances: int = 200) -> CheckResult:
    rng = np.random.default_rng(13)
    worst = 0.0
    for _ in range(n_instances):
        n_taps = int(rng.integers(1, 9))
        n_sub = int(rng.integers(n_taps, 33))
        n_rx, n_users = int(rng.integers(2, 7)), int(rng.integers(1, 5))
        channel = generate_rayleigh(n_rx, n_users, n_taps, n_sub, rng_seed=rng)
        power = PowerProfile(rng.uniform(0.1, 5.0, (n_sub, n_users)))
        beam = rng.standard_normal(n_rx) + 1j * rng.standard_normal(n_rx)
        beam /= np.linalg.norm(beam)
        freq = beam_variance(channel, power, beam).psi
        time_dom = beam_variance_time_domain(channel, power, beam).psi
        worst = max(worst, abs(freq - time_dom) / abs(time_dom))
    return CheckResult("beam variance frequency/time consistency", worst <= 1e-9,
                       f"max relative gap {worst:.2e} over {n_instances} channels")


def check_lazy_fidelity(n_instances: int = 100) -> CheckResult:
    identical = fewer = 0
    for seed in range(n_instances):
        inst, ground, cm = medium_problem(4000 + seed)
        lazy_eval, full_eval = RateEvaluator(inst), RateEvaluator(inst)
        lazy_trace: List[AlgorithmStep] = []
        full_trace: List[AlgorithmStep] = []
        lazy_sel = algorithm1(lazy_eval, ground, cm, lazy=True, trace=lazy_trace)
        full_sel = algorithm1(full_eval, ground, cm, lazy=False, trace=full_trace)
        same = (lazy_sel == full_sel and
                [s.chosen for s in lazy_trace] == [s.chosen for s in full_trace])
        identical += int(same)
        fewer += int(lazy_eval.hprime_evals < full_eval.hprime_evals)
    passed = identical == n_instances and fewer >= math.ceil(0.9 * n_instances)
    return CheckResult("lazy-evaluation fidelity", passed,
                       f"{identical}/{n_instances} identical sequences, "
                       f"{fewer}/{n_instances} with strictly fewer h' evaluations")


def check_adc_table(table: Optional[AdcTable] = None) -> CheckResult:
    table = table or AdcTable.default()
    alphas = [table.alpha(b) for b in range(1, 13)]
    increasing = all(hi > lo for lo, hi in zip(alphas, alphas[1:]))
    gap = max(abs(table.alpha(b) - grid_lloyd_max_alpha(b)) for b in range(1, table.b_lut_max + 1))
    gains_ok = all(
        all(hi > lo for lo, hi in zip(ts, ts[1:]))
        for ts in ([effective_gain(a, psi) for a in alphas] for psi in (1.0, 4.0, 100.0)))
    return CheckResult("ADC table validity", increasing and gap <= 1e-4 and gains_ok,
                       f"alpha increasing: {increasing}, max LUT gap {gap:.2e}, "
                       f"t increasing: {gains_ok}")


def desk_config(n_drops: int, **changes) -> ExperimentConfig:
    return replace(ExperimentConfig(), n_drops=n_drops, **changes)


def check_bref_trend(n_drops: int = 50, b_ref_values=tuple(range(1, 12))) -> CheckResult:
    """
    Mean wsr ordering joint >= QAFAS >= random across reference resolutions.

    The joint scheme may trail QAFAS by at most NEAR_OPTIMAL_GAP, the band the
    high-resolution energy check also grants; its gain at b_ref = 3 must be
    strictly positive.
    """
    config = desk_config(n_drops, b_ref_values=tuple(b_ref_values),
                         algorithms=("joint", "qafas", "random"))
    sweep = run_sweep(config, "bref").set_index(["axis_value", "algo"])
    bad, worst = [], math.inf
    for b in b_ref_values:
        joint = sweep.at[(b, "joint"), "mean_wsr_bps_hz"]
        qafas = sweep.at[(b, "qafas"), "mean_wsr_bps_hz"]
        rand = sweep.at[(b, "random"), "mean_wsr_bps_hz"]
        worst = min(worst, joint / qafas - 1.0)
        if joint < (1.0 - NEAR_OPTIMAL_GAP) * qafas or qafas < rand:
            bad.append(b)
    gain3 = math.nan
    if 3 in b_ref_values:
        gain3 = (sweep.at[(3, "joint"), "mean_wsr_bps_hz"] /
                 sweep.at[(3, "qafas"), "mean_wsr_bps_hz"] - 1.0)
    passed = not bad and (math.isnan(gain3) or gain3 > 0)
    return CheckResult("reference-resolution trend", passed,
                       f"ordering broken at b_ref {bad or 'none'}, worst joint/QAFAS "
                       f"{worst:+.2%}, gain at b_ref=3: {gain3:+.2%}")


def check_energy_trend(n_drops: int = 50, b_ref: int = 8) -> CheckResult:
    """Joint energy below QAFAS on most drops of the few-path flat scenario at high b_ref."""
    config = desk_config(n_drops, scenario="geometric", n_taps=1, n_subcarriers=1, delta=4,
                         b_ref=b_ref, algorithms=("joint", "qafas"))
    below, ratios, joint_wsr, qafas_wsr = 0, [], [], []
    for drop in range(n_drops):
        result = run_drop(config, drop)
        joint, qafas = result.outcomes["joint"], result.outcomes["qafas"]
        below += int(joint.energy < qafas.energy)
        ratios.append(joint.energy / qafas.energy)
        joint_wsr.append(joint.wsr_bps_hz)
        qafas_wsr.append(qafas.wsr_bps_hz)
    rel = abs(np.mean(joint_wsr) / np.mean(qafas_wsr) - 1.0)
    passed = below >= math.ceil(0.8 * n_drops) and rel <= NEAR_OPTIMAL_GAP
    return CheckResult("high-resolution energy saving", passed,
                       f"energy below QAFAS on {below}/{n_drops} drops "
                       f"(mean ratio {np.mean(ratios):.3f}), wsr gap {rel:.2%}")


def check_determinism(config: Optional[ExperimentConfig] = None) -> CheckResult:
    config = config or desk_config(2, n_rx=8, n_users=3, n_chains=4, chain_cap=4,
                                   n_subcarriers=4, n_taps=2, tx_power_dbm=(0.0, 10.0))
    with tempfile.TemporaryDirectory() as tmp:
        first, second = Path(tmp) / "a.csv", Path(tmp) / "b.csv"
        run_sweep(config, "power", first)
        run_sweep(config, "power", second)
        same = filecmp.cmp(first, second, shallow=False)
    return CheckResult("sweep determinism", same,
                       "byte-identical CSVs" if same else "CSVs differ")


def run_checks(quick: bool = False, with_bench: bool = False) -> List[CheckResult]:
    """Run the property checks and the desk-scale trend checks (full trend counts with with_bench)."""
    counts = QUICK_COUNTS if quick else FULL_COUNTS
    checks: List[Callable[[], CheckResult]] = [
        lambda: check_oracle_gap(counts["oracle"]),
        lambda: check_submodularity(counts["submod_instances"], counts["submod_triples"]),
        lambda: check_pruning(counts["prune"]),
        lambda: check_corner_point(counts["corner"]),
        lambda: check_beam_variance(counts["lemma"]),
        lambda: check_lazy_fidelity(counts["lazy"]),
        check_adc_table,
        check_determinism,
    ]
    if with_bench:
        checks.append(lambda: check_bref_trend(FULL_COUNTS["bench_drops"]))
        checks.append(lambda: check_energy_trend(FULL_COUNTS["bench_drops"]))
    else:
        checks.append(lambda: check_bref_trend(REDUCED_TREND["bref_drops"],
                                               REDUCED_TREND["bref_values"]))
        checks.append(lambda: check_energy_trend(REDUCED_TREND["energy_drops"]))

    results = []
    for check in checks:
        result = check()
        logger.info("%s %s: %s", "PASS" if result.passed else "FAIL", result.name, result.detail)
        results.append(result)
    return results
