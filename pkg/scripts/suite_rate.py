"""
Rate tests: pruning, f^(A), queue-limited levels, h' and corner rates
"""
from itertools import combinations

import numpy as np

from src.acceptance import check_corner_point, check_pruning, check_submodularity, random_instance
from src.aqnm import INF_BITS, whitened_channel
from src.instance import (ChannelRealization, UserState, build_instance, dft_codebook,
                          flat_power_profile, generate_rayleigh)
from src.rate import (BeamTuple, ProblemSizeError, RateEvaluator, Selection, corner_rates, f_set,
                      g_level, prune, wsr)


def with_users(inst, weights, queues):
    return build_instance(inst.channel, inst.power, inst.codebook, UserState(weights, queues))


def enumerate_level(evaluator, selection, ell):
    """Independent Q_{U \\ A} + f(A) minimum over every subset of {1..ell}."""
    users = list(range(1, ell + 1))
    best = np.inf
    for size in range(ell + 1):
        for subset in combinations(users, size):
            rest = sum(evaluator.users.queues[u - 1] for u in users if u not in subset)
            best = min(best, rest + evaluator.f_set(selection, subset))
    return best


def test_prune(results):
    """Test selection pruning"""
    print("\n📊 Testing Pruning...")

    results.add_test("Empty selection prunes to empty", len(prune(Selection())) == 0)
    pruned = prune(Selection.of([(1, 2), (1, 4), (2, 3)]))
    results.add_test("Duplicates keep the highest resolution",
                     pruned.ordered() == [BeamTuple(1, 4), BeamTuple(2, 3)],
                     f"Got {pruned.ordered()}")
    results.add_test("Pruned selection is matroid-feasible", pruned.is_matroid_feasible())

    rng = np.random.default_rng(3)
    idempotent = True
    for _ in range(100):
        raw = Selection.of((int(rng.integers(6)), int(rng.integers(1, 5)))
                           for _ in range(int(rng.integers(0, 10))))
        idempotent &= prune(prune(raw)) == prune(raw)
    results.add_test("Pruning is idempotent on 100 random selections", idempotent)
    results.add_test("Infinite bits dominate finite ones",
                     prune(Selection.of([(0, 12), (0, INF_BITS)])).ordered() == [BeamTuple(0, INF_BITS)])


def test_f_set(results):
    """Test the subset sum-rate function"""
    print("\n📊 Testing f^(A)...")

    inst = random_instance(5, 6, 3, 2, 4)
    ev = RateEvaluator(inst)
    sel = Selection.of([(0, 3), (2, 5), (4, 1)])
    results.add_test("Empty user set gives 0", ev.f_set(sel, []) == 0.0)
    results.add_test("Empty selection gives 0", ev.f_set(Selection(), [1, 2]) == 0.0)

    h = np.array([[[0.6 + 0.2j]]])
    p, n_sub = 3.0, 5
    scalar = build_instance(ChannelRealization(h, n_sub), flat_power_profile(n_sub, [p]),
                            dft_codebook(1), UserState.full_buffer([1.0]))
    expected = n_sub * np.log2(1 + p * abs(h[0, 0, 0]) ** 2)
    got = f_set([(0, INF_BITS)], [1], scalar)
    results.add_test("Scalar AWGN: N log2(1 + p |w h|^2)", abs(got - expected) < 1e-12,
                     f"Expected {expected}, got {got}")

    rows = whitened_channel(sel, inst).per_subcarrier
    worst = 0.0
    for subset in ([1], [2, 3], [1, 2, 3]):
        cols = rows[:, :, [u - 1 for u in subset]]
        oracle = 0.0
        for n in range(cols.shape[0]):
            gram = np.eye(len(subset)) + cols[n].conj().T @ cols[n]
            oracle += np.linalg.slogdet(gram)[1] / np.log(2)
        worst = max(worst, abs(ev.f_set(sel, subset) - oracle))
    results.add_test("Matches log2|I + L^H L| by the other Gram side", worst < 1e-9,
                     f"Max error {worst:.2e}")
    results.expect_error("User index 0 raises IndexError", IndexError, ev.f_set, sel, [0])

    # f^(B) - f^(A) grows with the selection when A is inside B
    rng = np.random.default_rng(17)
    worst = 0.0
    ground = [(b, bits) for b in range(6) for bits in (1, 2, 4)]
    for _ in range(60):
        small = Selection.of(ground[i] for i in rng.choice(len(ground), 2, replace=False))
        big = Selection(small.tuples | {BeamTuple(*ground[int(rng.integers(len(ground)))])})
        b_users = [1, 2, 3]
        a_users = [1] if rng.random() < 0.5 else [2, 3]
        lhs = ev.f_set(small, b_users) - ev.f_set(small, a_users)
        rhs = ev.f_set(big, b_users) - ev.f_set(big, a_users)
        worst = max(worst, lhs - rhs)
    results.add_test("Conditional rates grow with the selection", worst <= 1e-9,
                     f"Worst violation {worst:.2e}")


def test_levels(results):
    """Test queue-limited level values"""
    print("\n📊 Testing Level Values...")

    base = random_instance(8, 6, 3, 2, 4)
    sel = Selection.of([(1, 4), (3, 2), (5, 6)])

    ev = RateEvaluator(base)
    ok = all(abs(ev.g_level(sel, ell) - ev.f_set(sel, range(1, ell + 1))) < 1e-9
             for ell in (1, 2, 3))
    results.add_test("Infinite queues give g^(l) = f^({1..l})", ok)

    eps = 1e-9
    tiny = RateEvaluator(with_users(base, [3.0, 2.0, 1.0], [eps, eps, eps]))
    results.add_test("Vanishing queues give g^(l) = sum of queues",
                     all(abs(tiny.g_level(sel, ell) - ell * eps) < 1e-15 for ell in (1, 2, 3)))

    mixed = RateEvaluator(with_users(base, [2.0, 1.5, 1.0], [4.0, np.inf, 9.0]))
    worst = max(abs(mixed.g_level(sel, ell) - enumerate_level(mixed, sel, ell)) for ell in (1, 2, 3))
    results.add_test("Mixed queues match an independent subset enumerator", worst < 1e-12,
                     f"Max error {worst:.2e}")
    g = mixed.levels(sel)
    results.add_test("Levels are nondecreasing", np.all(np.diff(g) >= -1e-12), f"Levels {g}")

    argmin = mixed.level_argmin(sel, 3)
    value = sum(mixed.users.queues[u - 1] for u in (1, 2, 3) if u not in argmin) + \
        mixed.f_set(sel, argmin)
    results.add_test("Reported minimizer attains the level value",
                     abs(value - mixed.g_level(sel, 3)) < 1e-12)

    results.expect_error("Level 0 raises IndexError", IndexError, mixed.g_level, sel, 0)
    results.expect_error("Level K+1 raises IndexError", IndexError, mixed.g_level, sel, 4)

    wide = generate_rayleigh(2, 21, 1, 1, rng_seed=1)
    many = build_instance(wide, flat_power_profile(1, np.ones(21)), dft_codebook(2),
                          UserState(np.ones(21), np.full(21, 5.0)))
    results.expect_error("More than 20 users with finite queues is refused", ProblemSizeError,
                         RateEvaluator(many).g_level, Selection.of([(0, 3)]), 21)

    # queue-limited sets grow with the selection, so rate-limited sets shrink
    rng = np.random.default_rng(23)
    nested = True
    for seed in range(8):
        inst = random_instance(100 + seed, 6, 4, 2, 2, finite_queues=True)
        ev4 = RateEvaluator(inst)
        small = Selection.of([(int(rng.integers(6)), int(rng.integers(1, 5)))])
        big = Selection(small.tuples | {BeamTuple(int(rng.integers(6)), int(rng.integers(1, 5)))})
        for ell in range(1, 5):
            a_sets = ev4.level_minimizers(small, ell)
            b_sets = ev4.level_minimizers(big, ell)
            nested &= any(b <= a for a in a_sets for b in b_sets)
    results.add_test("Queue-limited user sets nest as the selection grows", nested)


def test_wsr(results, full):
    """Test the weighted objective and corner rates"""
    print("\n📊 Testing Weighted Sum Rate...")

    inst = random_instance(9, 6, 3, 2, 4)
    ev = RateEvaluator(inst)
    sel = Selection.of([(0, 2), (2, 3), (2, 6), (5, 1)])
    results.add_test("h'(empty) = 0", ev.wsr(Selection()) == 0.0)
    results.add_test("h'(S) equals h'(prune(S)) exactly", ev.wsr(sel) == RateEvaluator(inst).wsr(prune(sel)))
    results.add_test("h' is monotone on a chain",
                     ev.wsr(Selection.of([(0, 2)])) <= ev.wsr(Selection.of([(0, 2), (2, 3)])) <= ev.wsr(sel))

    equal = RateEvaluator(with_users(inst, [2.0, 2.0, 2.0], [np.inf] * 3))
    results.add_test("Equal weights reduce to the scaled sum rate",
                     abs(equal.wsr(sel) - 2.0 * equal.f_set(sel, [1, 2, 3])) < 1e-9)

    queued = RateEvaluator(with_users(inst, [3.0, 1.0, 2.0], [6.0, 2.0, np.inf]))
    rates = queued.corner_rates(sel)
    results.add_test("Weighted corner rates reproduce h'",
                     abs(rates.weighted_sum() - queued.wsr(sel)) < 1e-9)
    results.add_test("Corner rates respect the queues",
                     np.all(rates.rates <= queued.users.queues + 1e-9) and np.all(rates.rates >= -1e-12),
                     f"Rates {rates.rates}")
    results.add_test("Partial sums equal the levels",
                     np.allclose(np.cumsum(rates.rates), queued.levels(sel), atol=1e-9))
    by_id = rates.by_user_id()
    results.add_test("Rates map back to original user ids",
                     by_id[0] == rates.rates[0] and by_id[2] == rates.rates[1] and by_id[1] == rates.rates[2])
    results.add_test("Empty selection has zero rates",
                     np.all(queued.corner_rates(Selection()).rates == 0.0))

    single = random_instance(10, 4, 1, 1, 2, finite_queues=True)
    one = RateEvaluator(single)
    s1 = Selection.of([(1, 4)])
    results.add_test("K=1 rate is min(Q_1, f({1}))",
                     abs(one.corner_rates(s1).rates[0] -
                         min(single.users.queues[0], one.f_set(s1, [1]))) < 1e-12)

    results.add_test("Module-level wrappers agree with the evaluator",
                     wsr(sel, inst) == ev.wsr(sel) and g_level(sel, 2, inst) == ev.g_level(sel, 2)
                     and np.array_equal(corner_rates(sel, inst).rates, ev.corner_rates(sel).rates))

    counted = RateEvaluator(inst)
    counted.wsr(sel)
    counted.wsr(prune(sel))
    counted.wsr(Selection.of([(0, 2)]))
    results.add_test("Evaluation counter counts fresh evaluations only",
                     counted.hprime_evals == 2 and counted.hprime_requests == 3,
                     f"evals={counted.hprime_evals}, requests={counted.hprime_requests}")

    for check in (check_submodularity(20 if full else 6, 1000 if full else 120),
                  check_pruning(500 if full else 60),
                  check_corner_point(50 if full else 10)):
        results.add_test(check.name, check.passed, check.detail)


def run(results, full: bool = False):
    test_prune(results)
    test_f_set(results)
    test_levels(results)
    test_wsr(results, full)
