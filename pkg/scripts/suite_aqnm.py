"""
Quantization model tests: ADC table, beam variances, effective gains and
the whitened channel
"""
import math

import numpy as np
from scipy.stats import norm

from src.aqnm import (DEFAULT_A_CONST, INF_BITS, AdcTable, QuantizedFrontEnd, alpha_of,
                      beam_variance, beam_variance_time_domain, effective_gain,
                      lloyd_max_quantizer, whitened_channel)
from src.instance import (ChannelRealization, PowerProfile, UserState, build_instance,
                          dft_codebook, flat_power_profile, generate_rayleigh)


def quadrature_alpha(bits: int) -> float:
    """1 - MSE of a Lloyd-Max quantizer, iterated with closed-form Gaussian moments."""
    n = 2 ** bits
    levels = np.linspace(-2.0, 2.0, n)
    for _ in range(20000):
        edges = np.concatenate(([-np.inf], (levels[1:] + levels[:-1]) / 2, [np.inf]))
        new = (norm.pdf(edges[:-1]) - norm.pdf(edges[1:])) / np.diff(norm.cdf(edges))
        if np.max(np.abs(new - levels)) < 1e-13:
            levels = new
            break
        levels = new
    edges = np.concatenate(([-np.inf], (levels[1:] + levels[:-1]) / 2, [np.inf]))
    return float(np.sum(np.diff(norm.cdf(edges)) * levels ** 2))


def test_adc_table(results):
    """Test the quantization-scalar table"""
    print("\n📊 Testing ADC Table...")

    table = AdcTable.default()
    results.add_test("Infinite resolution is transparent", alpha_of(INF_BITS) == 1.0)
    expected6 = 1.0 - DEFAULT_A_CONST * 2.0 ** -12
    results.add_test(
        "b=6 uses the high-resolution formula",
        abs(alpha_of(6) - expected6) < 1e-15,
        f"Expected {expected6}, got {alpha_of(6)}"
    )
    results.add_test("Default constant is pi sqrt(3) / 2",
                     abs(DEFAULT_A_CONST - 2.7206990463513265) < 1e-15)

    alphas = [table.alpha(b) for b in range(1, 13)]
    results.add_test("Alpha strictly increasing for b = 1..12",
                     all(hi > lo for lo, hi in zip(alphas, alphas[1:])), f"{alphas}")
    results.add_test("Alpha inside (0, 1) for finite bits", all(0 < a < 1 for a in alphas))
    results.add_test("One-bit alpha equals 2/pi", abs(table.alpha(1) - 2 / math.pi) < 1e-9)

    gap = max(abs(table.alpha(b) - quadrature_alpha(b)) for b in range(1, 6))
    results.add_test("Persisted LUT matches an independent Lloyd-Max oracle",
                     gap < 1e-4, f"Max gap {gap:.2e}")

    levels, distortion = lloyd_max_quantizer(2)
    results.add_test(
        "Two-bit Lloyd-Max levels are symmetric with MSE ~0.1175",
        np.allclose(levels, -levels[::-1], atol=1e-9) and abs(distortion - 0.11748) < 1e-4,
        f"Levels {levels}, MSE {distortion}"
    )
    generated = AdcTable.from_lloyd_max()
    results.add_test(
        "Generator reproduces the persisted table",
        all(abs(generated.alpha(b) - table.alpha(b)) < 1e-5 for b in range(1, 6))
    )
    results.add_test("Table survives a dict round trip",
                     AdcTable.from_dict(table.to_dict()).lut == table.lut)

    for bad in (0, -1, 2.5):
        results.expect_error(f"Bits {bad} are rejected", ValueError, alpha_of, bad)
    results.expect_error("Non-monotone LUT is rejected", ValueError, AdcTable,
                         {1: 0.6, 2: 0.9, 3: 0.85, 4: 0.99, 5: 0.997})
    results.expect_error("LUT above the formula at the boundary is rejected", ValueError,
                         AdcTable, {1: 0.6, 2: 0.9, 3: 0.97, 4: 0.99, 5: 0.9999})


def test_beam_variance(results):
    """Test per-beam variance in the frequency and time domains"""
    print("\n📊 Testing Beam Variance...")

    channel = generate_rayleigh(4, 3, 3, 8, rng_seed=4)
    beam = dft_codebook(4).beams[1]
    zero = PowerProfile(np.zeros((8, 3)))
    results.add_test("Zero power gives psi = 1", beam_variance(channel, zero, beam).psi == 1.0)

    h = np.array([[[0.3 - 0.4j], [1.2 + 0.1j]]])
    flat = ChannelRealization(h, 4)
    w = np.array([1.0, 1.0j]) / np.sqrt(2)
    p = 2.5
    expected = 1.0 + p * abs(w @ h[0, :, 0]) ** 2
    got = beam_variance(flat, flat_power_profile(4, [p]), w).psi
    results.add_test("Single-tap single-user closed form", abs(got - expected) < 1e-12,
                     f"Expected {expected}, got {got}")

    rng = np.random.default_rng(8)
    loads = PowerProfile(rng.uniform(0.1, 3.0, (8, 3)))
    freq = beam_variance(channel, loads, beam).psi
    time_dom = beam_variance_time_domain(channel, loads, beam).psi
    results.add_test(
        "Frequency-domain psi equals the time-domain expression",
        abs(freq - time_dom) / time_dom < 1e-9,
        f"{freq} vs {time_dom}"
    )

    inst = build_instance(channel, loads, dft_codebook(4), UserState.full_buffer([1, 1, 1]))
    front = QuantizedFrontEnd(inst)
    per_beam = np.array([beam_variance(channel, loads, b).psi for b in inst.codebook.beams])
    results.add_test("Front-end psi matches per-beam evaluation",
                     np.allclose(front.psi, per_beam, rtol=1e-12))
    before = whitened_channel([(0, 3), (1, 2)], inst).per_subcarrier[:, 0, :]
    after = whitened_channel([(0, 3), (2, 5), (3, 1)], inst).per_subcarrier[:, 0, :]
    results.add_test("A beam's row ignores the other selected beams",
                     np.array_equal(before, after))


def test_effective_gain(results):
    """Test the whitened per-beam gain"""
    print("\n📊 Testing Effective Gain...")

    results.add_test("alpha = 1 gives t = 1", effective_gain(1.0, 7.0) == 1.0)
    results.add_test("alpha = 0.5, psi = 1 gives t = 0.5", abs(effective_gain(0.5, 1.0) - 0.5) < 1e-15)
    for psi in (1.0, 4.0, 100.0):
        ts = [effective_gain(alpha_of(b), psi) for b in range(1, 13)]
        results.add_test(f"t strictly increasing in bits at psi = {psi:g}",
                         all(hi > lo for lo, hi in zip(ts, ts[1:])) and all(0 < t <= 1 for t in ts))
    results.expect_error("alpha = 0 is rejected", ValueError, effective_gain, 0.0, 2.0)
    results.expect_error("psi below 1 is rejected", ValueError, effective_gain, 0.5, 0.5)


def test_whitened_channel(results):
    """Test the effective channel after quantization"""
    print("\n📊 Testing Whitened Channel...")

    channel = generate_rayleigh(4, 2, 2, 4, rng_seed=6)
    power = flat_power_profile(4, [1.5, 0.5])
    inst = build_instance(channel, power, dft_codebook(4), UserState.full_buffer([1.0, 1.0]))

    ideal = whitened_channel([(0, INF_BITS), (2, INF_BITS)], inst)
    results.add_test("Infinite bits give the unquantized projections",
                     np.array_equal(ideal.per_subcarrier, inst.projections[:, [0, 2], :]))
    results.add_test("Duplicates collapse to the highest resolution",
                     np.array_equal(whitened_channel([(1, 2), (1, 4)], inst).per_subcarrier,
                                    whitened_channel([(1, 4)], inst).per_subcarrier))
    empty = whitened_channel([], inst)
    results.add_test("Empty selection gives zero rows", empty.n_rows == 0)

    h = np.array([[[0.8 + 0.6j]]])
    scalar = build_instance(ChannelRealization(h, 3), flat_power_profile(3, [2.0]),
                            dft_codebook(1), UserState.full_buffer([1.0]))
    psi = 1.0 + 2.0 * abs(h[0, 0, 0]) ** 2
    t = effective_gain(alpha_of(3), psi)
    got = whitened_channel([(0, 3)], scalar).per_subcarrier[:, 0, 0]
    results.add_test("Scalar chain: sqrt(t p) h on every subcarrier",
                     np.allclose(got, np.sqrt(t * 2.0) * h[0, 0, 0], atol=1e-14), f"Got {got}")


def run(results, full: bool = False):
    test_adc_table(results)
    test_beam_variance(results)
    test_effective_gain(results)
    test_whitened_channel(results)
