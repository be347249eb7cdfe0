"""
Instance tests: frequency responses, channel generators, codebooks, users
"""
import numpy as np

from src.instance import (BeamCodebook, ChannelRealization, PowerProfile, UserState,
                          build_instance, dft_codebook, flat_power_profile, freq_response,
                          generate_geometric, generate_rayleigh, geometric_channel_from_paths,
                          snr_power_profile, steering_vector)


def naive_response(taps: np.ndarray, n: int, n_sub: int) -> np.ndarray:
    n_taps, n_rx, n_users = taps.shape
    out = np.zeros((n_rx, n_users), dtype=complex)
    for r in range(n_rx):
        for k in range(n_users):
            for ell in range(n_taps):
                out[r, k] += taps[ell, r, k] * np.exp(-2j * np.pi * (n - 1) * ell / n_sub)
    return out


def test_freq_response(results):
    """Test the per-subcarrier frequency response"""
    print("\n📊 Testing Frequency Response...")

    channel = generate_rayleigh(3, 2, 1, 8, rng_seed=1)
    results.add_test(
        "Single-tap response equals H_0 on every subcarrier",
        all(np.array_equal(freq_response(channel, n), channel.taps[0]) for n in range(1, 9))
    )

    taps = np.zeros((2, 3, 3), dtype=complex)
    taps[1] = np.eye(3)
    channel = ChannelRealization(taps, 4)
    g2 = freq_response(channel, 2)
    results.add_test(
        "Tap-1 channel at n=2 picks up a -pi/2 phase",
        np.allclose(g2, np.eye(3) * np.exp(-1j * np.pi / 2), atol=1e-15),
        f"Got diagonal {np.diag(g2)}"
    )

    channel = generate_rayleigh(4, 3, 3, 8, rng_seed=2)
    worst = max(np.max(np.abs(freq_response(channel, n) - naive_response(channel.taps, n, 8)))
                for n in range(1, 9))
    results.add_test(
        "Response matches a naive per-entry DFT",
        worst < 1e-12,
        f"Max error {worst:.2e}"
    )
    results.add_test(
        "Cached responses agree with freq_response",
        np.allclose(channel.responses[4], freq_response(channel, 5), atol=1e-14)
    )

    other = generate_rayleigh(4, 3, 3, 8, rng_seed=3)
    combo = ChannelRealization(2.0 * channel.taps - 0.5j * other.taps, 8)
    lhs = freq_response(combo, 6)
    rhs = 2.0 * freq_response(channel, 6) - 0.5j * freq_response(other, 6)
    results.add_test(
        "Response is linear in the taps",
        np.max(np.abs(lhs - rhs)) < 1e-12,
        f"Max error {np.max(np.abs(lhs - rhs)):.2e}"
    )

    results.expect_error("Subcarrier 0 raises IndexError", IndexError, freq_response, channel, 0)
    results.expect_error("Subcarrier N+1 raises IndexError", IndexError, freq_response, channel, 9)
    results.expect_error("More taps than subcarriers is rejected", ValueError,
                         ChannelRealization, np.ones((5, 2, 2)), 4)


def test_generators(results):
    """Test Rayleigh and geometric channel generators"""
    print("\n📊 Testing Channel Generators...")

    flat = generate_rayleigh(4, 2, 1, 16, tap_power_profile=[1.0], rng_seed=5)
    results.add_test("n_taps=1 gives a flat-fading channel", flat.n_taps == 1)

    a = generate_rayleigh(4, 3, 2, 8, rng_seed=11)
    b = generate_rayleigh(4, 3, 2, 8, rng_seed=11)
    c = generate_rayleigh(4, 3, 2, 8, rng_seed=12)
    results.add_test("Same seed gives bitwise-identical taps", np.array_equal(a.taps, b.taps))
    results.add_test("Different seeds give different taps", not np.array_equal(a.taps, c.taps))

    profile = [0.7, 0.3]
    big = generate_rayleigh(100, 100, 2, 4, tap_power_profile=profile, rng_seed=21)
    variances = np.mean(np.abs(big.taps) ** 2, axis=(1, 2))
    rel = np.abs(variances - profile) / profile
    results.add_test(
        "Per-entry tap variance matches the profile within 5%",
        np.all(rel < 0.05),
        f"Variances {variances}"
    )

    results.add_test(
        "Steering vectors have unit norm",
        abs(np.linalg.norm(steering_vector(16, 0.3)) - 1.0) < 1e-12
    )

    broadside = geometric_channel_from_paths(4, [[0.0]], [[1.0]])
    results.add_test(
        "Unit-gain broadside path gives the all-ones column",
        np.allclose(broadside.taps[0, :, 0], np.ones(4), atol=1e-12),
        f"Got {broadside.taps[0, :, 0]}"
    )

    g1 = generate_geometric(8, 3, angle_rng_seed=4)
    g2 = generate_geometric(8, 3, angle_rng_seed=4)
    results.add_test("Geometric generator is deterministic", np.array_equal(g1.taps, g2.taps))

    # sin(theta) = 2m / N_r aligns the single path with DFT beam m
    theta = np.arcsin(2 * 2 / 8)
    single = geometric_channel_from_paths(8, [[theta]], [[1.0]])
    corr = np.abs(dft_codebook(8).beams @ single.taps[0, :, 0]) ** 2
    results.add_test(
        "Single-path user correlates best with its matching DFT beam",
        int(np.argmax(corr)) == 2 and np.all(corr[2] >= corr),
        f"Correlations {np.round(corr, 4)}"
    )


def test_codebooks(results):
    """Test DFT codebook and codebook validation"""
    print("\n📊 Testing Codebooks...")

    results.add_test("n_rx=1 codebook is the single beam [1]",
                     np.allclose(dft_codebook(1).beams, [[1.0]]))
    worst = 0.0
    for n in (1, 2, 4, 8, 16, 64):
        w = dft_codebook(n).beams
        worst = max(worst, np.max(np.abs(w @ w.conj().T - np.eye(n))))
    results.add_test("DFT codebooks are unitary", worst < 1e-12, f"Max error {worst:.2e}")

    a = steering_vector(8, np.arcsin(0.75))
    response = abs(dft_codebook(8).beams[3] @ a)
    results.add_test(
        "Beam 3 of 8 has unit response at its matching angle",
        abs(response - 1.0) < 1e-12,
        f"Got {response}"
    )

    results.expect_error("Non-unit beams are rejected", ValueError,
                         BeamCodebook, np.array([[1.0, 1.0]]))
    results.expect_error("Non-orthogonal beams are rejected", ValueError,
                         BeamCodebook, np.array([[1.0, 0.0], [np.sqrt(0.5), np.sqrt(0.5)]]))
    results.expect_error("More beams than antennas are rejected", ValueError,
                         BeamCodebook, np.eye(3)[:, :2])


def test_users_and_power(results):
    """Test user ordering and power profiles"""
    print("\n📊 Testing Users and Power Profiles...")

    users = UserState([1.0, 3.0, 2.0], [5.0, np.inf, 7.0])
    results.add_test("Weights sorted nonincreasing", list(users.weights) == [3.0, 2.0, 1.0])
    results.add_test("Permutation recorded", list(users.order) == [1, 2, 0],
                     f"Order {users.order}")
    results.add_test("Queues follow their users",
                     users.queues[0] == np.inf and list(users.queues[1:]) == [7.0, 5.0])
    results.add_test("Weight steps include w_(K+1) = 0",
                     list(users.weight_steps) == [1.0, 1.0, 1.0])

    tied = UserState([2.0, 2.0, 1.0], [1.0, 2.0, 3.0])
    results.add_test("Tied weights keep their original order", list(tied.order) == [0, 1, 2])

    results.expect_error("Negative weights are rejected", ValueError,
                         UserState, [1.0, -1.0], [1.0, 1.0])
    results.expect_error("Zero queues are rejected", ValueError, UserState, [1.0], [0.0])
    results.expect_error("Negative power loads are rejected", ValueError,
                         PowerProfile, np.array([[1.0, -0.1]]))

    p1 = snr_power_profile(4, 5, (-5.0, 20.0), rng_seed=3)
    p2 = snr_power_profile(4, 5, (-5.0, 20.0), rng_seed=3)
    db = 10 * np.log10(p1.loads[0])
    results.add_test("SNR draws are deterministic", np.array_equal(p1.loads, p2.loads))
    results.add_test("SNR draws stay in range and are flat across subcarriers",
                     np.all((db >= -5.0 - 1e-9) & (db <= 20.0 + 1e-9)) and np.all(p1.loads == p1.loads[0]))

    channel = generate_rayleigh(4, 3, 2, 4, rng_seed=9)
    power = flat_power_profile(4, [1.0, 2.0, 3.0])
    inst = build_instance(channel, power, dft_codebook(4), users)
    proj = inst.projections
    expected = (dft_codebook(4).beams[2] @ channel.responses[1]) * np.sqrt(power.loads[1])
    results.add_test(
        "Projections are permuted to sorted-weight order",
        np.allclose(proj[1, 2, :], expected[users.order], atol=1e-12)
    )
    results.expect_error("Mismatched user count is rejected", ValueError, build_instance,
                         channel, flat_power_profile(4, [1.0, 1.0]), dft_codebook(4),
                         UserState([1.0, 1.0], [1.0, 1.0]))


def run(results, full: bool = False):
    test_freq_response(results)
    test_generators(results)
    test_codebooks(results)
    test_users_and_power(results)
