"""
Problem Instance Module
Channels, power profiles, beam codebooks and users for the quantized
frequency-selective uplink
"""
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)


# ==================== DOMAIN TYPES ====================

@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """
    Per-tap uplink channel of an OFDM system.

    taps has shape (L, N_r, K); tap l is the N_r x K matrix H_l.
    """
    taps: np.ndarray
    n_subcarriers: int

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=complex)
        if taps.ndim != 3:
            raise ValueError(f"taps must be an (L, N_r, K) array, got shape {taps.shape}")
        if taps.shape[0] < 1:
            raise ValueError("channel needs at least one tap")
        if int(self.n_subcarriers) < 1:
            raise ValueError("n_subcarriers must be positive")
        if taps.shape[0] > int(self.n_subcarriers):
            raise ValueError(
                f"{taps.shape[0]} taps exceed {self.n_subcarriers} subcarriers "
                "(cyclic prefix must cover the delay spread)")
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)
        object.__setattr__(self, "n_subcarriers", int(self.n_subcarriers))

    @property
    def n_taps(self) -> int:
        return self.taps.shape[0]

    @property
    def n_rx(self) -> int:
        return self.taps.shape[1]

    @property
    def n_users(self) -> int:
        return self.taps.shape[2]

    @cached_property
    def responses(self) -> np.ndarray:
        """All G_n stacked as an (N, N_r, K) array (index n-1 holds G_n)."""
        n = np.arange(self.n_subcarriers)[:, None]
        ell = np.arange(self.n_taps)[None, :]
        phases = np.exp(-2j * np.pi * n * ell / self.n_subcarriers)
        g = np.einsum("nl,lrk->nrk", phases, self.taps)
        g.setflags(write=False)
        return g


@dataclass(frozen=True, eq=False)
class PowerProfile:
    """Per-subcarrier diagonal power loads; loads[n-1] is diag(D_n)."""
    loads: np.ndarray

    def __post_init__(self):
        loads = np.asarray(self.loads, dtype=float)
        if loads.ndim != 2:
            raise ValueError(f"loads must be an (N, K) array, got shape {loads.shape}")
        if np.any(loads < 0) or not np.all(np.isfinite(loads)):
            raise ValueError("power loads must be finite and nonnegative")
        loads.setflags(write=False)
        object.__setattr__(self, "loads", loads)

    @property
    def n_subcarriers(self) -> int:
        return self.loads.shape[0]

    @property
    def n_users(self) -> int:
        return self.loads.shape[1]


@dataclass(frozen=True, eq=False)
class BeamCodebook:
    """Mutually orthogonal unit-norm analog beams, one row per beam_id."""
    beams: np.ndarray

    def __post_init__(self):
        beams = np.atleast_2d(np.asarray(self.beams, dtype=complex))
        n_beams, n_rx = beams.shape
        if n_beams > n_rx:
            raise ValueError(f"{n_beams} orthogonal beams cannot exist in dimension {n_rx}")
        norms = np.linalg.norm(beams, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise ValueError("every beam must have unit norm")
        gram = beams @ beams.conj().T
        off = gram - np.diag(np.diag(gram))
        if n_beams > 1 and np.max(np.abs(off)) > 1e-9:
            raise ValueError("codebook beams must be mutually orthogonal")
        beams.setflags(write=False)
        object.__setattr__(self, "beams", beams)

    @property
    def size(self) -> int:
        return self.beams.shape[0]

    @property
    def n_rx(self) -> int:
        return self.beams.shape[1]


@dataclass(frozen=True, eq=False)
class UserState:
    """
    User weights and queue limits, stored in nonincreasing weight order.

    The constructor sorts by weight (stable) and records in `order` the
    original user id of every sorted position, so rates computed in sorted
    order can be mapped back. Queues are in bits per OFDM symbol; np.inf
    marks a full buffer.
    """
    weights: np.ndarray
    queues: np.ndarray
    order: np.ndarray = field(init=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        q = np.asarray(self.queues, dtype=float).ravel()
        if w.size == 0 or w.shape != q.shape:
            raise ValueError("weights and queues must be nonempty and of equal length")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        if np.any(np.isnan(q)) or np.any(q <= 0):
            raise ValueError("queues must be strictly positive (np.inf allowed)")
        order = np.argsort(-w, kind="stable")
        for name, arr in (("weights", w[order]), ("queues", q[order]), ("order", order)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def full_buffer(cls, weights: Sequence[float]) -> "UserState":
        w = np.asarray(weights, dtype=float)
        return cls(w, np.full(w.shape, np.inf))

    @property
    def n_users(self) -> int:
        return self.weights.size

    @property
    def weight_steps(self) -> np.ndarray:
        """w_l - w_{l+1} for l = 1..K with w_{K+1} = 0."""
        return self.weights - np.append(self.weights[1:], 0.0)


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """Everything needed to evaluate the objective for any selection."""
    channel: ChannelRealization
    power: PowerProfile
    codebook: BeamCodebook
    users: UserState
    adc_table: Optional[object] = None

    def __post_init__(self):
        if self.power.n_subcarriers != self.channel.n_subcarriers:
            raise ValueError("power profile and channel disagree on the number of subcarriers")
        if self.power.n_users != self.channel.n_users or self.users.n_users != self.channel.n_users:
            raise ValueError("channel, power profile and users disagree on K")
        if self.codebook.n_rx != self.channel.n_rx:
            raise ValueError("codebook beam length must equal the number of receive antennas")
        if self.adc_table is None:
            from src.aqnm import AdcTable
            object.__setattr__(self, "adc_table", AdcTable.default())

    @cached_property
    def projections(self) -> np.ndarray:
        """
        w_m G_n D_n^{1/2} for every beam, as an (N, |W|, K) array.

        Users are permuted into sorted-weight order so column l-1 belongs
        to the user with the l-th largest weight.
        """
        sqrt_d = np.sqrt(self.power.loads)[:, None, :]
        proj = np.einsum("mr,nrk->nmk", self.codebook.beams, self.channel.responses) * sqrt_d
        proj = np.ascontiguousarray(proj[:, :, self.users.order])
        proj.setflags(write=False)
        return proj


# ==================== FREQUENCY RESPONSE ====================

def freq_response(channel: ChannelRealization, n: int) -> np.ndarray:
    """
    Frequency response of subcarrier n (1-based):
        G_n = sum_l H_l exp(-j 2 pi (n-1) l / N)
    """
    if not 1 <= n <= channel.n_subcarriers:
        raise IndexError(f"subcarrier {n} outside 1..{channel.n_subcarriers}")
    ell = np.arange(channel.n_taps)
    phases = np.exp(-2j * np.pi * (n - 1) * ell / channel.n_subcarriers)
    return np.tensordot(phases, channel.taps, axes=1)


# ==================== GENERATORS ====================

def generate_rayleigh(n_rx: int, n_users: int, n_taps: int, n_subcarriers: int,
                      tap_power_profile: Optional[Sequence[float]] = None,
                      rng_seed: int = 0) -> ChannelRealization:
    """
    I.i.d. circularly symmetric Gaussian taps.

    Args:
        tap_power_profile: variance of every entry of tap l (defaults to 1/L each)
        rng_seed: seed of the generator; identical seeds give identical taps

    Returns:
        ChannelRealization with L = n_taps
    """
    for name, value in (("n_rx", n_rx), ("n_users", n_users),
                        ("n_taps", n_taps), ("n_subcarriers", n_subcarriers)):
        if int(value) < 1:
            raise ValueError(f"{name} must be positive, got {value}")
    if tap_power_profile is None:
        tap_power_profile = np.full(n_taps, 1.0 / n_taps)
    profile = np.asarray(tap_power_profile, dtype=float)
    if profile.shape != (n_taps,) or np.any(profile < 0):
        raise ValueError("tap_power_profile needs n_taps nonnegative entries")

    rng = np.random.default_rng(rng_seed)
    shape = (n_taps, n_rx, n_users)
    taps = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    taps *= np.sqrt(profile)[:, None, None]
    return ChannelRealization(taps, n_subcarriers)


def steering_vector(n_rx: int, angle: float) -> np.ndarray:
    """
    Half-wavelength ULA response, normalized to unit norm:
        a(theta) = [exp(j pi k sin theta)]_k / sqrt(N_r)
    """
    k = np.arange(n_rx)
    return np.exp(1j * np.pi * k * np.sin(angle)) / np.sqrt(n_rx)


def geometric_channel_from_paths(n_rx: int, angles: Sequence[Sequence[float]],
                                 gains: Sequence[Sequence[complex]],
                                 n_subcarriers: int = 1) -> ChannelRealization:
    """
    Single-tap channel whose column k is sqrt(N_r / P_k) * sum_p g_kp a(theta_kp).

    A single broadside path with unit gain gives the all-ones column.
    """
    columns = []
    for user_angles, user_gains in zip(angles, gains):
        user_angles = np.asarray(user_angles, dtype=float)
        user_gains = np.asarray(user_gains, dtype=complex)
        if user_angles.shape != user_gains.shape or user_angles.size == 0:
            raise ValueError("every user needs matching nonempty angle and gain lists")
        h = np.zeros(n_rx, dtype=complex)
        for theta, g in zip(user_angles, user_gains):
            h += g * steering_vector(n_rx, theta)
        columns.append(h * np.sqrt(n_rx / user_angles.size))
    taps = np.stack(columns, axis=1)[None, :, :]
    return ChannelRealization(taps, n_subcarriers)


def generate_geometric(n_rx: int, n_users: int, n_paths_per_user: int = 3,
                       angle_rng_seed: int = 0, n_subcarriers: int = 1) -> ChannelRealization:
    """
    Few-path mmWave-style channel on a half-wavelength ULA.

    Angles are uniform over [-pi/2, pi/2), gains CN(0, 1).
    """
    if n_paths_per_user < 1:
        raise ValueError("n_paths_per_user must be positive")
    rng = np.random.default_rng(angle_rng_seed)
    angles = rng.uniform(-np.pi / 2, np.pi / 2, size=(n_users, n_paths_per_user))
    gains = (rng.standard_normal((n_users, n_paths_per_user))
             + 1j * rng.standard_normal((n_users, n_paths_per_user))) / np.sqrt(2.0)
    return geometric_channel_from_paths(n_rx, angles, gains, n_subcarriers)


def dft_codebook(n_rx: int) -> BeamCodebook:
    """Unitary DFT codebook: row m is [exp(-j 2 pi m k / N_r)]_k / sqrt(N_r)."""
    if n_rx < 1:
        raise ValueError("n_rx must be positive")
    m = np.arange(n_rx)
    beams = np.exp(-2j * np.pi * np.outer(m, m) / n_rx) / np.sqrt(n_rx)
    return BeamCodebook(beams)


# ==================== POWER PROFILES ====================

def flat_power_profile(n_subcarriers: int, user_powers: Sequence[float]) -> PowerProfile:
    """Same per-user linear power on every subcarrier."""
    p = np.asarray(user_powers, dtype=float)
    return PowerProfile(np.tile(p, (n_subcarriers, 1)))


def snr_power_profile(n_subcarriers: int, n_users: int, snr_range_db: Sequence[float],
                      offset_db: float = 0.0, rng_seed: int = 0) -> PowerProfile:
    """
    Per-user powers drawn uniformly in dB over snr_range_db, shifted by offset_db.

    Stands in for path loss and user drop geometry; noise power is 1.
    """
    lo, hi = float(snr_range_db[0]), float(snr_range_db[1])
    if hi < lo:
        raise ValueError(f"snr range [{lo}, {hi}] is empty")
    rng = np.random.default_rng(rng_seed)
    snr_db = rng.uniform(lo, hi, size=n_users) + offset_db
    return flat_power_profile(n_subcarriers, 10.0 ** (snr_db / 10.0))


def build_instance(channel: ChannelRealization, power: PowerProfile,
                   codebook: BeamCodebook, users: UserState,
                   adc_table=None) -> ProblemInstance:
    instance = ProblemInstance(channel, power, codebook, users, adc_table)
    logger.debug("Built instance N_r=%d K=%d L=%d N=%d |W|=%d",
                 channel.n_rx, channel.n_users, channel.n_taps,
                 channel.n_subcarriers, codebook.size)
    return instance
