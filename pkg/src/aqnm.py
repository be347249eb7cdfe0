"""
Additive Quantization Noise Model
Quantization scalars for ADC bit resolutions, per-beam input variances and
the whitened per-subcarrier channel seen after the ADC bank
"""
import json
import logging
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import norm

from src.instance import ChannelRealization, PowerProfile, ProblemInstance

logger = logging.getLogger(__name__)

INF_BITS = math.inf
DEFAULT_A_CONST = math.pi * math.sqrt(3.0) / 2.0
DEFAULT_LUT_PATH = Path(__file__).parent / "data" / "adc_lut.json"

Bits = Union[int, float]


# ==================== LLOYD-MAX GENERATOR ====================

def lloyd_max_quantizer(bits: int, tol: float = 1e-10,
                        max_iter: int = 10_000) -> Tuple[np.ndarray, float]:
    """
    MMSE scalar quantizer of a unit-variance Gaussian by Lloyd-Max iteration.

    Starts from the companded (N(0, 3) quantile) placement and alternates
    midpoint thresholds with centroid levels.

    Returns:
        levels: the 2^bits reconstruction levels
        distortion: mean squared error of the quantizer
    """
    if bits < 1:
        raise ValueError(f"bits must be >= 1, got {bits}")
    n_levels = 2 ** int(bits)
    levels = np.sqrt(3.0) * norm.ppf((np.arange(n_levels) + 0.5) / n_levels)

    for iteration in range(max_iter):
        edges = np.concatenate(([-np.inf], 0.5 * (levels[1:] + levels[:-1]), [np.inf]))
        prob = np.diff(norm.cdf(edges))
        updated = (norm.pdf(edges[:-1]) - norm.pdf(edges[1:])) / prob
        step = float(np.max(np.abs(updated - levels)))
        levels = updated
        if step < tol:
            break
    else:
        logger.warning("Lloyd-Max for %d bits stopped after %d iterations (step %.3g)",
                       bits, max_iter, step)

    edges = np.concatenate(([-np.inf], 0.5 * (levels[1:] + levels[:-1]), [np.inf]))
    prob = np.diff(norm.cdf(edges))
    distortion = float(1.0 - np.sum(prob * levels ** 2))
    logger.debug("Lloyd-Max %d bits: distortion %.10f after %d iterations",
                 bits, distortion, iteration + 1)
    return levels, distortion


def lloyd_max_distortion(bits: int, tol: float = 1e-10, max_iter: int = 10_000) -> float:
    return lloyd_max_quantizer(bits, tol, max_iter)[1]


# ==================== ADC TABLE ====================

@dataclass(frozen=True)
class AdcTable:
    """
    Monotone map from ADC bit resolution to the quantization scalar alpha.

    lut covers b = 1..b_lut_max; above that alpha = 1 - a_const * 2^(-2b).
    INF_BITS is the perfect-quantizer sentinel with alpha = 1.
    """
    lut: Dict[int, float]
    a_const: float = DEFAULT_A_CONST
    b_lut_max: int = 5

    def __post_init__(self):
        lut = {int(b): float(a) for b, a in self.lut.items()}
        object.__setattr__(self, "lut", lut)
        if sorted(lut) != list(range(1, self.b_lut_max + 1)):
            raise ValueError(f"lut must cover exactly b = 1..{self.b_lut_max}")
        if self.a_const <= 0:
            raise ValueError("a_const must be positive")
        # one bit past the table checks the LUT -> formula boundary
        alphas = [lut[b] for b in range(1, self.b_lut_max + 1)]
        alphas.append(self._formula(self.b_lut_max + 1))
        if any(not 0.0 < a < 1.0 for a in alphas):
            raise ValueError("alpha must lie strictly inside (0, 1) for finite bits")
        if any(hi <= lo for lo, hi in zip(alphas, alphas[1:])):
            raise ValueError("alpha must be strictly increasing in the bit resolution")

    def _formula(self, bits: int) -> float:
        return 1.0 - self.a_const * 2.0 ** (-2 * bits)

    def alpha(self, bits: Bits) -> float:
        if bits == INF_BITS:
            return 1.0
        if bits != int(bits) or bits <= 0:
            raise ValueError(f"bit resolution must be a positive integer or INF_BITS, got {bits}")
        bits = int(bits)
        if bits <= self.b_lut_max:
            return self.lut[bits]
        return self._formula(bits)

    @classmethod
    def from_lloyd_max(cls, b_lut_max: int = 5, a_const: float = DEFAULT_A_CONST,
                       tol: float = 1e-10, max_iter: int = 10_000) -> "AdcTable":
        lut = {b: 1.0 - lloyd_max_distortion(b, tol, max_iter) for b in range(1, b_lut_max + 1)}
        return cls(lut, a_const, b_lut_max)

    @classmethod
    def default(cls) -> "AdcTable":
        """The persisted Lloyd-Max table (see scripts/generate_adc_table.py)."""
        return _load_default_table()

    def to_dict(self) -> dict:
        return {"lut": {str(b): a for b, a in sorted(self.lut.items())},
                "a_const": self.a_const, "b_lut_max": self.b_lut_max}

    @classmethod
    def from_dict(cls, data: dict) -> "AdcTable":
        return cls({int(b): float(a) for b, a in data["lut"].items()},
                   float(data.get("a_const", DEFAULT_A_CONST)),
                   int(data.get("b_lut_max", 5)))


_default_table: Optional[AdcTable] = None
_default_lock = threading.Lock()


def _load_default_table() -> AdcTable:
    global _default_table
    with _default_lock:
        if _default_table is None:
            with open(DEFAULT_LUT_PATH, "r", encoding="utf-8") as f:
                _default_table = AdcTable.from_dict(json.load(f))
        return _default_table


def alpha_of(bits: Bits, table: Optional[AdcTable] = None) -> float:
    """Quantization scalar for a bit resolution (1.0 for INF_BITS)."""
    return (table or AdcTable.default()).alpha(bits)


# ==================== BEAM VARIANCE (LEMMA 1) ====================

@dataclass(frozen=True)
class BeamVariance:
    """Per-sample variance at the ADC input of one beam (noise power 1)."""
    psi: float

    def __post_init__(self):
        if not self.psi >= 1.0 - 1e-12:
            raise ValueError(f"beam variance cannot fall below the noise floor, got {self.psi}")


def beam_variance(channel: ChannelRealization, power: PowerProfile,
                  beam: np.ndarray) -> BeamVariance:
    """
    psi = 1 + (1/N) sum_n || beam G_n D_n^{1/2} ||^2

    Depends on this beam only; the other selected beams never enter.
    """
    beam = np.asarray(beam, dtype=complex).ravel()
    if beam.size != channel.n_rx:
        raise ValueError(f"beam length {beam.size} != N_r = {channel.n_rx}")
    if power.n_subcarriers != channel.n_subcarriers or power.n_users != channel.n_users:
        raise ValueError("power profile does not match the channel dimensions")
    v = np.einsum("r,nrk->nk", beam, channel.responses)
    energy = np.sum(np.abs(v) ** 2 * power.loads, axis=1)
    return BeamVariance(float(1.0 + np.mean(energy)))


def first_block_row(channel: ChannelRealization) -> np.ndarray:
    """[H_0, 0, ..., 0, H_{L-1}, ..., H_1] of the block-circulant time-domain channel."""
    n, n_rx, k = channel.n_subcarriers, channel.n_rx, channel.n_users
    row = np.zeros((n_rx, n * k), dtype=complex)
    for ell in range(channel.n_taps):
        j = (-ell) % n
        row[:, j * k:(j + 1) * k] = channel.taps[ell]
    return row


def beam_variance_time_domain(channel: ChannelRealization, power: PowerProfile,
                              beam: np.ndarray) -> BeamVariance:
    """
    psi from the time-domain covariance:
        1 + w B (F^H kron I_K) D (F kron I_K) B^H w^H
    with B the first block row and F the unitary DFT matrix.
    """
    n, k = channel.n_subcarriers, channel.n_users
    idx = np.arange(n)
    dft = np.exp(-2j * np.pi * np.outer(idx, idx) / n) / np.sqrt(n)
    f_kron = np.kron(dft, np.eye(k))
    d = np.diag(power.loads.ravel())
    cov = f_kron.conj().T @ d @ f_kron
    wb = np.asarray(beam, dtype=complex).ravel() @ first_block_row(channel)
    return BeamVariance(float(1.0 + np.real(wb @ cov @ wb.conj())))


# ==================== EFFECTIVE GAIN ====================

def effective_gain(alpha: float, psi: Union[float, BeamVariance]) -> float:
    """
    Whitened per-beam power gain t = alpha^2 / gamma with
        gamma = alpha^2 + alpha (1 - alpha) psi
    """
    if isinstance(psi, BeamVariance):
        psi = psi.psi
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if psi < 1.0 - 1e-12:
        raise ValueError(f"psi must be >= 1, got {psi}")
    gamma = alpha * alpha + alpha * (1.0 - alpha) * psi
    return alpha * alpha / gamma


# ==================== WHITENED CHANNEL ====================

@dataclass(frozen=True, eq=False)
class EffectiveChannel:
    """
    L_{G,n} = T_G^{1/2} W_G G_n D_n^{1/2} for every subcarrier.

    per_subcarrier has shape (N, rows, K); row m belongs to beam_order[m].
    Columns follow sorted-weight user order.
    """
    per_subcarrier: np.ndarray
    beam_order: Tuple[int, ...]
    bits: Tuple[Bits, ...] = field(default=())

    @property
    def n_rows(self) -> int:
        return self.per_subcarrier.shape[1]


class QuantizedFrontEnd:
    """
    Per-instance memo of beam variances and effective gains.

    psi is computed for every codebook beam once, at construction; the
    (beam, bits) -> t cache is guarded by a lock so evaluators may share it
    across threads. With ignore_quantization every tuple gets t = 1.
    """

    def __init__(self, instance: ProblemInstance, table: Optional[AdcTable] = None,
                 ignore_quantization: bool = False):
        self.instance = instance
        self.table = table or instance.adc_table
        self.ignore_quantization = ignore_quantization
        proj = instance.projections
        self.psi = 1.0 + np.mean(np.sum(np.abs(proj) ** 2, axis=2), axis=0)
        self.psi.setflags(write=False)
        self._gains: Dict[Tuple[int, Bits], float] = {}
        self._lock = threading.Lock()

    def gain(self, beam: int, bits: Bits) -> float:
        if self.ignore_quantization:
            return 1.0
        key = (beam, bits)
        with self._lock:
            cached = self._gains.get(key)
        if cached is not None:
            return cached
        t = effective_gain(self.table.alpha(bits), float(self.psi[beam]))
        with self._lock:
            self._gains[key] = t
        return t

    def effective_channel(self, pruned: Sequence[Tuple[int, Bits]]) -> EffectiveChannel:
        """Rows for already-pruned (beam, bits) pairs, in the given order."""
        proj = self.instance.projections
        n, _, k = proj.shape
        if len(pruned) == 0:
            return EffectiveChannel(np.zeros((n, 0, k), dtype=complex), ())
        beams = [int(b) for b, _ in pruned]
        scale = np.sqrt([self.gain(b, bits) for b, bits in pruned])
        rows = proj[:, beams, :] * scale[None, :, None]
        return EffectiveChannel(rows, tuple(beams), tuple(bits for _, bits in pruned))


def whitened_channel(selection: Iterable, instance: ProblemInstance,
                     table: Optional[AdcTable] = None) -> EffectiveChannel:
    """
    Effective channel of a selection after pruning to distinct beams at
    their maximal selected bits. An empty selection yields zero rows.
    """
    from src.rate import Selection, prune

    pruned = prune(Selection.of(selection))
    return QuantizedFrontEnd(instance, table).effective_channel(pruned.ordered())
