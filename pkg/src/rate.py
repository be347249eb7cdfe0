"""
Queue-Constrained Weighted Sum Rate
Set functions over (beam, bits) selections: per-user-subset sum rates f,
queue-limited level values g, the weighted objective h' and the
corner-point rate assignment
"""
import logging
import threading
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from src.aqnm import Bits, QuantizedFrontEnd
from src.instance import ProblemInstance, UserState

logger = logging.getLogger(__name__)

MAX_EXHAUSTIVE_USERS = 20


class ProblemSizeError(ValueError):
    """An exact (exponential) routine was asked to run beyond its size cap."""


# ==================== SELECTIONS ====================

class BeamTuple(NamedTuple):
    """One ground-set element: a codebook beam and the bits of its ADC."""
    beam: int
    bits: Bits


@dataclass(frozen=True)
class Selection:
    """A set of (beam, bits) tuples; duplicates of a beam are allowed."""
    tuples: FrozenSet[BeamTuple] = frozenset()

    @classmethod
    def of(cls, items: Iterable = ()) -> "Selection":
        if isinstance(items, Selection):
            return items
        tuples = []
        for item in items:
            if isinstance(item, dict):
                tuples.append(BeamTuple(int(item["beam"]), item["bits"]))
            else:
                beam, bits = item
                tuples.append(BeamTuple(int(beam), bits))
        return cls(frozenset(tuples))

    def ordered(self) -> List[BeamTuple]:
        """Tuples sorted by (beam_id, bits)."""
        return sorted(self.tuples)

    @property
    def key(self) -> Tuple[BeamTuple, ...]:
        return tuple(self.ordered())

    def beams(self) -> FrozenSet[int]:
        return frozenset(t.beam for t in self.tuples)

    def is_matroid_feasible(self) -> bool:
        return len(self.beams()) == len(self.tuples)

    def with_tuple(self, t: BeamTuple) -> "Selection":
        return Selection(self.tuples | {BeamTuple(int(t[0]), t[1])})

    def __len__(self) -> int:
        return len(self.tuples)

    def __iter__(self):
        return iter(self.ordered())

    def __contains__(self, t) -> bool:
        return BeamTuple(int(t[0]), t[1]) in self.tuples


def prune(selection: Selection) -> Selection:
    """Keep one tuple per distinct beam, at the maximal bits selected for it."""
    best: Dict[int, Bits] = {}
    for beam, bits in selection.tuples:
        if beam not in best or bits > best[beam]:
            best[beam] = bits
    return Selection(frozenset(BeamTuple(b, bits) for b, bits in best.items()))


# ==================== RATE ASSIGNMENT ====================

@dataclass(frozen=True, eq=False)
class RateAssignment:
    """Corner-point rates in sorted-weight order (bits per OFDM symbol)."""
    rates: np.ndarray
    users: UserState

    def weighted_sum(self) -> float:
        return float(np.dot(self.users.weights, self.rates))

    def by_user_id(self) -> np.ndarray:
        """Rates indexed by the original user ids."""
        out = np.empty_like(self.rates)
        out[self.users.order] = self.rates
        return out


# ==================== EVALUATOR ====================

def _logdet2(mats: np.ndarray) -> np.ndarray:
    """log2 det of a stack of Hermitian positive definite matrices, via Cholesky."""
    chol = np.linalg.cholesky(mats)
    diag = np.real(np.diagonal(chol, axis1=-2, axis2=-1))
    return 2.0 * np.sum(np.log2(diag), axis=-1)


class RateEvaluator:
    """
    Memoized evaluator of f^(A), g^(l) and h' for one problem instance.

    Every cache is keyed on the pruned selection, so a selection and its
    pruned form always share values bit for bit. hprime_evals counts fresh
    h' evaluations (memo misses); hprime_requests counts every call.
    """

    def __init__(self, instance: ProblemInstance, front_end: Optional[QuantizedFrontEnd] = None,
                 ignore_quantization: bool = False):
        self.instance = instance
        self.users = instance.users
        self.front_end = front_end or QuantizedFrontEnd(
            instance, ignore_quantization=ignore_quantization)
        self.hprime_evals = 0
        self.hprime_requests = 0
        self._rows: Dict[tuple, np.ndarray] = {}
        self._f: Dict[Tuple[tuple, int], float] = {}
        self._levels: Dict[tuple, np.ndarray] = {}
        self._h: Dict[tuple, float] = {}
        self._lock = threading.RLock()

    @property
    def n_users(self) -> int:
        return self.users.n_users

    def reset_counters(self):
        self.hprime_evals = 0
        self.hprime_requests = 0

    # -------------------- internals --------------------

    def _pruned_key(self, selection) -> tuple:
        return prune(Selection.of(selection)).key

    def _channel(self, key: tuple) -> np.ndarray:
        with self._lock:
            rows = self._rows.get(key)
            if rows is None:
                rows = self.front_end.effective_channel(key).per_subcarrier
                self._rows[key] = rows
            return rows

    def _mask(self, users_subset: Iterable[int]) -> int:
        mask = 0
        for k in users_subset:
            if not 1 <= k <= self.n_users:
                raise IndexError(f"user index {k} outside 1..{self.n_users}")
            mask |= 1 << (k - 1)
        return mask

    def _f_mask(self, key: tuple, mask: int) -> float:
        if mask == 0 or len(key) == 0:
            return 0.0
        with self._lock:
            cached = self._f.get((key, mask))
        if cached is not None:
            return cached
        cols = [k for k in range(self.n_users) if mask >> k & 1]
        rows = self._channel(key)[:, :, cols]
        n_rows, n_cols = rows.shape[1], rows.shape[2]
        # log|I + L L^H| = log|I + L^H L|; factor the smaller side
        if n_cols <= n_rows:
            gram = np.eye(n_cols) + np.conj(np.swapaxes(rows, 1, 2)) @ rows
        else:
            gram = np.eye(n_rows) + rows @ np.conj(np.swapaxes(rows, 1, 2))
        value = float(np.sum(_logdet2(gram)))
        with self._lock:
            self._f[(key, mask)] = value
        return value

    def _prefix_rates(self, key: tuple) -> np.ndarray:
        """f^(U_l) for l = 1..K from one Cholesky factor of I + L^H L per subcarrier."""
        if len(key) == 0:
            return np.zeros(self.n_users)
        rows = self._channel(key)
        gram = np.eye(self.n_users) + np.conj(np.swapaxes(rows, 1, 2)) @ rows
        chol = np.linalg.cholesky(gram)
        diag = np.real(np.diagonal(chol, axis1=-2, axis2=-1))
        per_user = 2.0 * np.sum(np.log2(diag), axis=0)
        return np.cumsum(per_user)

    def _level_values(self, key: tuple) -> np.ndarray:
        with self._lock:
            cached = self._levels.get(key)
        if cached is not None:
            return cached
        queues = self.users.queues
        k = self.n_users
        full_buffer = np.cumsum(~np.isfinite(queues)) == np.arange(1, k + 1)
        if not full_buffer[-1]:
            _check_size(k)
        levels = np.zeros(k)
        prefix = None
        for ell in range(1, k + 1):
            if full_buffer[ell - 1]:
                if prefix is None:
                    prefix = self._prefix_rates(key)
                levels[ell - 1] = prefix[ell - 1]
            else:
                levels[ell - 1] = self._minimize_level(key, ell)[0]
        levels.setflags(write=False)
        with self._lock:
            self._levels[key] = levels
        return levels

    def _level_terms(self, key: tuple, ell: int):
        queues = self.users.queues[:ell]
        full = (1 << ell) - 1
        for mask in range(1 << ell):
            left_out = full & ~mask
            q = float(sum(queues[i] for i in range(ell) if left_out >> i & 1))
            if not np.isfinite(q):
                continue
            yield mask, q + self._f_mask(key, mask)

    def _minimize_level(self, key: tuple, ell: int) -> Tuple[float, int]:
        _check_size(ell)
        best_val, best_mask = np.inf, 0
        for mask, value in self._level_terms(key, ell):
            if value < best_val or (value == best_val and
                                    _subset_order(mask) < _subset_order(best_mask)):
                best_val, best_mask = value, mask
        return best_val, best_mask

    # -------------------- set functions --------------------

    def f_set(self, selection, users_subset: Iterable[int]) -> float:
        """
        sum_n log2 |I + L_n^(A) (L_n^(A))^H| for the pruned selection.

        users_subset holds 1-based sorted-weight user indices.
        """
        return self._f_mask(self._pruned_key(selection), self._mask(users_subset))

    def g_level(self, selection, ell: int) -> float:
        """min over A in {1..l} of Q_{{1..l} minus A} + f^(A)."""
        if not 1 <= ell <= self.n_users:
            raise IndexError(f"level {ell} outside 1..{self.n_users}")
        return float(self._level_values(self._pruned_key(selection))[ell - 1])

    def levels(self, selection) -> np.ndarray:
        """g^(1), ..., g^(K)."""
        return self._level_values(self._pruned_key(selection))

    def level_argmin(self, selection, ell: int) -> FrozenSet[int]:
        """Lexicographically smallest minimizing user subset of level l (1-based ids)."""
        if not 1 <= ell <= self.n_users:
            raise IndexError(f"level {ell} outside 1..{self.n_users}")
        _, mask = self._minimize_level(self._pruned_key(selection), ell)
        return _mask_to_users(mask)

    def level_minimizers(self, selection, ell: int, tol: float = 1e-9) -> List[FrozenSet[int]]:
        """Every user subset attaining the level-l minimum within tol."""
        if not 1 <= ell <= self.n_users:
            raise IndexError(f"level {ell} outside 1..{self.n_users}")
        _check_size(ell)
        key = self._pruned_key(selection)
        terms = list(self._level_terms(key, ell))
        best = min(v for _, v in terms)
        return [_mask_to_users(m) for m, v in terms if v <= best + tol]

    def wsr(self, selection) -> float:
        """h'(G) = sum_l (w_l - w_{l+1}) g^(l) on the pruned selection; h'(empty) = 0."""
        key = self._pruned_key(selection)
        with self._lock:
            self.hprime_requests += 1
            cached = self._h.get(key)
        if cached is not None:
            return cached
        if len(key) == 0:
            return 0.0
        value = float(np.dot(self.users.weight_steps, self._level_values(key)))
        with self._lock:
            if key not in self._h:
                self._h[key] = value
                self.hprime_evals += 1
        logger.debug("h' miss #%d for %d beams: %.6f", self.hprime_evals, len(key), value)
        return value

    def marginal(self, selection, t: BeamTuple) -> float:
        """h'(G + t) - h'(G)."""
        selection = Selection.of(selection)
        return self.wsr(selection.with_tuple(t)) - self.wsr(selection)

    def corner_rates(self, selection) -> RateAssignment:
        """R_l = g^(l) - g^(l-1), g^(0) = 0: the weight-ordered polymatroid vertex."""
        levels = self._level_values(self._pruned_key(selection))
        return RateAssignment(np.diff(levels, prepend=0.0), self.users)


def _check_size(ell: int):
    if ell > MAX_EXHAUSTIVE_USERS:
        raise ProblemSizeError(
            f"exhaustive level minimization supports at most {MAX_EXHAUSTIVE_USERS} users, got {ell}")


def _mask_to_users(mask: int) -> FrozenSet[int]:
    return frozenset(i + 1 for i in range(mask.bit_length()) if mask >> i & 1)


def _subset_order(mask: int) -> Tuple[int, ...]:
    return tuple(sorted(_mask_to_users(mask)))


# ==================== MODULE-LEVEL OPERATIONS ====================

def f_set(selection, users_subset: Sequence[int], instance: ProblemInstance) -> float:
    return RateEvaluator(instance).f_set(selection, users_subset)


def g_level(selection, ell: int, instance: ProblemInstance) -> float:
    return RateEvaluator(instance).g_level(selection, ell)


def wsr(selection, instance: ProblemInstance) -> float:
    return RateEvaluator(instance).wsr(selection)


def corner_rates(selection, instance: ProblemInstance) -> RateAssignment:
    return RateEvaluator(instance).corner_rates(selection)
