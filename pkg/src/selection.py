"""
Beam and Bit Selection
Ground set and energy costs, the submodular constraints c' and d', the
multiplicative-updates selector with lazy evaluations, fixed-resolution
greedy baselines, random selection and an exact enumeration oracle
"""
import heapq
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Tuple, Union

import numpy as np

from src.aqnm import INF_BITS, Bits
from src.rate import BeamTuple, ProblemSizeError, RateEvaluator, Selection, prune

logger = logging.getLogger(__name__)

GAIN_TOL = 1e-12
FEAS_TOL = 1e-12
MAX_ORACLE_BEAMS = 10
MAX_ORACLE_BITS = 4


# ==================== COSTS ====================

@dataclass(frozen=True, eq=False)
class CostModel:
    """
    Energy cost eps_w + eps'_{b, b_ref} + theta 2^b per tuple, with an energy
    budget and a cap on the number of active RF chains.
    """
    theta: float
    b_ref: int
    budget_E: float
    budget_M: int
    eps_default: float = 0.0
    eps_beam: Mapping[int, float] = field(default_factory=dict)
    eps_switch: Mapping[Tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self):
        if self.theta <= 0:
            raise ValueError("theta must be positive")
        if self.budget_E <= 0:
            raise ValueError("energy budget must be positive")
        if int(self.budget_M) < 1:
            raise ValueError("chain cap must be at least 1")
        costs = [self.eps_default, *self.eps_beam.values(), *self.eps_switch.values()]
        if any(c < 0 for c in costs):
            raise ValueError("all cost terms must be nonnegative")

    def beam_cost(self, beam: int) -> float:
        return float(self.eps_beam.get(beam, self.eps_default))

    def switch_cost(self, bits: int) -> float:
        return float(self.eps_switch.get((bits, self.b_ref), 0.0))

    def with_budgets(self, budget_E: Optional[float] = None,
                     budget_M: Optional[int] = None) -> "CostModel":
        return replace(self,
                       budget_E=self.budget_E if budget_E is None else budget_E,
                       budget_M=self.budget_M if budget_M is None else budget_M)


def tuple_cost(t: BeamTuple, cm: CostModel) -> float:
    """eps_w(beam) + eps'(b, b_ref) + theta 2^b."""
    beam, bits = t
    if bits == INF_BITS:
        raise ValueError("infinite-resolution tuples carry no energy cost")
    if bits != int(bits) or bits < 1:
        raise ValueError(f"bit resolution must be a positive integer, got {bits}")
    bits = int(bits)
    return cm.beam_cost(beam) + cm.switch_cost(bits) + cm.theta * 2.0 ** bits


def selection_cost(selection: Iterable, cm: CostModel) -> float:
    """Modular cost c(G): the sum of tuple costs."""
    return float(sum(tuple_cost(t, cm) for t in Selection.of(selection).ordered()))


def c_prime(selection: Iterable, cm: CostModel) -> float:
    """Sum over distinct beams of the largest normalized tuple cost on that beam."""
    per_beam: Dict[int, float] = {}
    for t in Selection.of(selection).ordered():
        cost = tuple_cost(t, cm) / cm.budget_E
        per_beam[t.beam] = max(per_beam.get(t.beam, 0.0), cost)
    return float(sum(per_beam.values()))


def d_prime(selection: Iterable, cm: CostModel) -> float:
    """Number of distinct beams over the chain cap."""
    return len(Selection.of(selection).beams()) / cm.budget_M


# ==================== GROUND SET ====================

@dataclass(frozen=True, eq=False)
class GroundSet:
    """All (beam, bits) tuples that individually fit the energy budget."""
    tuples: Tuple[BeamTuple, ...]
    costs: Dict[BeamTuple, float]
    n_removed: int = 0

    @classmethod
    def build(cls, beam_ids: Iterable[int], bit_levels: Iterable[int],
              cm: CostModel) -> "GroundSet":
        tuples, costs, removed = [], {}, 0
        for beam in sorted(set(int(b) for b in beam_ids)):
            for bits in sorted(set(int(b) for b in bit_levels)):
                t = BeamTuple(beam, bits)
                cost = tuple_cost(t, cm)
                if cost > cm.budget_E * (1.0 + FEAS_TOL):
                    removed += 1
                    continue
                tuples.append(t)
                costs[t] = cost
        if removed:
            logger.debug("Removed %d tuples costlier than the budget %.4g", removed, cm.budget_E)
        return cls(tuple(tuples), costs, removed)

    def __len__(self) -> int:
        return len(self.tuples)

    def beams(self) -> List[int]:
        return sorted({t.beam for t in self.tuples})

    def bit_levels(self) -> List[int]:
        return sorted({t.bits for t in self.tuples})

    def options(self, beam: int) -> List[int]:
        return sorted(t.bits for t in self.tuples if t.beam == beam)

    def max_bits_selection(self) -> Selection:
        """Every beam at its highest available resolution."""
        return prune(Selection(frozenset(self.tuples)))


def dynamic_range(b_ref: int, delta: int, b_min: int = 1, b_max: int = 12) -> List[int]:
    """Adaptive resolutions max(b_min, b_ref - delta) .. min(b_max, b_ref + delta)."""
    return list(range(max(b_min, b_ref - delta), min(b_max, b_ref + delta) + 1))


# ==================== SEARCH STATE ====================

class Candidate(NamedTuple):
    tuple: BeamTuple
    gain: float
    ratio: float


@dataclass
class AlgorithmStep:
    """One augmentation of the multiplicative-updates loop."""
    iteration: int
    chosen: BeamTuple
    gain: float
    c_marginal: float
    d_marginal: float
    zeta_c: float
    zeta_d: float
    value: float

    def line(self) -> str:
        return (f"iter={self.iteration} tuple=({self.chosen.beam},{self.chosen.bits}) "
                f"dh={self.gain:.6g} dc={self.c_marginal:.6g} dd={self.d_marginal:.6g} "
                f"zeta1={self.zeta_c:.6g} zeta2={self.zeta_d:.6g} V={self.value:.6g}")


class SearchState:
    """
    Current selection of the joint selector with its weights zeta_c, zeta_d.

    c' and d' marginals are kept exactly through the per-beam maximal
    normalized cost, so they never need an h' evaluation.
    """

    def __init__(self, evaluator: RateEvaluator, ground: GroundSet, cm: CostModel,
                 use_c: bool = True, use_d: bool = True, min_gain_rel: float = 0.0):
        self.evaluator = evaluator
        self.ground = ground
        self.cm = cm
        self.use_c = use_c
        self.use_d = use_d
        self.min_gain_rel = min_gain_rel
        self.selection = Selection()
        self.zeta_c = 1.0
        self.zeta_d = 1.0
        self.value = 0.0
        self.beam_cost: Dict[int, float] = {}

    def norm_cost(self, e: BeamTuple) -> float:
        return self.ground.costs[e] / self.cm.budget_E

    def c_marginal(self, e: BeamTuple) -> float:
        current = self.beam_cost.get(e.beam)
        if current is None:
            return self.norm_cost(e)
        return max(0.0, self.norm_cost(e) - current)

    def d_marginal(self, e: BeamTuple) -> float:
        return 0.0 if e.beam in self.beam_cost else 1.0 / self.cm.budget_M

    @property
    def c_total(self) -> float:
        return float(sum(self.beam_cost.values()))

    @property
    def d_total(self) -> float:
        return len(self.beam_cost) / self.cm.budget_M

    def feasible(self, e: BeamTuple) -> bool:
        return (self.c_total + self.c_marginal(e) <= 1.0 + FEAS_TOL and
                self.d_total + self.d_marginal(e) <= 1.0 + FEAS_TOL)

    def denominator(self, e: BeamTuple) -> float:
        denom = 0.0
        if self.use_c:
            denom += self.zeta_c * self.c_marginal(e)
        if self.use_d:
            denom += self.zeta_d * self.d_marginal(e)
        return denom

    def ratio(self, e: BeamTuple, gain: float) -> float:
        denom = self.denominator(e)
        # a free strict improvement is taken first
        return math.inf if denom <= 0.0 else gain / denom

    def denominator_floor(self, e: BeamTuple) -> float:
        """Lower bound on the denominator of e in this and every later round."""
        if e.beam in self.beam_cost:
            return 0.0
        floor = 0.0
        if self.use_c:
            floor += self.zeta_c * self.norm_cost(e)
        if self.use_d:
            floor += self.zeta_d / self.cm.budget_M
        return floor

    def gain_floor(self) -> float:
        """Marginal gains at or below this count as no improvement; never decreases."""
        return max(GAIN_TOL, self.min_gain_rel * self.value)

    def running(self, theta: float) -> bool:
        return ((not self.use_c or self.zeta_c <= theta) and
                (not self.use_d or self.zeta_d <= theta))

    def augment(self, candidate: Candidate, theta: float) -> AlgorithmStep:
        e = candidate.tuple
        dc, dd = self.c_marginal(e), self.d_marginal(e)
        self.selection = self.selection.with_tuple(e)
        self.beam_cost[e.beam] = max(self.beam_cost.get(e.beam, 0.0), self.norm_cost(e))
        self.value += candidate.gain
        self.zeta_c *= theta ** dc
        self.zeta_d *= theta ** dd
        return AlgorithmStep(len(self.selection), e, candidate.gain, dc, dd,
                             self.zeta_c, self.zeta_d, self.value)


def exhaustive_argmax(state: SearchState) -> Optional[Candidate]:
    """Best ratio over every feasible untried tuple with positive gain."""
    best = None
    for e in state.ground.tuples:
        if e in state.selection or not state.feasible(e):
            continue
        gain = state.evaluator.marginal(state.selection, e)
        if gain <= state.gain_floor():
            continue
        ratio = state.ratio(e, gain)
        if best is None or ratio > best.ratio:
            best = Candidate(e, gain, ratio)
    return best


class LazyMarginals:
    """
    Max-heap of upper bounds on each tuple's ratio.

    A stale gain bounds the current one (h' is submodular) and the
    denominator floor bounds every later denominator while the tuple's
    beam stays unselected. When a beam gets selected its tuples are
    re-keyed to an infinite bound so they are refreshed every round.
    """

    def __init__(self, state: SearchState):
        self._heap: List[Tuple[float, BeamTuple, int]] = []
        self._version: Dict[BeamTuple, int] = {}
        self._dead = set()
        for e in state.ground.tuples:
            self._push(e, math.inf)

    def _push(self, e: BeamTuple, bound: float):
        version = self._version.get(e, -1) + 1
        self._version[e] = version
        heapq.heappush(self._heap, (-bound, e, version))

    def _bound(self, state: SearchState, e: BeamTuple, gain: float) -> float:
        floor = state.denominator_floor(e)
        if floor <= 0.0:
            return math.inf
        # slack keeps the bound above the refreshed value under rounding
        return (gain * (1.0 + 1e-9) + 1e-12) / floor

    def argmax(self, state: SearchState) -> Optional[Candidate]:
        best: Optional[Candidate] = None
        refreshed: List[Tuple[BeamTuple, float]] = []
        while self._heap:
            neg_bound, e, version = self._heap[0]
            if e in self._dead or version != self._version[e]:
                heapq.heappop(self._heap)
                continue
            bound = -neg_bound
            if best is not None and (best.ratio > bound or
                                     (best.ratio == bound and best.tuple < e)):
                break
            heapq.heappop(self._heap)
            if e in state.selection or not state.feasible(e):
                self._dead.add(e)
                continue
            gain = state.evaluator.marginal(state.selection, e)
            if gain <= state.gain_floor():
                self._dead.add(e)
                continue
            refreshed.append((e, gain))
            ratio = state.ratio(e, gain)
            if best is None or ratio > best.ratio or (ratio == best.ratio and e < best.tuple):
                best = Candidate(e, gain, ratio)
        for e, gain in refreshed:
            self._push(e, self._bound(state, e, gain))
        return best

    def beam_selected(self, state: SearchState, beam: int):
        for e in state.ground.tuples:
            if e.beam == beam and e not in self._dead and e not in state.selection:
                self._push(e, math.inf)


def lazy_argmax(state: SearchState, queue: LazyMarginals) -> Optional[Candidate]:
    return queue.argmax(state)


# ==================== JOINT SELECTOR ====================

def algorithm1(evaluator: RateEvaluator, ground: GroundSet, cm: CostModel,
               theta_tune: float = 2.0, lazy: bool = True,
               trace: Optional[List[AlgorithmStep]] = None,
               min_gain_rel: float = 0.0) -> Selection:
    """
    Multiplicative-updates maximization of h' under c' <= 1 and d' <= 1.

    Args:
        evaluator: objective evaluator for the instance
        ground: feasible ground set
        cm: cost model with budgets
        theta_tune: multiplicative update base (2 by default)
        lazy: use lazy evaluations instead of a full scan per round
        trace: if given, receives one AlgorithmStep per augmentation
        min_gain_rel: a tuple qualifies only if its marginal gain exceeds this
            fraction of the accumulated value (0 keeps every positive gain)

    Returns:
        The selected tuples (possibly with repeated beams; prune for the
        physical configuration)
    """
    if min_gain_rel < 0.0:
        raise ValueError(f"min_gain_rel must be nonnegative, got {min_gain_rel}")
    if len(ground) == 0:
        return Selection()
    omega = Selection(frozenset(ground.tuples))
    use_c = c_prime(omega, cm) > 1.0
    use_d = d_prime(omega, cm) > 1.0
    if not use_c and not use_d:
        logger.info("Both budgets are vacuous; selecting every beam at maximal bits")
        return ground.max_bits_selection()

    state = SearchState(evaluator, ground, cm, use_c, use_d, min_gain_rel)
    queue = LazyMarginals(state) if lazy else None
    while state.running(theta_tune):
        best = queue.argmax(state) if lazy else exhaustive_argmax(state)
        if best is None:
            break
        new_beam = best.tuple.beam not in state.beam_cost
        step = state.augment(best, theta_tune)
        if lazy and new_beam:
            queue.beam_selected(state, best.tuple.beam)
        logger.debug(step.line())
        if trace is not None:
            trace.append(step)

    if state.zeta_c > theta_tune ** 2 or state.zeta_d > theta_tune ** 2:
        raise RuntimeError(f"zeta overflow: {state.zeta_c}, {state.zeta_d}")

    # post-processing: the best single tuple may beat the accumulation
    best_single, best_value = None, -math.inf
    for e in ground.tuples:
        value = evaluator.wsr(Selection(frozenset([e])))
        if value > best_value:
            best_single, best_value = e, value
    if best_value > state.value:
        logger.debug("Single tuple %s (%.6g) beats accumulated value %.6g",
                     best_single, best_value, state.value)
        return Selection(frozenset([best_single]))
    return state.selection


# ==================== BASELINES ====================

def greedy_fixed_bits(evaluator: RateEvaluator, beam_ids: Iterable[int], b_fixed: Bits,
                      n_select: int) -> Selection:
    """
    Plain greedy over beams at one resolution, under a cardinality cap only.

    Each round scores every remaining beam and adds the best one, even at
    zero gain, until n_select beams are active.
    """
    remaining = sorted(set(int(b) for b in beam_ids))
    chosen = Selection()
    while remaining and len(chosen) < n_select:
        base = evaluator.wsr(chosen)
        best_beam, best_gain = None, -math.inf
        for beam in remaining:
            gain = evaluator.wsr(chosen.with_tuple(BeamTuple(beam, b_fixed))) - base
            if gain > best_gain:
                best_beam, best_gain = beam, gain
        chosen = chosen.with_tuple(BeamTuple(best_beam, b_fixed))
        remaining.remove(best_beam)
    return chosen


def qafas_select(evaluator: RateEvaluator, beam_ids: Iterable[int], b_ref: int,
                 n_chains: int) -> Selection:
    """Quantization-aware fixed-resolution subset selection at b_ref."""
    return greedy_fixed_bits(evaluator, beam_ids, b_ref, n_chains)


def fas_select(evaluator: RateEvaluator, beam_ids: Iterable[int], b_ref: int,
               n_chains: int) -> Selection:
    """
    Quantization-unaware subset selection: beams are scored as if the ADCs
    were perfect, then operated at b_ref.
    """
    ideal = greedy_fixed_bits(evaluator, beam_ids, INF_BITS, n_chains)
    return Selection(frozenset(BeamTuple(t.beam, b_ref) for t in ideal.tuples))


def random_select(ground: GroundSet, cm: CostModel,
                  rng: Union[np.random.Generator, int, None] = None) -> Selection:
    """Random feasible augmentations with new beams until nothing fits."""
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    chosen = Selection()
    spent = 0.0
    while len(chosen) < cm.budget_M:
        used = chosen.beams()
        fits = [t for t in ground.tuples
                if t.beam not in used and spent + ground.costs[t] <= cm.budget_E * (1.0 + FEAS_TOL)]
        if not fits:
            break
        pick = fits[int(rng.integers(len(fits)))]
        chosen = chosen.with_tuple(pick)
        spent += ground.costs[pick]
    return chosen


# ==================== EXACT ORACLE ====================

def brute_force_opt(evaluator: RateEvaluator, ground: GroundSet,
                    cm: CostModel) -> Tuple[Selection, float]:
    """
    Exact maximizer of h' under c(G) <= E, distinct beams and |G| <= M'.

    Enumerates per-beam (off | resolution) assignments depth first, pruned
    by both budgets, and scores only maximal assignments (no beam can be
    added or upgraded within budget); h' is monotone so one of them is optimal.
    """
    beams = ground.beams()
    if len(beams) > MAX_ORACLE_BEAMS or len(ground.bit_levels()) > MAX_ORACLE_BITS:
        raise ProblemSizeError(
            f"brute force supports |W| <= {MAX_ORACLE_BEAMS} and |B| <= {MAX_ORACLE_BITS}, "
            f"got {len(beams)} and {len(ground.bit_levels())}")
    options = {b: ground.options(b) for b in beams}
    limit = cm.budget_E * (1.0 + FEAS_TOL)
    best_sel, best_value = Selection(), 0.0
    assignment: Dict[int, int] = {}

    def maximal(spent: float) -> bool:
        room = len(assignment) < cm.budget_M
        for beam in beams:
            bits = assignment.get(beam)
            if bits is None:
                if room and any(spent + ground.costs[BeamTuple(beam, b)] <= limit
                                for b in options[beam]):
                    return False
                continue
            base = spent - ground.costs[BeamTuple(beam, bits)]
            if any(base + ground.costs[BeamTuple(beam, b)] <= limit
                   for b in options[beam] if b > bits):
                return False
        return True

    def visit(i: int, spent: float):
        nonlocal best_sel, best_value
        if i == len(beams):
            if assignment and maximal(spent):
                sel = Selection(frozenset(BeamTuple(b, bits) for b, bits in assignment.items()))
                value = evaluator.wsr(sel)
                if value > best_value:
                    best_sel, best_value = sel, value
            return
        beam = beams[i]
        visit(i + 1, spent)
        if len(assignment) >= cm.budget_M:
            return
        for bits in options[beam]:
            cost = ground.costs[BeamTuple(beam, bits)]
            if spent + cost > limit:
                continue
            assignment[beam] = bits
            visit(i + 1, spent + cost)
            del assignment[beam]

    visit(0, 0.0)
    return best_sel, best_value
