"""
Experiment Harness
Seeded Monte-Carlo drops, the matched-budget protocol, per-algorithm energy
and complexity accounting, and sweep / table aggregation with pandas
"""
import json
import logging
import math
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src.aqnm import QuantizedFrontEnd
from src.instance import (UserState, build_instance, dft_codebook, generate_geometric,
                          generate_rayleigh, snr_power_profile)
from src.io_utils import selection_to_json
from src.rate import RateEvaluator, Selection, prune
from src.selection import (AlgorithmStep, CostModel, GroundSet, algorithm1, brute_force_opt,
                           dynamic_range, fas_select, qafas_select, random_select,
                           selection_cost)

logger = logging.getLogger(__name__)

ALGORITHMS = ("joint", "qafas", "fas", "random", "brute")
SCENARIOS = ("rayleigh", "geometric")
AXES = {"power": "tx_power_dbm", "bref": "b_ref"}
B_MIN, B_MAX = 1, 12

SWEEP_COLUMNS = ["axis_name", "axis_value", "algo", "mean_wsr_bps_hz", "se_wsr",
                 "mean_energy", "se_energy", "mean_active_chains", "mean_bits_per_chain",
                 "mean_hprime_evals", "mean_runtime_ms", "n_drops", "seed"]


# ==================== CONFIGURATION ====================

@dataclass(frozen=True)
class ExperimentConfig:
    """Scenario, scale, budget and cost parameters of one experiment."""
    scenario: str = "rayleigh"
    n_rx: int = 32
    n_users: int = 8
    n_chains: int = 16
    chain_cap: int = 16
    n_subcarriers: int = 16
    n_taps: int = 4
    n_paths: int = 3
    tx_power_dbm: Union[float, Tuple[float, ...]] = 5.0
    reference_power_dbm: float = 5.0
    snr_range_db: Tuple[float, float] = (-5.0, 20.0)
    b_ref: int = 3
    b_ref_values: Tuple[int, ...] = tuple(range(1, 12))
    delta: int = 3
    eps_beam: float = 1.0
    eps_switch: float = 0.0
    theta: float = 1.0 / 16.0
    theta_tune: float = 2.0
    lazy: bool = True
    min_gain_rel: float = 5e-4
    weights: Optional[Tuple[float, ...]] = None
    queues: Optional[Tuple[float, ...]] = None
    algorithms: Tuple[str, ...] = ("joint", "qafas", "fas", "random")
    n_drops: int = 50
    seed: int = 0
    record_runtime: bool = False

    def __post_init__(self):
        if isinstance(self.tx_power_dbm, (list, tuple)):
            object.__setattr__(self, "tx_power_dbm", tuple(float(p) for p in self.tx_power_dbm))
        for name in ("snr_range_db", "b_ref_values", "algorithms"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        for name in ("weights", "queues"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, tuple(_parse_float(v) for v in value))

        if self.scenario not in SCENARIOS:
            raise ValueError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if not 1 <= self.chain_cap <= self.n_chains <= self.n_rx:
            raise ValueError(f"need 1 <= chain_cap ({self.chain_cap}) <= n_chains "
                             f"({self.n_chains}) <= n_rx ({self.n_rx})")
        for b in (self.b_ref, *self.b_ref_values):
            if not B_MIN <= b <= B_MAX:
                raise ValueError(f"reference resolution {b} outside [{B_MIN}, {B_MAX}]")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if not 0.0 <= self.min_gain_rel < 1.0:
            raise ValueError(f"min_gain_rel must lie in [0, 1), got {self.min_gain_rel}")
        if self.n_drops < 1:
            raise ValueError("n_drops must be positive")
        if len(self.snr_range_db) != 2 or self.snr_range_db[1] < self.snr_range_db[0]:
            raise ValueError(f"snr_range_db must be [lo, hi], got {self.snr_range_db}")
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown:
            raise ValueError(f"unknown algorithms {sorted(unknown)}; choose from {ALGORITHMS}")
        for name in ("weights", "queues"):
            value = getattr(self, name)
            if value is not None and len(value) != self.n_users:
                raise ValueError(f"{name} needs {self.n_users} entries, got {len(value)}")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path: Union[str, Path]) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = [_dump_float(v) for v in value]
            out[f.name] = value
        return out

    def power_values(self) -> List[float]:
        if isinstance(self.tx_power_dbm, tuple):
            return list(self.tx_power_dbm)
        return [float(self.tx_power_dbm)]

    def user_state(self) -> UserState:
        weights = np.ones(self.n_users) if self.weights is None else np.asarray(self.weights)
        queues = np.full(self.n_users, np.inf) if self.queues is None else np.asarray(self.queues)
        return UserState(weights, queues)


def _parse_float(value) -> float:
    if isinstance(value, str) and value.lower() in ("inf", "infinity"):
        return math.inf
    return float(value)


def _dump_float(value):
    return "inf" if isinstance(value, float) and math.isinf(value) else value


# ==================== COSTS ====================

def cost_model(config: ExperimentConfig, b_ref: int, budget_E: float = 1.0) -> CostModel:
    """Cost model of a config at one reference resolution (budget filled in later)."""
    bits = dynamic_range(b_ref, config.delta, B_MIN, B_MAX)
    switch = {(b, b_ref): config.eps_switch for b in bits if b != b_ref}
    return CostModel(theta=config.theta, b_ref=b_ref, budget_E=budget_E,
                     budget_M=config.chain_cap, eps_default=config.eps_beam, eps_switch=switch)


def matched_budget(cm_base: CostModel, M: int, b_ref: int) -> float:
    """Energy of M chains at b_ref: M (eps_w + theta 2^b_ref + eps'(b_ref, b_ref))."""
    per_chain = cm_base.eps_default + cm_base.theta * 2.0 ** b_ref
    per_chain += float(cm_base.eps_switch.get((b_ref, b_ref), 0.0))
    return M * per_chain


# ==================== DROPS ====================

@dataclass
class AlgoOutcome:
    """Performance of one algorithm on one drop."""
    algo: str
    selection: Selection
    wsr_bits: float
    wsr_bps_hz: float
    energy: float
    active_chains: int
    bits_per_chain: float
    hprime_evals: int
    runtime_ms: float


@dataclass
class DropResult:
    drop_index: int
    tx_power_dbm: float
    b_ref: int
    budget_E: float
    outcomes: Dict[str, AlgoOutcome] = field(default_factory=dict)

    def rows(self) -> List[dict]:
        rows = []
        for algo, o in self.outcomes.items():
            rows.append({
                "drop_index": self.drop_index, "tx_power_dbm": self.tx_power_dbm,
                "b_ref": self.b_ref, "algo": algo, "wsr_bits": o.wsr_bits,
                "wsr_bps_hz": o.wsr_bps_hz, "energy": o.energy, "budget_E": self.budget_E,
                "active_chains": o.active_chains, "bits_per_chain": o.bits_per_chain,
                "hprime_evals": o.hprime_evals, "runtime_ms": o.runtime_ms,
                "selection": selection_to_json(o.selection),
            })
        return rows


def drop_instance(config: ExperimentConfig, drop_index: int,
                  tx_power_dbm: Optional[float] = None):
    """Channel, power and users of one drop; seeds depend only on (seed, drop_index)."""
    tx = config.power_values()[0] if tx_power_dbm is None else tx_power_dbm
    channel_seed, power_seed, random_seed = np.random.SeedSequence(
        [config.seed, drop_index]).spawn(3)
    if config.scenario == "rayleigh":
        channel = generate_rayleigh(config.n_rx, config.n_users, config.n_taps,
                                    config.n_subcarriers, rng_seed=channel_seed)
    else:
        channel = generate_geometric(config.n_rx, config.n_users, config.n_paths,
                                     angle_rng_seed=channel_seed,
                                     n_subcarriers=config.n_subcarriers)
    power = snr_power_profile(config.n_subcarriers, config.n_users, config.snr_range_db,
                              offset_db=tx - config.reference_power_dbm, rng_seed=power_seed)
    instance = build_instance(channel, power, dft_codebook(config.n_rx), config.user_state())
    return instance, np.random.default_rng(random_seed)


def run_drop(config: ExperimentConfig, drop_index: int, tx_power_dbm: Optional[float] = None,
             b_ref: Optional[int] = None, algorithms: Optional[Sequence[str]] = None,
             trace: Optional[List[AlgorithmStep]] = None) -> DropResult:
    """
    Run every configured algorithm on one seeded drop.

    QAFAS and FAS operate n_chains beams at b_ref; their energy defines the
    matched budget the joint scheme and random selection must respect.
    """
    tx = config.power_values()[0] if tx_power_dbm is None else float(tx_power_dbm)
    b_ref = config.b_ref if b_ref is None else int(b_ref)
    algorithms = config.algorithms if algorithms is None else tuple(algorithms)

    instance, rng = drop_instance(config, drop_index, tx)
    front_end = QuantizedFrontEnd(instance)
    budget = matched_budget(cost_model(config, b_ref), config.n_chains, b_ref)
    cm = cost_model(config, b_ref, budget)
    ground = GroundSet.build(range(instance.codebook.size),
                             dynamic_range(b_ref, config.delta, B_MIN, B_MAX), cm)
    beams = range(instance.codebook.size)
    # random runs at b_ref, like QAFAS and FAS
    fixed_ground = GroundSet.build(beams, [b_ref], cm)

    result = DropResult(drop_index, tx, b_ref, budget)
    for algo in algorithms:
        evaluator = RateEvaluator(instance, front_end)
        start = time.perf_counter()
        if algo == "joint":
            chosen = algorithm1(evaluator, ground, cm, config.theta_tune, config.lazy, trace,
                                config.min_gain_rel)
        elif algo == "qafas":
            chosen = qafas_select(evaluator, beams, b_ref, config.n_chains)
        elif algo == "fas":
            chosen = fas_select(evaluator, beams, b_ref, config.n_chains)
        elif algo == "random":
            chosen = random_select(fixed_ground, cm, rng)
        elif algo == "brute":
            chosen, _ = brute_force_opt(evaluator, ground, cm)
        else:
            raise ValueError(f"unknown algorithm {algo!r}")
        elapsed = (time.perf_counter() - start) * 1e3
        evals = evaluator.hprime_evals

        pruned = prune(chosen)
        wsr_bits = evaluator.wsr(pruned)
        bits = [t.bits for t in pruned.ordered()]
        result.outcomes[algo] = AlgoOutcome(
            algo=algo, selection=pruned, wsr_bits=wsr_bits,
            wsr_bps_hz=wsr_bits / config.n_subcarriers,
            energy=selection_cost(pruned, cm), active_chains=len(pruned),
            bits_per_chain=float(np.mean(bits)) if bits else 0.0,
            hprime_evals=evals,
            runtime_ms=elapsed if config.record_runtime else math.nan)

    joint = result.outcomes.get("joint")
    if joint is not None and joint.energy > budget + 1e-9:
        raise RuntimeError(f"joint selection exceeds the budget: {joint.energy} > {budget}")
    logger.debug("Drop %d (tx=%.1f dBm, b_ref=%d): %s", drop_index, tx, b_ref,
                 ", ".join(f"{a}={o.wsr_bps_hz:.3f}" for a, o in result.outcomes.items()))
    return result


def solve(config: ExperimentConfig, algo: str, seed: Optional[int] = None,
          trace: bool = False) -> pd.DataFrame:
    """Per-drop rows of one algorithm at the config's first power and b_ref."""
    if algo not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algo!r}; choose from {ALGORITHMS}")
    if seed is not None:
        config = replace(config, seed=seed)
    rows = []
    for drop in range(config.n_drops):
        steps: Optional[List[AlgorithmStep]] = [] if trace else None
        result = run_drop(config, drop, algorithms=(algo,), trace=steps)
        for step in steps or []:
            logger.info("drop=%d %s", drop, step.line())
        rows.extend(result.rows())
        logger.info("Drop %d/%d: %s wsr %.4f bps/Hz", drop + 1, config.n_drops, algo,
                    result.outcomes[algo].wsr_bps_hz)
    return pd.DataFrame(rows)


# ==================== SWEEPS ====================

def _standard_error(values: np.ndarray) -> float:
    if values.size < 2:
        return 0.0
    return float(np.std(values, ddof=1) / math.sqrt(values.size))


def aggregate_drops(per_drop: pd.DataFrame, axis_name: str, axis_value, config: ExperimentConfig,
                    algorithms: Sequence[str]) -> List[dict]:
    """One sweep row per algorithm from the per-drop rows of one axis value."""
    rows = []
    for algo in algorithms:
        sub = per_drop[per_drop["algo"] == algo]
        wsr = sub["wsr_bps_hz"].to_numpy(dtype=float)
        energy = sub["energy"].to_numpy(dtype=float)
        runtime = sub["runtime_ms"].to_numpy(dtype=float)
        rows.append({
            "axis_name": axis_name, "axis_value": axis_value, "algo": algo,
            "mean_wsr_bps_hz": float(np.mean(wsr)), "se_wsr": _standard_error(wsr),
            "mean_energy": float(np.mean(energy)), "se_energy": _standard_error(energy),
            "mean_active_chains": float(sub["active_chains"].mean()),
            "mean_bits_per_chain": float(sub["bits_per_chain"].mean()),
            "mean_hprime_evals": float(sub["hprime_evals"].mean()),
            "mean_runtime_ms": float(np.mean(runtime)) if config.record_runtime else math.nan,
            "n_drops": int(len(sub)), "seed": config.seed,
        })
    return rows


def run_sweep(config: ExperimentConfig, axis: str,
              out: Optional[Union[str, Path]] = None) -> pd.DataFrame:
    """
    Sweep transmit power ("power") or reference resolution ("bref").

    Every axis value reuses the same seeded drops, so the curves compare
    schemes on common channels. Rows follow SWEEP_COLUMNS.
    """
    if axis not in AXES:
        raise ValueError(f"axis must be one of {sorted(AXES)}, got {axis!r}")
    axis_name = AXES[axis]
    values = config.power_values() if axis == "power" else list(config.b_ref_values)
    rows = []
    for value in values:
        per_drop = []
        for drop in range(config.n_drops):
            if axis == "power":
                result = run_drop(config, drop, tx_power_dbm=value)
            else:
                result = run_drop(config, drop, b_ref=value)
            per_drop.extend(result.rows())
        rows.extend(aggregate_drops(pd.DataFrame(per_drop), axis_name, value, config,
                                    config.algorithms))
        logger.info("Sweep %s=%s done (%d drops)", axis_name, value, config.n_drops)

    table = pd.DataFrame(rows, columns=SWEEP_COLUMNS)
    if out is not None:
        write_csv(table, out)
        logger.info("Wrote %d sweep rows to %s", len(table), out)
    return table


def write_csv(table: pd.DataFrame, path: Union[str, Path]):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(path, index=False, lineterminator="\n")


# ==================== TABLES ====================

TABLE_METRICS = ("energy_ratio", "complexity_ratio", "avg_active_chains", "avg_bits_per_chain")


def summarize_tables(sweep: pd.DataFrame, joint: str = "joint",
                     reference: str = "qafas") -> pd.DataFrame:
    """
    Energy ratio and complexity ratio of the joint scheme against QAFAS,
    plus its average active chains and bits per chain, with one column per
    axis value.
    """
    for algo in (joint, reference):
        if algo not in set(sweep["algo"]):
            raise ValueError(f"sweep has no rows for algorithm {algo!r}")
    axis_name = str(sweep["axis_name"].iloc[0])
    j = sweep[sweep["algo"] == joint].set_index("axis_value")
    r = sweep[sweep["algo"] == reference].set_index("axis_value")
    values = list(j.index)

    def ratio(num, den):
        return num / den if den > 0 else math.nan

    table = {"metric": list(TABLE_METRICS)}
    for v in values:
        table[f"{axis_name}={v}"] = [
            ratio(j.at[v, "mean_energy"], r.at[v, "mean_energy"]),
            ratio(j.at[v, "mean_hprime_evals"], r.at[v, "mean_hprime_evals"]),
            j.at[v, "mean_active_chains"],
            j.at[v, "mean_bits_per_chain"],
        ]
    return pd.DataFrame(table)
