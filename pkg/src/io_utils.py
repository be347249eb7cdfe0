import json
import math
from pathlib import Path
from typing import Iterable, List, Union

import numpy as np
import pandas as pd

from src.aqnm import AdcTable
from src.instance import (BeamCodebook, ChannelRealization, PowerProfile, ProblemInstance,
                          UserState, dft_codebook)
from src.rate import Selection

PathLike = Union[str, Path]


def _complex_to_pairs(arr: np.ndarray):
    return np.stack([arr.real, arr.imag], axis=-1).tolist()


def _pairs_to_complex(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.shape[-1] != 2:
        raise ValueError("complex entries must be [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def _dump_queue(q: float):
    return "inf" if math.isinf(q) else q


def _load_queue(q) -> float:
    if isinstance(q, str):
        if q.lower() not in ("inf", "infinity"):
            raise ValueError(f"queue entries must be numbers or \"inf\", got {q!r}")
        return math.inf
    return float(q)


# ==================== INSTANCES ====================

def instance_to_dict(instance: ProblemInstance, codebook_as_dft: bool = False) -> dict:
    """
    JSON-ready form of an instance. Users are written in their original
    order; complex arrays are nested [re, im] pairs.
    """
    users = instance.users
    weights = np.empty_like(users.weights)
    queues = np.empty_like(users.queues)
    weights[users.order] = users.weights
    queues[users.order] = users.queues
    channel = instance.channel
    return {
        "n_rx": channel.n_rx, "n_users": channel.n_users, "n_taps": channel.n_taps,
        "n_subcarriers": channel.n_subcarriers,
        "taps": _complex_to_pairs(channel.taps),
        "power": instance.power.loads.tolist(),
        "codebook": "dft" if codebook_as_dft else _complex_to_pairs(instance.codebook.beams),
        "weights": weights.tolist(),
        "queues": [_dump_queue(float(q)) for q in queues],
        "adc_table": instance.adc_table.to_dict(),
    }


def instance_from_dict(data: dict) -> ProblemInstance:
    for key in ("n_subcarriers", "taps", "power", "weights"):
        if key not in data:
            raise ValueError(f"instance JSON is missing {key!r}")
    channel = ChannelRealization(_pairs_to_complex(data["taps"]), int(data["n_subcarriers"]))
    power = PowerProfile(np.asarray(data["power"], dtype=float))
    for key in ("n_rx", "n_users", "n_taps"):
        if key in data and int(data[key]) != getattr(channel, key):
            raise ValueError(f"{key}={data[key]} disagrees with the taps shape {channel.taps.shape}")
    codebook_data = data.get("codebook", "dft")
    if codebook_data == "dft":
        codebook = dft_codebook(channel.n_rx)
    else:
        codebook = BeamCodebook(_pairs_to_complex(codebook_data))
    weights = np.asarray(data["weights"], dtype=float)
    queues = data.get("queues")
    queues = np.full(weights.shape, np.inf) if queues is None else np.array(
        [_load_queue(q) for q in queues])
    table = AdcTable.from_dict(data["adc_table"]) if "adc_table" in data else None
    return ProblemInstance(channel, power, codebook, UserState(weights, queues), table)


def save_instance(instance: ProblemInstance, path: PathLike, codebook_as_dft: bool = False):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(instance_to_dict(instance, codebook_as_dft), f)


def load_instance(path: PathLike) -> ProblemInstance:
    with open(path, "r", encoding="utf-8") as f:
        return instance_from_dict(json.load(f))


# ==================== ADC TABLES ====================

def save_adc_table(table: AdcTable, path: PathLike):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(table.to_dict(), f, indent=2)
        f.write("\n")


def load_adc_table(path: PathLike) -> AdcTable:
    with open(path, "r", encoding="utf-8") as f:
        return AdcTable.from_dict(json.load(f))


# ==================== SELECTIONS ====================

def selection_to_json(selection: Selection) -> str:
    """JSON array of {"beam": id, "bits": b} in (beam, bits) order."""
    return json.dumps([{"beam": int(t.beam), "bits": "inf" if math.isinf(t.bits) else int(t.bits)}
                       for t in selection.ordered()])


def selection_from_json(text: str) -> Selection:
    items = json.loads(text)
    if not isinstance(items, list):
        raise ValueError("selection JSON must be an array of {\"beam\", \"bits\"} objects")
    parsed: List[dict] = []
    for item in items:
        if not isinstance(item, dict) or "beam" not in item or "bits" not in item:
            raise ValueError(f"bad selection entry {item!r}")
        bits = item["bits"]
        parsed.append({"beam": int(item["beam"]),
                       "bits": math.inf if bits == "inf" else int(bits)})
    return Selection.of(parsed)


# ==================== TABLES ====================

def load_csv(path: PathLike, required: Iterable[str] = ()) -> pd.DataFrame:
    """
    Loads a sweep or table CSV written by the harness.

    Raises ValueError when any required column is missing.
    """
    table = pd.read_csv(path)
    missing = [c for c in required if c not in table.columns]
    if missing:
        raise ValueError(f"{path} is missing columns {missing}")
    return table
