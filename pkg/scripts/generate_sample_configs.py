#!/usr/bin/env python3
"""
Sample Config Generator
Writes the desk-scale experiment configs and one small serialized instance
"""
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.bench import ExperimentConfig, drop_instance
from src.io_utils import save_instance

POWER_SWEEP = (-5.0, 0.0, 5.0, 10.0, 15.0)


def sample_configs():
    """
    - rayleigh_desk: frequency-selective Rayleigh drops, delta = 3
    - geometric_desk: few-path flat channel, delta = 4
    - tiny: seconds-scale config for smoke runs
    """
    rayleigh = ExperimentConfig(tx_power_dbm=POWER_SWEEP)
    geometric = replace(rayleigh, scenario="geometric", n_taps=1, n_subcarriers=1, delta=4)
    tiny = ExperimentConfig(n_rx=8, n_users=3, n_chains=4, chain_cap=4, n_subcarriers=4,
                            n_taps=2, tx_power_dbm=(0.0, 10.0), b_ref_values=(1, 3, 5),
                            n_drops=3)
    return {"rayleigh_desk": rayleigh, "geometric_desk": geometric, "tiny": tiny}


def save_config(path: str, config: ExperimentConfig):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(config.to_dict(), f, indent=2)
        f.write("\n")


def main():
    configs = sample_configs()
    for name, config in configs.items():
        save_config(f"configs/{name}.json", config)

    instance, _ = drop_instance(configs["tiny"], drop_index=0)
    save_instance(instance, "sample_data/instance_tiny.json", codebook_as_dft=True)

    print("Generated sample configs in configs/")
    for name in configs:
        print(f"   - {name}.json")
    print("Generated sample_data/instance_tiny.json")


if __name__ == "__main__":
    main()
