"""Dataset serialization: CSV matrices plus a JSON sidecar.

A dataset saved under stem `name` produces three files:

    name_X.csv   the n x p design matrix, one row per line
    name_y.csv   the response, one value per line
    name.json    sidecar with keys
                   group_sizes   list of int, the partition
                   sigma_truth   float or null
                   beta_truth    list of float or null
                   assumption1   bool
                   seed          int or null (from the generator, if any)
                   kappa         float or null (sub-Gaussian proxy metadata)
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .groups import Dataset, GroupPartition, GroupedVector

__all__ = ["save_dataset", "load_dataset"]


def save_dataset(data: Dataset, stem) -> tuple:
    """Write the three dataset files; returns their paths."""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    x_path = stem.with_name(stem.name + "_X.csv")
    y_path = stem.with_name(stem.name + "_y.csv")
    j_path = stem.with_name(stem.name + ".json")
    np.savetxt(x_path, data.X, delimiter=",", fmt="%.17g")
    np.savetxt(y_path, data.y.reshape(-1, 1), delimiter=",", fmt="%.17g")
    sidecar = {
        "group_sizes": list(data.partition.sizes),
        "sigma_truth": data.sigma_truth,
        "beta_truth": None
        if data.beta_truth is None
        else data.beta_truth.values.tolist(),
        "assumption1": data.assumption1,
        "seed": data.meta.get("seed"),
        "kappa": data.meta.get("kappa"),
    }
    j_path.write_text(json.dumps(sidecar, indent=1))
    return x_path, y_path, j_path


def load_dataset(stem) -> Dataset:
    """Rebuild a Dataset from the files written by save_dataset."""
    stem = Path(stem)
    x_path = stem.with_name(stem.name + "_X.csv")
    y_path = stem.with_name(stem.name + "_y.csv")
    j_path = stem.with_name(stem.name + ".json")
    X = np.loadtxt(x_path, delimiter=",", ndmin=2)
    y = np.loadtxt(y_path, delimiter=",").reshape(-1)
    sidecar = json.loads(j_path.read_text())
    partition = GroupPartition(sidecar["group_sizes"])
    beta = sidecar.get("beta_truth")
    meta = {k: sidecar.get(k) for k in ("seed", "kappa") if sidecar.get(k) is not None}
    return Dataset(
        X=X,
        y=y,
        partition=partition,
        sigma_truth=sidecar.get("sigma_truth"),
        beta_truth=None if beta is None else GroupedVector(beta, partition),
        assumption1=bool(sidecar.get("assumption1", False)),
        meta=meta,
    )
