"""Grouped-vector data model: partitions, mixed norms, sparsity patterns, datasets.

Groups are contiguous index ranges.  Columns that belong to the same group
must be adjacent; callers with scattered groups should permute their columns
first (a one-time preprocessing step) and keep the permutation around to map
results back.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

__all__ = [
    "GroupPartition",
    "GroupedVector",
    "SparsityPattern",
    "Dataset",
    "mixed_norm",
    "sparsity_of",
    "is_sparse",
]

# Eigenvalue band of the population covariance under the sub-Gaussian design
# assumption.  Datasets flagged as compliant are validated against it.
SIGMA_EIG_LO = 2.0 / 3.0
SIGMA_EIG_HI = 3.0 / 2.0
_EIG_TOL = 1e-8


class GroupPartition:
    """Division of the p coordinates into d contiguous groups.

    Parameters
    ----------
    sizes : iterable of int
        Group sizes b_1, ..., b_d; all must be >= 1.
    """

    __slots__ = ("sizes", "d", "p", "b_max", "starts", "_labels")

    def __init__(self, sizes: Iterable[int]):
        sizes_t = tuple(int(b) for b in sizes)
        if len(sizes_t) == 0:
            raise ValueError("partition needs at least one group")
        if any(b < 1 for b in sizes_t):
            raise ValueError(f"group sizes must be >= 1, got {sizes_t}")
        self.sizes = sizes_t
        self.d = len(sizes_t)
        self.p = int(sum(sizes_t))
        self.b_max = max(sizes_t)
        starts = np.zeros(self.d, dtype=np.intp)
        np.cumsum(sizes_t[:-1], out=starts[1:])
        starts.setflags(write=False)
        self.starts = starts
        labels = np.repeat(np.arange(self.d, dtype=np.intp), sizes_t)
        labels.setflags(write=False)
        self._labels = labels

    @classmethod
    def equal(cls, d: int, b: int) -> "GroupPartition":
        """d groups of common size b."""
        return cls((b,) * d)

    @classmethod
    def from_labels(cls, labels: Iterable[int]) -> "GroupPartition":
        """Build from per-coordinate group labels (must form contiguous runs)."""
        lab = np.asarray(list(labels))
        if lab.ndim != 1 or lab.size == 0:
            raise ValueError("labels must be a non-empty 1-d sequence")
        change = np.flatnonzero(lab[1:] != lab[:-1])
        bounds = np.concatenate([[0], change + 1, [lab.size]])
        runs = lab[bounds[:-1]]
        if len(np.unique(runs)) != len(runs):
            raise ValueError("group labels must be contiguous runs")
        return cls(np.diff(bounds))

    def group_of(self, i: int) -> int:
        """Group index containing coordinate i."""
        return int(self._labels[i])

    def labels(self) -> np.ndarray:
        """Per-coordinate group labels, length p (read-only)."""
        return self._labels

    def group_slice(self, j: int) -> slice:
        start = int(self.starts[j])
        return slice(start, start + self.sizes[j])

    def group_indices(self, j: int) -> np.ndarray:
        sl = self.group_slice(j)
        return np.arange(sl.start, sl.stop, dtype=np.intp)

    def groups_of(self, idx: np.ndarray) -> np.ndarray:
        """Sorted distinct groups touched by the given coordinate indices."""
        if len(idx) == 0:
            return np.empty(0, dtype=np.intp)
        return np.unique(self._labels[np.asarray(idx, dtype=np.intp)])

    def group_norms(self, values: np.ndarray, axis: int = 0) -> np.ndarray:
        """Per-group Euclidean norms of a p-vector (or of each column)."""
        v = np.asarray(values, dtype=float)
        return np.sqrt(np.add.reduceat(v * v, self.starts, axis=axis))

    def __eq__(self, other) -> bool:
        return isinstance(other, GroupPartition) and self.sizes == other.sizes

    def __hash__(self) -> int:
        return hash(self.sizes)

    def __repr__(self) -> str:
        if len(set(self.sizes)) == 1:
            return f"GroupPartition(d={self.d}, b={self.sizes[0]})"
        return f"GroupPartition(sizes={self.sizes})"


def _as_readonly_vector(values, p: int) -> np.ndarray:
    v = np.array(values, dtype=float, copy=True).reshape(-1)
    if v.size != p:
        raise ValueError(f"expected length {p}, got {v.size}")
    v.setflags(write=False)
    return v


@dataclass(frozen=True)
class GroupedVector:
    """A length-p coefficient vector read through a GroupPartition."""

    values: np.ndarray
    partition: GroupPartition

    def __post_init__(self):
        object.__setattr__(
            self, "values", _as_readonly_vector(self.values, self.partition.p)
        )

    def group(self, j: int) -> np.ndarray:
        return self.values[self.partition.group_slice(j)]

    def norm(self, q1, q2) -> float:
        return mixed_norm(self, q1, q2)

    def __len__(self) -> int:
        return self.partition.p


def _inner_norms(gv: GroupedVector, q2) -> np.ndarray:
    part = gv.partition
    v = gv.values
    if q2 == 2:
        return part.group_norms(v)
    if q2 == 1:
        return np.add.reduceat(np.abs(v), part.starts)
    if q2 == 0:
        return np.add.reduceat((v != 0).astype(float), part.starts)
    if q2 == np.inf:
        return np.maximum.reduceat(np.abs(v), part.starts)
    raise ValueError(f"unsupported inner norm order {q2!r}")


def mixed_norm(v: GroupedVector, q1, q2) -> float:
    """l_{q1,q2} norm: outer q1-aggregation of per-group q2 norms.

    Orders 0 and infinity take the usual counting and max interpretations;
    only orders in {0, 1, 2, inf} are supported.
    """
    orders = (0, 1, 2, np.inf)
    if q1 not in orders or q2 not in orders:
        raise ValueError(f"unsupported norm order pair ({q1!r}, {q2!r})")
    inner = _inner_norms(v, q2)
    if q1 == 0:
        return float(np.count_nonzero(inner))
    if q1 == 1:
        return float(inner.sum())
    if q1 == 2:
        return float(np.sqrt((inner * inner).sum()))
    return float(inner.max())


@dataclass(frozen=True)
class SparsityPattern:
    """Element support T and group support G of a vector."""

    T: tuple
    G: tuple
    s: int
    s_g: int

    def __post_init__(self):
        T = tuple(int(i) for i in self.T)
        G = tuple(int(j) for j in self.G)
        if list(T) != sorted(set(T)) or list(G) != sorted(set(G)):
            raise ValueError("supports must be sorted and duplicate-free")
        if self.s != len(T) or self.s_g != len(G):
            raise ValueError("counts must match support cardinalities")
        if len(T) > 0 and len(G) == 0:
            raise ValueError("nonempty element support needs a group support")
        if self.s_g > self.s:
            raise ValueError("group support cannot exceed element support size")
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "G", G)

    @classmethod
    def from_support(cls, partition: GroupPartition, T) -> "SparsityPattern":
        T = np.asarray(sorted(set(int(i) for i in T)), dtype=np.intp)
        if T.size and (T[0] < 0 or T[-1] >= partition.p):
            raise ValueError("support indices out of range")
        G = partition.groups_of(T)
        return cls(tuple(T.tolist()), tuple(G.tolist()), int(T.size), int(G.size))

    def validate(self, partition: GroupPartition) -> None:
        """Check consistency against a partition (supports match, sizes bound s)."""
        G_from_T = tuple(partition.groups_of(np.asarray(self.T, dtype=np.intp)).tolist())
        if G_from_T != self.G:
            raise ValueError("group support does not match element support")
        cap = sum(partition.sizes[j] for j in self.G)
        if self.s > cap:
            raise ValueError(f"s={self.s} exceeds capacity {cap} of the groups in G")

    def T_array(self) -> np.ndarray:
        return np.asarray(self.T, dtype=np.intp)

    def G_array(self) -> np.ndarray:
        return np.asarray(self.G, dtype=np.intp)


def sparsity_of(v: GroupedVector, zero_tol: float = 0.0) -> SparsityPattern:
    """Support pattern of v; entries with |v_i| <= zero_tol count as zero.

    Ties at exactly the tolerance are classified as zero.
    """
    if zero_tol < 0:
        raise ValueError("zero_tol must be >= 0")
    T = np.flatnonzero(np.abs(v.values) > zero_tol)
    return SparsityPattern.from_support(v.partition, T)


def is_sparse(v: GroupedVector, s: int, s_g: int) -> bool:
    """Whether v is (s, s_g)-sparse: at most s nonzeros in at most s_g groups."""
    if s_g > v.partition.d or s > v.partition.p:
        raise ValueError("sparsity budget exceeds the ambient dimensions")
    pat = sparsity_of(v, 0.0)
    return pat.s <= s and pat.s_g <= s_g


@dataclass(frozen=True)
class Dataset:
    """Design matrix, response, and the optional ground truth behind them.

    Arrays are copied and frozen; a Dataset is safe to share across threads.
    """

    X: np.ndarray
    y: np.ndarray
    partition: GroupPartition
    sigma_truth: Optional[float] = None
    beta_truth: Optional[GroupedVector] = None
    Sigma: Optional[np.ndarray] = None
    assumption1: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.array(self.X, dtype=float, copy=True)
        y = np.array(self.y, dtype=float, copy=True).reshape(-1)
        if X.ndim != 2:
            raise ValueError("X must be a 2-d array")
        if X.shape[1] != self.partition.p:
            raise ValueError(
                f"X has {X.shape[1]} columns, partition expects {self.partition.p}"
            )
        if y.size != X.shape[0]:
            raise ValueError("y length must equal the number of rows of X")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("X and y must be finite")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if self.beta_truth is not None and self.beta_truth.partition != self.partition:
            raise ValueError("beta_truth partition does not match")
        if self.Sigma is not None:
            S = np.array(self.Sigma, dtype=float, copy=True)
            if S.shape != (self.partition.p, self.partition.p):
                raise ValueError("Sigma must be p x p")
            if np.abs(S - S.T).max() > 1e-12:
                raise ValueError("Sigma must be symmetric (within 1e-12)")
            S.setflags(write=False)
            object.__setattr__(self, "Sigma", S)
            if self.assumption1:
                w = np.linalg.eigvalsh(S)
                if w[0] < SIGMA_EIG_LO - _EIG_TOL or w[-1] > SIGMA_EIG_HI + _EIG_TOL:
                    raise ValueError(
                        "covariance eigenvalues "
                        f"[{w[0]:.6g}, {w[-1]:.6g}] violate the "
                        f"[{SIGMA_EIG_LO:.6g}, {SIGMA_EIG_HI:.6g}] band"
                    )

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def grouped(self, values: np.ndarray) -> GroupedVector:
        """Wrap a raw p-vector with this dataset's partition."""
        return GroupedVector(values, self.partition)
