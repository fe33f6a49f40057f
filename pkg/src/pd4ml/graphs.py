"""Binary adjacency construction and symmetric normalization.

Three recipes cover the dataset structures: k-nearest-neighbour graphs for
point clouds, 8-neighbour pixel graphs for 2D histograms and the detector
grid, and symmetrized mother-daughter trees for generator-level decay records.
Adjacencies are dense uint8 (node counts stay <= a few hundred), symmetric,
and zero on the diagonal; self-loops enter only through :func:`normalize`.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, MalformedRecordError


@dataclass(frozen=True)
class Adjacency:
    """Undirected, unweighted graph on n nodes as a dense 0/1 matrix."""

    n: int
    bits: np.ndarray  # (n, n) uint8, symmetric, zero diagonal

    def __post_init__(self):
        b = self.bits
        if b.shape != (self.n, self.n):
            raise ContractError(f"adjacency bits shape {b.shape} != ({self.n}, {self.n})")
        if b.dtype != np.uint8:
            object.__setattr__(self, "bits", b.astype(np.uint8))
            b = self.bits
        if np.diagonal(b).any():
            raise ContractError("adjacency diagonal must be zero")
        if not np.array_equal(b, b.T):
            raise ContractError("adjacency must be symmetric")

    @property
    def n_edges(self) -> int:
        return int(self.bits.sum()) // 2

    def degrees(self) -> np.ndarray:
        return self.bits.sum(axis=1).astype(np.int64)

    def edges(self) -> list:
        i, j = np.nonzero(np.triu(self.bits, k=1))
        return list(zip(i.tolist(), j.tolist()))


@dataclass(frozen=True)
class NormalizedAdjacency:
    """Self-looped, symmetrically degree-normalized adjacency, ready for
    graph convolutions.  Entries lie in [0, 1], spectral radius <= 1."""

    matrix: np.ndarray  # (n, n) float64


def knn_adjacency(coords: np.ndarray, valid_mask: np.ndarray, k: int) -> Adjacency:
    """Connect each valid node to its k nearest valid neighbours (Euclidean,
    self excluded), then symmetrize with OR.

    Padded nodes (valid_mask False) join no edges.  Distance ties break toward
    the lower node index.  If k >= number of valid nodes it is clamped to
    valid-1 with a warning.
    """
    coords = np.asarray(coords, dtype=np.float64)
    valid = np.asarray(valid_mask, dtype=bool)
    if coords.ndim != 2 or coords.shape[0] != valid.shape[0]:
        raise ContractError(f"coords {coords.shape} vs mask {valid.shape}")
    if k < 1:
        raise ContractError(f"k must be >= 1, got {k}")
    n = coords.shape[0]
    n_valid = int(valid.sum())
    k_eff = k
    if k >= n_valid:
        k_eff = max(n_valid - 1, 0)
        warnings.warn(
            f"k={k} >= {n_valid} valid nodes; clamped to {k_eff}", stacklevel=2
        )

    bits = np.zeros((n, n), dtype=np.uint8)
    if k_eff > 0:
        idx = np.nonzero(valid)[0]
        pts = coords[idx]
        d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
        np.fill_diagonal(d2, np.inf)
        for a in range(len(idx)):
            # stable sort: equal distances resolve to the lower node index
            order = np.argsort(d2[a], kind="stable")[:k_eff]
            bits[idx[a], idx[order]] = 1
    bits |= bits.T
    return Adjacency(n=n, bits=bits)


def grid_adjacency(rows: int, cols: int) -> Adjacency:
    """8-neighbour pixel graph: node (r, c) connects to every existing cell at
    Chebyshev distance 1 (3 neighbours in corners, 5 on edges, 8 inside)."""
    if rows < 1 or cols < 1:
        raise ContractError("grid extents must be >= 1")
    n = rows * cols
    bits = np.zeros((n, n), dtype=np.uint8)
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    if dr == 0 and dc == 0:
                        continue
                    rr, cc = r + dr, c + dc
                    if 0 <= rr < rows and 0 <= cc < cols:
                        bits[i, rr * cols + cc] = 1
    return Adjacency(n=n, bits=bits)


def decay_tree_adjacency(mother_index: np.ndarray) -> Adjacency:
    """Symmetrized mother-daughter edges from per-particle mother indices.

    mother_index[i] == -1 marks a root or a padding slot and contributes no
    edge; any other value must be a valid slot index different from i.
    """
    mothers = np.asarray(mother_index, dtype=np.int64)
    if mothers.ndim != 1:
        raise ContractError(f"mother_index must be 1-D, got shape {mothers.shape}")
    n = mothers.shape[0]
    bits = np.zeros((n, n), dtype=np.uint8)
    for i, m in enumerate(mothers):
        if m == -1:
            continue
        if m < -1 or m >= n:
            raise MalformedRecordError(f"mother index {m} out of range for {n} slots")
        if m == i:
            raise MalformedRecordError(f"slot {i} lists itself as mother")
        bits[i, m] = 1
        bits[m, i] = 1
    return Adjacency(n=n, bits=bits)


def normalize(adj: Adjacency) -> NormalizedAdjacency:
    """Self-looped symmetric degree normalization:
    D^(-1/2) (A + I) D^(-1/2) with D the row sums of A + I."""
    a_tilde = adj.bits.astype(np.float64) + np.eye(adj.n)
    inv_sqrt_deg = 1.0 / np.sqrt(a_tilde.sum(axis=1))
    matrix = a_tilde * inv_sqrt_deg[:, None] * inv_sqrt_deg[None, :]
    return NormalizedAdjacency(matrix=matrix)


def normalize_batch(bits: np.ndarray) -> np.ndarray:
    """Vectorized normalize() over a (B, N, N) stack of binary adjacencies."""
    if bits.ndim != 3 or bits.shape[1] != bits.shape[2]:
        raise ContractError(f"expected (B, N, N) adjacency stack, got {bits.shape}")
    n = bits.shape[1]
    a_tilde = bits.astype(np.float64) + np.eye(n)
    inv_sqrt_deg = 1.0 / np.sqrt(a_tilde.sum(axis=2))
    return a_tilde * inv_sqrt_deg[:, :, None] * inv_sqrt_deg[:, None, :]


def write_edge_list(adj: Adjacency, path) -> None:
    """Dump the graph as text, one ``i j`` pair per line with i < j."""
    with open(path, "w", encoding="utf-8") as fh:
        for i, j in adj.edges():
            fh.write(f"{i} {j}\n")
