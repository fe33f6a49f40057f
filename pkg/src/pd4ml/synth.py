"""Seeded synthetic stand-ins mirroring the benchmark dataset structures.

Each generator plants a learnable signal:

* grid kinds     -- a localized Gaussian blob (class 1) against diffuse noise
                    (class 0); per-sample standardization removes global
                    amplitude cues so the signal is genuinely spatial;
* toptag-like    -- a two-prong vs one-prong angular pattern in the jet
                    constituents;
* decay-like     -- a labeled subtree motif (a code-42 particle with two
                    code-7 daughters) planted in the decay tree;
* shower-like    -- a regression depth parameter steering trace peak
                    position/width and the arrival-time curvature.

The seed fixes the full stream: the same (kind, n, seed) triple regenerates
byte-identical splits.
"""

from __future__ import annotations

import numpy as np

from .engine import Tensor
from .errors import ContractError
from .registry import SplitData

SYNTH_KINDS = ("toptag-like", "decay-like", "grid20-like", "grid24-like", "shower-like")

# grid-blob contrast; tuned so the planted pattern is easy for a message-
# passing model but requires position-specific detectors from a flat network
GRID_BLOB_AMP = (2.0, 3.0)
GRID_BLOB_SIGMA = (1.0, 1.5)

MOTIF_PARENT = 42
MOTIF_CHILD = 7


def _balanced_labels(n: int) -> np.ndarray:
    y = np.zeros(n)
    y[: n // 2] = 1.0
    return y


def _grid_split(n: int, rng: np.random.Generator, side: int) -> SplitData:
    X = rng.normal(size=(n, side, side))
    y = _balanced_labels(n)
    rr, cc = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    for i in range(n // 2):
        r0 = rng.uniform(2.0, side - 3.0)
        c0 = rng.uniform(2.0, side - 3.0)
        amp = rng.uniform(*GRID_BLOB_AMP)
        sig = rng.uniform(*GRID_BLOB_SIGMA)
        X[i] += amp * np.exp(-((rr - r0) ** 2 + (cc - c0) ** 2) / (2 * sig**2))
    # remove the per-sample mean so absolute offsets cannot leak the label;
    # the small variance excess of blob samples stays as a weak global cue a
    # structure-blind model can still learn from
    X -= X.mean(axis=(1, 2), keepdims=True)
    order = rng.permutation(n)
    return SplitData(X=Tensor(X[order]), y=Tensor(y[order]))


def _jet_split(n: int, rng: np.random.Generator, n_slots: int = 200) -> SplitData:
    X = np.zeros((n, n_slots, 4))
    y = _balanced_labels(n)
    for i in range(n):
        m = int(rng.integers(20, 45))
        if y[i] == 1.0:
            sep = rng.uniform(0.6, 1.0)
            axis_angle = rng.uniform(0, 2 * np.pi)
            offset = 0.5 * sep * np.array([np.cos(axis_angle), np.sin(axis_angle)])
            centers = np.stack([offset, -offset])
            frac = rng.uniform(0.35, 0.65)
            which = (rng.random(m) > frac).astype(int)
        else:
            centers = np.zeros((1, 2))
            which = np.zeros(m, dtype=int)
        jet_eta = rng.uniform(-1.5, 1.5)
        jet_phi = rng.uniform(-np.pi, np.pi)
        eta = jet_eta + centers[which, 0] + rng.normal(0, 0.1, m)
        phi = jet_phi + centers[which, 1] + rng.normal(0, 0.1, m)
        pt = rng.exponential(30.0, m) + 1.0
        order = np.argsort(-pt)  # constituents stored by falling pT
        pt, eta, phi = pt[order], eta[order], phi[order]
        X[i, :m, 0] = pt * np.cosh(eta)  # massless: E
        X[i, :m, 1] = pt * np.cos(phi)
        X[i, :m, 2] = pt * np.sin(phi)
        X[i, :m, 3] = pt * np.sinh(eta)
    order = rng.permutation(n)
    return SplitData(X=Tensor(X[order]), y=Tensor(y[order]))


def _random_tree(rng: np.random.Generator, n_parts: int) -> np.ndarray:
    mothers = np.full(n_parts, -1, dtype=np.int64)
    for i in range(1, n_parts):
        mothers[i] = int(rng.integers(0, i))
    return mothers


def _decay_split(n: int, rng: np.random.Generator, n_slots: int = 100) -> SplitData:
    X = np.zeros((n, n_slots, 9))
    mothers_out = np.full((n, n_slots), -1, dtype=np.int32)
    y = _balanced_labels(n)
    for i in range(n):
        m = int(rng.integers(30, 70))
        mothers = _random_tree(rng, m)
        pdg = rng.integers(1, 507, size=m)
        # keep the motif codes out of the random pool, then plant deliberately
        pdg[pdg == MOTIF_PARENT] = 1
        pdg[pdg == MOTIF_CHILD] = 2
        children = [np.nonzero(mothers == v)[0] for v in range(m)]
        if y[i] == 1.0:
            hubs = [v for v in range(m) if len(children[v]) >= 2]
            v = int(rng.choice(hubs)) if hubs else 0
            if len(children[v]) < 2:
                # degenerate chain: reroute two tail particles onto the hub
                for j in range(max(2, m - 2), m):
                    mothers[j] = v
                children[v] = np.nonzero(mothers == v)[0]
            pdg[v] = MOTIF_PARENT
            kids = rng.choice(children[v], size=2, replace=False)
            pdg[kids] = MOTIF_CHILD
        else:
            # partial motifs keep the task relational: a lone 42, or 42 with
            # a single 7-child, appears in half the background events
            if rng.random() < 0.5 and m > 2:
                v = int(rng.integers(0, m - 1))
                pdg[v] = MOTIF_PARENT
                if len(children[v]) >= 1 and rng.random() < 0.7:
                    pdg[int(children[v][0])] = MOTIF_CHILD
        # kinematics: energy decays along the tree, vertices drift
        energy = np.zeros(m)
        vertex = np.zeros((m, 3))
        depth = np.zeros(m)
        energy[0] = rng.uniform(8.0, 12.0)
        for j in range(1, m):
            p = mothers[j]
            energy[j] = energy[p] * rng.uniform(0.3, 0.7)
            vertex[j] = vertex[p] + rng.normal(0, 0.1, 3)
            depth[j] = depth[p] + 1
        direction = rng.normal(size=(m, 3))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        X[i, :m, 0] = energy
        X[i, :m, 1:4] = direction * energy[:, None]
        X[i, :m, 4:7] = vertex
        X[i, :m, 7] = depth + rng.normal(0, 0.1, m)
        X[i, :m, 8] = pdg
        mothers_out[i, :m] = mothers
    order = rng.permutation(n)
    return SplitData(
        X=Tensor(X[order]), y=Tensor(y[order]), aux={"mothers": mothers_out[order]}
    )


def _shower_split(n: int, rng: np.random.Generator, side: int = 9,
                  n_bins: int = 80) -> SplitData:
    n_stations = side * side
    pos = np.stack(np.meshgrid(np.arange(side), np.arange(side), indexing="ij"),
                   axis=-1).reshape(n_stations, 2).astype(np.float64)
    center = (side - 1) / 2.0
    bins = np.arange(n_bins, dtype=np.float64)
    X = np.zeros((n, n_stations, n_bins + 1))
    y = rng.uniform(-1.0, 1.0, size=n)
    for i in range(n):
        t = y[i]
        core = center + rng.uniform(-1.5, 1.5, size=2)
        d = np.linalg.norm(pos - core, axis=1)
        amp = rng.uniform(20.0, 60.0) * np.exp(-d / (2.5 * (1 + 0.25 * t)))
        peak = 12.0 + 8.0 * t + 2.0 * d + rng.normal(0, 0.5, n_stations)
        width = 6.0 * (1 + 0.3 * t)
        traces = amp[:, None] * np.exp(-((bins[None, :] - peak[:, None]) ** 2)
                                       / (2 * width**2))
        traces[traces < 0.05] = 0.0
        silent = ~(traces > 0).any(axis=1)
        times = 0.5 * d**2 * (1 + 0.2 * t) + rng.normal(0, 0.2, n_stations)
        times[silent] = 0.0
        X[i, :, :n_bins] = traces
        X[i, :, n_bins] = times
    return SplitData(X=Tensor(X), y=Tensor(y))


_MAKERS = {
    "grid20-like": lambda n, rng: _grid_split(n, rng, side=20),
    "grid24-like": lambda n, rng: _grid_split(n, rng, side=24),
    "toptag-like": _jet_split,
    "decay-like": _decay_split,
    "shower-like": _shower_split,
}


def synth_generate(kind: str, n_per_split: int, seed: int):
    """Generate (train, test, validation) SplitData triples for one kind."""
    if kind not in SYNTH_KINDS:
        raise ContractError(f"unknown synth kind {kind!r}; one of {SYNTH_KINDS}")
    if n_per_split < 10:
        raise ContractError(f"n_per_split must be >= 10, got {n_per_split}")
    children = np.random.SeedSequence(seed).spawn(3)
    maker = _MAKERS[kind]
    return tuple(maker(n_per_split, np.random.default_rng(s)) for s in children)
