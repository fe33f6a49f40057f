"""Dataset-specific feature transforms applied by the hub's load_data.

Each transform is a pure function of the input record plus, where needed,
statistics fitted on the training split.  Padding slots (all-zero records)
always map to all-zero feature rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, MalformedRecordError

PDG_DEPTH = 506


@dataclass(frozen=True)
class FourVector:
    """(E, px, py, pz) in GeV; the all-zero vector marks a padding slot."""

    E: float
    px: float
    py: float
    pz: float

    @property
    def pt(self) -> float:
        return float(np.hypot(self.px, self.py))

    @property
    def eta(self) -> float:
        return float(np.arcsinh(self.pz / self.pt))

    @property
    def phi(self) -> float:
        return float(np.arctan2(self.py, self.px))

    @property
    def is_padding(self) -> bool:
        return self.E == 0.0 and self.px == 0.0 and self.py == 0.0 and self.pz == 0.0


@dataclass(frozen=True)
class StandardizeStats:
    """Per-feature mean and standard deviation fitted on the training split.
    Constant features carry std 1 so the transform stays finite."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        if (np.asarray(self.std) <= 0).any():
            raise ContractError("standardization std must be strictly positive")


def wrap_angle(dphi):
    """Wrap angle differences into (-pi, pi]."""
    return -(np.remainder(np.pi - np.asarray(dphi, dtype=np.float64), 2 * np.pi) - np.pi)


def toptag_features(constituents: np.ndarray) -> np.ndarray:
    """Jet constituents (N, 4) as (E, px, py, pz) -> (N, 4) features
    (ln pT, ln E, eta - eta_jet, wrapped phi - phi_jet).

    The jet axis is the four-vector sum of the non-padded constituents.
    Padding slots stay all-zero rows.
    """
    c = np.asarray(constituents, dtype=np.float64)
    if c.ndim != 2 or c.shape[1] != 4:
        raise ContractError(f"expected (N, 4) constituents, got {c.shape}")
    valid = (c != 0).any(axis=1)
    out = np.zeros_like(c)
    if not valid.any():
        return out

    e, px, py, pz = c[valid].T
    pt = np.hypot(px, py)
    if (e <= 0).any() or (pt == 0).any():
        raise MalformedRecordError("valid constituent with E <= 0 or pT == 0")

    jet_e, jet_px, jet_py, jet_pz = c[valid].sum(axis=0)
    jet_pt = np.hypot(jet_px, jet_py)
    if jet_pt == 0:
        raise MalformedRecordError("jet axis undefined: summed transverse momentum is zero")
    jet_eta = np.arcsinh(jet_pz / jet_pt)
    jet_phi = np.arctan2(jet_py, jet_px)

    eta = np.arcsinh(pz / pt)
    phi = np.arctan2(py, px)
    out[valid, 0] = np.log(pt)
    out[valid, 1] = np.log(e)
    out[valid, 2] = eta - jet_eta
    out[valid, 3] = wrap_angle(phi - jet_phi)
    return out


def onehot_pdg(code: int, depth: int = PDG_DEPTH) -> np.ndarray:
    """One-hot encode a remapped PDG code in [1, depth]; code 0 (padding)
    gives the zero vector."""
    if code != int(code):
        raise MalformedRecordError(f"PDG code must be integral, got {code}")
    code = int(code)
    if code < 0 or code > depth:
        raise MalformedRecordError(f"PDG code {code} outside [0, {depth}]")
    vec = np.zeros(depth)
    if code > 0:
        vec[code - 1] = 1.0
    return vec


def onehot_pdg_batch(codes: np.ndarray, depth: int = PDG_DEPTH) -> np.ndarray:
    codes = np.asarray(codes)
    if not np.array_equal(codes, codes.astype(np.int64)):
        raise MalformedRecordError("PDG codes must be integral")
    codes = codes.astype(np.int64)
    if codes.min() < 0 or codes.max() > depth:
        raise MalformedRecordError(f"PDG code outside [0, {depth}]")
    out = np.zeros(codes.shape + (depth,))
    real = codes > 0
    out[np.nonzero(real) + (codes[real] - 1,)] = 1.0
    return out


def standardize_fit(train: np.ndarray) -> StandardizeStats:
    """Per-feature mean/std over the leading (sample) axis of the training
    split; constant features fall back to std 1."""
    x = np.asarray(train, dtype=np.float64)
    if x.ndim < 2:
        raise ContractError("standardize_fit expects (B, ...) data")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std == 0, 1.0, std)
    return StandardizeStats(mean=mean, std=std)


def standardize_apply(x: np.ndarray, stats: StandardizeStats) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[1:] != stats.mean.shape:
        raise ContractError(f"data {x.shape[1:]} vs stats {stats.mean.shape}")
    return (x - stats.mean) / stats.std


def airshower_time_stats(train_x: np.ndarray) -> StandardizeStats:
    """Scalar mean/std of arrival times over the training split, taken across
    stations that actually saw a signal."""
    x = np.asarray(train_x, dtype=np.float64)
    traces = x[..., :-1]
    times = x[..., -1]
    mask = (traces != 0).any(axis=-1)
    vals = times[mask]
    if vals.size == 0:
        return StandardizeStats(mean=np.zeros(()), std=np.ones(()))
    std = vals.std()
    return StandardizeStats(mean=np.asarray(vals.mean()),
                            std=np.asarray(std if std > 0 else 1.0))


def airshower_features(traces: np.ndarray, times: np.ndarray,
                       time_stats: StandardizeStats) -> np.ndarray:
    """Station traces (S, T) plus arrival times (S,) -> (S, T+1) features.

    Filled signal bins become their logarithm, empty bins stay zero.  Arrival
    times are standardized with the training-split stats; stations with an
    all-zero trace are padding and keep a fully zero row.
    """
    traces = np.asarray(traces, dtype=np.float64)
    times = np.asarray(times, dtype=np.float64)
    if traces.ndim != 2 or times.shape != (traces.shape[0],):
        raise ContractError(f"traces {traces.shape} vs times {times.shape}")
    if (traces < 0).any():
        raise MalformedRecordError("negative signal bin")
    out = np.zeros((traces.shape[0], traces.shape[1] + 1))
    filled = traces > 0
    out[:, :-1][filled] = np.log(traces[filled])
    has_signal = filled.any(axis=1)
    out[has_signal, -1] = (times[has_signal] - time_stats.mean) / time_stats.std
    return out


def spinodal_features(x: np.ndarray) -> np.ndarray:
    """Identity: the 2D histograms are consumed as-is."""
    return np.asarray(x, dtype=np.float64)
