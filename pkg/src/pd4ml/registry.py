"""Dataset registry: descriptors for the five benchmark datasets plus their
desk-scale synthetic stand-ins, description printing, and the SplitData value
returned by the loaders."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .engine import Tensor
from .errors import ContractError, DatasetLookupError

SPLITS = ("train", "test", "validation")


@dataclass(frozen=True)
class DatasetDescriptor:
    name: str
    task: str                       # "classification" | "regression"
    splits: Optional[dict]          # nominal split sizes; None = set at synth time
    sample_shape: tuple
    structure: str                  # human-readable structure line
    feature_names: str              # per-sample feature semantics
    family: str                     # preprocessing / graph recipe key
    url: Optional[str]              # download base; files live at <url>/<split>.pd4m
    md5: dict                       # split -> published digest (may be empty)
    citation: str
    synth_kind: Optional[str] = None


@dataclass
class SplitData:
    """One split: features X (batch-leading) and labels/targets y, plus any
    auxiliary per-sample arrays (e.g. mother indices for decay trees)."""

    X: Tensor
    y: Tensor
    aux: dict = field(default_factory=dict)

    def validate(self, task: str) -> None:
        if self.X.shape[0] != self.y.shape[0]:
            raise ContractError(
                f"X/y leading extents differ: {self.X.shape[0]} vs {self.y.shape[0]}"
            )
        if task == "classification":
            labels = np.unique(self.y.data)
            if not np.isin(labels, (0.0, 1.0)).all():
                raise ContractError(f"classification labels outside {{0,1}}: {labels[:8]}")
        else:
            if not np.isfinite(self.y.data).all():
                raise ContractError("regression targets must be finite")

    def __len__(self) -> int:
        return self.X.shape[0]


_GRAPH_NOTES = {
    "toptag": "per-jet k-nearest-neighbour graph (k=7) in the (delta-eta, delta-phi) plane",
    "decay": "per-event symmetrized mother-daughter decay tree",
    "grid-plain": "shared 8-neighbour pixel grid",
    "grid-standardized": "shared 8-neighbour pixel grid",
    "airshower": "shared 8-neighbour grid over the 9x9 station array",
}

_PREP_NOTES = {
    "toptag": "four-vectors -> (ln pT, ln E, delta-eta, delta-phi) per constituent",
    "decay": "particle id one-hot encoded (506 classes), other features unchanged",
    "grid-plain": "none",
    "grid-standardized": "per-bin standardization with training-split statistics",
    "airshower": "log of filled signal bins, arrival times standardized on the training split",
}


REGISTRY: dict = {}


def _register(desc: DatasetDescriptor) -> DatasetDescriptor:
    REGISTRY[desc.name] = desc
    return desc


_register(DatasetDescriptor(
    name="TopTagging",
    task="classification",
    splits={"train": 1_200_000, "test": 400_000, "validation": 400_000},
    sample_shape=(200, 4),
    structure="200 particles, 4 features/particle (four-vectors)",
    feature_names="per constituent: E, px, py, pz [GeV]; zero-padded slots",
    family="toptag",
    url="https://zenodo.org/record/2603256/files",
    md5={},
    citation="Kasieczka, Plehn, Thompson, Russell: Top quark tagging reference dataset, Zenodo record 2603256",
))

_register(DatasetDescriptor(
    name="SmartBackgrounds",
    task="classification",
    splits={"train": 157_000, "test": 39_000, "validation": 84_000},
    sample_shape=(100, 9),
    structure="100 particles, 9 features/particle (decay graph)",
    feature_names=("per particle: E, px, py, pz, vx, vy, vz, production time, "
                   "remapped PDG code in [1, 506]; mother index stored alongside"),
    family="decay",
    url=None,
    md5={},
    citation="Belle II generator-level events with FEI-based selection labels (Smart Backgrounds)",
))

_register(DatasetDescriptor(
    name="Spinodal",
    task="classification",
    splits={"train": 16_300, "test": 4_000, "validation": 8_700},
    sample_shape=(20, 20),
    structure="20x20 histogram of pion spectra",
    feature_names="net-baryon density histogram, max-normalized per event",
    family="grid-plain",
    url="https://zenodo.org/record/5710737/files",
    md5={},
    citation="Steinheimer et al.: Spinodal or Not dataset, Zenodo record 5710737",
))

_register(DatasetDescriptor(
    name="EoS",
    task="classification",
    splits={"train": 121_000, "test": 25_000, "validation": 54_000},
    sample_shape=(24, 24),
    structure="24x24 histogram of pion spectra",
    feature_names="pion spectra in 24 pT x 24 azimuthal-angle bins",
    family="grid-standardized",
    url=None,
    md5={},
    citation="Du, Zhou et al.: EoS classification events from hybrid hydrodynamic simulations",
))

_register(DatasetDescriptor(
    name="AirShowers",
    task="regression",
    splits={"train": 56_000, "test": 30_000, "validation": 14_000},
    sample_shape=(81, 81),
    structure="81 stations, 80 signal bins + timing",
    feature_names="per station: 80 signal-trace bins then the first-particle arrival time",
    family="airshower",
    url="https://zenodo.org/record/5748080/files",
    md5={},
    citation="Glombitza et al.: Air shower Xmax regression dataset, Zenodo record 5748080",
))

# Desk-scale synthetic stand-ins: same structure, planted learnable signal,
# generated locally by `synth` (no download source).
for _name, _kind, _base in [
    ("SynthTopTag", "toptag-like", "TopTagging"),
    ("SynthDecay", "decay-like", "SmartBackgrounds"),
    ("SynthGrid20", "grid20-like", "Spinodal"),
    ("SynthGrid24", "grid24-like", "EoS"),
    ("SynthShower", "shower-like", "AirShowers"),
]:
    _b = REGISTRY[_base]
    _register(DatasetDescriptor(
        name=_name,
        task=_b.task,
        splits=None,
        sample_shape=_b.sample_shape,
        structure=_b.structure + " [synthetic]",
        feature_names=_b.feature_names,
        family=_b.family,
        url=None,
        md5={},
        citation=f"locally generated stand-in mirroring the {_base} structure",
        synth_kind=_kind,
    ))


def registry_lookup(name: str) -> DatasetDescriptor:
    try:
        return REGISTRY[name]
    except KeyError:
        known = ", ".join(sorted(REGISTRY))
        raise DatasetLookupError(f"unknown dataset {name!r}; registered: {known}") from None


def format_count(n: int) -> str:
    if n >= 1_000_000:
        return f"{n / 1e6:g}M"
    if n >= 1_000:
        return f"{n / 1e3:g}k"
    return str(n)


def describe(name: str) -> str:
    d = registry_lookup(name)
    if d.splits is not None:
        splits = "/".join(format_count(d.splits[s]) for s in SPLITS)
    else:
        splits = "chosen at generation time"
    lines = [
        f"{d.name}",
        f"  task:          {d.task}",
        f"  splits:        {splits} (train/test/validation)",
        f"  structure:     {d.structure}",
        f"  sample shape:  {d.sample_shape}",
        f"  features:      {d.feature_names}",
        f"  preprocessing: {_PREP_NOTES[d.family]}",
        f"  graph:         {_GRAPH_NOTES[d.family]}",
        f"  source:        {d.url or 'none (generate locally or place files by hand)'}",
        f"  citation:      {d.citation}",
    ]
    return "\n".join(lines)


def print_description(name: str) -> str:
    text = describe(name)
    print(text)
    return text
