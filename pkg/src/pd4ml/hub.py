"""Loading frontend: checksum-verified fetch and cache, raw split loading,
preprocessing, and graph-mode loading.

On disk a dataset lives at ``<path>/<name>/<split>.pd4m`` (PD4ML-BIN v1)
beside a plain-text ``manifest.txt`` carrying per-split MD5 digests.  Files
are verified before use: a digest published in the registry wins; otherwise
the digest recorded in the manifest on first contact is enforced from then
on.  Mismatches quarantine the file and raise IntegrityError.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
import requests
from filelock import FileLock

from . import codec, prep, synth
from .engine import Tensor
from .errors import ContractError, FetchError, IntegrityError
from .graphs import Adjacency, decay_tree_adjacency, grid_adjacency, knn_adjacency
from .registry import (REGISTRY, SPLITS, DatasetDescriptor, SplitData,
                       format_count, registry_lookup)

KNN_K = 7

_HTTP_CHUNK = 1 << 20
_stats_cache: dict = {}


@dataclass
class LoadedData:
    """Preprocessed split: features, labels, and (in graph mode) either one
    shared Adjacency or a (B, N, N) uint8 stack with one matrix per sample."""

    features: np.ndarray
    adjacency: Union[Adjacency, np.ndarray, None]
    y: np.ndarray
    aux: dict = field(default_factory=dict)


def _dataset_dir(path, name: str) -> Path:
    return Path(path) / name


def _split_file(path, name: str, split: str) -> Path:
    return _dataset_dir(path, name) / f"{split}.pd4m"


def _check_split(split: str) -> None:
    if split not in SPLITS:
        raise ContractError(f"split must be one of {SPLITS}, got {split!r}")


def http_fetch(url: str, dest: Path, timeout: float = 60.0) -> None:
    """GET with resume: a leftover ``.part`` file continues via a Range header."""
    part = dest.with_suffix(dest.suffix + ".part")
    headers = {}
    offset = 0
    if part.exists():
        offset = part.stat().st_size
        if offset:
            headers["Range"] = f"bytes={offset}-"
    try:
        with requests.get(url, stream=True, timeout=timeout, headers=headers) as r:
            if r.status_code == 206:
                mode = "ab"
            elif r.status_code == 200:
                mode = "wb"  # server ignored the range; restart
            elif r.status_code == 416 and offset:
                part.replace(dest)
                return
            else:
                raise FetchError(f"GET {url} -> HTTP {r.status_code}")
            with open(part, mode) as fh:
                for chunk in r.iter_content(chunk_size=_HTTP_CHUNK):
                    fh.write(chunk)
    except requests.RequestException as exc:
        raise FetchError(
            f"fetching {url} failed ({exc}); partial data kept at {part}, "
            "rerun to resume the download"
        ) from exc
    part.replace(dest)


def _manifest_path(ddir: Path) -> Path:
    return ddir / "manifest.txt"


def _read_manifest(ddir: Path) -> dict:
    mpath = _manifest_path(ddir)
    return codec.read_manifest(mpath) if mpath.exists() else {}


def _record_digest(ddir: Path, split: str, digest: str) -> None:
    entries = _read_manifest(ddir)
    entries[f"md5.{split}"] = digest
    codec.write_manifest(_manifest_path(ddir), entries)


def _verify(desc: DatasetDescriptor, ddir: Path, split: str, file: Path) -> None:
    actual = codec.file_md5(file)
    expected = desc.md5.get(split) or _read_manifest(ddir).get(f"md5.{split}")
    if expected is None:
        # first contact: record the digest so later corruption is caught
        _record_digest(ddir, split, actual)
        return
    if actual != expected:
        quarantine = file.with_suffix(file.suffix + ".corrupt")
        file.replace(quarantine)
        raise IntegrityError(
            f"{desc.name}/{split}: MD5 {actual} != expected {expected}; "
            f"file quarantined at {quarantine}"
        )


def ensure_local(name: str, split: str, path, force_download: bool = False) -> Path:
    """Make sure ``<path>/<name>/<split>.pd4m`` exists and verifies; download
    when missing (or when forced) from the registered source."""
    desc = registry_lookup(name)
    _check_split(split)
    ddir = _dataset_dir(path, name)
    file = _split_file(path, name, split)
    if file.exists() and not force_download:
        _verify(desc, ddir, split, file)
        return file
    if desc.url is None:
        if desc.synth_kind is not None:
            raise FetchError(
                f"{name} is synthetic and not present at {file}; generate it "
                f"first, e.g. `pd4ml synth {desc.synth_kind} --out {path}`"
            )
        raise FetchError(
            f"no download source registered for {name}; place {file} by hand"
        )
    ddir.mkdir(parents=True, exist_ok=True)
    with FileLock(str(ddir / ".lock")):
        http_fetch(f"{desc.url}/{split}.pd4m", file)
        _verify(desc, ddir, split, file)
    return file


def load(name: str, split: str, path="./data", force_download: bool = False) -> SplitData:
    """Raw (unpreprocessed) tensors for one split, fetched and MD5-checked."""
    desc = registry_lookup(name)
    file = ensure_local(name, split, path, force_download)
    tensors = codec.codec_read(file)
    try:
        x = tensors.pop("X")
        y = tensors.pop("y")
    except KeyError as exc:
        raise IntegrityError(f"{file} lacks required tensor {exc}") from exc
    if x.shape[1:] != desc.sample_shape:
        raise IntegrityError(
            f"{desc.name}: sample shape {x.shape[1:]} != descriptor {desc.sample_shape}"
        )
    data = SplitData(X=Tensor(x), y=Tensor(y), aux=tensors)
    data.validate(desc.task)
    return data


def _grid_side(desc: DatasetDescriptor) -> int:
    return desc.sample_shape[0]


def fitted_stats(name: str, path="./data") -> Optional[prep.StandardizeStats]:
    """Training-split statistics for the dataset's transform, or None when the
    transform needs none.  Cached per (name, path)."""
    desc = registry_lookup(name)
    if desc.family not in ("grid-standardized", "airshower"):
        return None
    key = (name, str(Path(path).resolve()))
    if key not in _stats_cache:
        train = load(name, "train", path)
        if desc.family == "grid-standardized":
            _stats_cache[key] = prep.standardize_fit(train.X.data)
        else:
            _stats_cache[key] = prep.airshower_time_stats(train.X.data)
    return _stats_cache[key]


def stats_tensor_map(stats: prep.StandardizeStats) -> dict:
    return {"mean": np.asarray(stats.mean, dtype=np.float64),
            "std": np.asarray(stats.std, dtype=np.float64)}


def _preprocess(desc: DatasetDescriptor, data: SplitData, path) -> np.ndarray:
    x = data.X.data
    if desc.family == "toptag":
        return np.stack([prep.toptag_features(sample) for sample in x])
    if desc.family == "decay":
        onehot = prep.onehot_pdg_batch(x[..., -1])
        return np.concatenate([x[..., :-1], onehot], axis=-1)
    if desc.family == "grid-plain":
        return prep.spinodal_features(x)
    if desc.family == "grid-standardized":
        return prep.standardize_apply(x, fitted_stats(desc.name, path))
    if desc.family == "airshower":
        stats = fitted_stats(desc.name, path)
        return np.stack(
            [prep.airshower_features(s[:, :-1], s[:, -1], stats) for s in x]
        )
    raise ContractError(f"no transform for family {desc.family!r}")


def _build_graphs(desc: DatasetDescriptor, raw: SplitData,
                  features: np.ndarray) -> Union[Adjacency, np.ndarray]:
    if desc.family == "toptag":
        valid = raw.X.data[..., 0] > 0  # non-zero energy marks a real constituent
        stacks = np.empty((features.shape[0],) + (features.shape[1],) * 2, dtype=np.uint8)
        for i in range(features.shape[0]):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")  # tiny jets clamp k; that is fine here
                stacks[i] = knn_adjacency(features[i, :, 2:4], valid[i], KNN_K).bits
        return stacks
    if desc.family == "decay":
        mothers = raw.aux.get("mothers")
        if mothers is None:
            raise IntegrityError(f"{desc.name}: graph mode needs a 'mothers' tensor")
        stacks = np.empty((features.shape[0],) + (features.shape[1],) * 2, dtype=np.uint8)
        for i in range(features.shape[0]):
            stacks[i] = decay_tree_adjacency(mothers[i]).bits
        return stacks
    if desc.family in ("grid-plain", "grid-standardized"):
        side = _grid_side(desc)
        return grid_adjacency(side, side)
    if desc.family == "airshower":
        return grid_adjacency(9, 9)
    raise ContractError(f"no graph recipe for family {desc.family!r}")


def load_data(name: str, split: str, path="./data", graph: bool = False,
              force_download: bool = False) -> LoadedData:
    """Preprocessed features (plus adjacency in graph mode) and labels.

    Grid-structured datasets come back as images when ``graph`` is false and
    as (B, side*side, 1) node features beside one shared grid adjacency when
    it is true.  Point-cloud and decay datasets get one adjacency per sample,
    built lazily here rather than stored."""
    desc = registry_lookup(name)
    raw = load(name, split, path, force_download)
    features = _preprocess(desc, raw, path)
    adjacency = None
    if graph:
        adjacency = _build_graphs(desc, raw, features)
        if desc.family in ("grid-plain", "grid-standardized"):
            b, side = features.shape[0], _grid_side(desc)
            features = features.reshape(b, side * side, 1)
    return LoadedData(features=features, adjacency=adjacency, y=raw.y.data.copy(),
                      aux=raw.aux)


def synth_name_for_kind(kind: str) -> str:
    for name, desc in REGISTRY.items():
        if desc.synth_kind == kind:
            return name
    raise ContractError(f"unknown synth kind {kind!r}")


def synth_write(kind: str, n_per_split: int, seed: int, out_path) -> str:
    """Generate one synthetic dataset and store it in the standard layout.
    Returns the registry name it was stored under."""
    name = synth_name_for_kind(kind)
    desc = registry_lookup(name)
    triple = synth.synth_generate(kind, n_per_split, seed)
    ddir = _dataset_dir(out_path, name)
    ddir.mkdir(parents=True, exist_ok=True)
    with FileLock(str(ddir / ".lock")):
        entries = {
            "url": "synthetic",
            "shape": str(desc.sample_shape),
            "task": desc.task,
            "splits": "/".join(format_count(n_per_split) for _ in SPLITS),
            "synth.kind": kind,
            "synth.seed": str(seed),
            "synth.n_per_split": str(n_per_split),
        }
        for split, data in zip(SPLITS, triple):
            tensors = {"X": data.X.data, "y": data.y.data}
            tensors.update(data.aux)
            file = _split_file(out_path, name, split)
            codec.codec_write(tensors, file)
            entries[f"md5.{split}"] = codec.file_md5(file)
        codec.write_manifest(_manifest_path(ddir), entries)
    return name
