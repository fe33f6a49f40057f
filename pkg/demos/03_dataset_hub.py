"""Walkthrough: the dataset hub.

Registry descriptions, synthetic dataset generation, raw vs preprocessed
loading, graph mode, and what the integrity check does when a file is
tampered with.
"""

import tempfile
from pathlib import Path

import numpy as np

from pd4ml import hub, load, load_data, print_description, registry_lookup
from pd4ml.errors import IntegrityError

print("== registry ==")
print_description("Spinodal")
print()
print_description("TopTagging")

store = Path(tempfile.mkdtemp(prefix="pd4ml_demo_"))
print(f"\n== generating synthetic stand-ins under {store} ==")
name = hub.synth_write("grid20-like", 200, seed=0, out_path=store)
print("wrote:", name, "->", sorted(p.name for p in (store / name).iterdir()))

print("\n== raw load ==")
raw = load(name, "train", store)
print("X:", raw.X.shape, "y:", raw.y.shape, "positives:", int(raw.y.data.sum()))

print("\n== preprocessed load, graph mode ==")
data = load_data(name, "train", store, graph=True)
print("node features:", data.features.shape)
print("shared grid adjacency with", data.adjacency.n_edges, "edges")

print("\n== point-cloud dataset: one adjacency per sample ==")
jet_name = hub.synth_write("toptag-like", 50, seed=1, out_path=store)
jets = load_data(jet_name, "train", store, graph=True)
print("features:", jets.features.shape, "adjacency stack:", jets.adjacency.shape)
per_jet_edges = [int(a.sum()) // 2 for a in jets.adjacency[:5]]
print("edges in the first five jets:", per_jet_edges)

print("\n== integrity check ==")
victim = store / name / "test.pd4m"
blob = bytearray(victim.read_bytes())
blob[100] ^= 0xFF
victim.write_bytes(bytes(blob))
try:
    load(name, "test", store)
except IntegrityError as exc:
    print("tampered file rejected:", exc)
