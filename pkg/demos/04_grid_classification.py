"""Walkthrough: train the GraphNet and the FCN on the synthetic grid task.

A small run (600 training samples, reduced widths) that still shows the
qualitative gap: the message-passing model exploits the planted spatial
pattern, the flat network has to make do with global statistics.

Takes a couple of minutes on a laptop CPU.
"""

import tempfile
from pathlib import Path

from pd4ml import hub, load_data, training

store = Path(tempfile.mkdtemp(prefix="pd4ml_demo_"))
name = hub.synth_write("grid20-like", 600, seed=0, out_path=store)

results = {}
for kind, width, epochs, batch in (("graphnet", 8, 5, 32), ("fcn", 16, 10, 128)):
    graph = kind == "graphnet"
    splits = {s: load_data(name, s, store, graph=graph)
              for s in ("train", "test", "validation")}
    preset = training.graphnet_preset if graph else training.fcn_preset
    config = preset(max_epochs=epochs, batch_size=batch)
    print(f"\n== {kind} (width {width}) ==")
    _, history = training.train_run(
        name, kind, splits["train"], splits["validation"], splits["test"],
        "classification", seed=0, hidden_width=width, config=config,
        log_fn=lambda e, tl, vl, lr: print(f"  epoch {e}: train {tl:.4f}  val {vl:.4f}  lr {lr:g}"),
    )
    results[kind] = history.metrics
    print(f"  test: accuracy {history.metrics['accuracy']:.3f}, "
          f"AUC {history.metrics['auc']:.3f}")

gap = results["graphnet"]["auc"] - results["fcn"]["auc"]
print(f"\nGraphNet beats FCN by {gap:+.3f} AUC on the planted-pattern task")
