import numpy as np
import pytest

from pd4ml import synth
from pd4ml.errors import ContractError
from pd4ml.graphs import decay_tree_adjacency


def oracle_grid_score(image):
    """Hand-coded planted-feature detector: maximum 3x3 window mean.  Two
    steps (local average, then max) -- independent of any model code."""
    side = image.shape[0]
    best = -np.inf
    for r in range(side - 2):
        for c in range(side - 2):
            best = max(best, image[r : r + 3, c : c + 3].mean())
    return best


def oracle_auc(scores, labels):
    """Brute-force pairwise Mann-Whitney."""
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    wins = sum((p > q) + 0.5 * (p == q) for p in pos for q in neg)
    return wins / (len(pos) * len(neg))


class TestDeterminism:
    @pytest.mark.parametrize("kind", synth.SYNTH_KINDS)
    def test_same_seed_same_bytes(self, kind):
        a = synth.synth_generate(kind, 12, seed=5)
        b = synth.synth_generate(kind, 12, seed=5)
        for sa, sb in zip(a, b):
            assert sa.X.data.tobytes() == sb.X.data.tobytes()
            assert sa.y.data.tobytes() == sb.y.data.tobytes()
            for key in sa.aux:
                assert sa.aux[key].tobytes() == sb.aux[key].tobytes()

    def test_different_seed_differs(self):
        a = synth.synth_generate("grid20-like", 12, seed=5)
        b = synth.synth_generate("grid20-like", 12, seed=6)
        assert a[0].X.data.tobytes() != b[0].X.data.tobytes()

    def test_splits_are_distinct(self):
        train, test, val = synth.synth_generate("grid20-like", 12, seed=0)
        assert train.X.data.tobytes() != test.X.data.tobytes()
        assert test.X.data.tobytes() != val.X.data.tobytes()


class TestContracts:
    def test_too_few_samples(self):
        with pytest.raises(ContractError):
            synth.synth_generate("grid20-like", 9, seed=0)

    def test_unknown_kind(self):
        with pytest.raises(ContractError):
            synth.synth_generate("nosuch-like", 100, seed=0)

    @pytest.mark.parametrize("kind,shape", [
        ("toptag-like", (200, 4)), ("decay-like", (100, 9)),
        ("grid20-like", (20, 20)), ("grid24-like", (24, 24)),
        ("shower-like", (81, 81)),
    ])
    def test_shapes_mirror_registry(self, kind, shape):
        train, _, _ = synth.synth_generate(kind, 10, seed=1)
        assert train.X.shape == (10,) + shape

    @pytest.mark.parametrize("kind", ["grid20-like", "toptag-like", "decay-like"])
    def test_exact_class_balance(self, kind):
        train, _, _ = synth.synth_generate(kind, 40, seed=2)
        assert train.y.data.sum() == 20.0


class TestPlantedSignals:
    def test_grid_oracle_auc(self):
        train, _, _ = synth.synth_generate("grid20-like", 300, seed=3)
        scores = [oracle_grid_score(img) for img in train.X.data]
        assert oracle_auc(scores, train.y.data.tolist()) > 0.9

    def test_jet_oracle_auc(self):
        # pT-weighted angular spread around the pT-weighted axis separates
        # two-prong from one-prong patterns
        train, _, _ = synth.synth_generate("toptag-like", 200, seed=4)
        scores = []
        for jet in train.X.data:
            valid = jet[:, 0] > 0
            e, px, py, pz = jet[valid].T
            pt = np.hypot(px, py)
            eta = np.arcsinh(pz / pt)
            phi = np.arctan2(py, px)
            w = pt / pt.sum()
            spread = (w * ((eta - (w * eta).sum()) ** 2
                           + (phi - (w * phi).sum()) ** 2)).sum()
            scores.append(spread)
        assert oracle_auc(scores, train.y.data.tolist()) > 0.9

    def test_decay_label_is_motif_presence(self):
        train, _, _ = synth.synth_generate("decay-like", 100, seed=5)
        for x, y, mothers in zip(train.X.data, train.y.data, train.aux["mothers"]):
            pdg = x[:, 8].astype(int)
            present = False
            for v in range(len(pdg)):
                if pdg[v] == synth.MOTIF_PARENT:
                    kids = np.nonzero(mothers == v)[0]
                    if (pdg[kids] == synth.MOTIF_CHILD).sum() >= 2:
                        present = True
            assert present == bool(y)

    def test_decay_trees_are_valid(self):
        train, _, _ = synth.synth_generate("decay-like", 30, seed=6)
        for mothers in train.aux["mothers"]:
            adj = decay_tree_adjacency(mothers)
            assert adj.n == 100

    def test_shower_oracle_correlation(self):
        train, _, _ = synth.synth_generate("shower-like", 200, seed=7)
        feats = []
        for x in train.X.data:
            traces = x[:, :80]
            mask = traces.sum(axis=1) > 0
            centroid = (traces[mask] * np.arange(80)).sum(axis=1) / traces[mask].sum(axis=1)
            feats.append(centroid.mean())
        r = np.corrcoef(feats, train.y.data)[0, 1]
        assert abs(r) > 0.7

    def test_shower_targets_in_range(self):
        train, _, _ = synth.synth_generate("shower-like", 50, seed=8)
        assert (np.abs(train.y.data) <= 1.0).all()
        assert (train.X.data[..., :80] >= 0).all()
