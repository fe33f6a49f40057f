import numpy as np
import pytest

from pd4ml import engine, graphs, models
from pd4ml.engine import GradTape, Tensor, backward
from pd4ml.errors import ContractError, DimensionError, FormatError
from pd4ml.layers import GlobalAveragePool

from .util import assert_grad_close, fd_gradient


def tiny_graphnet(task="classification", width=8, n=5, f=3, seed=0):
    rng = np.random.default_rng(seed)
    return models.build_graphnet(n, f, task, rng=rng, hidden_width=width)


def random_adjn(rng, n):
    bits = np.triu((rng.random((n, n)) < 0.5).astype(np.uint8), k=1)
    bits |= bits.T
    return graphs.normalize(graphs.Adjacency(n, bits)).matrix


class TestParameterCounts:
    def test_fcn_400_matches_published_count(self):
        model = models.build_fcn(400, "classification")
        assert model.trainable_param_count() == 826_625
        assert models.fcn_param_count(400) == 826_625

    @pytest.mark.parametrize("dim,width", [(17, 8), (576, 16), (800, 32)])
    def test_fcn_closed_form(self, dim, width):
        model = models.build_fcn(dim, "regression", hidden_width=width)
        assert model.trainable_param_count() == models.fcn_param_count(dim, width)

    @pytest.mark.parametrize("n,f,width", [(400, 1, 16), (200, 4, 8), (100, 514, 12)])
    def test_graphnet_closed_form(self, n, f, width):
        model = models.build_graphnet(n, f, "classification", hidden_width=width)
        assert model.trainable_param_count() == models.graphnet_param_count(f, width)

    def test_graphnet_count_independent_of_node_count(self):
        a = models.build_graphnet(10, 3, "classification", hidden_width=8)
        b = models.build_graphnet(99, 3, "classification", hidden_width=8)
        assert a.trainable_param_count() == b.trainable_param_count()

    def test_zero_input_dim_rejected(self):
        with pytest.raises(ContractError):
            models.build_fcn(0, "classification")


class TestFcnForward:
    def test_classification_output_in_unit_interval(self):
        rng = np.random.default_rng(0)
        model = models.build_fcn(12, "classification", rng=rng, hidden_width=8)
        out = models.predict(model, rng.normal(size=(16, 3, 4)))
        assert out.shape == (16, 1)
        assert ((out > 0) & (out < 1)).all()

    def test_regression_head_is_linear(self):
        rng = np.random.default_rng(1)
        model = models.build_fcn(4, "regression", rng=rng, hidden_width=8)
        # doubling the head weights doubles the output shift around the bias
        out1 = models.predict(model, rng.normal(size=(8, 4)))
        assert np.isfinite(out1).all()

    def test_flattening_is_row_major(self):
        rng = np.random.default_rng(2)
        model = models.build_fcn(6, "regression", rng=rng, hidden_width=8)
        x = rng.normal(size=(3, 2, 3))
        a = models.predict(model, x)
        b = models.predict(model, x.reshape(3, 6))
        assert np.array_equal(a, b)

    def test_wrong_width_rejected(self):
        model = models.build_fcn(6, "regression", hidden_width=8)
        with pytest.raises(DimensionError):
            models.predict(model, np.zeros((2, 5)))


class TestGraphNetForward:
    def test_classification_output_shape_and_range(self):
        rng = np.random.default_rng(3)
        model = tiny_graphnet()
        x = rng.normal(size=(6, 5, 3))
        out = models.predict(model, x, adjacency=random_adjn(rng, 5))
        assert out.shape == (6, 1)
        assert ((out > 0) & (out < 1)).all()

    def test_identity_adjacency_reduces_convs_to_shared_dense(self):
        rng = np.random.default_rng(4)
        model = tiny_graphnet()
        x = rng.normal(size=(4, 5, 3))
        eye = Tensor(np.eye(5))
        got = model.forward(Tensor(x), adjn=eye, mode="infer").data

        # twin forward with every graph conv replaced by its plain affine map
        by_name = dict(model._named_layers)
        h = Tensor(x)
        for i in range(3):
            h = by_name[f"node{i}_act"](by_name[f"node{i}"](h))
        for i in range(3):
            conv = by_name[f"gc{i}"]
            h = engine.add_rowvec(engine.matmul(h, conv.params.weights), conv.params.bias)
            h = by_name[f"gc{i}_bn"](h, mode="infer")
            h = by_name[f"gc{i}_act"](h)
        h = GlobalAveragePool()(h)
        for i in range(3):
            h = by_name[f"dense{i}"](h)
            h = by_name[f"dense{i}_bn"](h, mode="infer")
            h = by_name[f"dense{i}_act"](h)
        h = by_name["head"](h)
        want = engine.sigmoid(h).data
        assert np.allclose(got, want, atol=1e-14)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(5)
        model = tiny_graphnet(n=7)
        x = rng.normal(size=(3, 7, 3))
        adjn = random_adjn(rng, 7)
        base = models.predict(model, x, adjacency=adjn)
        for _ in range(20):
            perm = rng.permutation(7)
            out = models.predict(model, x[:, perm, :], adjacency=adjn[np.ix_(perm, perm)])
            assert np.abs(out - base).max() <= 1e-10

    def test_missing_adjacency(self):
        model = tiny_graphnet()
        with pytest.raises(ContractError):
            model.forward(Tensor(np.zeros((2, 5, 3))))

    def test_node_mismatch_at_forward(self):
        model = tiny_graphnet(n=5)
        with pytest.raises(DimensionError):
            models.predict(model, np.zeros((2, 6, 3)), adjacency=np.eye(6))

    def test_per_sample_adjacency_stack(self):
        rng = np.random.default_rng(6)
        model = tiny_graphnet()
        x = rng.normal(size=(4, 5, 3))
        stack = np.stack([random_adjn(rng, 5) for _ in range(4)])
        out = models.predict(model, x, adjacency=stack)
        # each sample must match a run with its own matrix shared
        for i in range(4):
            single = models.predict(model, x[i : i + 1], adjacency=stack[i])
            assert np.abs(out[i] - single[0]).max() < 1e-12


class TestPredictContract:
    def test_repeated_calls_identical(self):
        rng = np.random.default_rng(7)
        model = tiny_graphnet()
        x = rng.normal(size=(5, 5, 3))
        adjn = random_adjn(rng, 5)
        a = models.predict(model, x, adjacency=adjn)
        b = models.predict(model, x, adjacency=adjn)
        assert np.array_equal(a, b)

    def test_batch_of_one_matches_row_of_batch(self):
        rng = np.random.default_rng(8)
        model = models.build_fcn(10, "classification", rng=rng, hidden_width=8)
        x = rng.normal(size=(9, 10))
        full = models.predict(model, x)
        rows = np.concatenate([models.predict(model, x[i : i + 1]) for i in range(9)])
        assert np.abs(full - rows).max() < 1e-12

    def test_chunked_predict_matches_single_shot(self):
        rng = np.random.default_rng(9)
        model = tiny_graphnet()
        x = rng.normal(size=(30, 5, 3))
        adjn = random_adjn(rng, 5)
        a = models.predict(model, x, adjacency=adjn, batch_size=7)
        b = models.predict(model, x, adjacency=adjn, batch_size=300)
        assert np.abs(a - b).max() < 1e-12


def model_gradients_vs_fd(model, loss_of_model, param_names=None, rtol=1e-4):
    """Analytic gradients of a model-level loss against central differences,
    parameter by parameter (and input, handled by the caller)."""
    with GradTape() as tape:
        loss = loss_of_model()
    grads = backward(tape, loss)
    named = model.named_parameters()
    for name in param_names or named:
        tensor = named[name]

        def f(arr, _name=name, _orig=tensor):
            model.set_parameters({_name: Tensor(arr, trainable=True)})
            try:
                return float(loss_of_model().data)
            finally:
                model.set_parameters({_name: _orig})

        fd = fd_gradient(f, [tensor.data], 0)
        assert_grad_close(grads[tensor], fd, rtol=rtol)


class TestEndToEndGradients:
    def test_tiny_graphnet_all_parameters(self):
        rng = np.random.default_rng(10)
        model = tiny_graphnet(width=4, n=5, f=3)
        x = rng.normal(size=(3, 5, 3))
        adjn = Tensor(random_adjn(rng, 5))
        y = rng.random((3, 1))

        def loss_of_model():
            drop_rng = np.random.default_rng(123)  # frozen masks: deterministic loss
            out = model.forward(Tensor(x), adjn=adjn, mode="train", rng=drop_rng)
            diff = engine.sub(out, Tensor(y))
            return engine.reduce_mean(engine.mul(diff, diff))

        model_gradients_vs_fd(model, loss_of_model)

    def test_tiny_graphnet_input_gradient(self):
        rng = np.random.default_rng(11)
        model = tiny_graphnet(width=4, n=5, f=3, task="regression")
        x = rng.normal(size=(2, 5, 3))
        adjn = Tensor(random_adjn(rng, 5))

        def plain(arr):
            out = model.forward(Tensor(arr), adjn=adjn, mode="train",
                                rng=np.random.default_rng(7))
            return float(engine.reduce_mean(engine.mul(out, out)).data)

        xt = Tensor(x, trainable=True)
        with GradTape() as tape:
            out = model.forward(xt, adjn=adjn, mode="train",
                                rng=np.random.default_rng(7))
            loss = engine.reduce_mean(engine.mul(out, out))
        grads = backward(tape, loss)
        assert_grad_close(grads[xt], fd_gradient(plain, [x], 0))

    def test_tiny_fcn_all_parameters(self):
        rng = np.random.default_rng(12)
        model = models.build_fcn(4, "classification", rng=rng, hidden_width=4)
        x = rng.normal(size=(5, 4))
        y = (rng.random((5, 1)) < 0.5).astype(float)

        def loss_of_model():
            p = engine.clip(model.forward(Tensor(x)), 1e-7, 1 - 1e-7)
            yt = Tensor(y)
            one_minus = engine.add(engine.scale(p, -1.0), 1.0)
            ll = engine.add(engine.mul(yt, engine.log(p)),
                            engine.mul(engine.add(engine.scale(yt, -1.0), 1.0),
                                       engine.log(one_minus)))
            return engine.scale(engine.reduce_mean(ll), -1.0)

        model_gradients_vs_fd(model, loss_of_model)


class TestCheckpoints:
    def test_round_trip_preserves_predictions(self, tmp_path):
        rng = np.random.default_rng(13)
        model = tiny_graphnet()
        # push running stats away from init so they are exercised too
        adjn = Tensor(random_adjn(rng, 5))
        model.forward(Tensor(rng.normal(size=(8, 5, 3))), adjn=adjn, mode="train",
                      rng=rng)
        x = rng.normal(size=(6, 5, 3))
        want = models.predict(model, x, adjacency=adjn.data)
        path = tmp_path / "model.pd4m"
        models.save_checkpoint(model, path)
        back = models.load_checkpoint(path)
        got = models.predict(back, x, adjacency=adjn.data)
        assert np.array_equal(want, got)

    def test_checkpoint_is_deterministic(self, tmp_path):
        model = tiny_graphnet()
        models.save_checkpoint(model, tmp_path / "a.pd4m")
        models.save_checkpoint(model, tmp_path / "b.pd4m")
        assert (tmp_path / "a.pd4m").read_bytes() == (tmp_path / "b.pd4m").read_bytes()

    def test_missing_parameter_rejected(self, tmp_path):
        from pd4ml import codec

        model = tiny_graphnet()
        path = tmp_path / "m.pd4m"
        models.save_checkpoint(model, path)
        tensors = codec.codec_read(path)
        tensors.pop("head.weights")
        codec.codec_write(tensors, path)
        with pytest.raises(FormatError):
            models.load_checkpoint(path)
