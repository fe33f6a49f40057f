import numpy as np
import pytest

from pd4ml import engine
from pd4ml.engine import GradTape, Tensor, backward
from pd4ml.errors import ContractError, DimensionError, DomainError, NumericError

from .util import fd_gradient, assert_grad_close, taped_vs_fd


class TestMatmul:
    def test_identity_times_matrix(self):
        m = Tensor([[2.0, -1.0], [0.5, 3.0]])
        eye = Tensor(np.eye(2))
        assert np.array_equal(engine.matmul(eye, m).data, m.data)

    def test_forced_small_case(self):
        a = Tensor([[1.0, 2.0], [3.0, 4.0]])
        b = Tensor([[1.0], [1.0]])
        assert np.array_equal(engine.matmul(a, b).data, [[3.0], [7.0]])

    def test_against_triple_loop_oracle(self):
        rng = np.random.default_rng(7)
        a = rng.normal(size=(5, 4))
        b = rng.normal(size=(4, 3))
        want = np.zeros((5, 3))
        for i in range(5):
            for j in range(3):
                for k in range(4):
                    want[i, j] += a[i, k] * b[k, j]
        got = engine.matmul(Tensor(a), Tensor(b)).data
        assert np.abs(got - want).max() < 1e-12

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            engine.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))

    def test_associativity_with_identity_exact(self):
        rng = np.random.default_rng(3)
        a = rng.normal(size=(4, 4))
        b = rng.normal(size=(4, 5))
        eye = Tensor(np.eye(4))
        left = engine.matmul(engine.matmul(Tensor(a), eye), Tensor(b)).data
        right = engine.matmul(Tensor(a), Tensor(b)).data
        assert np.array_equal(left, right)

    @pytest.mark.parametrize("shapes", [((2, 3), (3, 4)), ((5, 2, 3), (3, 4)),
                                        ((4, 4), (3, 4, 2)), ((3, 2, 4), (3, 4, 2))])
    def test_gradients(self, shapes):
        rng = np.random.default_rng(hash(shapes) % 2**32)
        a = rng.normal(size=shapes[0])
        b = rng.normal(size=shapes[1])
        taped_vs_fd(lambda x, y: engine.reduce_sum(engine.mul(engine.matmul(x, y),
                                                              engine.matmul(x, y))),
                    [a, b])


class TestElementwise:
    def test_add_zero_is_identity(self):
        x = Tensor([1.5, -2.0, 0.25])
        assert np.array_equal(engine.add(x, 0.0).data, x.data)

    def test_log_of_e(self):
        assert engine.log(Tensor([np.e])).data[0] == pytest.approx(1.0, abs=1e-15)

    def test_mul_shape_mismatch(self):
        with pytest.raises(DimensionError):
            engine.mul(Tensor(np.ones((2, 2))), Tensor(np.ones((2, 3))))

    def test_log_domain_error(self):
        with pytest.raises(DomainError):
            engine.log(Tensor([1.0, 0.0]))
        with pytest.raises(DomainError):
            engine.log(Tensor([-1.0]))

    def test_exp_overflow_is_error_state(self):
        with pytest.raises(NumericError):
            engine.exp(Tensor([1000.0]))

    def test_scalar_tensor_broadcast(self):
        x = Tensor([[1.0, 2.0], [3.0, 4.0]])
        s = Tensor(2.0)
        assert np.array_equal(engine.mul(x, s).data, x.data * 2.0)

    def test_max0(self):
        x = Tensor([-1.0, 0.0, 2.0])
        assert np.array_equal(engine.max0(x).data, [0.0, 0.0, 2.0])


class TestReduce:
    def test_mean_axis0(self):
        x = Tensor([[1.0, 3.0], [5.0, 7.0]])
        assert np.array_equal(engine.reduce_mean(x, axis=0).data, [3.0, 5.0])

    def test_sum_of_zeros(self):
        assert engine.reduce_sum(Tensor(np.zeros((4, 3)))).data == 0.0

    def test_max(self):
        assert engine.reduce_max(Tensor([2.0, 9.0, 4.0]), axis=0).data == 9.0

    def test_axis_out_of_range(self):
        with pytest.raises(DimensionError):
            engine.reduce_sum(Tensor(np.ones((2, 2))), axis=2)

    def test_mean_of_constant_returns_constant(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            c = float(rng.normal())
            x = Tensor(np.full((rng.integers(1, 40),), c))
            got = float(engine.reduce_mean(x).data)
            assert got == pytest.approx(c, rel=1e-12, abs=1e-15)


class TestBackward:
    def test_sum_gradient_is_ones(self):
        x = Tensor([1.0, 2.0, 3.0], trainable=True)
        with GradTape() as tape:
            loss = engine.reduce_sum(x)
        grads = backward(tape, loss)
        assert np.array_equal(grads[x], [1.0, 1.0, 1.0])

    def test_sum_of_squares_gradient(self):
        x = Tensor([1.0, 2.0], trainable=True)
        with GradTape() as tape:
            loss = engine.reduce_sum(engine.mul(x, x))
        grads = backward(tape, loss)
        assert np.allclose(grads[x], [2.0, 4.0], atol=1e-15)

    def test_non_scalar_loss_rejected(self):
        x = Tensor([1.0, 2.0], trainable=True)
        with GradTape() as tape:
            y = engine.mul(x, x)
        with pytest.raises(ContractError):
            backward(tape, y)

    def test_loss_outside_tape_rejected(self):
        x = Tensor([1.0], trainable=True)
        with GradTape() as tape:
            engine.mul(x, x)
        stray = engine.reduce_sum(engine.mul(x, x))
        with pytest.raises(ContractError):
            backward(tape, stray)

    def test_reused_tensor_accumulates(self):
        x = Tensor([3.0], trainable=True)
        with GradTape() as tape:
            loss = engine.reduce_sum(engine.add(engine.mul(x, x), x))
        grads = backward(tape, loss)
        assert np.allclose(grads[x], [7.0])

    def test_composite_graph_matches_finite_differences(self):
        rng = np.random.default_rng(42)
        x = rng.normal(size=(3, 4)) + 3.0  # keep log/powf domains safe
        w = rng.normal(size=(4, 2))

        def build(xt, wt):
            h = engine.matmul(xt, wt)
            h = engine.sigmoid(h)
            h = engine.add(engine.mul(h, h), 0.5)
            h = engine.log(h)
            return engine.reduce_mean(h)

        taped_vs_fd(build, [x, w])


@pytest.mark.parametrize("seed", range(25))
def test_primitive_gradient_property(seed):
    """Every primitive, random shapes/values, analytic vs central differences."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 5))
    m = int(rng.integers(2, 5))
    x = rng.normal(size=(n, m))
    v = rng.normal(size=(m,))
    pos = np.abs(rng.normal(size=(n, m))) + 0.5
    # keep relu/prelu inputs away from the kink so FD stays valid
    x = np.where(np.abs(x) < 0.1, x + 0.25, x)

    cases = [
        (lambda a: engine.reduce_sum(engine.mul(engine.add(a, a), a)), [x]),
        (lambda a: engine.reduce_sum(engine.sub(engine.scale(a, 1.7), a)), [x]),
        (lambda a: engine.reduce_sum(engine.log(a)), [pos]),
        (lambda a: engine.reduce_mean(engine.exp(engine.scale(a, 0.3))), [x]),
        (lambda a: engine.reduce_sum(engine.max0(a)), [x]),
        (lambda a: engine.reduce_sum(engine.sigmoid(a)), [x]),
        (lambda a: engine.reduce_sum(engine.powf(a, -0.5)), [pos]),
        (lambda a: engine.reduce_sum(engine.clip(a, -0.8, 0.8)), [x]),
        (lambda a, b: engine.reduce_sum(engine.add_rowvec(engine.mul(a, a), b)), [x, v]),
        (lambda a, b: engine.reduce_sum(engine.mul_rowvec(a, b)), [x, v]),
        (lambda a, b: engine.reduce_sum(engine.prelu(a, b)), [x, np.abs(v) + 0.1]),
        (lambda a: engine.reduce_sum(engine.mul(engine.reduce_mean(a, axis=0),
                                                engine.reduce_mean(a, axis=0))), [x]),
        (lambda a: engine.reduce_max(a), [x]),
    ]
    for build, arrays in cases:
        taped_vs_fd(build, arrays)


def test_tensors_are_immutable():
    t = Tensor([1.0, 2.0])
    with pytest.raises(ValueError):
        t.data[0] = 5.0


def test_tape_reset():
    x = Tensor([1.0], trainable=True)
    tape = GradTape()
    with tape:
        engine.mul(x, x)
    assert len(tape) == 1
    tape.reset()
    assert len(tape) == 0
