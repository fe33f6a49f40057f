"""Shared oracles for the test suite.

The finite-difference driver below is the independent gradient oracle: it only
evaluates forward passes numerically and never consults the tape, so it cannot
inherit a bug from the backward pass it is checking.
"""

import numpy as np

from pd4ml import engine


def fd_gradient(fn, arrays, i, eps=1e-5):
    """Central finite differences of ``fn`` w.r.t. ``arrays[i]``.

    ``fn`` takes plain ndarrays (same layout as ``arrays``) and returns a
    python float.
    """
    base = [np.array(a, dtype=np.float64) for a in arrays]
    grad = np.zeros_like(base[i])
    it = np.nditer(base[i], flags=["multi_index"])
    for _ in it:
        mi = it.multi_index
        plus = [a.copy() for a in base]
        minus = [a.copy() for a in base]
        plus[i][mi] += eps
        minus[i][mi] -= eps
        grad[mi] = (fn(*plus) - fn(*minus)) / (2.0 * eps)
    return grad


def rel_grad_error(analytic, fd, floor=1e-3):
    analytic = np.asarray(analytic, dtype=np.float64)
    fd = np.asarray(fd, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(fd)), floor)
    return float((np.abs(analytic - fd) / denom).max())


def assert_grad_close(analytic, fd, rtol=1e-4, floor=1e-3):
    err = rel_grad_error(analytic, fd, floor=floor)
    assert err < rtol, f"gradient mismatch: rel err {err:.3e} >= {rtol}"


def taped_vs_fd(build, arrays, rtol=1e-4, eps=1e-5, floor=1e-3):
    """Check every input gradient of ``build`` against central differences.

    ``build`` maps engine Tensors to a scalar Tensor.  The analytic side runs
    once under a tape; the numeric side re-evaluates the forward pass with
    perturbed raw arrays.
    """
    tensors = [engine.Tensor(a, trainable=True) for a in arrays]
    with engine.GradTape() as tape:
        loss = build(*tensors)
    grads = engine.backward(tape, loss)

    def plain(*arrs):
        return float(build(*[engine.Tensor(a) for a in arrs]).data)

    for i, t in enumerate(tensors):
        fd = fd_gradient(plain, arrays, i, eps=eps)
        analytic = grads.get(t, np.zeros_like(np.asarray(arrays[i], dtype=float)))
        assert_grad_close(analytic, fd, rtol=rtol, floor=floor)
