"""Walkthrough: the tensor engine and its gradient tape.

Builds a small computation, records it on a tape, pulls gradients out
backward, and cross-checks one of them against central finite differences.
"""

import numpy as np

from pd4ml import GradTape, Tensor, backward
from pd4ml import engine

print("== tensors ==")
x = Tensor([[1.0, 2.0], [3.0, 4.0]])
w = Tensor(np.eye(2) * 0.5, trainable=True)
print("x:", x, "\nw:", w)

print("\n== a taped forward pass ==")
with GradTape() as tape:
    h = engine.matmul(x, w)          # (2, 2)
    h = engine.sigmoid(h)
    loss = engine.reduce_mean(engine.mul(h, h))
print(f"{len(tape)} primitive ops recorded, loss = {loss.item():.6f}")

grads = backward(tape, loss)
print("dloss/dw =\n", grads[w])

print("\n== finite-difference cross-check ==")
def loss_at(warr):
    h = engine.sigmoid(engine.matmul(x, Tensor(warr)))
    return float(engine.reduce_mean(engine.mul(h, h)).data)

eps = 1e-5
fd = np.zeros((2, 2))
for i in range(2):
    for j in range(2):
        wp = w.data.copy(); wp[i, j] += eps
        wm = w.data.copy(); wm[i, j] -= eps
        fd[i, j] = (loss_at(wp) - loss_at(wm)) / (2 * eps)
print("finite differences =\n", fd)
print("max abs difference:", np.abs(fd - grads[w]).max())

print("\n== error states ==")
try:
    engine.log(Tensor([0.0]))
except Exception as exc:
    print("log(0):", type(exc).__name__, "-", exc)
try:
    engine.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
except Exception as exc:
    print("bad matmul:", type(exc).__name__, "-", exc)
