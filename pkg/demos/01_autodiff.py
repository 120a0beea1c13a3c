"""A tour of the tensor engine underneath everything else.

Every model component in this package runs on one small reverse-mode
autodiff core: float64 numpy arrays wrapped in Tensors, a closure per
operation, and a topological backward pass. No framework.
"""

import numpy as np

from tricast.tensor import (Tensor, backward, grad_check, matmul, mul, relu,
                            rms_norm, softmax_axis, square, tsum)

print("== forward and backward on a tiny expression ==")
x = Tensor(np.array([[1.0, -2.0], [3.0, 0.5]]), requires_grad=True)
w = Tensor(np.array([[0.5, 1.0], [-1.0, 2.0]]), requires_grad=True)
y = tsum(square(relu(matmul(x, w))))
backward(y)
print("loss:", y.item())
print("dL/dx:\n", x.grad)
print("dL/dw:\n", w.grad)

print()
print("== gradients agree with central differences ==")
rng = np.random.default_rng(0)
probe = Tensor(rng.normal(size=(3, 4)))
for name, f in [
    ("softmax", lambda t: tsum(square(softmax_axis(t, axis=-1)))),
    ("rms_norm", lambda t: tsum(square(rms_norm(t, Tensor(np.ones(4)), 1e-6)))),
    ("relu*mul", lambda t: tsum(mul(relu(t), t))),
]:
    err = grad_check(f, probe)
    print(f"{name:10s} max relative error {err:.2e}")

print()
print("== broadcasting rules are strict on purpose ==")
a = Tensor(np.ones((2, 3)))
b = Tensor(np.ones(3))
print("matrix + trailing vector (bias form):", (a + b).shape)
try:
    bad = Tensor(np.ones((2, 1))) + Tensor(np.ones((1, 3)))
except Exception as exc:
    print("implicit cross-broadcast rejected:", type(exc).__name__)
