"""
Checking the reverse-mode engine
================================

The models are trained with a small tape-based autodiff over numpy. Here we
build a scalar loss through one encoder block and compare the analytic
gradients against central differences.
"""

import numpy as np

from alignbench import AlignmentSpec, EncoderBlockParams, Rng64
from alignbench import autodiff as ad
from alignbench.attention import encoder_block_nodes
from alignbench.gradcheck import check_gradients

rng = Rng64(3)
block = EncoderBlockParams.init(d=8, heads=2, d_ff=16, seed=1)
spec = AlignmentSpec.from_name("scaled_dot")
probe = rng.normal((5, 8))

inputs = {"S": rng.normal((5, 8)), **block.params()}


def loss(g, nodes):
    # a random linear probe turns the block output into a scalar
    out = encoder_block_nodes(spec, nodes["S"], nodes, heads=2)
    return ad.sum(out * probe)


result = check_gradients(loss, inputs, h=1e-5, tol=1e-4)
for name, err in sorted(result.errors.items()):
    print(f"{name:>10}  max relative error {err:.2e}")
print("all within 1e-4:", result.passed)

# The same engine handles a plain least-squares fit.
g = ad.Graph()
x = g.param(np.zeros((3, 1)), name="x")
A = rng.normal((6, 3))
y = rng.normal((6, 1))
resid = g.constant(A) @ x + g.constant(-y)
grads = g.gradients_by_name(ad.sum(resid * resid))
print("\nd/dx |Ax - y|^2 at x=0:", grads["x"].ravel())
print("closed form -2 A^T y: ", (-2 * A.T @ y).ravel())
