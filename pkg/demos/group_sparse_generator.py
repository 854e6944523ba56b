"""
Group-sparse vectors from an offset-free ReLU network
=====================================================

Nonnegative vectors with exactly one nonzero in each of k blocks are the
range of a three-layer ReLU network without biases.  Offsets come from an
extra input fixed to 1; block i carries a row of triangle bumps in x_i.
"""

import numpy as np

import onebitgen as ob

k, d = 3, 12
net = ob.group_sparse_network(k, d)
print("layer widths:", net.dims)

# sweep x_1 across the first block and watch the bumps light up in turn
for x1 in np.arange(2.0, 10.5, 0.5):
    out = ob.forward(net, np.array([x1, 0.0, 0.0, 1.0]))
    print(f"x1={x1:4.1f}  block 1 = {np.round(out[:d // k], 2)}")

# encode a target and push it through the network
target = np.array([0, 0.7, 0, 0,   0, 0, 0, 0,   0.25, 0, 0, 0])
code = ob.encode_group_sparse(target, k)
print("code:", code)
print("reconstruction error:", np.max(np.abs(ob.forward(net, code) - target)))
