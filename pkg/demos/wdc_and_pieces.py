"""
Checking the weight distribution condition and counting linear pieces
=====================================================================

The landscape analysis assumes every layer satisfies the WDC: masked
Gram matrices W_{+,x}^T W_{+,z} stay close to their Gaussian expectation
Q_{x,z}.  We estimate the worst deviation over sampled pairs and watch it
shrink as the layer gets taller.

A ReLU layer with d units splits its input space along d hyperplanes;
the number of cells, and hence of linear pieces, is at most
C(d, k) = sum_{i <= k} binom(d, i).
"""

import numpy as np

import onebitgen as ob

rng = np.random.default_rng(0)
for rows in (50, 200, 1000, 4000):
    w = rng.standard_normal((rows, 5)) / np.sqrt(rows)
    rep = ob.estimate_wdc(w, 200, seed=1)
    print(f"{rows:5d} x 5 layer: epsilon_hat = {rep.epsilon_hat:.3f}")

x = np.array([1.0, 0.0])
print("Q at angle 0:\n", ob.q_matrix(x, x))
print("Q at angle pi/2:\n", ob.q_matrix(x, np.array([0.0, 1.0])))

# pieces of a 2-D input layer with 6 units: central lines, so only 2 * 6 cells
w = ob.new_random_gaussian([2, 6], seed=3).weights[0]
print("cells of a 6-unit layer in R^2:", ob.brute_force_region_count(w), "bound", ob.count_pieces_bound(6, 2))

# with offsets the lines are in general position and the bound is attained
print("cells of 6 generic affine lines:", ob.brute_force_region_count(w, rng.standard_normal(6)))
