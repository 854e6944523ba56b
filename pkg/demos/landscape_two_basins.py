"""
The two basins of the recovery objective
========================================

A random expansive ReLU network maps the plane into R^1024.  We evaluate
the infinite-sample risk on a grid around the true representation and look
for its minima: the global one sits at x0, a shallower one near
-rho_2 x0 with rho_2 = 1/pi.
"""

import numpy as np

import onebitgen as ob

net = ob.new_random_gaussian([2, 64, 1024], seed=7)
x0 = np.array([1.0, 1.0])

# 81 x 81 grid over [-2, 2]^2, surrogate risk ||G(x)||^2 - 2 <G(x0), G(x)>
report = ob.landscape_grid(net, x0, -2.0, 2.0, 81)
print("grid argmin:", report.argmin())

rho = ob.rho_n(net.depth)
print("rho_2 =", rho, " so the spurious point is", -rho * x0)
for p in report.strict_local_minima():
    i, j = np.searchsorted(report.axis1, p[0]), np.searchsorted(report.axis2, p[1])
    print("strict local minimum at", p, "loss", round(float(report.loss[i, j]), 4))

# the same picture from measurements: one-bit labels with dither lam = 10
ms = ob.measure(ob.forward(net, x0), 20_000, noise="gaussian", noise_scale=0.1, lam=10.0, seed=1)
emp = ob.landscape_grid(net, x0, -2.0, 2.0, 41, ms=ms)
outside = emp.zone == "outside"
# with 2e4 labels the empirical minimizer still wanders a fair way from x0
print("empirical argmin:", emp.argmin())
print("cells outside the balls where -v_x descends: %.3f" % emp.descent_ok[outside].mean())

# origin: every direction is a descent direction
dirs = np.random.default_rng(0).standard_normal((16, 2))
print("max D_w L(0):", max(ob.directional_derivative(net, ms, np.zeros(2), w) for w in dirs))

# heatmap of the surrogate grid, with the three exceptional balls drawn in
from onebitgen.svg import heatmap_svg
with open("landscape_heatmap.svg", "w") as fh:
    fh.write(heatmap_svg(report))
