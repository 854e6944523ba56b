"""
Why the dither matters
======================

With Rademacher sensing vectors, theta1 = e1 and theta2 = e1 - e2/2 give
the same sign for every measurement: |<a, theta2> - <a, theta1>| = 1/2 is
never enough to cross zero from <a, theta1> = +-1.  Adding a uniform dither
before quantization makes about 2.5% of labels differ, and that is enough
to tell the two signals apart from the risk.
"""

import numpy as np

import onebitgen as ob

d, m, lam = 10, 10_000, 10.0
theta1 = np.zeros(d)
theta1[0] = 1.0
theta2 = theta1.copy()
theta2[1] = -0.5

a = ob.sample_sensing("rademacher", m, d, seed=0)

plain = ob.quantize(a, theta1, dither_disabled=True, dist="rademacher")
print("undithered flip fraction:", ob.sign_difference_fraction(plain, theta1, theta2))

dithered = ob.quantize(a, theta1, lam=lam, seed=1, dist="rademacher")
print("dithered flip fraction:  ", ob.sign_difference_fraction(dithered, theta1, theta2))

# risk of each candidate under data generated from theta1
for name, ms in (("undithered", plain), ("dithered", dithered)):
    l1, l2 = ob.signal_loss(ms, theta1), ob.signal_loss(ms, theta2)
    print(f"{name:10s}  L(theta1)={l1:+.3f}  L(theta2)={l2:+.3f}")

# the dither turns the sign into an unbiased linear measurement on [-lam, lam]
for v in (-12.0, -3.0, 0.0, 4.0):
    mc = np.mean(np.where(v + np.random.default_rng(2).uniform(-lam, lam, 200_000) >= 0, 1, -1))
    print(f"v={v:+5.1f}  E[sign(v + tau)]={ob.expected_sign(v, lam):+.3f}  Monte Carlo {mc:+.3f}")
