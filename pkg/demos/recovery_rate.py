"""
How fast does one-bit recovery improve with more measurements?
==============================================================

For a fixed target we draw fresh dithered measurements at several sample
sizes, run the subgradient solver and record the median relative error
||G(x_hat) - G(x0)|| / ||G(x0)||.  On a log-log scale the medians fall on
a line of slope close to -1/2.
"""

import numpy as np

from onebitgen import ExperimentConfig
from onebitgen.experiments import fit_slope, rate_sweep

cfg = ExperimentConfig.from_dict({
    "experiment": "rate_sweep",
    "net": {"dims": [2, 64, 1024], "seed": 7},
    "m_list": [256, 512, 1024, 2048, 4096, 8192],
    "trials": 10,
    "sensing": {"dist": "gaussian", "noise": "gaussian", "noise_scale": 0.1, "lambda": 10.0},
    "output_dir": "rate_sweep_out",
})
rows = rate_sweep(cfg, workers=4)

for r in rows:
    print(f"m={r.m:5d}  median={r.median_rel_error:.3f}  IQR=[{r.q25:.3f}, {r.q75:.3f}]")

fit = fit_slope(rows)
print("log-log slope: %.3f" % fit["slope"])
print("median ratio first/last: %.2f" % (rows[0].median_rel_error / rows[-1].median_rel_error))
# rate_sweep_out/ now holds rate_sweep.csv, slope.json, rate_curve.svg and a manifest
