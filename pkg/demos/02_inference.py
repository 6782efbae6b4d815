"""Standardised effect statistics and the HAC statistic for a loading row.

Repeats a small simulation and compares the empirical spread of the
statistics with the standard normal.
"""

import numpy as np
from scipy import stats

from mefm import fit_mefm, gen_dataset, preset
from mefm.dgp import child_seed
from mefm.inference import (
    contrast_stat,
    hac_loading,
    loading_row_z,
    rotation_H,
    standardized_effect_stats,
)

base = preset("asymp_alpha", T=60, p=40, q=150)
t = 9  # tenth frame, zero-based
z_alpha, z_load = [], []
for r in range(60):
    Y, truth = gen_dataset(base.replace(seed=child_seed(2024, r)))
    fit = fit_mefm(Y, base.kr, base.kc)

    z = standardized_effect_stats(fit, t, truth.effects)
    z_alpha.append(z.alpha[2])

    _, Hc = rotation_H(fit, truth.Qr, truth.Qc, truth.FZ)
    hac = hac_loading(fit, "column", 0)
    z_load.append(loading_row_z(fit, "column", 0, hac, Hc, truth.Qc[0])[0])

for name, v in (("alpha_3", z_alpha), ("Qc_11", z_load)):
    v = np.asarray(v)
    print(f"{name}: mean {v.mean():+.3f} sd {v.std(ddof=1):.3f} KS p-value {stats.kstest(v, 'norm').pvalue:.3f}")

# a contrast: row 1 against the average of rows 2 and 3
g = [1.0, -0.5, -0.5]
hypothesis = truth.effects.alpha[t, :3]
print("contrast statistic on the last draw", round(contrast_stat(fit, t, g, [0, 1, 2], hypothesis), 3))
