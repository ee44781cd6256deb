"""Open wire: width restructuring as the edge coupling γ grows.

Below the transition all resonances share the total width 2γ; above it two
edge-localized states take nearly all of it.
"""

import numpy as np

from superchain import open_solver as osv
from superchain.model import ChainSpec

spec = ChainSpec.symmetric(10, 2.5, lam=0.01, kappa=4.0)
traj = osv.sweep_gamma(spec, np.round(np.arange(0.05, 20.001, 0.05), 2))
res = osv.detect_superradiance(traj)
print(f"gamma_crit = {res.gamma_crit}, mean level spacing D = {res.level_spacing:.4f}")
print(f"{'gamma':>6} {'PR':>7} {'top-2 share':>12}")
for g in (0.1, 1.0, 2.0, 3.0, 5.0, 10.0, 20.0):
    k = int(np.argmin(np.abs(traj.gamma_grid - g)))
    print(f"{g:6.2f} {res.participation_ratio[k]:7.2f} {res.top2_share[k]:12.3f}")

prof = osv.superradiant_profiles(spec, [0.1, 20.0])
print("\nedge weight of the two broadest states:", prof.edge_weight().round(3).tolist())
