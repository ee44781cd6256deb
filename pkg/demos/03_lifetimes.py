"""Survival of a particle started in a band state versus a superradiant state.

A state away from the band centre decays fastest near the transition and
becomes protected at strong coupling; the superradiant state only decays
faster as γ grows.
"""

from superchain import dynamics as dyn
from superchain import open_solver as osv
from superchain.model import ChainSpec

base = ChainSpec.symmetric(10, 2.5, lam=2.0, kappa=4.0)
print(f"{'gamma':>6} {'tau pair I':>12} {'tau pair V':>12}")
for g in (0.25, 2.5, 25.0):
    s = base.replace(gamma=g)
    taus = [dyn.lifetime(s, osv.pair_resonance(s, p, "upper").right_vec) for p in (1, 5)]
    print(f"{g:6.2f} {taus[0]:12.4g} {taus[1]:12.4g}")
