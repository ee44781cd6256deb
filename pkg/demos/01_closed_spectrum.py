"""Closed wire: decoupled limit, symmetric point and Rabi pairs.

At small λ the left qubit decouples and the chain splits into two arms
with their own standing waves; at λ = √κ the pair is balanced and band
states come in symmetric/antisymmetric pairs split by a Rabi frequency.
"""

import numpy as np

from superchain import closed_solver as cs
from superchain.model import ChainSpec

spec = ChainSpec.symmetric(10, 2.5, lam=1e-3, kappa=4.0)
num = np.array([s.energy for s in cs.closed_spectrum(spec)])
ana = cs.decoupled_limit_spectrum(spec).energies(spec.lam)
print(f"lambda = {spec.lam}: max |E_numeric - E_decoupled| = {np.abs(num - ana).max():.2e}")
print("central pair:", num[0], num[-1])

sym = spec.replace(lam=2.0)
roots = cs.solve_symmetric_point_energies(sym)
print(f"\nlambda = sqrt(kappa): {len(roots.roots)} in-band roots of the secular equation")
print(f"{'pair':>5} {'E_upper':>10} {'E_lower':>10} {'Rabi':>10}")
for p in cs.classify_pairs(cs.closed_spectrum(sym), sym)[:5]:
    print(f"{p.label:>5} {p.e_upper:10.5f} {p.e_lower:10.5f} {p.rabi:10.2e}")
