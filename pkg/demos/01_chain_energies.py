"""
Energies of a chain with a dislocation
======================================

A chain of atoms sits on a substrate of quadratic wells.  Atoms left of the
origin are pushed one lattice spacing away from their wells, which creates a
dislocation between atoms 0 and 1.
"""

import numpy as np

from fkqc import ModelParams, Partition, assemble_quadratic, energy_ac

params = ModelParams(k0=0.1, k1=2.0, k2=1.0, a0=1.0, M=8)
y = params.lattice()
print("wells   ", params.wells())
print("lattice ", y)

# Atoms -1..2 use the full nearest and next-nearest spring energy, everyone
# else uses the local continuum version with a single effective spring.
part = Partition(params.M, (-1, 2))
print("energy of the undisplaced lattice:", energy_ac(params, part, y))

# Both energies are quadratic, so one sparse Hessian describes them exactly.
quad = assemble_quadratic(params, part)
print("Hessian bandwidth:", quad.bandwidth)
print(np.round(quad.hessian.toarray()[5:11, 5:11], 2))

# The continuum energy ignores curvature of the displacement: a uniform
# stretch costs the same in both models, a local bump does not.
stretched = 1.1 * y
bump = y.copy()
bump[params.offset(3)] += 0.1
for name, z in (("stretch", stretched), ("bump", bump)):
    ea = energy_ac(params, Partition.all_atomistic(params.M), z)
    ec = energy_ac(params, Partition.all_continuum(params.M), z)
    print(f"{name:8s} atomistic {ea:.6f}  continuum {ec:.6f}")
