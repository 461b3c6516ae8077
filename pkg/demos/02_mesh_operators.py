"""
Meshes and transfer operators
=============================

A coarse mesh keeps a subset of atoms (repatoms) and places the rest by linear
interpolation.  A finer nested mesh is used for the dual problem.
"""

import math

import numpy as np

from fkqc.mesh import Mesh, build_interp_aq, partial_refine
from fkqc.mesh import build_interp_ap, build_interp_pq, build_restriction_qp

M = 16
coarse = Mesh((-15, -14, -9, -3, -2, -1, 0, 1, 2, 3, 4, 9, 15, 16), M)
print("repatoms     ", coarse.repatoms)
print("element sizes", coarse.nu)

# Interpolation reproduces affine fields exactly.
I = build_interp_aq(coarse)
atoms = np.arange(-M + 1, M + 1)
print("affine error:", np.abs(I @ (2.0 * coarse.ell + 1.0) - (2.0 * atoms + 1.0)).max())

# Partial refinement splits every element into at most lambda pieces.
for lam in (2, 4, math.inf):
    pair = partial_refine(coarse, lam)
    Iap, Ipq, Rqp = build_interp_ap(pair), build_interp_pq(pair), build_restriction_qp(pair)
    nested = np.abs((Iap @ Ipq).toarray() - I.toarray()).max()
    print(f"lambda={lam}: fine size {pair.fine.size}, |Iap Ipq - Iaq| = {nested:.1e}, "
          f"Rqp Ipq = id: {np.array_equal((Rqp @ Ipq).toarray(), np.eye(coarse.size))}")
