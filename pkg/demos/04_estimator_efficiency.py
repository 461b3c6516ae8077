"""
How good is the estimate?
=========================

The estimator weights the residual with a dual solution on a mesh that splits
every coarse element into at most lambda pieces.  Larger lambda gives a
sharper estimate; lambda = inf solves the dual on the full lattice and is
exact.
"""

import math

from fkqc import (AdaptConfig, ModelParams, Partition, dislocation_goal, estimate,
                  initial_mesh, partial_refine, run)
from fkqc.adapt import default_bc
from fkqc.oracle import build_reference

params = ModelParams(M=2053)
part = Partition(params.M, (-1, 2))
goal = dislocation_goal(params.M)
bc = default_bc(params.M)
ref = build_reference(params, part, bc, goal)

trace = run(params, part, initial_mesh(part), goal, AdaptConfig(1e-5), bc, ref).records
quad = ref.system_ac.quad

for tol in (1e-1, 1e-3, 1e-5):
    rec = next(r for r in trace if abs(r.eta) <= tol)
    exact = abs(rec.exact_error)
    print(f"mesh reached at tolerance {tol:g}: {rec.dof} dof, exact error {exact:.6e}")
    for lam in (2, 4, 8, math.inf):
        rep = estimate(partial_refine(rec.mesh, lam), quad, goal, ref.system_ac,
                       rec.qc.positions, bc)
        print(f"   lambda={lam!s:>3}  eta/error = {abs(rep.eta) / exact:.6f}")

# Whether a sharper estimate buys a better mesh: run 18 steps per lambda.
for lam in (2, 4, 8, math.inf):
    recs = run(params, part, initial_mesh(part), goal,
               AdaptConfig(1e-30, lam=lam, max_iterations=18), bc, ref).records
    print(f"lambda={lam!s:>3}: dof {recs[-1].dof}, error {abs(recs[-1].exact_error):.3e}")
