"""
Goal-oriented mesh adaption
===========================

The quantity of interest is the dislocation width y_1 - y_0.  Starting from
the coarsest mesh, the loop estimates the goal error with a dual solve on a
partially refined mesh, bisects the worst elements and repeats.
"""

import logging

from fkqc import AdaptConfig, ModelParams, Partition, dislocation_goal, initial_mesh, run
from fkqc.adapt import default_bc
from fkqc.oracle import build_reference

logging.basicConfig(level=logging.WARNING)

params = ModelParams(k0=0.1, k1=2.0, k2=1.0, a0=1.0, M=2053)
part = Partition(params.M, (-1, 2))
goal = dislocation_goal(params.M)
bc = default_bc(params.M)

# The full-resolution solution is cheap here, so we can report the true error
# next to the estimate.  It plays no part in the refinement decisions.
ref = build_reference(params, part, bc, goal)

result = run(params, part, initial_mesh(part), goal, AdaptConfig(tau_gl=1e-5, lam=2), bc, ref)
print(" it  dof  min_nu  max_nu          eta   sum eta_qc  |exact error|")
for r in result.records:
    print(f"{r.iteration:3d} {r.dof:4d} {r.min_nu:7d} {r.max_nu:7d} {abs(r.eta):12.6e} "
          f"{r.sum_eta_qc:12.6e} {abs(r.exact_error):12.6e}")

# The final mesh is fine near the core and coarse far away.
final = result.final_mesh
print("final element sizes:", final.nu.tolist())
print("modeling error of the coupled energy itself:", abs(ref.modeling_error))
