import numpy as np
import pytest

from fkqc.adapt import AdaptConfig, default_bc, initial_mesh, run
from fkqc.estimator import dislocation_goal
from fkqc.fk_model import ModelParams, Partition, assemble_quadratic
from fkqc.oracle import build_reference


class Setup:
    """The dislocation benchmark: 4106 atoms, atomistic core -1..2."""

    def __init__(self, M=2053):
        self.params = ModelParams(k0=0.1, k1=2.0, k2=1.0, a0=1.0, M=M)
        self.partition = Partition(M, (-1, 2))
        self.goal = dislocation_goal(M)
        self.bc = default_bc(M)
        self.quad = assemble_quadratic(self.params, self.partition)
        self.mesh0 = initial_mesh(self.partition)
        self._ref = None

    @property
    def reference(self):
        if self._ref is None:
            self._ref = build_reference(self.params, self.partition, self.bc, self.goal)
        return self._ref

    def run(self, tau_gl, lam=2, max_iterations=100, oracle=True):
        cfg = AdaptConfig(tau_gl, lam=lam, max_iterations=max_iterations)
        return run(self.params, self.partition, self.mesh0, self.goal, cfg, self.bc,
                   self.reference if oracle else None)


@pytest.fixture(scope="session")
def bench():
    return Setup()


@pytest.fixture(scope="session")
def small():
    return Setup(M=16)


@pytest.fixture(scope="session")
def table1_run(bench):
    return bench.run(1e-5)


@pytest.fixture
def rng():
    return np.random.default_rng(20070615)
