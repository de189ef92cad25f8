"""Shared instance suite and a session-wide cache of expensive solves.

The cross-algorithm, fixed-point-property, duality and chain-inequality
acceptance checks all run over one 20-instance suite (18 small instances
plus two at n = 256). Verification results, goodness computations, and
per-index scans at the fixed point are cached per instance so criteria that
share an instance do not repeat minutes-long solves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pytest

from sensecert.conic import SolverOptions
from sensecert.ensembles import generate
from sensecert.omega import FsEvaluator, GoodnessQuery, build_q, compute_omega, seed_certificates
from sensecert.verify import compute_s_star

SUITE_TOL = 1e-4


@dataclass(frozen=True)
class SuiteInstance:
    name: str
    ensemble: str
    m: int
    n: int
    seed: int
    s: float
    diamond: str
    q_kind: str = "A"

    def query(self, matrix) -> GoodnessQuery:
        return GoodnessQuery(matrix=matrix, s=self.s, diamond=self.diamond,
                             q_kind=self.q_kind)


# 18 small instances spanning the ensembles, diamonds, Q forms, and cone
# openings, plus two full-size ones. Seeds are fixed a priori; every s sits
# below the instance's verification constant (checked when the suite runs).
SUITE: tuple[SuiteInstance, ...] = (
    SuiteInstance("g-3x8-l2", "gaussian", 3, 8, 101, 1.5, "l2"),
    SuiteInstance("g-3x8-linf", "gaussian", 3, 8, 101, 1.5, "linf"),
    SuiteInstance("g-3x8-l1", "gaussian", 3, 8, 101, 1.5, "l1"),
    SuiteInstance("b-8x16-l2", "bernoulli", 8, 16, 105, 2.0, "l2"),
    SuiteInstance("b-8x16-linf-ata", "bernoulli", 8, 16, 105, 2.0, "linf", "AtA"),
    SuiteInstance("h-4x8-l2", "hadamard", 4, 8, 103, 1.8, "l2"),
    SuiteInstance("g-5x12-l2", "gaussian", 5, 12, 104, 2.0, "l2"),
    SuiteInstance("g-5x12-l1", "gaussian", 5, 12, 104, 1.6, "l1"),
    SuiteInstance("b-12x24-l2", "bernoulli", 12, 24, 105, 2.2, "l2"),
    SuiteInstance("b-12x24-linf", "bernoulli", 12, 24, 105, 2.2, "linf"),
    SuiteInstance("h-8x16-linf-ata", "hadamard", 8, 16, 106, 2.5, "linf", "AtA"),
    SuiteInstance("g-8x24-l2", "gaussian", 8, 24, 107, 2.5, "l2"),
    SuiteInstance("g-8x24-linf-ata", "gaussian", 8, 24, 107, 2.0, "linf", "AtA"),
    SuiteInstance("b-14x32-l2", "bernoulli", 14, 32, 108, 3.0, "l2"),
    SuiteInstance("g-12x32-linf", "gaussian", 12, 32, 109, 3.0, "linf"),
    SuiteInstance("h-16x32-l2", "hadamard", 16, 32, 110, 3.5, "l2"),
    SuiteInstance("g-26x64-l2", "gaussian", 26, 64, 111, 4.0, "l2"),
    SuiteInstance("b-26x64-linf-ata", "bernoulli", 26, 64, 111, 4.0, "linf", "AtA"),
    SuiteInstance("b-205x256-linf-ata", "bernoulli", 205, 256, 20260814, 2.0,
                  "linf", "AtA"),
    SuiteInstance("g-205x256-l2", "gaussian", 205, 256, 20260815, 2.0, "l2"),
)

SMALL = tuple(inst for inst in SUITE if inst.n < 256)
LARGE = tuple(inst for inst in SUITE if inst.n >= 256)


class SuiteCache:
    """Computes matrices, verifications, omegas, and fixed-point scans once."""

    def __init__(self):
        self.opts = SolverOptions()
        self._matrices = {}
        self._verifications = {}
        self._omegas = {}
        self._scans = {}

    def matrix(self, inst: SuiteInstance):
        if inst.name not in self._matrices:
            self._matrices[inst.name] = generate(inst.ensemble, inst.m,
                                                 inst.n, seed=inst.seed)
        return self._matrices[inst.name]

    def verification(self, inst: SuiteInstance):
        key = (inst.ensemble, inst.m, inst.n, inst.seed)
        if key not in self._verifications:
            self._verifications[key] = compute_s_star(self.matrix(inst),
                                                      self.opts)
        return self._verifications[key]

    def omega(self, inst: SuiteInstance, algorithm: str = "hybrid",
              diamond: str | None = None, q_kind: str | None = None,
              s: float | None = None):
        key = (inst.name, algorithm, diamond or inst.diamond,
               q_kind or inst.q_kind, s or inst.s)
        if key not in self._omegas:
            query = GoodnessQuery(
                matrix=self.matrix(inst), s=s or inst.s,
                diamond=diamond or inst.diamond, q_kind=q_kind or inst.q_kind)
            self._omegas[key] = compute_omega(
                query, algorithm=algorithm, tol=SUITE_TOL, opts=self.opts,
                verification=self.verification(inst))
        return self._omegas[key]

    def scan(self, inst: SuiteInstance):
        """Per-index values and certificates of f_si at eta* (one solve each).

        Returns (eta_star, values, cert_pairs, evaluator) where values[i] =
        f_si(eta*) and cert_pairs[i] = (a, b) certifies f_si(eta) <= a*eta+b.
        The evaluator is returned so later probes at nearby levels can reuse
        the harvested certificates instead of re-solving every index.
        """
        if inst.name not in self._scans:
            result = self.omega(inst)
            eta = result.eta_star
            evaluator = FsEvaluator(
                build_q(self.matrix(inst), inst.q_kind), inst.s,
                inst.diamond, self.opts)
            seed_certificates(evaluator, self.verification(inst))
            values = np.zeros(evaluator.n)
            certs = []
            for i in range(evaluator.n):
                values[i], pair = evaluator.f_si_with_certificate(i, eta)
                certs.append(pair)
            self._scans[inst.name] = (eta, values, certs, evaluator)
        return self._scans[inst.name]


@pytest.fixture(scope="session")
def cache() -> SuiteCache:
    return SuiteCache()


@pytest.fixture(scope="session")
def opts() -> SolverOptions:
    return SolverOptions()
