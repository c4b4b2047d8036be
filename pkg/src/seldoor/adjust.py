"""Identification verdicts, the corollary checks, the post-treatment bias
ledger and the residualized ("tilde") variables behind them."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import kernels
from .errors import ContractViolation, OutcomeInSet, PreconditionNotMet, QueryVertexInZ
from .graph import (
    Admg,
    CriterionResult,
    S1S2Partition,
    backdoor_criterion,
    blocks_all_backdoor,
    blocks_all_paths,
    partition_s1_s2,
    selective_door_criterion,
    single_door_criterion,
)
from .sem import IDENTITY_RTOL, SemModel, moments, partial_regression, total_effect

ABS_FLOOR = 1e-12


def close(a: float, b: float, rtol: float = IDENTITY_RTOL) -> bool:
    return abs(a - b) <= max(ABS_FLOOR, rtol * max(1.0, abs(a), abs(b)))


@dataclass(frozen=True)
class AdjustmentQuery:
    outcome: int
    treatment: int
    covariates: frozenset = frozenset()

    @classmethod
    def create(cls, g: Admg, outcome, treatment, adjust: Iterable = ()) -> "AdjustmentQuery":
        i, j = g.index(outcome), g.index(treatment)
        z = g.indices(adjust)
        if i == j:
            raise QueryVertexInZ("outcome and treatment must differ")
        if i in z:
            raise OutcomeInSet(f"outcome {g.names[i]} is in the adjustment set")
        if j in z:
            raise QueryVertexInZ(f"treatment {g.names[j]} is in the adjustment set")
        return cls(i, j, z)

    @property
    def s(self) -> frozenset:
        return self.covariates | {self.treatment}

    def describe(self, g: Admg) -> dict:
        return {
            "outcome": g.names[self.outcome],
            "treatment": g.names[self.treatment],
            "adjust": [g.names[k] for k in sorted(self.covariates)],
        }


@dataclass(frozen=True)
class BiasTerm:
    vertex: int
    gamma: float  # bias of the coefficient on this regressor
    tau: float  # effect of the treatment on it, S2 held fixed
    contribution: float


@dataclass(frozen=True)
class BiasLedger:
    query: AdjustmentQuery
    gamma: float
    rhs: float
    partition: S1S2Partition
    terms: tuple = ()

    @property
    def agrees(self) -> bool:
        return close(self.gamma, self.rhs)


@dataclass(frozen=True)
class EffectReport:
    query: AdjustmentQuery
    criterion: CriterionResult
    beta: float
    tau: float
    gamma: float
    partition: S1S2Partition
    total_effect: float
    bias_rhs: float | None = None
    terms: tuple = field(default=())

    @property
    def naive_bias(self) -> float:
        return self.beta - self.total_effect


def _bias_terms(m: SemModel, q: AdjustmentQuery, part: S1S2Partition, coefs: dict):
    g = m.graph
    A = np.ascontiguousarray(m.A)
    Bs = kernels.masked_unit_lower_inverse(A, np.int64(g.mask(q.s)))
    Bs2 = kernels.masked_unit_lower_inverse(A, np.int64(g.mask(part.s2)))
    terms = []
    for p in sorted(part.s1):
        gamma_p = coefs[g.names[p]] - Bs[q.outcome, p]
        tau_p = Bs2[p, q.treatment]
        terms.append(BiasTerm(p, float(gamma_p), float(tau_p), float(-gamma_p * tau_p)))
    return tuple(terms), float(sum(t.contribution for t in terms))


def identify(m: SemModel, q: AdjustmentQuery, strict: bool = False) -> EffectReport:
    """Regression coefficient on the treatment, the controlled total effect,
    their gap, and the selective-door verdict."""
    g = m.graph
    crit = selective_door_criterion(g, q.covariates, q.treatment, q.outcome, strict=strict)
    mom = moments(m)
    reg = partial_regression(m, q.outcome, q.s, mom)
    beta = reg.coefficients[g.names[q.treatment]]
    tau = float(
        kernels.masked_effect(
            np.ascontiguousarray(m.A), np.int64(g.mask(q.covariates)), q.outcome, q.treatment
        )
    )
    gamma = beta - tau
    part = partition_s1_s2(g, q.s, q.outcome)
    rhs, terms = None, ()
    if q.treatment in part.s2:
        terms, rhs = _bias_terms(m, q, part, reg.coefficients)
    if crit.satisfied and not strict and abs(gamma) > IDENTITY_RTOL * max(1.0, abs(beta)):
        raise ContractViolation(
            f"criterion holds but beta={beta!r} differs from tau={tau!r}"
        )
    return EffectReport(q, crit, beta, tau, gamma, part, float(mom.B[q.outcome, q.treatment]), rhs, terms)


@dataclass(frozen=True)
class CorollaryReport:
    name: str
    beta: float
    target: float

    @property
    def deviation(self) -> float:
        return abs(self.beta - self.target)

    @property
    def holds(self) -> bool:
        return close(self.beta, self.target)


def _beta(m: SemModel, q: AdjustmentQuery) -> float:
    reg = partial_regression(m, q.outcome, q.s)
    return reg.coefficients[m.graph.names[q.treatment]]


def corollary_zero(m: SemModel, q: AdjustmentQuery) -> CorollaryReport:
    """Regression coefficient vanishes when the covariates block every path."""
    ok, witness = blocks_all_paths(m.graph, q.covariates, q.treatment, q.outcome)
    if not ok:
        raise PreconditionNotMet("covariates leave a path between treatment and outcome open", witness)
    return CorollaryReport("zero", _beta(m, q), 0.0)


def corollary_single_door(m: SemModel, q: AdjustmentQuery) -> CorollaryReport:
    crit = single_door_criterion(m.graph, q.covariates, q.treatment, q.outcome)
    if not crit:
        raise PreconditionNotMet("single-door precondition fails", crit.witness)
    return CorollaryReport("single_door", _beta(m, q), float(m.A[q.outcome, q.treatment]))


def corollary_backdoor(m: SemModel, q: AdjustmentQuery) -> CorollaryReport:
    crit = backdoor_criterion(m.graph, q.covariates, q.treatment, q.outcome)
    if not crit:
        raise PreconditionNotMet(f"back-door criterion fails (clause {crit.clause})", crit.witness)
    return CorollaryReport("backdoor", _beta(m, q), total_effect(m, q.outcome, q.treatment))


def bias_decomposition(m: SemModel, q: AdjustmentQuery) -> BiasLedger:
    """Post-treatment bias of the treatment coefficient, computed directly and
    as a sum over the regressors whose back-door paths stay open."""
    g = m.graph
    ok, witness = blocks_all_backdoor(g, q.covariates, q.treatment, q.outcome)
    if not ok:
        raise PreconditionNotMet(
            "covariates leave a back-door path from treatment to outcome open", witness
        )
    reg = partial_regression(m, q.outcome, q.s)
    beta = reg.coefficients[g.names[q.treatment]]
    tau = float(
        kernels.masked_effect(
            np.ascontiguousarray(m.A), np.int64(g.mask(q.covariates)), q.outcome, q.treatment
        )
    )
    part = partition_s1_s2(g, q.s, q.outcome)
    terms, rhs = _bias_terms(m, q, part, reg.coefficients)
    ledger = BiasLedger(q, beta - tau, rhs, part, terms)
    if not ledger.agrees:
        raise ContractViolation(f"direct bias {ledger.gamma!r} != decomposition {rhs!r}")
    return ledger


@dataclass(frozen=True, eq=False)
class TildeSystem:
    """Residualized variables as coefficient vectors over the original X.

    ``outcome`` is the outcome minus its controlled effects from every
    regressor; ``s1[p]`` strips from ``X_p`` what flows in from ``S2``;
    ``s2[q]`` strips from ``X_q`` what flows in from ``S1``.
    """

    outcome_vertex: int
    partition: S1S2Partition
    outcome: np.ndarray
    s1: dict
    s2: dict


def tilde_system(m: SemModel, q: AdjustmentQuery) -> TildeSystem:
    return tilde_system_for(m, q.outcome, q.s)


def tilde_system_for(m: SemModel, i, s: Iterable) -> TildeSystem:
    g = m.graph
    i = g.index(i)
    sset = g.indices(s)
    part = partition_s1_s2(g, sset, i)
    A = np.ascontiguousarray(m.A)
    n = g.n

    def strip(v, subtract, held):
        B = kernels.masked_unit_lower_inverse(A, np.int64(g.mask(held)))
        w = np.zeros(n)
        w[v] = 1.0
        for k in subtract:
            w[k] -= B[v, k]
        return w

    outcome = strip(i, sset, sset)
    s1 = {p: strip(p, part.s2, part.s2) for p in sorted(part.s1)}
    s2 = {qq: strip(qq, part.s1, part.s1) for qq in sorted(part.s2)}
    return TildeSystem(i, part, outcome, s1, s2)


def lemma_covariances(m: SemModel, ts: TildeSystem) -> dict:
    """Covariances that must vanish: each S2 tilde variable against the
    outcome's, and against every S1 tilde variable."""
    C = moments(m).cov
    out = {}
    for qv, wq in ts.s2.items():
        out[("outcome", qv)] = float(wq @ C @ ts.outcome)
        for p, wp in ts.s1.items():
            out[(p, qv)] = float(wq @ C @ wp)
    return out


def error_loadings(m: SemModel, w: np.ndarray) -> np.ndarray:
    """Coefficients on ``u`` of the combination ``w' X``."""
    return w @ moments(m).B


@dataclass(frozen=True, eq=False)
class RewiringCheck:
    """Outcome of rewiring ``A`` so that plain error loadings reproduce the
    residualized variables.

    ``outcome_matches`` compares the outcome row of ``(I - A')^-1`` with the
    error loadings of the residualized outcome on every column outside S;
    ``s1_matches[p]`` does the same for ``p`` in S1 on columns outside S2.
    """

    A: np.ndarray
    partition: S1S2Partition
    lower_triangular: bool
    outcome_matches: bool
    s1_matches: dict

    @property
    def passed(self) -> bool:
        return self.lower_triangular and self.outcome_matches and all(self.s1_matches.values())


def _directed_paths_into(A: np.ndarray, target: int):
    n = A.shape[0]
    out = []

    def extend(path):
        v = path[-1]
        if v == target:
            out.append(tuple(path))
            return
        for w in range(v + 1, target + 1):
            if A[w, v] != 0:
                extend(path + [w])

    for start in range(target):
        extend([start])
    return out


def lemma_rewiring(m: SemModel, i, s: Iterable, atol: float = 1e-9) -> RewiringCheck:
    """Delete every edge into S2, then on each remaining directed path ending
    at ``i`` that meets S1, delete the edge entering its last S1 vertex."""
    g = m.graph
    i = g.index(i)
    sset = g.indices(s)
    ts = tilde_system_for(m, i, sset)
    part = ts.partition
    Ap = np.array(m.A)
    for q in part.s2:
        Ap[q, :] = 0.0
    rewired = Ap.copy()
    for path in _directed_paths_into(Ap, i):
        hits = [t for t, v in enumerate(path) if v in part.s1]
        if hits and hits[-1] > 0:
            t = hits[-1]
            rewired[path[t], path[t - 1]] = 0.0
    lower = bool(np.all(np.triu(rewired) == 0))
    Bp = kernels.unit_lower_inverse(np.ascontiguousarray(rewired))
    B = moments(m).B
    keep = [c for c in range(g.n) if c not in sset]
    outcome_ok = bool(np.allclose(Bp[i, keep], (ts.outcome @ B)[keep], rtol=0, atol=atol))
    keep2 = [c for c in range(g.n) if c not in part.s2]
    s1_ok = {
        p: bool(np.allclose(Bp[p, keep2], (w @ B)[keep2], rtol=0, atol=atol))
        for p, w in ts.s1.items()
    }
    rewired.setflags(write=False)
    return RewiringCheck(rewired, part, lower, outcome_ok, s1_ok)
