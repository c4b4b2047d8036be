"""Linear structural equation models over an ADMG.

``X = A X + u`` with ``A`` strictly lower triangular in the causal ordering,
``Var(u) = Sigma`` positive definite and ``E[u] = c``. Everything here is a
closed-form population quantity; sampling lives in :mod:`seldoor.montecarlo`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from . import kernels
from .errors import (
    EdgeCoefficientMismatch,
    NotLowerTriangular,
    OutcomeInSet,
    QueryVertexInZ,
    SigmaNotPD,
    SingularDesign,
)
from .graph import Admg, ancestors

PD_TOL = 1e-12
IDENTITY_RTOL = 1e-9


def _frozen(x, shape):
    arr = np.array(x, dtype=float, copy=True)
    if arr.shape != shape:
        raise ValueError(f"expected shape {shape}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SemModel:
    graph: Admg
    A: np.ndarray
    Sigma: np.ndarray
    c: np.ndarray = None

    def __post_init__(self):
        n = self.graph.n
        object.__setattr__(self, "A", _frozen(self.A, (n, n)))
        object.__setattr__(self, "Sigma", _frozen(self.Sigma, (n, n)))
        c = np.zeros(n) if self.c is None else self.c
        object.__setattr__(self, "c", _frozen(c, (n,)))
        validate_model(self)

    @classmethod
    def from_params(
        cls,
        graph: Admg,
        coefs: Mapping,
        error_var: Mapping,
        error_cov: Mapping | None = None,
        intercepts: Mapping | None = None,
    ) -> "SemModel":
        """Build from name-keyed dicts: ``coefs[(parent, child)]``,
        ``error_var[v]``, ``error_cov[(a, b)]``, ``intercepts[v]``."""
        n = graph.n
        A = np.zeros((n, n))
        for (a, b), val in coefs.items():
            A[graph.index(b), graph.index(a)] = val
        S = np.zeros((n, n))
        for v, val in error_var.items():
            k = graph.index(v)
            S[k, k] = val
        for (a, b), val in (error_cov or {}).items():
            x, y = graph.index(a), graph.index(b)
            S[x, y] = S[y, x] = val
        c = np.zeros(n)
        for v, val in (intercepts or {}).items():
            c[graph.index(v)] = val
        return cls(graph, A, S, c)

    @property
    def names(self):
        return self.graph.names

    def with_intercepts(self, c) -> "SemModel":
        return SemModel(self.graph, self.A, self.Sigma, c)


def validate_model(m: SemModel) -> None:
    g, A, S = m.graph, m.A, m.Sigma
    n = g.n
    upper = np.triu(A)
    if np.any(upper != 0):
        r, c = np.argwhere(upper != 0)[0]
        raise NotLowerTriangular(
            f"A[{g.names[r]}, {g.names[c]}] = {A[r, c]!r} lies on or above the diagonal"
        )
    for r in range(n):
        for c in range(r):
            declared = g.has_directed(c, r)
            if declared and A[r, c] == 0:
                raise EdgeCoefficientMismatch(
                    f"edge {g.names[c]} -> {g.names[r]} carries a zero coefficient"
                )
            if not declared and A[r, c] != 0:
                raise EdgeCoefficientMismatch(
                    f"coefficient {A[r, c]!r} on undeclared edge {g.names[c]} -> {g.names[r]}"
                )
    if np.any(S != S.T):
        raise SigmaNotPD("error covariance is not symmetric")
    for r in range(n):
        for c in range(r):
            declared = g.has_bidirected(c, r)
            if declared and S[r, c] == 0:
                raise EdgeCoefficientMismatch(
                    f"bidirected edge {g.names[c]} <-> {g.names[r]} has zero error covariance"
                )
            if not declared and S[r, c] != 0:
                raise EdgeCoefficientMismatch(
                    f"error covariance {S[r, c]!r} between {g.names[c]} and {g.names[r]} "
                    "without a bidirected edge"
                )
    _, pivot = kernels.spd_solve(np.ascontiguousarray(S), np.zeros(n), PD_TOL)
    if n and not pivot > PD_TOL:
        raise SigmaNotPD(f"error covariance is not positive definite (pivot {pivot:.3g})")


@dataclass(frozen=True, eq=False)
class MomentSet:
    mean: np.ndarray
    cov: np.ndarray
    B: np.ndarray


def moments(m: SemModel) -> MomentSet:
    B = kernels.unit_lower_inverse(np.ascontiguousarray(m.A))
    C = B @ m.Sigma @ B.T
    low = np.tril(C)
    cov = low + np.tril(C, -1).T
    return MomentSet(mean=B @ m.c, cov=cov, B=B)


def total_effect(m: SemModel, i, j) -> float:
    g = m.graph
    i, j = g.index(i), g.index(j)
    if i == j:
        raise ValueError("total effect needs two distinct vertices")
    return float(kernels.masked_effect(np.ascontiguousarray(m.A), np.int64(0), i, j))


def controlled_total_effect(m: SemModel, i, j, z: Iterable = ()) -> float:
    """Total effect of ``j`` on ``i`` once every edge into ``z`` is deleted."""
    g = m.graph
    i, j = g.index(i), g.index(j)
    zset = g.indices(z)
    if i in zset or j in zset:
        raise QueryVertexInZ("the intervened set must not contain the query vertices")
    if i == j:
        raise ValueError("controlled total effect needs two distinct vertices")
    return float(kernels.masked_effect(np.ascontiguousarray(m.A), np.int64(g.mask(zset)), i, j))


def ancestral_expansion(m: SemModel, i, s: Iterable = ()):
    """Coefficients expressing ``X_i`` through the members of ``s`` and the
    errors of its remaining ancestors.

    Returns ``(on_s, on_errors)``, name-keyed. ``on_s[j]`` is the total effect
    of ``j`` with the rest of ``s`` held fixed; ``on_errors[k]`` is the effect
    of ``u_k`` with all of ``s`` held fixed. ``u_i`` enters with coefficient 1.
    """
    g = m.graph
    i = g.index(i)
    sset = g.indices(s)
    if i in sset:
        raise OutcomeInSet(f"outcome {g.names[i]} is in the set")
    Bs = kernels.masked_unit_lower_inverse(np.ascontiguousarray(m.A), np.int64(g.mask(sset)))
    on_s = {g.names[j]: float(Bs[i, j]) for j in sorted(sset)}
    on_err = {g.names[k]: float(Bs[i, k]) for k in sorted(ancestors(g, i) - sset)}
    return on_s, on_err


@dataclass(frozen=True)
class RegressionResult:
    outcome: str
    intercept: float
    coefficients: dict = field(default_factory=dict)
    residual_variance: float = float("nan")

    @property
    def regressors(self) -> tuple:
        return tuple(self.coefficients)


def _solve_spd(M, rhs):
    x, pivot = kernels.spd_solve(np.ascontiguousarray(M), np.ascontiguousarray(rhs), PD_TOL)
    if len(rhs) and not pivot > PD_TOL:
        raise SingularDesign(f"design covariance is singular (pivot {pivot:.3g})")
    return x


def partial_regression(m: SemModel, i, s: Iterable = (), mom: MomentSet | None = None):
    """Population least-squares regression of ``X_i`` on ``s`` with an
    intercept."""
    g = m.graph
    i = g.index(i)
    idx = sorted(g.indices(s))
    if i in idx:
        raise OutcomeInSet(f"outcome {g.names[i]} is in the regressor set")
    mom = mom or moments(m)
    C, mu = mom.cov, mom.mean
    beta = _solve_spd(C[np.ix_(idx, idx)], C[idx, i]) if idx else np.zeros(0)
    intercept = float(mu[i] - beta @ mu[idx]) if idx else float(mu[i])
    resid = float(C[i, i] - beta @ C[idx, i]) if idx else float(C[i, i])
    coefs = {g.names[k]: float(b) for k, b in zip(idx, beta)}
    return RegressionResult(g.names[i], intercept, coefs, resid)


def regression_from_second_moments(exx: np.ndarray, exy: np.ndarray) -> np.ndarray:
    """``E[X X']^-1 E[X Y]`` by LU; the raw-moment route, used as the
    uniqueness cross-check."""
    return np.linalg.solve(exx, exy)


def augmented_moments(mom: MomentSet, idx: list, i: int):
    """``E[X+ X+']`` and ``E[X+ X_i]`` for ``X+ = (1, X_idx)``."""
    mu, C = mom.mean, mom.cov
    k = len(idx)
    exx = np.empty((k + 1, k + 1))
    exx[0, 0] = 1.0
    exx[0, 1:] = exx[1:, 0] = mu[idx]
    exx[1:, 1:] = C[np.ix_(idx, idx)] + np.outer(mu[idx], mu[idx])
    exy = np.empty(k + 1)
    exy[0] = mu[i]
    exy[1:] = C[idx, i] + mu[idx] * mu[i]
    return exx, exy


@dataclass(frozen=True)
class ResidualReport:
    residual_mean: float
    residual_covariances: dict
    uniqueness_deviation: float
    tol: float

    @property
    def max_orthogonality_error(self) -> float:
        vals = [abs(self.residual_mean)] + [abs(v) for v in self.residual_covariances.values()]
        return max(vals)

    @property
    def passed(self) -> bool:
        return self.max_orthogonality_error < self.tol and self.uniqueness_deviation < IDENTITY_RTOL


def residual_checks(m: SemModel, i, s: Iterable = (), tol: float = 1e-10) -> ResidualReport:
    """Orthogonality of the population residual to the constant and to each
    regressor, by moment algebra; plus agreement with the raw-moment solve."""
    g = m.graph
    i = g.index(i)
    idx = sorted(g.indices(s))
    mom = moments(m)
    reg = partial_regression(m, i, idx, mom)
    beta = np.array([reg.coefficients[g.names[k]] for k in idx])
    C, mu = mom.cov, mom.mean
    mean_eps = float(mu[i] - reg.intercept - (beta @ mu[idx] if idx else 0.0))
    covs = {}
    for k in idx:
        covs[g.names[k]] = float(C[k, i] - beta @ C[k, idx])
    exx, exy = augmented_moments(mom, idx, i)
    b = regression_from_second_moments(exx, exy)
    ours = np.concatenate([[reg.intercept], beta])
    dev = float(np.max(np.abs(b - ours) / np.maximum(1.0, np.abs(b))))
    return ResidualReport(mean_eps, covs, dev, tol)
