"""Random parameter draws, the almost-everywhere necessity check, sampling,
OLS, and the worked nonlinear (product interaction) example."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import kernels
from .adjust import AdjustmentQuery
from .errors import PDGenerationFailed, SingularDesign, UnsupportedDistribution
from .graph import Admg, selective_door_criterion
from .sem import PD_TOL, RegressionResult, SemModel, moments

MAX_PD_ATTEMPTS = 100


@dataclass(frozen=True)
class ParamRanges:
    coef_magnitude: tuple = (0.2, 1.5)
    error_var: tuple = (0.5, 2.0)
    bidirected_corr: tuple = (0.1, 0.6)

    def __post_init__(self):
        lo, hi = self.coef_magnitude
        if not 0 < lo <= hi:
            raise ValueError("coefficient magnitudes need 0 < lo <= hi")
        vlo, vhi = self.error_var
        if not 0 < vlo <= vhi:
            raise ValueError("error variances need 0 < lo <= hi")
        clo, chi = self.bidirected_corr
        if not 0 < clo <= chi < 1:
            raise ValueError("bidirected correlations need 0 < lo <= hi < 1")


def _edge_array(pairs) -> np.ndarray:
    return np.asarray(list(pairs), dtype=np.int64).reshape(-1, 2)


def draw_parameters(n: int, directed, bidirected, ranges: ParamRanges, rng, size: int):
    """``size`` independent (A, Sigma) draws for a graph given by edge lists.

    Coefficients are uniform on +-[lo, hi]; each bidirected pair gets a
    correlation uniform on +-[lo, hi] scaled by the two error standard
    deviations. Draws whose Sigma is not positive definite have their
    correlations redrawn, at most ``MAX_PD_ATTEMPTS`` times.
    """
    d = _edge_array(directed)
    b = _edge_array(bidirected)
    lo, hi = ranges.coef_magnitude
    mags = rng.uniform(lo, hi, size=(size, len(d)))
    signs = rng.choice(np.array([-1.0, 1.0]), size=(size, len(d)))
    A = np.zeros((size, n, n))
    if len(d):
        A[:, d[:, 1], d[:, 0]] = mags * signs
    var = rng.uniform(*ranges.error_var, size=(size, n))
    Sigma = np.zeros((size, n, n))
    Sigma[:, np.arange(n), np.arange(n)] = var
    if len(b):
        sd = np.sqrt(var)
        todo = np.arange(size)
        for _ in range(MAX_PD_ATTEMPTS):
            corr = rng.uniform(*ranges.bidirected_corr, size=(len(todo), len(b)))
            corr *= rng.choice(np.array([-1.0, 1.0]), size=corr.shape)
            cov = corr * sd[todo][:, b[:, 0]] * sd[todo][:, b[:, 1]]
            Sigma[todo[:, None], b[:, 0], b[:, 1]] = cov
            Sigma[todo[:, None], b[:, 1], b[:, 0]] = cov
            ok = np.linalg.eigvalsh(Sigma[todo])[:, 0] > PD_TOL
            todo = todo[~ok]
            if not len(todo):
                break
        else:
            raise PDGenerationFailed(
                f"no positive definite error covariance after {MAX_PD_ATTEMPTS} attempts"
            )
    return A, Sigma


def random_model(g: Admg, ranges: ParamRanges = ParamRanges(), seed=None) -> SemModel:
    """One random parameter point on ``g``; deterministic in ``seed`` (an int
    or a sequence of ints)."""
    rng = np.random.default_rng(seed)
    A, Sigma = draw_parameters(g.n, g.directed, g.bidirected, ranges, rng, 1)
    return SemModel(g, A[0], Sigma[0])


@dataclass
class TrialSummary:
    trials: int
    criterion_verdict: bool
    agree_count: int
    disagreements: list = field(default_factory=list)  # (trial, seed, gamma)
    tol_eq: float = 1e-7
    allowed_fraction: float = 0.01

    @property
    def passed(self) -> bool:
        bad = self.trials - self.agree_count
        if self.criterion_verdict:
            return bad == 0
        return bad <= int(np.floor(self.allowed_fraction * self.trials))


def _beta_tau(A, Sigma, i, j, zmask):
    B = kernels.unit_lower_inverse(A)
    C = B @ Sigma @ B.T
    idx = [k for k in range(A.shape[0]) if (zmask >> k) & 1 or k == j]
    x, pivot = kernels.spd_solve(
        np.ascontiguousarray(C[np.ix_(idx, idx)]), np.ascontiguousarray(C[idx, i]), PD_TOL
    )
    if not pivot > PD_TOL:
        raise SingularDesign("design covariance is singular")
    beta = x[idx.index(j)]
    return float(beta), float(kernels.masked_effect(A, np.int64(zmask), i, j))


def verify_necessity(
    g: Admg,
    q: AdjustmentQuery,
    trials: int,
    seed: int = 0,
    tol_eq: float = 1e-7,
    ranges: ParamRanges = ParamRanges(),
    allowed_fraction: float = 0.01,
) -> TrialSummary:
    """Draw ``trials`` parameter points and check that the coefficient equals
    the controlled effect exactly when the selective-door criterion holds.

    Trial ``t`` uses the seed ``(seed, t)``, so any trial can be replayed with
    ``random_model(g, ranges, (seed, t))``.
    """
    verdict = selective_door_criterion(g, q.covariates, q.treatment, q.outcome).satisfied
    zmask = g.mask(q.covariates)
    agree = 0
    bad = []
    for t in range(trials):
        m = random_model(g, ranges, (seed, t))
        beta, tau = _beta_tau(np.ascontiguousarray(m.A), m.Sigma, q.outcome, q.treatment, zmask)
        gamma = beta - tau
        if (abs(gamma) <= tol_eq) == verdict:
            agree += 1
        else:
            bad.append((t, [seed, t], gamma))
    return TrialSummary(trials, verdict, agree, bad, tol_eq, allowed_fraction)


@dataclass(frozen=True, eq=False)
class Dataset:
    names: tuple
    values: np.ndarray  # (n, len(names))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def column(self, v) -> np.ndarray:
        return self.values[:, self.names.index(v)]

    def to_csv(self, fh=None):
        """Write with a header row; floats in shortest round-trip form.
        Returns the text when ``fh`` is None."""
        buf = io.StringIO() if fh is None else fh
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.names)
        for row in self.values.tolist():
            w.writerow([repr(x) for x in row])
        if fh is None:
            return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Dataset":
        rows = list(csv.reader(io.StringIO(text)))
        vals = np.array([[float(x) for x in r] for r in rows[1:]]).reshape(-1, len(rows[0]))
        return cls(tuple(rows[0]), vals)


def _standard_errors(rng, dist: str, shape):
    if dist == "gaussian":
        return rng.standard_normal(shape)
    if dist == "uniform":
        return rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), shape)
    if dist == "exponential":
        return rng.standard_exponential(shape) - 1.0
    raise UnsupportedDistribution(f"unknown error distribution {dist!r}")


def sample_data(m: SemModel, n: int, seed=None, dist: str = "gaussian") -> Dataset:
    """Forward simulation: u with mean c and covariance Sigma, then X in causal
    order. Non-gaussian choices are moment-matched (zero mean, unit variance
    before scaling by the Cholesky factor)."""
    rng = np.random.default_rng(seed)
    N = m.graph.n
    z = _standard_errors(rng, dist, (n, N))
    L = np.linalg.cholesky(m.Sigma) if N else np.zeros((0, 0))
    X = m.c + z @ L.T
    A = m.A
    for r in range(N):
        if r:
            X[:, r] += X[:, :r] @ A[r, :r]
    return Dataset(m.graph.names, X)


def ols(d: Dataset, outcome, regressors: Sequence = ()) -> RegressionResult:
    """Least squares with an intercept, via normal equations on centered
    data."""
    y = d.column(outcome)
    regressors = list(regressors)
    p = len(regressors)
    if d.n <= p + 1:
        raise ValueError(f"need more than {p + 1} observations, got {d.n}")
    if not p:
        return RegressionResult(str(outcome), float(y.mean()), {}, float(y.var()))
    X = np.column_stack([d.column(r) for r in regressors])
    xm, ym = X.mean(axis=0), y.mean()
    Xc, yc = X - xm, y - ym
    xtx = Xc.T @ Xc / d.n
    xty = Xc.T @ yc / d.n
    tol = PD_TOL * max(1.0, float(np.max(np.diag(xtx))))
    beta, pivot = kernels.spd_solve(np.ascontiguousarray(xtx), np.ascontiguousarray(xty), tol)
    if not pivot > tol:
        raise SingularDesign("regressors are collinear")
    resid = yc - Xc @ beta
    coefs = {str(r): float(b) for r, b in zip(regressors, beta)}
    return RegressionResult(str(outcome), float(ym - beta @ xm), coefs, float(resid @ resid / d.n))


H_FUNCTIONS: dict = {"product": lambda x, m: x * m}


def register_h(name: str, fn: Callable) -> None:
    H_FUNCTIONS[name] = fn


@dataclass(frozen=True)
class NonlinearModelSpec:
    """Z -> X, (X, Z) -> M, H = h(X, M), (X, M, H, Z) -> Y."""

    a_XZ: float = 0.8
    a_MX: float = 0.5
    a_MZ: float = 0.3
    a_YX: float = 1.0
    a_YM: float = 0.6
    a_YH: float = 0.7
    a_YZ: float = 0.4
    h: str = "product"
    error_sd: tuple = (1.0, 1.0, 1.0, 1.0)  # Z, X, M, Y
    dist: str = "gaussian"

    @property
    def linear_total_effect(self) -> float:
        return self.a_YX + self.a_YM * self.a_MX

    def closed_form_delta(self, x):
        """Nonlinear part of dE[Y|do(X=x)]/dx, for the product interaction
        with zero-mean errors."""
        if self.h != "product":
            raise ValueError("closed form only for the product interaction")
        return self.a_YH * 2.0 * self.a_MX * np.asarray(x, dtype=float)


def simulate_nonlinear(spec: NonlinearModelSpec, n: int, seed=None) -> Dataset:
    if spec.h not in H_FUNCTIONS:
        raise ValueError(f"unregistered nonlinear function {spec.h!r}")
    h = H_FUNCTIONS[spec.h]
    rng = np.random.default_rng(seed)
    u = _standard_errors(rng, spec.dist, (n, 4)) * np.asarray(spec.error_sd, dtype=float)
    Z = u[:, 0]
    X = spec.a_XZ * Z + u[:, 1]
    M = spec.a_MX * X + spec.a_MZ * Z + u[:, 2]
    H = h(X, M)
    Y = spec.a_YX * X + spec.a_YM * M + spec.a_YH * H + spec.a_YZ * Z + u[:, 3]
    return Dataset(("Z", "X", "M", "H", "Y"), np.column_stack([Z, X, M, H, Y]))


def _nonlinear_estimates(d: Dataset, h, grid, step):
    m_fit = ols(d, "M", ["X", "Z"])
    b_mx = m_fit.coefficients["X"]
    rest = d.column("M") - b_mx * d.column("X")
    y_fit = ols(d, "Y", ["X", "H", "Z"])
    tau, a_yh = y_fit.coefficients["X"], y_fit.coefficients["H"]

    def mean_h(x):
        return float(np.mean(h(x, b_mx * x + rest)))

    mean_at = np.array([mean_h(x) for x in grid])
    slope = np.array([(mean_h(x + step) - mean_h(x - step)) / (2 * step) for x in grid])
    return b_mx, tau, a_yh, mean_at, a_yh * slope


@dataclass
class NonlinearReport:
    grid: np.ndarray
    n: int
    beta_MX: float
    tau: float
    a_YH: float
    mean_h: np.ndarray
    delta: np.ndarray
    delta_se: np.ndarray
    total: np.ndarray
    delta_closed_form: np.ndarray | None = None
    linear_total_effect: float | None = None


def nonlinear_demo(
    spec: NonlinearModelSpec,
    x_grid: Iterable,
    n: int,
    seed=None,
    batches: int = 50,
) -> NonlinearReport:
    """Recover the linear total effect and the nonlinear slope term on an
    evenly spaced grid of treatment levels.

    The nonlinear term is ``a_YH`` times a central difference (step = grid
    spacing) of the plug-in mean of ``h(x, b x + r)``, where ``b`` and the
    residual ``r`` come from regressing M on (X, Z). Standard errors are
    batch means over ``batches`` contiguous blocks of the sample.
    """
    grid = np.asarray(list(x_grid), dtype=float)
    if grid.size < 2:
        raise ValueError("the grid needs at least two points to define the step")
    gaps = np.diff(grid)
    if not np.allclose(gaps, gaps[0], rtol=1e-9, atol=1e-12) or gaps[0] <= 0:
        raise ValueError("the grid must be increasing and evenly spaced")
    step = float(gaps[0])
    h = H_FUNCTIONS[spec.h]
    d = simulate_nonlinear(spec, n, seed)
    b_mx, tau, a_yh, mean_at, delta = _nonlinear_estimates(d, h, grid, step)
    per_batch = []
    for chunk in np.array_split(np.arange(n), batches):
        sub = Dataset(d.names, d.values[chunk])
        per_batch.append(_nonlinear_estimates(sub, h, grid, step)[4])
    se = np.std(np.array(per_batch), axis=0, ddof=1) / np.sqrt(batches)
    closed = spec.closed_form_delta(grid) if spec.h == "product" else None
    return NonlinearReport(
        grid, n, b_mx, tau, a_yh, mean_at, delta, se, tau + delta, closed, spec.linear_total_effect
    )
