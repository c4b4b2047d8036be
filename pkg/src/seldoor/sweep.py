"""Exhaustive small-graph sweep behind the soundness, necessity, bias,
corollary, equivalence and oracle checks.

Every ADMG on up to ``max_vertices`` vertices (in causal order, so every
directed edge runs low -> high) with bounded edge counts is enumerated. For
each graph the graphical verdicts of every query (i, j, Z) are computed once
by :func:`graph_queries`, then one batch of random parameter draws is pushed
through :func:`evaluate_draws`. Both are numba kernels when acceleration is
enabled and plain Python otherwise.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from ._accel import jit
from .graph import Admg
from .montecarlo import ParamRanges, draw_parameters
from .sem import IDENTITY_RTOL, PD_TOL, SemModel

# query flags
SD = 1  # selective-door criterion holds
CLAUSE_II = 2  # Z blocks every back-door path j..i
BD = 4  # back-door criterion holds
ZERO = 8  # Z blocks every path j..i
SINGLE_DOOR = 16  # single-door precondition holds
SD_STRICT = 32  # selective-door with the literal blocking set

# slots of the statistics vector returned by evaluate_draws
(
    SOUND_CHECKED,
    SOUND_FAILED,
    SOUND_MAXDEV,
    BIAS_CHECKED,
    BIAS_FAILED,
    BIAS_MAXDEV,
    ZERO_CHECKED,
    ZERO_FAILED,
    ZERO_MAXDEV,
    SINGLE_CHECKED,
    SINGLE_FAILED,
    SINGLE_MAXDEV,
    BACKDOOR_CHECKED,
    BACKDOOR_FAILED,
    BACKDOOR_MAXDEV,
    NECESSITY_CHECKED,
    NECESSITY_AGREED,
    SINGULAR,
) = range(18)
N_STATS = 18
_MAXED = [SOUND_MAXDEV, BIAS_MAXDEV, ZERO_MAXDEV, SINGLE_MAXDEV, BACKDOOR_MAXDEV]
_SUMMED = [k for k in range(N_STATS) if k not in _MAXED]


@jit
def graph_queries(ch, pa, bi, desc, n):
    """Flags, conditioning masks and S1 masks for every query of a graph.

    Queries are ordered by outcome, then treatment, then Z as an increasing
    bitmask over the remaining vertices.
    """
    one = np.int64(1)
    total = n * (n - 1) * (one << max(n - 2, 0))
    qi = np.empty(total, np.int64)
    qj = np.empty(total, np.int64)
    qz = np.empty(total, np.int64)
    flags = np.zeros(total, np.int64)
    s1 = np.zeros(total, np.int64)
    full = (one << n) - 1
    q = 0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            others = full & ~(one << i) & ~(one << j)
            z = np.int64(0)
            while True:
                code, _ = kernels.selective_door_code(ch, pa, bi, desc, n, j, i, z, False)
                f = 0
                if code == 0:
                    f |= SD
                if code != 1:
                    f |= CLAUSE_II
                    if (z & desc[j]) == 0:
                        f |= BD
                scode, _ = kernels.selective_door_code(ch, pa, bi, desc, n, j, i, z, True)
                if scode == 0:
                    f |= SD_STRICT
                if not kernels.path_open(ch, pa, bi, desc, n, j, i, z, kernels.ANY):
                    f |= ZERO
                if (z & desc[i]) == 0:
                    if not kernels.path_open(
                        ch, pa, bi, desc, n, j, i, z, kernels.NOT_DIRECT_EDGE
                    ):
                        f |= SINGLE_DOOR
                qi[q] = i
                qj[q] = j
                qz[q] = z
                flags[q] = f
                s1[q] = kernels.s1_mask(ch, pa, bi, desc, n, z | (one << j), i)
                q += 1
                if z == others:
                    break
                z = (z - others) & others
    return qi, qj, qz, flags, s1


@jit
def equivalence_mismatches(ch, pa, bi, desc, n):
    """Count (S, i) pairs on which the three no-confounding conditions
    disagree; returns (checked, mismatched)."""
    one = np.int64(1)
    full = (one << n) - 1
    checked = 0
    bad = 0
    for i in range(n):
        others = full & ~(one << i)
        s = np.int64(0)
        while True:
            c1 = True
            c2 = True
            c3 = True
            for j in range(n):
                if not (s >> j) & 1:
                    continue
                rest = s & ~(one << j)
                if c1:
                    code, _ = kernels.selective_door_code(ch, pa, bi, desc, n, j, i, rest, False)
                    if code != 0:
                        c1 = False
                if c2 and kernels.path_open(ch, pa, bi, desc, n, j, i, rest, kernels.BACKDOOR):
                    c2 = False
                if c3 and kernels.path_open(
                    ch, pa, bi, desc, n, j, i, rest, kernels.BACKDOOR_NO_V
                ):
                    c3 = False
            checked += 1
            if not (c1 == c2 and c2 == c3):
                bad += 1
            if s == others:
                break
            s = (s - others) & others
    return checked, bad


@jit
def _chol_solve_into(M, m, rhs, L, y, x, tol):
    # Cholesky solve on the leading m x m block, no allocation
    for r in range(m):
        for c in range(r + 1):
            s = M[r, c]
            for k in range(c):
                s -= L[r, k] * L[c, k]
            if r == c:
                if not s > tol:
                    return False
                L[r, r] = np.sqrt(s)
            else:
                L[r, c] = s / L[c, c]
    for r in range(m):
        s = rhs[r]
        for k in range(r):
            s -= L[r, k] * y[k]
        y[r] = s / L[r, r]
    for r in range(m - 1, -1, -1):
        s = y[r]
        for k in range(r + 1, m):
            s -= L[k, r] * x[k]
        x[r] = s / L[r, r]
    return True


@jit
def _masked_effect_into(A, zmask, i, j, buf):
    if i == j:
        return 1.0
    if i < j:
        return 0.0
    for r in range(j, i + 1):
        buf[r] = 0.0
    buf[j] = 1.0
    for r in range(j + 1, i + 1):
        if (zmask >> r) & 1:
            continue
        s = 0.0
        for c in range(j, r):
            s += A[r, c] * buf[c]
        buf[r] = s
    return buf[i]


@jit
def _close(a, b, rtol):
    return abs(a - b) <= max(1e-12, rtol * max(1.0, max(abs(a), abs(b))))


@jit
def _track(stats, slot, ok, dev):
    stats[slot] += 1
    if not ok:
        stats[slot + 1] += 1
    if dev > stats[slot + 2]:
        stats[slot + 2] = dev


@jit
def evaluate_draws(A, Sigma, qi, qj, qz, flags, s1, n_exact, tol_eq, agree_log):
    """Push every draw through every query of one graph.

    Draws ``0 .. n_exact-1`` feed the exact checks (soundness, bias identity,
    corollaries); every draw feeds the necessity count for criterion-false
    queries, whose agreeing draws are marked in ``agree_log[q, d]``.
    Returns the statistics vector and per-query agreement counts.
    """
    D = A.shape[0]
    n = A.shape[1]
    nq = qi.shape[0]
    stats = np.zeros(N_STATS)
    agree = np.zeros(nq, np.int64)
    C = np.empty((n, n))
    M = np.empty((n, n))
    rhs = np.empty(n)
    L = np.empty((n, n))
    y = np.empty(n)
    x = np.empty(n)
    buf = np.empty(n)
    pos = np.empty(n, np.int64)
    one = np.int64(1)
    for d in range(D):
        Ad = A[d]
        B = kernels.unit_lower_inverse(Ad)
        BS = B @ Sigma[d]
        for r in range(n):
            for c in range(r + 1):
                s = 0.0
                for k in range(n):
                    s += BS[r, k] * B[c, k]
                C[r, c] = s
                C[c, r] = s
        exact = d < n_exact
        for q in range(nq):
            f = flags[q]
            sd = (f & SD) != 0
            if sd and not exact:
                continue
            i = qi[q]
            j = qj[q]
            z = qz[q]
            smask = z | (one << j)
            m = 0
            for v in range(n):
                if (smask >> v) & 1:
                    pos[v] = m
                    m += 1
            for v in range(n):
                if not (smask >> v) & 1:
                    continue
                a = pos[v]
                rhs[a] = C[v, i]
                for w in range(n):
                    if (smask >> w) & 1:
                        M[a, pos[w]] = C[v, w]
            if not _chol_solve_into(M, m, rhs, L, y, x, PD_TOL):
                stats[SINGULAR] += 1
                continue
            beta = x[pos[j]]
            tau = _masked_effect_into(Ad, z, i, j, buf)
            gamma = beta - tau
            if not sd:
                stats[NECESSITY_CHECKED] += 1
                if abs(gamma) <= tol_eq:
                    agree[q] += 1
                    agree_log[q, d] = 1
                    stats[NECESSITY_AGREED] += 1
            if not exact:
                continue
            if sd:
                dev = abs(gamma) / max(1.0, abs(beta))
                _track(stats, SOUND_CHECKED, dev <= IDENTITY_RTOL, dev)
            if f & CLAUSE_II:
                s2 = smask & ~s1[q]
                total = 0.0
                for p in range(n):
                    if (s1[q] >> p) & 1:
                        gp = x[pos[p]] - _masked_effect_into(Ad, smask, i, p, buf)
                        total -= gp * _masked_effect_into(Ad, s2, p, j, buf)
                dev = abs(gamma - total) / max(1.0, max(abs(gamma), abs(total)))
                _track(stats, BIAS_CHECKED, _close(gamma, total, IDENTITY_RTOL), dev)
            if f & ZERO:
                _track(stats, ZERO_CHECKED, _close(beta, 0.0, IDENTITY_RTOL), abs(beta))
            if f & SINGLE_DOOR:
                t = Ad[i, j]
                dev = abs(beta - t) / max(1.0, abs(t))
                _track(stats, SINGLE_CHECKED, _close(beta, t, IDENTITY_RTOL), dev)
            if f & BD:
                t = B[i, j]
                dev = abs(beta - t) / max(1.0, abs(t))
                _track(stats, BACKDOOR_CHECKED, _close(beta, t, IDENTITY_RTOL), dev)
    return stats, agree


@jit
def _path_sum(ch, n, A, j, i, zmask):
    # sum over directed paths j ->...-> i avoiding z, by explicit enumeration
    stack_v = np.empty(n * n + 1, np.int64)
    stack_p = np.empty(n * n + 1)
    top = 0
    stack_v[0] = j
    stack_p[0] = 1.0
    total = 0.0
    while top >= 0:
        v = stack_v[top]
        p = stack_p[top]
        top -= 1
        if v == i:
            total += p
            continue
        for w in range(v + 1, i + 1):
            if (ch[v] >> w) & 1 and not (zmask >> w) & 1:
                top += 1
                stack_v[top] = w
                stack_p[top] = p * A[w, v]
    return total


@jit
def effect_mismatches(ch, n, A, exact):
    """Compare forward substitution with explicit path enumeration on every
    (i, j, Z). With ``exact`` the comparison is ``==`` (use integer-valued
    coefficients); otherwise it reports the largest relative gap."""
    one = np.int64(1)
    full = (one << n) - 1
    checked = 0
    bad = 0
    worst = 0.0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            others = full & ~(one << i) & ~(one << j)
            z = np.int64(0)
            while True:
                a = kernels.masked_effect(A, z, i, j)
                b = _path_sum(ch, n, A, j, i, z)
                checked += 1
                if exact:
                    if a != b:
                        bad += 1
                else:
                    dev = abs(a - b) / max(1.0, abs(b))
                    if dev > worst:
                        worst = dev
                if z == others:
                    break
                z = (z - others) & others
    return checked, bad, worst


@jit
def _lu_solve(M, rhs):
    # Gaussian elimination with partial pivoting
    m = M.shape[0]
    W = M.copy()
    b = rhs.copy()
    for c in range(m):
        p = c
        for r in range(c + 1, m):
            if abs(W[r, c]) > abs(W[p, c]):
                p = r
        if p != c:
            for k in range(m):
                W[c, k], W[p, k] = W[p, k], W[c, k]
            b[c], b[p] = b[p], b[c]
        for r in range(c + 1, m):
            f = W[r, c] / W[c, c]
            for k in range(c, m):
                W[r, k] -= f * W[c, k]
            b[r] -= f * b[c]
    x = np.empty(m)
    for r in range(m - 1, -1, -1):
        s = b[r]
        for k in range(r + 1, m):
            s -= W[r, k] * x[k]
        x[r] = s / W[r, r]
    return x


@jit
def regression_oracle_gap(A, Sigma, c):
    """Largest relative gap, over every outcome i and nonempty regressor set
    S, between the centered Cholesky regression (intercept recovered from the
    means) and an LU solve of the raw intercept-augmented normal equations."""
    n = A.shape[0]
    B = kernels.unit_lower_inverse(A)
    C = B @ Sigma @ B.T
    mu = B @ c
    one = np.int64(1)
    full = (one << n) - 1
    worst = 0.0
    checked = 0
    for i in range(n):
        others = full & ~(one << i)
        s = others
        while s:
            idx = kernels.mask_indices(s, n)
            m = idx.shape[0]
            M = np.empty((m, m))
            r = np.empty(m)
            for a in range(m):
                r[a] = C[idx[a], i]
                for b in range(m):
                    M[a, b] = C[idx[a], idx[b]]
            beta, _ = kernels.spd_solve(M, r, PD_TOL)
            icpt = mu[i]
            for a in range(m):
                icpt -= beta[a] * mu[idx[a]]
            E = np.empty((m + 1, m + 1))
            e = np.empty(m + 1)
            E[0, 0] = 1.0
            e[0] = mu[i]
            for a in range(m):
                E[0, a + 1] = mu[idx[a]]
                E[a + 1, 0] = mu[idx[a]]
                e[a + 1] = C[idx[a], i] + mu[idx[a]] * mu[i]
                for b in range(m):
                    E[a + 1, b + 1] = C[idx[a], idx[b]] + mu[idx[a]] * mu[idx[b]]
            ref = _lu_solve(E, e)
            dev = abs(icpt - ref[0]) / max(1.0, abs(ref[0]))
            if dev > worst:
                worst = dev
            for a in range(m):
                dev = abs(beta[a] - ref[a + 1]) / max(1.0, abs(ref[a + 1]))
                if dev > worst:
                    worst = dev
            checked += 1
            s = (s - 1) & others
    return checked, worst


@dataclass(frozen=True)
class GraphSpec:
    """Compact description of a sweep graph: vertex count and edge lists
    over vertex indices."""

    gid: int
    n: int
    directed: tuple
    bidirected: tuple

    def admg(self) -> Admg:
        return Admg(tuple(f"V{k}" for k in range(self.n)), self.directed, self.bidirected)


def enumerate_graphs(max_vertices=5, max_directed=8, max_bidirected=2, min_vertices=2):
    """Every labeled ADMG in causal order within the bounds, in a fixed
    order (vertex count, then directed-edge bitmask, then bidirected
    combination)."""
    gid = 0
    for n in range(min_vertices, max_vertices + 1):
        pairs = list(itertools.combinations(range(n), 2))
        bi_sets = [
            combo
            for r in range(min(max_bidirected, len(pairs)) + 1)
            for combo in itertools.combinations(pairs, r)
        ]
        for dbits in range(1 << len(pairs)):
            if bin(dbits).count("1") > max_directed:
                continue
            directed = tuple(p for t, p in enumerate(pairs) if (dbits >> t) & 1)
            for bset in bi_sets:
                yield GraphSpec(gid, n, directed, bset)
                gid += 1


def _masks(spec: GraphSpec):
    n = spec.n
    ch = np.zeros(n, np.int64)
    pa = np.zeros(n, np.int64)
    bi = np.zeros(n, np.int64)
    for a, b in spec.directed:
        ch[a] |= 1 << b
        pa[b] |= 1 << a
    for a, b in spec.bidirected:
        bi[a] |= 1 << b
        bi[b] |= 1 << a
    return ch, pa, bi, kernels.descendants_masks(ch, n)


@dataclass(frozen=True)
class AgreementRecord:
    """A criterion-false query whose draw produced a vanishing gap."""

    gid: int
    outcome: int
    treatment: int
    zmask: int
    draw: int


@dataclass
class SweepReport:
    graphs: int = 0
    queries: int = 0
    criterion_true: int = 0
    criterion_false: int = 0
    stats: np.ndarray = field(default_factory=lambda: np.zeros(N_STATS))
    worst_agree_fraction: float = 0.0
    queries_over_allowance: int = 0
    agreements: list = field(default_factory=list)
    backdoor_not_selective: int = 0
    selective_j_in_s1: int = 0
    strict_differs: int = 0
    equivalence_checked: int = 0
    equivalence_mismatched: int = 0
    effect_checked: int = 0
    effect_mismatched: int = 0
    effect_float_gap: float = 0.0
    regression_checked: int = 0
    regression_gap: float = 0.0
    seconds: float = 0.0

    def stat(self, slot: int) -> float:
        return float(self.stats[slot])


def run_sweep(
    max_vertices: int = 5,
    max_directed: int = 8,
    max_bidirected: int = 2,
    exact_draws: int = 20,
    necessity_draws: int = 200,
    seed: int = 0,
    tol_eq: float = 1e-7,
    allowed_fraction: float = 0.01,
    ranges: ParamRanges = ParamRanges(),
    graphs=None,
) -> SweepReport:
    """Run every check over the enumerated graphs (or the given
    ``GraphSpec`` iterable). Graph ``gid`` draws its parameters from the
    seed ``(seed, gid)``; see :func:`replay_model`."""
    t0 = time.perf_counter()
    rep = SweepReport()
    draws = max(exact_draws, necessity_draws)
    if graphs is None:
        graphs = enumerate_graphs(max_vertices, max_directed, max_bidirected)
    for spec in graphs:
        n = spec.n
        ch, pa, bi, desc = _masks(spec)
        qi, qj, qz, flags, s1 = graph_queries(ch, pa, bi, desc, n)
        rep.graphs += 1
        rep.queries += len(qi)
        sd = (flags & SD) != 0
        rep.criterion_true += int(sd.sum())
        rep.criterion_false += int((~sd).sum())
        rep.backdoor_not_selective += int(((flags & BD) != 0)[~sd].sum())
        jbit = np.left_shift(np.int64(1), qj)
        rep.selective_j_in_s1 += int(((s1 & jbit) != 0)[sd].sum())
        rep.strict_differs += int((((flags & SD_STRICT) != 0) != sd).sum())

        checked, bad = equivalence_mismatches(ch, pa, bi, desc, n)
        rep.equivalence_checked += checked
        rep.equivalence_mismatched += bad

        rng = np.random.default_rng([seed, spec.gid])
        A, Sigma = draw_parameters(n, spec.directed, spec.bidirected, ranges, rng, draws)
        agree_log = np.zeros((len(qi), draws), np.uint8)
        stats, agree = evaluate_draws(
            A, Sigma, qi, qj, qz, flags, s1, exact_draws, tol_eq, agree_log
        )
        rep.stats[_SUMMED] += stats[_SUMMED]
        rep.stats[_MAXED] = np.maximum(rep.stats[_MAXED], stats[_MAXED])
        if necessity_draws and (~sd).any():
            frac = agree[~sd] / necessity_draws
            rep.worst_agree_fraction = max(rep.worst_agree_fraction, float(frac.max()))
            rep.queries_over_allowance += int((frac > allowed_fraction).sum())
            for q, d in zip(*np.nonzero(agree_log)):
                rep.agreements.append(
                    AgreementRecord(spec.gid, int(qi[q]), int(qj[q]), int(qz[q]), int(d))
                )

        A_int = np.zeros((n, n))
        if spec.directed:
            e = np.asarray(spec.directed)
            vals = rng.integers(1, 4, size=len(e)) * rng.choice([-1, 1], size=len(e))
            A_int[e[:, 1], e[:, 0]] = vals
        checked, bad, _ = effect_mismatches(ch, n, A_int, True)
        rep.effect_checked += checked
        rep.effect_mismatched += bad
        _, _, gap = effect_mismatches(ch, n, np.ascontiguousarray(A[0]), False)
        rep.effect_float_gap = max(rep.effect_float_gap, gap)

        c = rng.normal(size=n)
        checked, gap = regression_oracle_gap(np.ascontiguousarray(A[0]), Sigma[0], c)
        rep.regression_checked += checked
        rep.regression_gap = max(rep.regression_gap, gap)
    rep.seconds = time.perf_counter() - t0
    return rep


def replay_model(spec: GraphSpec, draw: int, seed: int = 0, draws: int = 200,
                 ranges: ParamRanges = ParamRanges()) -> SemModel:
    """Rebuild the parameter point a sweep used for ``spec`` at index
    ``draw`` (``draws`` must match the sweep's batch size)."""
    rng = np.random.default_rng([seed, spec.gid])
    A, Sigma = draw_parameters(spec.n, spec.directed, spec.bidirected, ranges, rng, draws)
    return SemModel(spec.admg(), A[draw], Sigma[draw])

