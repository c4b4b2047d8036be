"""Independent brute-force oracles and random generators for the tests.

Nothing here calls the path-search kernels: paths come from permutations of
vertices, blocking from the textbook definition.
"""

import itertools

import numpy as np
from hypothesis import strategies as st

from seldoor.graph import Admg

FLIP = {"->": "<-", "<-": "->", "<->": "<->"}


def random_admg(rng, n, p_dir=0.4, p_bi=0.2):
    names = [f"V{k}" for k in range(n)]
    directed = [(a, b) for a in range(n) for b in range(a + 1, n) if rng.random() < p_dir]
    bidirected = [(a, b) for a in range(n) for b in range(a + 1, n) if rng.random() < p_bi]
    return Admg(names, directed, bidirected)


@st.composite
def admgs(draw, min_n=2, max_n=6):
    n = draw(st.integers(min_n, max_n))
    pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
    directed = [p for p in pairs if draw(st.booleans())]
    bidirected = [p for p in pairs if draw(st.integers(0, 3)) == 0]
    return Admg([f"V{k}" for k in range(n)], directed, bidirected)


KIND = {"->": 0, "<-": 1, "<->": 2}


def step_key(path):
    """Sort key: lexicographic over steps, each step ordered by the vertex
    reached and then by edge kind."""
    verts, marks = path
    return tuple((v, KIND[m]) for v, m in zip(verts[1:], marks))


def edge_marks(g, a, b):
    """Every way to step from a to b in one edge."""
    out = []
    if (a, b) in g.directed:
        out.append("->")
    if (b, a) in g.directed:
        out.append("<-")
    if tuple(sorted((a, b))) in g.bidirected:
        out.append("<->")
    return out


def brute_paths(g, a, b):
    """All simple paths a..b as (vertices, marks), by trying every ordered
    choice of distinct interior vertices."""
    rest = [v for v in range(g.n) if v not in (a, b)]
    found = []
    for k in range(len(rest) + 1):
        for mid in itertools.permutations(rest, k):
            verts = (a, *mid, b)
            options = [edge_marks(g, x, y) for x, y in zip(verts, verts[1:])]
            for marks in itertools.product(*options):
                found.append((verts, marks))
    return found


def brute_descendants(g, v):
    out, frontier = set(), [v]
    while frontier:
        x = frontier.pop()
        for a, b in g.directed:
            if a == x and b not in out:
                out.add(b)
                frontier.append(b)
    return out


def brute_blocked(g, z, verts, marks):
    z = set(z)
    for t in range(1, len(verts) - 1):
        v = verts[t]
        collider = marks[t - 1] != "<-" and marks[t] != "->"
        if collider:
            if not ({v} | brute_descendants(g, v)) & z:
                return True
        elif v in z:
            return True
    return False


def brute_backdoor_open(g, z, a, b):
    return [
        (v, m)
        for v, m in brute_paths(g, a, b)
        if m[0] in ("<-", "<->") and not brute_blocked(g, z, v, m)
    ]


def brute_selective(g, z, j, i, strict=False):
    z = set(z)
    if brute_backdoor_open(g, z, j, i):
        return False
    for k in z & brute_descendants(g, j):
        rest = z - {k}
        reach = any(
            all(x == "->" for x in m) and not brute_blocked(g, rest, v, m)
            for v, m in brute_paths(g, j, k)
        )
        if not reach:
            continue
        bset = rest if strict else rest | {j}
        if brute_backdoor_open(g, bset, k, i):
            return False
    return True


def brute_s1(g, s, i):
    s = set(s)
    return {k for k in s if brute_backdoor_open(g, s - {k}, k, i)}


def path_sum(g, A, j, i, z=()):
    """Sum of coefficient products over directed paths j..i that never
    enter z."""
    z = set(z)
    total = 0.0
    for verts, marks in brute_paths(g, j, i):
        if all(m == "->" for m in marks) and not (set(verts[1:]) & z):
            prod = 1.0
            for x, y in zip(verts, verts[1:]):
                prod *= A[y, x]
            total += prod
    return total


def random_params(g, rng):
    """Coefficients and a PD error covariance on g, by simple rejection."""
    n = g.n
    A = np.zeros((n, n))
    for a, b in g.directed:
        A[b, a] = rng.uniform(0.2, 1.5) * rng.choice([-1, 1])
    while True:
        S = np.diag(rng.uniform(0.5, 2.0, n))
        for a, b in g.bidirected:
            S[a, b] = S[b, a] = rng.uniform(0.1, 0.6) * rng.choice([-1, 1]) * np.sqrt(S[a, a] * S[b, b])
        if np.linalg.eigvalsh(S)[0] > 1e-6:
            return A, S
