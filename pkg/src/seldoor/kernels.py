"""Hot inner loops: pruned path search over bitmask graphs and small
triangular / SPD solves.

Graphs are passed as four int64 arrays indexed by vertex: ``ch[v]`` (children
bitmask), ``pa[v]`` (parents), ``bi[v]`` (bidirected neighbours) and
``desc[v]`` (proper descendants). Vertex sets are int64 bitmasks, which caps
these kernels at 62 vertices; the graph layer refuses far earlier.
"""

import numpy as np

from ._accel import jit

# step kinds, as seen when walking from v to w
FORWARD = 0  # v -> w
BACKWARD = 1  # v <- w
BIDIRECTED = 2  # v <-> w

# path search modes
ANY = 0
BACKDOOR = 1
DIRECTED = 2
BACKDOOR_NO_V = 3
NOT_DIRECT_EDGE = 4

PIVOT_TOL = 1e-12


@jit
def find_path(ch, pa, bi, desc, n, a, b, zmask, mode, out_v, out_k):
    """Depth-first search for the lexicographically first path from ``a`` to
    ``b`` that ``zmask`` leaves unblocked.

    Partial paths are abandoned as soon as an interior vertex blocks them, so
    only unblocked prefixes are ever extended. Returns the number of steps of
    the path written into ``out_v``/``out_k``, or -1.
    """
    one = np.int64(1)
    cursor = np.zeros(n + 1, np.int64)
    out_v[0] = a
    visited = one << a
    depth = 0
    while depth >= 0:
        v = out_v[depth]
        c = cursor[depth]
        moved = False
        while c < 3 * n:
            w = c // 3
            k = c - 3 * w
            c += 1
            if (visited >> w) & 1:
                continue
            if k == FORWARD:
                if not (ch[v] >> w) & 1:
                    continue
            elif k == BACKWARD:
                if not (pa[v] >> w) & 1:
                    continue
            elif not (bi[v] >> w) & 1:
                continue
            if mode == DIRECTED and k != FORWARD:
                continue
            if depth == 0:
                if (mode == BACKDOOR or mode == BACKDOOR_NO_V) and k == FORWARD:
                    continue
            else:
                k1 = out_k[depth - 1]
                if k1 != BACKWARD and k != FORWARD:
                    # v is a collider
                    if mode == BACKDOOR_NO_V:
                        continue
                    if (((one << v) | desc[v]) & zmask) == 0:
                        continue
                elif (zmask >> v) & 1:
                    continue
            if w == b:
                if mode == NOT_DIRECT_EDGE and depth == 0 and k == FORWARD:
                    continue
                out_k[depth] = k
                out_v[depth + 1] = w
                return depth + 1
            cursor[depth] = c
            out_k[depth] = k
            depth += 1
            out_v[depth] = w
            cursor[depth] = 0
            visited |= one << w
            moved = True
            break
        if not moved:
            visited &= ~(one << v)
            depth -= 1
    return -1


@jit
def path_open(ch, pa, bi, desc, n, a, b, zmask, mode):
    out_v = np.empty(n + 1, np.int64)
    out_k = np.empty(n + 1, np.int64)
    return find_path(ch, pa, bi, desc, n, a, b, zmask, mode, out_v, out_k) >= 0


@jit
def selective_door_code(ch, pa, bi, desc, n, j, i, zmask, strict):
    """0 when ``zmask`` satisfies the selective-door criterion for (j, i);
    1 when a back-door path j..i is left open; 2 when some conditioned
    descendant reached by an open directed path keeps a back-door path to i.

    The second return value is the offending conditioned vertex (or -1).
    """
    one = np.int64(1)
    out_v = np.empty(n + 1, np.int64)
    out_k = np.empty(n + 1, np.int64)
    if find_path(ch, pa, bi, desc, n, j, i, zmask, BACKDOOR, out_v, out_k) >= 0:
        return 1, -1
    cand = zmask & desc[j]
    for k in range(n):
        if not (cand >> k) & 1:
            continue
        rest = zmask & ~(one << k)
        if find_path(ch, pa, bi, desc, n, j, k, rest, DIRECTED, out_v, out_k) < 0:
            continue
        bset = rest if strict else rest | (one << j)
        if find_path(ch, pa, bi, desc, n, k, i, bset, BACKDOOR, out_v, out_k) >= 0:
            return 2, k
    return 0, -1


@jit
def s1_mask(ch, pa, bi, desc, n, smask, i):
    """Members k of ``smask`` for which ``smask - {k}`` leaves some back-door
    path k..i open."""
    one = np.int64(1)
    out_v = np.empty(n + 1, np.int64)
    out_k = np.empty(n + 1, np.int64)
    res = np.int64(0)
    for k in range(n):
        if (smask >> k) & 1:
            rest = smask & ~(one << k)
            if find_path(ch, pa, bi, desc, n, k, i, rest, BACKDOOR, out_v, out_k) >= 0:
                res |= one << k
    return res


@jit
def descendants_masks(ch, n):
    desc = np.zeros(n, np.int64)
    for v in range(n - 1, -1, -1):
        m = ch[v]
        for w in range(v + 1, n):
            if (ch[v] >> w) & 1:
                m |= desc[w]
        desc[v] = m
    return desc


@jit
def unit_lower_inverse(A):
    """``(I - A)^-1`` for strictly lower-triangular ``A`` by forward
    substitution."""
    n = A.shape[0]
    B = np.zeros((n, n))
    for r in range(n):
        B[r, r] = 1.0
        for c in range(r):
            s = 0.0
            for k in range(c, r):
                s += A[r, k] * B[k, c]
            B[r, c] = s
    return B


@jit
def masked_unit_lower_inverse(A, zmask):
    """``(I - A')^-1`` where ``A'`` is ``A`` with the rows in ``zmask``
    zeroed, i.e. every edge into a member of the mask deleted."""
    n = A.shape[0]
    B = np.zeros((n, n))
    for r in range(n):
        B[r, r] = 1.0
        if (zmask >> r) & 1:
            continue
        for c in range(r):
            s = 0.0
            for k in range(c, r):
                s += A[r, k] * B[k, c]
            B[r, c] = s
    return B


@jit
def masked_effect(A, zmask, i, j):
    """Single entry ``[i, j]`` of :func:`masked_unit_lower_inverse`."""
    if i == j:
        return 1.0
    if i < j:
        return 0.0
    x = np.zeros(i + 1)
    x[j] = 1.0
    for r in range(j + 1, i + 1):
        if (zmask >> r) & 1:
            continue
        s = 0.0
        for c in range(j, r):
            s += A[r, c] * x[c]
        x[r] = s
    return x[i]


@jit
def spd_solve(M, rhs, tol):
    """Cholesky solve of ``M x = rhs``.

    Returns ``(x, min_pivot)``; when a pivot falls to ``tol`` or below the
    factorization stops and ``x`` is all-NaN.
    """
    m = M.shape[0]
    L = np.zeros((m, m))
    x = np.empty(m)
    min_pivot = np.inf
    for r in range(m):
        for c in range(r + 1):
            s = M[r, c]
            for k in range(c):
                s -= L[r, k] * L[c, k]
            if r == c:
                if s < min_pivot:
                    min_pivot = s
                if not s > tol:
                    x[:] = np.nan
                    return x, min_pivot
                L[r, r] = np.sqrt(s)
            else:
                L[r, c] = s / L[c, c]
    y = np.empty(m)
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
    return x, min_pivot


@jit
def mask_indices(mask, n):
    cnt = 0
    for v in range(n):
        if (mask >> v) & 1:
            cnt += 1
    idx = np.empty(cnt, np.int64)
    cnt = 0
    for v in range(n):
        if (mask >> v) & 1:
            idx[cnt] = v
            cnt += 1
    return idx
