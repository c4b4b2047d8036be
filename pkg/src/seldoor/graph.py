"""Acyclic directed mixed graphs, paths, blocking and the adjustment criteria.

Vertices are identified by their position in a fixed causal ordering; every
directed edge must run from a lower to a higher index, so acyclicity holds by
construction. Public functions accept vertices as indices, names or
:class:`VertexId` and return vertex sets as frozensets of indices.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import kernels
from .errors import (
    CycleOrOrderViolation,
    DuplicateEdge,
    EndpointInConditioningSet,
    GraphTooLarge,
    OrderViolation,
    OutcomeInSet,
    SelfLoop,
    UnknownVertex,
)

MAX_VERTICES = 16

_MARKS = ("->", "<-", "<->")
_KIND = {m: k for k, m in enumerate(_MARKS)}


class VertexId(NamedTuple):
    index: int
    name: str


@dataclass(frozen=True)
class Admg:
    """Vertex names in causal order plus directed and bidirected edge lists.

    Edges may be given by name or index. Bidirected pairs are stored with the
    lower index first. Construction validates; an invalid edge raises.
    """

    names: tuple
    directed: tuple = ()
    bidirected: tuple = ()

    def __post_init__(self):
        names = tuple(str(x) for x in self.names)
        object.__setattr__(self, "names", names)
        if len(set(names)) != len(names):
            raise DuplicateEdge(f"duplicate vertex name in {names}")
        lookup = {nm: k for k, nm in enumerate(names)}

        def idx(v):
            if isinstance(v, VertexId):
                v = v.index
            if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
                if 0 <= v < len(names):
                    return int(v)
                raise UnknownVertex(f"vertex index {v} out of range")
            if v in lookup:
                return lookup[v]
            raise UnknownVertex(f"unknown vertex {v!r}")

        directed = tuple((idx(a), idx(b)) for a, b in self.directed)
        bidirected = tuple(tuple(sorted((idx(a), idx(b)))) for a, b in self.bidirected)
        object.__setattr__(self, "directed", directed)
        object.__setattr__(self, "bidirected", bidirected)
        validate(self)

    @property
    def n(self) -> int:
        return len(self.names)

    @property
    def vertices(self) -> list[VertexId]:
        return [VertexId(k, nm) for k, nm in enumerate(self.names)]

    def index(self, v) -> int:
        if isinstance(v, VertexId):
            v = v.index
        if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
            if 0 <= v < self.n:
                return int(v)
            raise UnknownVertex(f"vertex index {v} out of range")
        try:
            return self.names.index(v)
        except ValueError:
            raise UnknownVertex(f"unknown vertex {v!r}") from None

    def indices(self, vs: Iterable) -> frozenset:
        return frozenset(self.index(v) for v in vs)

    def name(self, i: int) -> str:
        return self.names[i]

    def mask(self, vs: Iterable) -> int:
        m = 0
        for v in vs:
            m |= 1 << self.index(v)
        return m

    def unmask(self, m: int) -> frozenset:
        return frozenset(k for k in range(self.n) if (m >> k) & 1)

    @cached_property
    def ch(self) -> np.ndarray:
        out = np.zeros(self.n, np.int64)
        for a, b in self.directed:
            out[a] |= np.int64(1) << b
        return out

    @cached_property
    def pa(self) -> np.ndarray:
        out = np.zeros(self.n, np.int64)
        for a, b in self.directed:
            out[b] |= np.int64(1) << a
        return out

    @cached_property
    def bi(self) -> np.ndarray:
        out = np.zeros(self.n, np.int64)
        for a, b in self.bidirected:
            out[a] |= np.int64(1) << b
            out[b] |= np.int64(1) << a
        return out

    @cached_property
    def desc(self) -> np.ndarray:
        return kernels.descendants_masks(self.ch, self.n)

    def masks(self):
        return self.ch, self.pa, self.bi, self.desc

    def parents(self, v) -> frozenset:
        return self.unmask(int(self.pa[self.index(v)]))

    def children(self, v) -> frozenset:
        return self.unmask(int(self.ch[self.index(v)]))

    def spouses(self, v) -> frozenset:
        return self.unmask(int(self.bi[self.index(v)]))

    def has_directed(self, a, b) -> bool:
        return bool((self.ch[self.index(a)] >> self.index(b)) & 1)

    def has_bidirected(self, a, b) -> bool:
        return bool((self.bi[self.index(a)] >> self.index(b)) & 1)

    def __repr__(self):
        d = ", ".join(f"{self.names[a]}->{self.names[b]}" for a, b in self.directed)
        b = ", ".join(f"{self.names[x]}<->{self.names[y]}" for x, y in self.bidirected)
        return f"Admg({list(self.names)}; {d}; {b})"


def validate(g: Admg) -> None:
    """Raise if ``g`` breaks an ADMG invariant; return None otherwise."""
    seen = set()
    for a, b in g.directed:
        if a == b:
            raise SelfLoop(f"self-loop on {g.names[a]}")
        if a > b:
            raise CycleOrOrderViolation(
                f"edge {g.names[a]} -> {g.names[b]} runs against the causal ordering"
            )
        if (a, b) in seen:
            raise DuplicateEdge(f"duplicate edge {g.names[a]} -> {g.names[b]}")
        seen.add((a, b))
    seen = set()
    for a, b in g.bidirected:
        if a == b:
            raise SelfLoop(f"bidirected self-loop on {g.names[a]}")
        if (a, b) in seen:
            raise DuplicateEdge(f"duplicate edge {g.names[a]} <-> {g.names[b]}")
        seen.add((a, b))


def _check_size(g: Admg, max_vertices: int) -> None:
    if g.n > max_vertices:
        raise GraphTooLarge(
            f"graph has {g.n} vertices; exhaustive path search is capped at {max_vertices}"
        )


def ancestors(g: Admg, v) -> frozenset:
    i = g.index(v)
    return frozenset(k for k in range(g.n) if (g.desc[k] >> i) & 1)


def descendants(g: Admg, v) -> frozenset:
    return g.unmask(int(g.desc[g.index(v)]))


@dataclass(frozen=True)
class Path:
    """Distinct vertices plus one mark per step: ``->``, ``<-`` or ``<->``
    read left to right."""

    vertices: tuple
    marks: tuple

    def __post_init__(self):
        if len(self.marks) != len(self.vertices) - 1:
            raise ValueError("a path needs exactly one mark per step")
        if len(set(self.vertices)) != len(self.vertices):
            raise ValueError("path vertices must be distinct")

    def __len__(self):
        return len(self.marks)

    @property
    def start(self) -> int:
        return self.vertices[0]

    @property
    def end(self) -> int:
        return self.vertices[-1]

    def reverse(self) -> "Path":
        flip = {"->": "<-", "<-": "->", "<->": "<->"}
        return Path(self.vertices[::-1], tuple(flip[m] for m in reversed(self.marks)))

    def render(self, g: Admg) -> str:
        out = [g.names[self.vertices[0]]]
        for m, v in zip(self.marks, self.vertices[1:]):
            out += [m, g.names[v]]
        return " ".join(out)

    def colliders(self) -> list:
        """Interior vertices with an arrowhead from both sides."""
        out = []
        for t in range(1, len(self.vertices) - 1):
            if self.marks[t - 1] != "<-" and self.marks[t] != "->":
                out.append(self.vertices[t])
        return out

    def in_graph(self, g: Admg) -> bool:
        for a, b, m in zip(self.vertices, self.vertices[1:], self.marks):
            if m == "->" and not g.has_directed(a, b):
                return False
            if m == "<-" and not g.has_directed(b, a):
                return False
            if m == "<->" and not g.has_bidirected(a, b):
                return False
        return True


def _path_from_kernel(out_v, out_k, length) -> Path:
    verts = tuple(int(x) for x in out_v[: length + 1])
    marks = tuple(_MARKS[int(k)] for k in out_k[:length])
    return Path(verts, marks)


def enumerate_paths(g: Admg, a, b, max_vertices: int = MAX_VERTICES) -> list[Path]:
    """Every simple path between ``a`` and ``b``, ordered lexicographically
    step by step: first by the vertex index reached, then by edge kind
    (``->``, ``<-``, ``<->``) when a pair carries parallel edges. Witnesses
    returned by the criteria are the first open path in this order."""
    _check_size(g, max_vertices)
    a, b = g.index(a), g.index(b)
    if a == b:
        raise ValueError("path endpoints must differ")
    ch, pa, bi = g.ch, g.pa, g.bi
    found = []

    def steps(v):
        for w in range(g.n):
            if (ch[v] >> w) & 1:
                yield w, "->"
            if (pa[v] >> w) & 1:
                yield w, "<-"
            if (bi[v] >> w) & 1:
                yield w, "<->"

    def walk(verts, marks, on_path):
        v = verts[-1]
        for w, m in steps(v):
            if w in on_path:
                continue
            if w == b:
                found.append(Path(tuple(verts + [w]), tuple(marks + [m])))
                continue
            on_path.add(w)
            walk(verts + [w], marks + [m], on_path)
            on_path.discard(w)

    walk([a], [], {a})
    return found


def is_backdoor(p: Path) -> bool:
    """True when the first step points into the first vertex or is
    bidirected."""
    return len(p) > 0 and p.marks[0] in ("<-", "<->")


def is_directed(p: Path) -> bool:
    return len(p) > 0 and all(m == "->" for m in p.marks)


def blocks(g: Admg, z: Iterable, p: Path) -> bool:
    zset = g.indices(z)
    if zset & {p.start, p.end}:
        raise EndpointInConditioningSet("conditioning set contains a path endpoint")
    colliders = set(p.colliders())
    for v in p.vertices[1:-1]:
        if v in colliders:
            if not ({v} | descendants(g, v)) & zset:
                return True
        elif v in zset:
            return True
    return False


def _search(g, a, b, zmask, mode):
    out_v = np.empty(g.n + 1, np.int64)
    out_k = np.empty(g.n + 1, np.int64)
    length = kernels.find_path(*g.masks(), g.n, a, b, np.int64(zmask), mode, out_v, out_k)
    if length < 0:
        return None
    return _path_from_kernel(out_v, out_k, length)


def _endpoints_clear(g, zset, *ends):
    if zset & set(ends):
        raise EndpointInConditioningSet(
            "conditioning set contains "
            + ", ".join(g.names[e] for e in sorted(zset & set(ends)))
        )


def blocks_all_backdoor(g: Admg, z: Iterable, a, b, max_vertices: int = MAX_VERTICES):
    """``(True, None)`` when ``z`` blocks every back-door path from ``a`` to
    ``b``; otherwise ``(False, first_open_path)``."""
    _check_size(g, max_vertices)
    a, b = g.index(a), g.index(b)
    zset = g.indices(z)
    _endpoints_clear(g, zset, a, b)
    witness = _search(g, a, b, g.mask(zset), kernels.BACKDOOR)
    return witness is None, witness


def blocks_all_paths(g: Admg, z: Iterable, a, b, max_vertices: int = MAX_VERTICES):
    """``(True, None)`` when ``z`` blocks every path between ``a`` and ``b``."""
    _check_size(g, max_vertices)
    a, b = g.index(a), g.index(b)
    zset = g.indices(z)
    _endpoints_clear(g, zset, a, b)
    witness = _search(g, a, b, g.mask(zset), kernels.ANY)
    return witness is None, witness


@dataclass(frozen=True)
class CriterionResult:
    """Verdict of a graphical criterion.

    ``clause`` names the violated condition (``"i"`` or ``"ii"``) when the
    verdict is negative. For a clause-(i) failure of the selective-door
    criterion ``violator`` is the conditioned descendant, ``directed_witness``
    the open directed path reaching it and ``witness`` its open back-door
    path.
    """

    criterion: str
    satisfied: bool
    clause: str | None = None
    witness: Path | None = None
    violator: int | None = None
    directed_witness: Path | None = None

    def __bool__(self):
        return self.satisfied

    def describe(self, g: Admg) -> dict:
        out = {"criterion": self.criterion, "satisfied": self.satisfied}
        if not self.satisfied:
            out["clause"] = self.clause
            if self.violator is not None:
                out["violator"] = g.names[self.violator]
            if self.directed_witness is not None:
                out["directed_witness"] = self.directed_witness.render(g)
            if self.witness is not None:
                out["witness"] = self.witness.render(g)
        return out


def backdoor_criterion(g: Admg, z: Iterable, j, i, max_vertices: int = MAX_VERTICES):
    _check_size(g, max_vertices)
    j, i = g.index(j), g.index(i)
    zset = g.indices(z)
    _endpoints_clear(g, zset, i, j)
    bad = sorted(zset & descendants(g, j))
    if bad:
        return CriterionResult("backdoor", False, "i", violator=bad[0])
    witness = _search(g, j, i, g.mask(zset), kernels.BACKDOOR)
    if witness is not None:
        return CriterionResult("backdoor", False, "ii", witness=witness)
    return CriterionResult("backdoor", True)


def selective_door_criterion(
    g: Admg, z: Iterable, j, i, strict: bool = False, max_vertices: int = MAX_VERTICES
):
    """Selective-door criterion for the effect of ``j`` on ``i`` given ``z``.

    Clause (i) blocks the back-door paths of a conditioned descendant with
    ``(z | {j}) - {k}``; ``strict=True`` drops ``j`` from that set.
    """
    _check_size(g, max_vertices)
    j, i = g.index(j), g.index(i)
    zset = g.indices(z)
    _endpoints_clear(g, zset, i, j)
    zmask = g.mask(zset)
    code, k = kernels.selective_door_code(*g.masks(), g.n, j, i, np.int64(zmask), strict)
    if code == 0:
        return CriterionResult("selective", True)
    if code == 1:
        witness = _search(g, j, i, zmask, kernels.BACKDOOR)
        return CriterionResult("selective", False, "ii", witness=witness)
    k = int(k)
    rest = zmask & ~(1 << k)
    directed = _search(g, j, k, rest, kernels.DIRECTED)
    bset = rest if strict else rest | (1 << j)
    witness = _search(g, k, i, bset, kernels.BACKDOOR)
    return CriterionResult(
        "selective", False, "i", witness=witness, violator=k, directed_witness=directed
    )


def single_door_precondition(g: Admg, z: Iterable, j, i, max_vertices: int = MAX_VERTICES):
    """``z`` avoids ``i``, ``j`` and the descendants of ``i``, and blocks
    every path between ``j`` and ``i`` other than the edge ``j -> i``."""
    result = single_door_criterion(g, z, j, i, max_vertices)
    return result.satisfied


def single_door_criterion(g: Admg, z: Iterable, j, i, max_vertices: int = MAX_VERTICES):
    _check_size(g, max_vertices)
    j, i = g.index(j), g.index(i)
    zset = g.indices(z)
    _endpoints_clear(g, zset, i, j)
    bad = sorted(zset & descendants(g, i))
    if bad:
        return CriterionResult("singledoor", False, "i", violator=bad[0])
    witness = _search(g, j, i, g.mask(zset), kernels.NOT_DIRECT_EDGE)
    if witness is not None:
        return CriterionResult("singledoor", False, "ii", witness=witness)
    return CriterionResult("singledoor", True)


@dataclass(frozen=True)
class S1S2Partition:
    s1: frozenset
    s2: frozenset


def partition_s1_s2(g: Admg, s: Iterable, i, max_vertices: int = MAX_VERTICES) -> S1S2Partition:
    """Split ``s`` by whether the other members leave a back-door path to
    ``i`` open (``s1``) or block them all (``s2``)."""
    _check_size(g, max_vertices)
    i = g.index(i)
    sset = g.indices(s)
    if i in sset:
        raise OutcomeInSet(f"outcome {g.names[i]} is in the regressor set")
    m = kernels.s1_mask(*g.masks(), g.n, np.int64(g.mask(sset)), i)
    s1 = g.unmask(int(m))
    return S1S2Partition(s1, sset - s1)


def no_confounding_equivalence(
    g: Admg, s: Iterable, i, max_vertices: int = MAX_VERTICES
) -> tuple:
    """Evaluate, independently, whether for every member j of ``s``:
    (i) ``s - {j}`` meets the selective-door criterion for (j, i);
    (ii) ``s - {j}`` blocks every back-door path j..i;
    (iii) ``s - {j}`` blocks every back-door path j..i free of colliders.
    """
    _check_size(g, max_vertices)
    i = g.index(i)
    sset = g.indices(s)
    if i in sset:
        raise OutcomeInSet(f"outcome {g.names[i]} is in the regressor set")
    smask = g.mask(sset)
    masks = g.masks()
    c1 = c2 = c3 = True
    for j in sorted(sset):
        rest = np.int64(smask & ~(1 << j))
        if c1 and kernels.selective_door_code(*masks, g.n, j, i, rest, False)[0] != 0:
            c1 = False
        if c2 and kernels.path_open(*masks, g.n, j, i, rest, kernels.BACKDOOR):
            c2 = False
        if c3 and kernels.path_open(*masks, g.n, j, i, rest, kernels.BACKDOOR_NO_V):
            c3 = False
    return c1, c2, c3


def project_nonlinear(
    base: Admg,
    nonlinear_vertices: Sequence,
    independence_declarations: Iterable = (),
) -> Admg:
    """Causal path diagram with each nonlinear vertex H turned into an
    error-driven vertex.

    Every directed edge into H is dropped. H gets a bidirected edge to each
    vertex whose error enters H through its arguments, to each vertex whose
    error is correlated with one of those, and to each other nonlinear vertex
    sharing such error sources. Pairs in ``independence_declarations`` are
    left out.
    """
    nl = {}
    for h, args in nonlinear_vertices:
        hi = base.index(h)
        arg_idx = [base.index(a) for a in args]
        for a in arg_idx:
            if a >= hi:
                raise OrderViolation(
                    f"argument {base.names[a]} of nonlinear vertex {base.names[hi]} "
                    "does not precede it"
                )
        nl[hi] = arg_idx
    if not nl:
        return base
    declared = {frozenset((base.index(a), base.index(b))) for a, b in independence_declarations}

    directed = [(a, b) for a, b in base.directed if b not in nl]
    parents = {v: [a for a, b in directed if b == v] for v in range(base.n)}
    bi_adj = {v: set() for v in range(base.n)}
    for a, b in base.bidirected:
        bi_adj[a].add(b)
        bi_adj[b].add(a)

    sources = {}

    def error_sources(v):
        # linear errors that X_v (or u_v for a nonlinear v) is a function of
        if v in sources:
            return sources[v]
        if v in nl:
            out = set()
            for a in nl[v]:
                out |= error_sources(a)
        else:
            out = {v}
            for p in parents[v]:
                out |= error_sources(p)
        sources[v] = frozenset(out)
        return sources[v]

    def own_error(v):
        return error_sources(v) if v in nl else frozenset({v})

    def correlated_with(errs):
        out = set(errs)
        for e in errs:
            out |= bi_adj[e]
        return out

    bidirected = {tuple(sorted(p)) for p in base.bidirected}
    for h in sorted(nl):
        reach = correlated_with(error_sources(h))
        for w in range(base.n):
            if w == h or frozenset((h, w)) in declared:
                continue
            if own_error(w) & reach:
                bidirected.add(tuple(sorted((h, w))))
    return Admg(base.names, tuple(directed), tuple(sorted(bidirected)))
