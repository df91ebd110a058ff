"""Geometry of the dual feasible region.

The feasible set of the dual program is an intersection of slabs
U_k = { lam : |g_k . lam| <= rho } whose normals g_k are the columns of the
measurement rows, optionally intersected with the unit box.  Two ways to find
the number of slabs after which the intersection stops changing:

* vertex stabilization: enumerate vertices incrementally (cutting an initial
  parallelotope by one halfspace at a time) and stop when a new slab removes
  nothing;
* objective stabilization: watch the dual LP optimum S(l) as slabs accumulate
  and stop when it stops decreasing.

The incremental enumerator maintains the vertex set, the edge graph, and the
active constraint set of every vertex (as bitmasks), which keeps each cut
near-linear in the number of affected vertices.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .lp import LinearProgram, solve_lp
from .operators import RowFamily

DD_MAX_DIM = 14
VERTEX_MATCH_TOL = 1e-7
ON_PLANE_REL = 1e-10


class PolytopeError(RuntimeError):
    """Enumeration or stabilization could not be completed."""


@dataclass(frozen=True)
class SlabSystem:
    """Slabs |g_k . lam| <= half_width, with an optional |lam_j| <= 1 box."""

    normals: np.ndarray  # (n_slabs, m)
    half_width: float
    box: bool = False

    def __post_init__(self):
        normals = np.asarray(self.normals, dtype=float)
        if normals.ndim != 2:
            raise ValueError("normals must be a 2-d array (n_slabs, m)")
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")
        object.__setattr__(self, "normals", normals)

    @classmethod
    def from_rows(cls, rows: RowFamily, n: int, half_width: float, box: bool = False):
        normals = rows.block(1, n).T  # slab k has normal (a_{j,k} : j)
        return cls(normals, half_width, box)

    @property
    def dim(self) -> int:
        return self.normals.shape[1]


@dataclass(frozen=True)
class VertexSet:
    vertices: np.ndarray  # (count, m), lexicographically sorted
    bounded: bool

    @property
    def count(self) -> int:
        return self.vertices.shape[0]


def _canonical(V: np.ndarray) -> np.ndarray:
    if V.shape[0] == 0:
        return V
    order = np.lexsort(V.T[::-1])
    return V[order]


def vertex_sets_equal(a: VertexSet, b: VertexSet, tol: float = VERTEX_MATCH_TOL) -> bool:
    """Same vertices up to a matching tolerance (order-insensitive).

    Lexicographic order can transpose nearly tied coordinates, so rows are
    matched mutually by Chebyshev distance instead of compared positionally.
    """
    if a.count != b.count or a.bounded != b.bounded:
        return False
    if a.count == 0:
        return True
    A, B = a.vertices, b.vertices
    used = np.zeros(B.shape[0], dtype=bool)
    for row in A:
        d = np.max(np.abs(B - row), axis=1)
        d[used] = np.inf
        j = int(np.argmin(d))
        if d[j] > tol:
            return False
        used[j] = True
    return True


class _Incremental:
    """Vertex/edge/active-set state of a bounded polytope under cutting."""

    def __init__(self, planes: np.ndarray, rhs: np.ndarray, ids):
        """Start from the parallelotope |planes_i . lam| <= rhs_i (m planes).

        ``ids`` gives per plane the (positive side, negative side) bit indices.
        """
        m = planes.shape[0]
        if planes.shape != (m, m):
            raise ValueError("initial system must be square")
        self.m = m
        signs = np.array(list(itertools.product((1.0, -1.0), repeat=m)))
        self.V = np.linalg.solve(planes, (signs * rhs).T).T
        self.act = []
        for s in signs:
            mask = 0
            for i, si in enumerate(s):
                mask |= 1 << (ids[i][0] if si > 0 else ids[i][1])
            self.act.append(mask)
        n = self.V.shape[0]
        pairs = []
        for i in range(m):
            idx = np.arange(n)
            mate = idx ^ (1 << (m - 1 - i))
            keep = idx < mate
            pairs.append(np.stack([idx[keep], mate[keep]], axis=1))
        self.edges = np.vstack(pairs)
        self.min_margin = math.inf
        self.merges = 0

    @property
    def count(self) -> int:
        return self.V.shape[0]

    def cut(self, h: np.ndarray, c: float, bit: int) -> bool:
        """Intersect with h . lam <= c; returns True when vertices were removed."""
        V, act, edges = self.V, self.act, self.edges
        d = V @ h - c
        scale = np.abs(V) @ np.abs(h) + abs(c)
        eps = ON_PLANE_REL * np.maximum(scale, 1.0)
        on = np.abs(d) <= eps
        out = d > eps
        if not np.any(out):
            if np.any(on):
                flag = 1 << bit
                for i in np.nonzero(on)[0]:
                    act[i] |= flag
            return False
        off_plane = ~on
        if np.any(off_plane):
            self.min_margin = min(
                self.min_margin, float(np.min(np.abs(d[off_plane]) / scale[off_plane]))
            )

        keep = ~out
        inside = keep & ~on
        new_index = np.full(V.shape[0], -1, dtype=np.int64)
        new_index[keep] = np.arange(int(np.count_nonzero(keep)))

        eu, ew = edges[:, 0], edges[:, 1]
        both_kept = keep[eu] & keep[ew]
        cross = (inside[eu] & out[ew]) | (out[eu] & inside[ew])

        flag = 1 << bit
        # vertices cut out of crossing edges
        ci = edges[cross]
        if ci.size:
            a = np.where(inside[ci[:, 0]], ci[:, 0], ci[:, 1])  # inside endpoint
            b = np.where(inside[ci[:, 0]], ci[:, 1], ci[:, 0])  # outside endpoint
            t = d[a] / (d[a] - d[b])
            P = V[a] + t[:, None] * (V[b] - V[a])
            pacts = [act[ai] & act[bi] | flag for ai, bi in zip(a, b)]
            P, pacts, group = self._dedupe(P, pacts)
        else:
            P = np.zeros((0, self.m))
            pacts = []
            a = np.zeros(0, dtype=np.int64)
            group = np.zeros(0, dtype=np.int64)

        kept_V = V[keep]
        kept_act = [act[i] for i in np.nonzero(keep)[0]]
        on_local = []
        for local, i in enumerate(np.nonzero(keep)[0]):
            if on[i]:
                kept_act[local] |= flag
                on_local.append(local)

        n_kept = kept_V.shape[0]
        out_V = np.vstack([kept_V, P])
        out_act = kept_act + pacts

        # edges: survivors, truncated crossing edges, and the new facet's edges
        surv = edges[both_kept]
        surv = np.stack([new_index[surv[:, 0]], new_index[surv[:, 1]]], axis=1)
        # every crossing edge keeps its inside endpoint, joined to its (possibly
        # merged) cut point
        trunc = np.stack(
            [new_index[a], n_kept + group], axis=1
        ) if P.size else np.zeros((0, 2), dtype=np.int64)
        facet_ids = on_local + list(range(n_kept, n_kept + P.shape[0]))
        facet = self._facet_edges(out_act, facet_ids, flag)
        all_edges = np.vstack([surv, trunc, facet]).astype(np.int64)
        lo = np.minimum(all_edges[:, 0], all_edges[:, 1])
        hi = np.maximum(all_edges[:, 0], all_edges[:, 1])
        self.edges = np.unique(np.stack([lo, hi], axis=1), axis=0)
        self.V = out_V
        self.act = out_act
        return True

    def _dedupe(self, P, pacts):
        """Merge coincident cut points (degenerate cuts only).

        Returns the merged points, their active sets (unions over the merge
        groups), and for every original point the index of its merged copy.
        """
        n = P.shape[0]
        if n < 2:
            return P, list(pacts), np.arange(n, dtype=np.int64)
        key = np.round(P, 9)
        _, first, inv = np.unique(key, axis=0, return_index=True, return_inverse=True)
        if first.size == n:
            return P, list(pacts), np.arange(n, dtype=np.int64)
        self.merges += n - first.size
        order = np.argsort(first)
        group_of = np.empty(first.size, dtype=np.int64)
        group_of[order] = np.arange(first.size)
        merged_acts = [0] * first.size
        group = np.empty(n, dtype=np.int64)
        for i, g in enumerate(inv):
            pos = group_of[g]
            merged_acts[pos] |= pacts[i]
            group[i] = pos
        keep_rows = np.sort(first)
        return P[keep_rows], merged_acts, group

    def _facet_edges(self, acts, facet_ids, flag):
        """Edges of the freshly cut facet, from shared active-set subsets.

        Vertices of the facet sharing m-2 old constraints (plus the cut) span
        a face of dimension <= 1; exactly two sharers means an edge.  Buckets
        of three or more indicate degeneracy and fall back to the dominance
        test (no third vertex's active set may contain the shared set).
        """
        m = self.m
        if m < 2 or len(facet_ids) < 2:
            return np.zeros((0, 2), dtype=np.int64)
        buckets = {}
        simple = True
        for v in facet_ids:
            old = acts[v] & ~flag
            bits = []
            x = old
            while x:
                b = x & -x
                bits.append(b)
                x ^= b
            if len(bits) == m - 1:
                keys = [old ^ b for b in bits]
            else:
                simple = False
                if len(bits) > m + 6:
                    raise PolytopeError(
                        "vertex with excessively degenerate active set; "
                        "enumeration aborted"
                    )
                keys = [
                    sum(combo)
                    for combo in itertools.combinations(bits, m - 2)
                ] if m >= 2 else []
            for key in keys:
                buckets.setdefault(key, []).append(v)

        pairs = set()
        needs_check = []
        for members in buckets.values():
            if len(members) == 2:
                a, b = members
                pairs.add((a, b) if a < b else (b, a))
            elif len(members) > 2:
                simple = False
                for a, b in itertools.combinations(members, 2):
                    needs_check.append((a, b) if a < b else (b, a))
        if not simple and needs_check:
            for a, b in set(needs_check):
                shared = acts[a] & acts[b]
                dominated = any(
                    r != a and r != b and (shared & acts[r]) == shared
                    for r in facet_ids
                )
                if not dominated:
                    pairs.add((a, b))
        if not pairs:
            return np.zeros((0, 2), dtype=np.int64)
        return np.array(sorted(pairs), dtype=np.int64)


def _independent_subset(normals: np.ndarray, m: int):
    """Pick m independent slab indices by greedy Gram-Schmidt; None if rank < m."""
    if normals.shape[0] < m:
        return None
    chosen = []
    basis = np.zeros((0, normals.shape[1]))
    for idx in range(normals.shape[0]):
        g = normals[idx]
        resid = g - basis.T @ (basis @ g) if basis.size else g.copy()
        if np.linalg.norm(resid) > 1e-10 * max(1.0, np.linalg.norm(g)):
            basis = np.vstack([basis, resid / np.linalg.norm(resid)])
            chosen.append(idx)
            if len(chosen) == m:
                return chosen
    return None


class SlabPolytope:
    """Incremental vertex enumeration of box/slab intersections.

    Slabs are indexed from 1 and added in order; ``extend_to(n)`` brings the
    polytope to the intersection of the first n slabs (plus the box when the
    system says so) and reports whether vertices changed along the way.
    """

    def __init__(self, slabs: SlabSystem):
        m = slabs.dim
        if m > DD_MAX_DIM:
            raise PolytopeError(
                f"dimension {m} exceeds the enumeration guard ({DD_MAX_DIM})"
            )
        if m < 2:
            raise PolytopeError("incremental enumeration needs dimension >= 2")
        self.slabs = slabs
        self.m = m
        self.n_done = 0
        self.engine = None
        self._init_ids = []
        self.bounded = False
        # bit layout: box sides first (when present), then slab sides
        self._box_bits = 2 * m if slabs.box else 0

    def _slab_bits(self, k: int):
        base = self._box_bits + 2 * (k - 1)
        return base, base + 1

    def _try_init(self, n: int) -> bool:
        """Initialize the engine once a bounded intersection is available."""
        slabs = self.slabs
        if slabs.box:
            planes = np.eye(self.m)
            rhs = np.ones(self.m)
            ids = [(2 * j, 2 * j + 1) for j in range(self.m)]
            self.engine = _Incremental(planes, rhs, ids)
            self._init_set = set()
            self.bounded = True
            return True
        sub = _independent_subset(slabs.normals[:n], self.m)
        if sub is None:
            return False
        planes = slabs.normals[sub]
        rhs = np.full(self.m, slabs.half_width)
        ids = [self._slab_bits(k + 1) for k in sub]
        self.engine = _Incremental(planes, rhs, ids)
        self._init_set = {k + 1 for k in sub}
        self.bounded = True
        return True

    def extend_to(self, n: int) -> bool:
        """Cut in slabs up to index n; True when any vertex was removed."""
        if n > self.slabs.normals.shape[0]:
            raise ValueError("slab system holds fewer normals than requested")
        changed = False
        if self.engine is None:
            if not self._try_init(n):
                self.n_done = n
                return False
            # replay every slab not already part of the initial system
            for k in range(1, self.n_done + 1):
                if k not in self._init_set:
                    changed |= self._cut_slab(k)
        for k in range(self.n_done + 1, n + 1):
            if k not in self._init_set:
                changed |= self._cut_slab(k)
        self.n_done = max(self.n_done, n)
        return changed

    def _cut_slab(self, k: int) -> bool:
        g = self.slabs.normals[k - 1]
        pos_bit, neg_bit = self._slab_bits(k)
        rho = self.slabs.half_width
        c1 = self.engine.cut(g, rho, pos_bit)
        c2 = self.engine.cut(-g, rho, neg_bit)
        return c1 or c2

    def vertex_set(self) -> VertexSet:
        if not self.bounded:
            return VertexSet(np.zeros((0, self.m)), bounded=False)
        return VertexSet(_canonical(self.engine.V.copy()), bounded=True)

    @property
    def count(self):
        return self.engine.count if self.bounded else None


def vertex_enumerate(slabs: SlabSystem, n: int, method: str = "dd") -> VertexSet:
    """All vertices of the first-n-slab intersection (plus box when flagged).

    Returns bounded=False with an empty list when the normals span less than
    the full space, i.e. a recession ray exists.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if method == "brute":
        return vertex_enumerate_bruteforce(slabs, n)
    if method != "dd":
        raise ValueError(f"unknown enumeration method {method!r}")
    sub = SlabSystem(slabs.normals[:n], slabs.half_width, slabs.box)
    if not sub.box:
        rank = np.linalg.matrix_rank(sub.normals, tol=1e-10)
        if rank < sub.dim:
            return VertexSet(np.zeros((0, sub.dim)), bounded=False)
    poly = SlabPolytope(sub)
    poly.extend_to(n)
    if not poly.bounded:
        return VertexSet(np.zeros((0, sub.dim)), bounded=False)
    return poly.vertex_set()


def vertex_enumerate_bruteforce(slabs: SlabSystem, n: int) -> VertexSet:
    """Oracle backend: try every m-subset of the bounding hyperplanes.

    Exponential; guarded to small dimension and slab counts.
    """
    m = slabs.dim
    if m > 4 or n > 12:
        raise PolytopeError("brute-force enumeration is limited to tiny systems")
    planes = []
    rho = slabs.half_width
    if slabs.box:
        for j in range(m):
            e = np.zeros(m)
            e[j] = 1.0
            planes.append((e, 1.0))
            planes.append((-e, 1.0))
    for k in range(n):
        g = slabs.normals[k]
        planes.append((g, rho))
        planes.append((-g, rho))
    A = np.vstack([p[0] for p in planes])
    b = np.asarray([p[1] for p in planes])
    rank = np.linalg.matrix_rank(A, tol=1e-10)
    if rank < m:
        return VertexSet(np.zeros((0, m)), bounded=False)
    found = []
    for combo in itertools.combinations(range(len(planes)), m):
        M = A[list(combo)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        x = np.linalg.solve(M, b[list(combo)])
        if np.all(A @ x <= b + 1e-9):
            found.append(x)
    if not found:
        return VertexSet(np.zeros((0, m)), bounded=True)
    V = np.array(found)
    V = _canonical(V)
    keep = [0]
    for i in range(1, V.shape[0]):
        if np.min(np.max(np.abs(V[keep] - V[i]), axis=1)) > 1e-8:
            keep.append(i)
    return VertexSet(V[keep], bounded=True)


def find_n0_by_vertices(
    rows: RowFamily,
    rho: float,
    n_start: int | None = None,
    include_box: bool = False,
    n_cap: int | None = None,
    max_dim: int = 12,
    counts_out: dict | None = None,
):
    """Smallest n >= n_start whose slab intersection equals the next one.

    Compares vertex sets incrementally: slab n+1 leaves the polytope
    unchanged exactly when neither of its halfspaces removes a vertex.
    Returns (n0, vertex count of the stabilized polytope).
    """
    m = rows.m
    if m > max_dim:
        raise PolytopeError(f"vertex stabilization guarded to m <= {max_dim}")
    if n_start is None:
        n_start = m
    if n_cap is None:
        n_cap = max(4 * m, n_start + 64)
    slabs = SlabSystem.from_rows(rows, n_cap + 1, rho, box=include_box)
    poly = SlabPolytope(slabs)
    poly.extend_to(n_start)
    if counts_out is not None and poly.bounded:
        counts_out[n_start] = poly.count
    for n in range(n_start, n_cap + 1):
        changed = poly.extend_to(n + 1)
        if counts_out is not None and poly.bounded:
            counts_out[n + 1] = poly.count
        if poly.bounded and not changed:
            return n, poly.count
    raise PolytopeError(
        f"vertex sets kept changing up to the cap n_cap={n_cap}; "
        "increase the cap or check the row family"
    )


def _dual_lp(normals: np.ndarray, y0: np.ndarray, rho: float, include_box: bool) -> LinearProgram:
    """max y0 . lam over the first slabs (rows +-g_k <= rho) and optional box."""
    m = y0.size
    blocks = []
    rhs_parts = []
    if include_box:
        eye = np.eye(m)
        blocks += [eye, -eye]
        rhs_parts += [np.ones(m), np.ones(m)]
    if normals.shape[0]:
        blocks += [normals, -normals]
        rhs_parts += [np.full(normals.shape[0], rho)] * 2
    A = np.vstack(blocks)
    b = np.concatenate(rhs_parts)
    return LinearProgram.build(y0, list(zip(A, b)))


def objective_value(rows: RowFamily, y0: np.ndarray, rho: float, l: int, include_box: bool = True) -> float:
    """Dual LP optimum S(l) using the first l slab constraints."""
    normals = rows.block(1, l).T if l >= 1 else np.zeros((0, rows.m))
    res = solve_lp(_dual_lp(normals, np.asarray(y0, dtype=float), rho, include_box))
    if res.status == "unbounded":
        return math.inf
    if res.status != "optimal":
        raise PolytopeError(f"dual LP at l={l} returned status {res.status}")
    return res.value


def find_n0_by_objective(
    rows: RowFamily,
    y0: np.ndarray,
    rho: float,
    l_start: int | None = None,
    include_box: bool = True,
    tol_S: float = 1e-9,
    l_cap: int | None = None,
    trace: list | None = None,
) -> int:
    """Smallest l >= l_start with S(l) = S(l+1) = S(l+2) (relative tol_S).

    Demands two consecutive stalls of the LP optimum, one more than the bare
    stabilization heuristic, to reduce false plateaus.  Raises when S(l)
    increases beyond round-off (it must be nonincreasing) or when l_cap is hit.
    """
    y0 = np.asarray(y0, dtype=float)
    m = rows.m
    if l_start is None:
        l_start = m
    if l_cap is None:
        l_cap = max(6 * m, l_start + 200)
    normals_all = rows.block(1, l_cap + 2).T

    cache: dict[int, float] = {}

    def S(l: int) -> float:
        if l not in cache:
            res = solve_lp(_dual_lp(normals_all[:l], y0, rho, include_box))
            if res.status == "unbounded":
                cache[l] = math.inf
            elif res.status != "optimal":
                raise PolytopeError(f"dual LP at l={l} returned status {res.status}")
            else:
                cache[l] = res.value
            if trace is not None:
                trace.append((l, cache[l]))
        return cache[l]

    def close(a: float, b: float) -> bool:
        if math.isinf(a) or math.isinf(b):
            return False
        return abs(a - b) <= tol_S * max(abs(a), abs(b), 1e-300)

    prev = None
    for l in range(l_start, l_cap + 1):
        s0 = S(l)
        if prev is not None and math.isfinite(prev) and s0 > prev * (1 + 1e-7) + 1e-9:
            raise PolytopeError(
                f"S({l}) = {s0} exceeds S({l-1}) = {prev}; sweep is not nonincreasing"
            )
        prev = s0
        if math.isinf(s0):
            continue
        if close(s0, S(l + 1)) and close(S(l + 1), S(l + 2)):
            return l
    raise PolytopeError(
        f"objective S(l) never stabilized for two consecutive steps up to l_cap={l_cap}"
    )
