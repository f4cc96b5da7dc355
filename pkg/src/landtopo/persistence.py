"""Vietoris-Rips persistent homology (H0, H1) of 3D point clouds.

Two independent routes compute the same diagrams:

* `rips_persistence` — the optimized path: H0 by union-find over the
  ascending edge filtration (finite deaths are exactly the minimum
  spanning tree edge lengths), H1 by GF(2) column reduction of the
  edge/triangle boundary matrix in filtration order. Because H0 comes
  from union-find, every edge column is implicitly cleared and only
  triangle columns are reduced.
* `brute_force_persistence` — a deliberately plain standard reduction
  over the full boundary matrix of all simplices, used as the ground
  truth oracle in tests. Capped at 40 points.

Conventions shared by both: simplices are totally ordered by
(filtration value, dimension, lexicographic vertex tuple); infinite
bars get death = cap (the enclosing diameter under `max_scale="auto"`);
pairs with birth == death are discarded, except the essential
connected-component bars which are always emitted.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from numba import njit

from .errors import ValidationError
from .geometry import PointCloud3D

BRUTE_FORCE_MAX_POINTS = 40


@dataclass(frozen=True)
class RipsConfig:
    max_dim: int = 1
    max_scale: float | str = "auto"
    oracle: bool = False

    def __post_init__(self):
        if self.max_dim not in (0, 1):
            raise ValidationError("max_dim must be 0 or 1")
        if self.max_scale != "auto" and not float(self.max_scale) > 0:
            raise ValidationError("numeric max_scale must be positive")


@dataclass
class PersistenceDiagram:
    """Birth/death pairs stored as an (n, 3) array of (dim, birth, death).

    Rows are sorted by (dim, birth, death); `cap` is the finite value
    substituted for infinite deaths.
    """

    pairs: np.ndarray
    cap: float
    homology_dims: tuple[int, ...] = (0, 1)

    def __post_init__(self):
        self.pairs = np.asarray(self.pairs, dtype=np.float64).reshape(-1, 3)

    def pairs_in_dim(self, dim: int) -> np.ndarray:
        """(k, 2) birth/death rows for one homology dimension."""
        mask = self.pairs[:, 0] == dim
        return self.pairs[mask][:, 1:]

    def lifetimes(self, dim: int) -> np.ndarray:
        p = self.pairs_in_dim(dim)
        return p[:, 1] - p[:, 0]


def distance_matrix(cloud: PointCloud3D | np.ndarray) -> np.ndarray:
    """Pairwise Euclidean 3D distances; symmetric with zero diagonal."""
    pts = cloud.points if isinstance(cloud, PointCloud3D) else np.asarray(cloud, float)
    if pts.ndim != 2 or pts.shape[0] < 1:
        raise ValidationError("cloud must contain at least one point")
    diff = pts[:, None, :] - pts[None, :, :]
    d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    np.fill_diagonal(d, 0.0)
    return d


# ---------------------------------------------------------------------------
# Optimized reduction (numba kernels)
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _mst_merge_mask(n, ei, ej):
    """Kruskal over pre-sorted edges; True where an edge merges components."""
    parent = np.arange(n)
    merged = np.zeros(len(ei), np.bool_)
    for k in range(len(ei)):
        a = ei[k]
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        b = ej[k]
        while parent[b] != b:
            parent[b] = parent[parent[b]]
            b = parent[b]
        if a != b:
            parent[b] = a
            merged[k] = True
    return merged


@njit(cache=True, nogil=True)
def _enumerate_triangles(dist, cap):
    """All triangles with filtration value (longest edge) <= cap."""
    n = dist.shape[0]
    cap_max = n * (n - 1) * (n - 2) // 6
    ta = np.empty(cap_max, np.int32)
    tb = np.empty(cap_max, np.int32)
    tc = np.empty(cap_max, np.int32)
    tf = np.empty(cap_max, np.float64)
    m = 0
    for a in range(n):
        for b in range(a + 1, n):
            dab = dist[a, b]
            if dab > cap:
                continue
            for c in range(b + 1, n):
                f = dab
                if dist[a, c] > f:
                    f = dist[a, c]
                if dist[b, c] > f:
                    f = dist[b, c]
                if f <= cap:
                    ta[m] = a
                    tb[m] = b
                    tc[m] = c
                    tf[m] = f
                    m += 1
    return ta[:m], tb[:m], tc[:m], tf[:m]


@njit(cache=True, nogil=True)
def _msb64(x):
    """Index of the highest set bit of a nonzero uint64."""
    r = 0
    if x >= np.uint64(4294967296):
        x >>= np.uint64(32)
        r += 32
    if x >= np.uint64(65536):
        x >>= np.uint64(16)
        r += 16
    if x >= np.uint64(256):
        x >>= np.uint64(8)
        r += 8
    if x >= np.uint64(16):
        x >>= np.uint64(4)
        r += 4
    if x >= np.uint64(4):
        x >>= np.uint64(2)
        r += 2
    if x >= np.uint64(2):
        r += 1
    return r


@njit(cache=True, nogil=True)
def _highest_row(col, from_word):
    """Highest set bit at or below word `from_word`, or -1 when empty."""
    for w in range(from_word, -1, -1):
        if col[w] != np.uint64(0):
            return (w << 6) + _msb64(col[w])
    return -1


@njit(cache=True, nogil=True)
def _reduce_triangle_columns(n_edges, te1, te2, te3, n_positive):
    """GF(2) column reduction of the triangle boundary matrix.

    Rows are edges in filtration order; columns arrive in triangle
    filtration order; the working column is a bitset. Returns, for each
    pairing, the killed edge row and the killing triangle index.

    Two structural shortcuts keep this fast without changing the
    pairing: (1) columns that pair immediately are stored as their
    3-entry boundary instead of a dense row, so the common chain step
    costs three single-word XORs; (2) the loop stops once `n_positive`
    pairs are found, since final lows are always positive edges and
    every remaining column must then reduce to zero.
    """
    n_tri = len(te1)
    n_words = (n_edges + 63) // 64 if n_edges > 0 else 1
    pivot = np.full(n_edges, -1, np.int64)
    sparse = np.zeros(n_edges if n_edges > 0 else 1, np.uint8)
    sp_a = np.empty(n_edges if n_edges > 0 else 1, np.int64)
    sp_b = np.empty(n_edges if n_edges > 0 else 1, np.int64)
    stored = np.zeros((n_edges if n_edges > 0 else 1, n_words), np.uint64)
    n_stored = 0
    pair_edge = np.empty(n_tri, np.int64)
    pair_tri = np.empty(n_tri, np.int64)
    n_pairs = 0
    col = np.zeros(n_words, np.uint64)
    dirty = 0  # highest word the scratch column may hold stale bits in
    one = np.uint64(1)
    for t in range(n_tri):
        if n_pairs == n_positive:
            break
        e1, e2, e3 = te1[t], te2[t], te3[t]
        hi = max(e1, e2, e3)
        hi_word = hi >> 6
        clear_to = hi_word if hi_word > dirty else dirty
        for w in range(clear_to + 1):
            col[w] = np.uint64(0)
        dirty = hi_word
        col[e1 >> 6] ^= one << np.uint64(e1 & 63)
        col[e2 >> 6] ^= one << np.uint64(e2 & 63)
        col[e3 >> 6] ^= one << np.uint64(e3 & 63)
        low = hi
        immediate = True
        while low >= 0 and pivot[low] >= 0:
            immediate = False
            s = pivot[low]
            top = low >> 6
            if sparse[s]:
                # stored column is {low, a, b}: cancel low, toggle a and b
                col[top] ^= one << np.uint64(low & 63)
                a = sp_a[s]
                b = sp_b[s]
                col[a >> 6] ^= one << np.uint64(a & 63)
                col[b >> 6] ^= one << np.uint64(b & 63)
            else:
                for w in range(top + 1):
                    col[w] ^= stored[s, w]
            low = _highest_row(col, top)
        if low >= 0:
            pivot[low] = n_stored
            if immediate:
                sparse[n_stored] = 1
                if e1 == hi:
                    sp_a[n_stored] = e2
                    sp_b[n_stored] = e3
                elif e2 == hi:
                    sp_a[n_stored] = e1
                    sp_b[n_stored] = e3
                else:
                    sp_a[n_stored] = e1
                    sp_b[n_stored] = e2
            else:
                top = low >> 6
                for w in range(top + 1):
                    stored[n_stored, w] = col[w]
            n_stored += 1
            pair_edge[n_pairs] = low
            pair_tri[n_pairs] = t
            n_pairs += 1
    return pair_edge[:n_pairs], pair_tri[:n_pairs]


def _sorted_edges(dist: np.ndarray, cap: float):
    """Edges with length <= cap in (length, i, j) order."""
    n = dist.shape[0]
    iu, ju = np.triu_indices(n, 1)
    lengths = dist[iu, ju]
    keep = lengths <= cap
    iu, ju, lengths = iu[keep], ju[keep], lengths[keep]
    order = np.lexsort((ju, iu, lengths))
    return lengths[order], iu[order].astype(np.int64), ju[order].astype(np.int64)


def _assemble(rows: list[tuple[int, float, float]], cap: float) -> PersistenceDiagram:
    pairs = np.array(sorted(rows), dtype=np.float64).reshape(-1, 3)
    return PersistenceDiagram(pairs=pairs, cap=cap)


def rips_persistence(
    cloud: PointCloud3D | np.ndarray, cfg: RipsConfig = RipsConfig()
) -> PersistenceDiagram:
    """Persistence diagram of the Vietoris-Rips filtration of a cloud.

    H0 merges are emitted as (0, edge length); each component surviving
    at the cap emits (0, cap). H1 pairs come from the reduced triangle
    boundary matrix; 1-cycles never killed below the cap emit
    (birth, cap). Zero-persistence pairs are dropped.
    """
    dist = distance_matrix(cloud)
    n = dist.shape[0]
    cap = float(dist.max()) if cfg.max_scale == "auto" else float(cfg.max_scale)

    elen, ei, ej = _sorted_edges(dist, cap)
    merged = (
        _mst_merge_mask(n, ei, ej)
        if len(ei)
        else np.zeros(0, bool)
    )

    rows: list[tuple[int, float, float]] = []
    for d in elen[merged]:
        if d > 0.0:
            rows.append((0, 0.0, float(d)))
    n_components = n - int(merged.sum())
    rows.extend((0, 0.0, cap) for _ in range(n_components))

    if cfg.max_dim >= 1 and n >= 3 and len(ei) > 0:
        edge_id = np.full((n, n), -1, np.int64)
        eid = np.arange(len(ei))
        edge_id[ei, ej] = eid
        edge_id[ej, ei] = eid

        ta, tb, tc, tf = _enumerate_triangles(dist, cap)
        if len(ta):
            order = np.lexsort((tc, tb, ta, tf))
            ta, tb, tc, tf = ta[order], tb[order], tc[order], tf[order]
            te1 = edge_id[ta, tb]
            te2 = edge_id[ta, tc]
            te3 = edge_id[tb, tc]
            n_positive = len(ei) - int(merged.sum())
            pair_edge, pair_tri = _reduce_triangle_columns(
                len(ei), te1, te2, te3, n_positive
            )
        else:
            pair_edge = np.zeros(0, np.int64)
            pair_tri = np.zeros(0, np.int64)

        killed = np.zeros(len(ei), bool)
        killed[pair_edge] = True
        for e, t in zip(pair_edge, pair_tri):
            birth = float(elen[e])
            death = float(tf[t])
            if death > birth:
                rows.append((1, birth, death))
        # positive edges never killed: 1-cycles alive at the cap
        for e in np.nonzero(~merged & ~killed)[0]:
            birth = float(elen[e])
            if cap > birth:
                rows.append((1, birth, cap))

    return _assemble(rows, cap)


# ---------------------------------------------------------------------------
# Brute-force oracle
# ---------------------------------------------------------------------------


def brute_force_persistence(
    cloud: PointCloud3D | np.ndarray, cfg: RipsConfig = RipsConfig()
) -> PersistenceDiagram:
    """Standard unoptimized reduction over the full boundary matrix.

    Enumerates every simplex of dimension <= max_dim + 1 with filtration
    value equal to its longest edge, orders them by (value, dim,
    lexicographic), and reduces columns left to right. Shares the cap
    and zero-persistence conventions of `rips_persistence`.
    """
    dist = distance_matrix(cloud)
    n = dist.shape[0]
    if n > BRUTE_FORCE_MAX_POINTS:
        raise ValidationError(
            f"cloud too large for brute-force oracle ({n} > {BRUTE_FORCE_MAX_POINTS})"
        )
    cap = float(dist.max()) if cfg.max_scale == "auto" else float(cfg.max_scale)

    simplices: list[tuple[float, int, tuple[int, ...]]] = []
    for v in range(n):
        simplices.append((0.0, 0, (v,)))
    for dim in range(1, cfg.max_dim + 2):
        for verts in combinations(range(n), dim + 1):
            filt = max(dist[a, b] for a, b in combinations(verts, 2))
            if filt <= cap:
                simplices.append((float(filt), dim, verts))
    simplices.sort()
    index = {s[2]: k for k, s in enumerate(simplices)}

    # columns as integer bitsets over row indices
    reduced: list[int] = []
    pivot: dict[int, int] = {}
    paired_rows: set[int] = set()
    pairs: list[tuple[int, int]] = []  # (row, col) simplex indices
    for j, (_, dim, verts) in enumerate(simplices):
        col = 0
        if dim > 0:
            for facet in combinations(verts, dim):
                col ^= 1 << index[facet]
        while col:
            low = col.bit_length() - 1
            if low not in pivot:
                break
            col ^= reduced[pivot[low]]
        if col:
            low = col.bit_length() - 1
            pivot[low] = len(reduced)
            reduced.append(col)
            paired_rows.add(low)
            pairs.append((low, j))

    rows: list[tuple[int, float, float]] = []
    for low, j in pairs:
        filt_b, dim_b, _ = simplices[low]
        filt_d, _, _ = simplices[j]
        if dim_b > cfg.max_dim:
            continue
        if filt_d > filt_b:
            rows.append((dim_b, filt_b, filt_d))
    # essential classes: positive simplices never used as a pivot row
    killer_cols = {j for _, j in pairs}
    for j, (filt, dim, _) in enumerate(simplices):
        if dim > cfg.max_dim or j in killer_cols or j in paired_rows:
            continue
        if dim == 0:
            rows.append((0, filt, cap))  # essential component, always emitted
        elif cap > filt:
            rows.append((dim, filt, cap))

    return _assemble(rows, cap)


def persistence_diagram(
    cloud: PointCloud3D | np.ndarray, cfg: RipsConfig = RipsConfig()
) -> PersistenceDiagram:
    """Dispatch to the optimized path or the oracle per `cfg.oracle`."""
    if cfg.oracle:
        return brute_force_persistence(cloud, cfg)
    return rips_persistence(cloud, cfg)


# ---------------------------------------------------------------------------
# Text dump (golden-test format)
# ---------------------------------------------------------------------------


def dump_diagram(diagram: PersistenceDiagram) -> str:
    """Serialize as `# cap=<value>` then one `dim birth death` line per pair."""
    lines = [f"# cap={float(diagram.cap)!r}"]
    for dim, birth, death in diagram.pairs:
        lines.append(f"{int(dim)} {float(birth)!r} {float(death)!r}")
    return "\n".join(lines) + "\n"


def parse_diagram(text: str) -> PersistenceDiagram:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("# cap="):
        raise ValidationError("diagram dump missing '# cap=' header")
    cap = float(lines[0].split("=", 1)[1])
    rows = []
    for ln in lines[1:]:
        dim, birth, death = ln.split()
        rows.append((int(dim), float(birth), float(death)))
    return _assemble(rows, cap)
