"""Graph construction, validation and (de)serialization.

All graphs are simple, undirected, with dense vertex ids ``0..n-1`` and the
root fixed at vertex 0. Adjacency is stored in CSR form (``indptr`` /
``indices``) so the simulation engines can index it directly; neighbor lists
are kept sorted, which makes serialization canonical.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_TREE_CAP = 10_000_000


class GraphFormatError(ValueError):
    """Raised when graph text cannot be parsed; carries the offending line."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class Graph:
    """Immutable undirected graph with a distinguished root (vertex 0).

    ``rows`` is set for grid-like families and gives (n_rows, n_cols) with
    vertex ids laid out row-major. ``boundary`` marks the canonical boundary
    vertices of truncated families (the depth-d leaves of a truncated tree).
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    root: int = 0
    family: str = "custom"
    rows: tuple[int, int] | None = None
    boundary: tuple[int, ...] | None = None
    _directed: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_edges(self) -> int:
        return len(self.indices) // 2

    def degree(self, v: int) -> int:
        return int(self.indptr[v + 1] - self.indptr[v])

    def max_degree(self) -> int:
        if self.n == 0:
            return 0
        return int(np.max(np.diff(self.indptr)))

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v] : self.indptr[v + 1]]

    def edges(self) -> list[tuple[int, int]]:
        """Undirected edge list with u < v, sorted."""
        out = []
        for u in range(self.n):
            for v in self.neighbors(u):
                if u < v:
                    out.append((u, int(v)))
        return out

    def directed_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Per directed-edge-slot source vertex and reverse-slot index.

        Slot ``e`` in ``indices`` is the directed pair (src[e], indices[e]);
        ``rev[e]`` is the slot of the opposite direction. Computed once and
        cached (the graph itself is immutable).
        """
        cached = self._directed.get("arrays")
        if cached is not None:
            return cached
        m2 = len(self.indices)
        src = np.empty(m2, dtype=np.int64)
        for u in range(self.n):
            src[self.indptr[u] : self.indptr[u + 1]] = u
        rev = np.empty(m2, dtype=np.int64)
        for e in range(m2):
            u, v = src[e], self.indices[e]
            lo, hi = self.indptr[v], self.indptr[v + 1]
            rev[e] = lo + np.searchsorted(self.indices[lo:hi], u)
        self._directed["arrays"] = (src, rev)
        return src, rev

    def row(self, i: int) -> range:
        if self.rows is None:
            raise ValueError("graph has no row structure")
        n_rows, n_cols = self.rows
        if not 0 <= i < n_rows:
            raise ValueError(f"row {i} out of range (0..{n_rows - 1})")
        return range(i * n_cols, (i + 1) * n_cols)


def _from_edges(n: int, edges, *, family="custom", rows=None, boundary=None) -> Graph:
    deg = np.zeros(n + 1, dtype=np.int64)
    for u, v in edges:
        deg[u + 1] += 1
        deg[v + 1] += 1
    indptr = np.cumsum(deg)
    indices = np.empty(indptr[-1], dtype=np.int64)
    cursor = indptr[:-1].copy()
    for u, v in edges:
        indices[cursor[u]] = v
        cursor[u] += 1
        indices[cursor[v]] = u
        cursor[v] += 1
    for u in range(n):
        indices[indptr[u] : indptr[u + 1]].sort()
    g = Graph(n=n, indptr=indptr, indices=indices, family=family,
              rows=rows, boundary=boundary)
    validate(g)
    return g


def validate(g: Graph) -> None:
    """Check simplicity, symmetry and root range; raise ValueError if broken."""
    if g.n < 1:
        raise ValueError("graph must have at least one vertex")
    if not 0 <= g.root < g.n:
        raise ValueError(f"root {g.root} out of range")
    for u in range(g.n):
        nb = g.neighbors(u)
        if np.any(nb == u):
            raise ValueError(f"self-loop at vertex {u}")
        if len(nb) > 1 and np.any(np.diff(nb) == 0):
            raise ValueError(f"duplicate edge at vertex {u}")
        for v in nb:
            back = g.neighbors(int(v))
            if u not in back:
                raise ValueError(f"asymmetric edge {u}->{v}")
    if g.rows is not None:
        n_rows, n_cols = g.rows
        if n_rows * n_cols != g.n:
            raise ValueError("rows do not partition the vertex set")


def build_path(n: int) -> Graph:
    """Path on n vertices, 0-1-...-(n-1), rooted at 0 (a truncated half-line)."""
    if n < 1:
        raise ValueError("path needs at least one vertex")
    edges = [(i, i + 1) for i in range(n - 1)]
    boundary = (n - 1,) if n > 1 else None
    return _from_edges(n, edges, family="path", boundary=boundary)


def build_star(n: int) -> Graph:
    """Star with root 0 attached to n leaves (n = 0 gives an isolated root)."""
    if n < 0:
        raise ValueError("leaf count must be nonnegative")
    edges = [(0, i) for i in range(1, n + 1)]
    return _from_edges(n + 1, edges, family="star")


def build_complete(n: int) -> Graph:
    """Complete graph on n vertices, rooted at 0."""
    if n < 1:
        raise ValueError("complete graph needs at least one vertex")
    edges = [(u, v) for u in range(n) for v in range(u + 1, n)]
    return _from_edges(n, edges, family="complete")


def build_regular_tree(offspring: int, depth: int, *, regular: bool = False,
                       max_vertices: int = DEFAULT_TREE_CAP) -> Graph:
    """Truncated tree rooted at 0 with leaves at the given depth.

    With ``regular=False`` every vertex (root included) has ``offspring``
    children, modeling the rooted offspring tree. With ``regular=True`` the
    root gets ``offspring + 1`` children so every interior vertex has total
    degree ``offspring + 1``, modeling the degree-(offspring+1) regular tree.
    The depth-``depth`` leaves are reported as the graph's boundary.
    """
    if offspring < 1:
        raise ValueError("offspring must be >= 1")
    if depth < 0:
        raise ValueError("depth must be >= 0")
    edges = []
    level = [0]
    n = 1
    for d in range(depth):
        nxt = []
        for v in level:
            k = offspring + 1 if (regular and v == 0) else offspring
            for _ in range(k):
                if n > max_vertices:
                    raise ValueError(
                        f"tree exceeds the {max_vertices}-vertex cap")
                edges.append((v, n))
                nxt.append(n)
                n += 1
        level = nxt
    boundary = tuple(level) if depth > 0 else None
    return _from_edges(n, edges, family="tree", boundary=boundary)


def build_torus(L: int, mode: str = "cylinder") -> Graph:
    """L x L square lattice, wrapped horizontally; vertex id = row*L + col.

    ``mode="torus"`` also wraps vertically (degree 4 everywhere);
    ``mode="cylinder"`` leaves the top and bottom rows open (degree 3 there),
    so the band experiment's bottom and top edges are genuinely far apart.
    """
    if L < 3:
        raise ValueError("side length must be >= 3")
    if mode not in ("cylinder", "torus"):
        raise ValueError(f"unknown mode {mode!r}")
    edges = []
    for r in range(L):
        for c in range(L):
            v = r * L + c
            edges.append((v, r * L + (c + 1) % L))
            if r + 1 < L:
                edges.append((v, (r + 1) * L + c))
            elif mode == "torus":
                edges.append((v, c))
    edges = sorted({(min(u, v), max(u, v)) for u, v in edges})
    return _from_edges(L * L, edges, family=mode, rows=(L, L))


def serialize_graph(g: Graph) -> str:
    lines = [f"n={g.n} root={g.root}"]
    lines.extend(f"{u} {v}" for u, v in g.edges())
    return "\n".join(lines) + "\n"


def parse_graph(text: str) -> Graph:
    """Parse the line-oriented graph format: header ``n=<int> root=<int>``,
    then one ``u v`` edge per line (u < v). Blank lines and ``#`` comments
    are skipped."""
    lines = text.splitlines()
    header = None
    edges = []
    seen = set()
    n = root = 0
    for ln, raw in enumerate(lines, start=1):
        s = raw.strip()
        if not s or s.startswith("#"):
            continue
        if header is None:
            parts = s.split()
            if len(parts) != 2 or not parts[0].startswith("n=") \
                    or not parts[1].startswith("root="):
                raise GraphFormatError("expected header 'n=<int> root=<int>'", ln)
            try:
                n = int(parts[0][2:])
                root = int(parts[1][5:])
            except ValueError:
                raise GraphFormatError("non-integer header field", ln) from None
            if n < 1:
                raise GraphFormatError("vertex count must be >= 1", ln)
            if not 0 <= root < n:
                raise GraphFormatError(f"root {root} out of range", ln)
            if root != 0:
                raise GraphFormatError("root must be remapped to 0", ln)
            header = (n, root)
            continue
        parts = s.split()
        if len(parts) != 2:
            raise GraphFormatError("expected edge line 'u v'", ln)
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphFormatError("non-integer vertex id", ln) from None
        if not (0 <= u < n and 0 <= v < n):
            raise GraphFormatError(f"vertex id out of range in edge {u} {v}", ln)
        if u == v:
            raise GraphFormatError(f"self-loop at vertex {u}", ln)
        if u > v:
            raise GraphFormatError(f"edge {u} {v} not in u < v order", ln)
        if (u, v) in seen:
            raise GraphFormatError(f"duplicate edge {u} {v}", ln)
        seen.add((u, v))
        edges.append((u, v))
    if header is None:
        raise GraphFormatError("missing header", max(1, len(lines)))
    return _from_edges(n, edges)
