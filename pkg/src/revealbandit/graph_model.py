"""Influence matrices: construction, random graphs, lower-bound fixtures and I/O.

An :class:`InfluenceMatrix` stores the d x d matrix of influence probabilities
``p[i, j]`` in compressed sparse row form. Absent entries have probability 0.
"""

from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass, field
from typing import Iterable

import networkx as nx
import numpy as np

from .errors import ConfigurationError, ParseError


@dataclass(frozen=True, eq=False)
class InfluenceMatrix:
    """Sparse-row influence matrix.

    Row ``i`` is stored in ``indices[indptr[i]:indptr[i+1]]`` (sorted column
    indices) and the matching slice of ``probs``. Instances are immutable and
    can be shared between concurrent trials.
    """

    d: int
    indptr: np.ndarray
    indices: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        indptr = np.ascontiguousarray(self.indptr, dtype=np.int64)
        indices = np.ascontiguousarray(self.indices, dtype=np.int64)
        probs = np.ascontiguousarray(self.probs, dtype=np.float64)
        if self.d < 1:
            raise ConfigurationError(f"node count must be positive, got {self.d}")
        if indptr.shape != (self.d + 1,) or indptr[0] != 0:
            raise ConfigurationError("indptr must have d + 1 entries starting at 0")
        if np.any(np.diff(indptr) < 0) or indptr[-1] != len(indices):
            raise ConfigurationError("indptr must be non-decreasing and end at nnz")
        if len(indices) != len(probs):
            raise ConfigurationError("indices and probs lengths differ")
        if len(indices):
            if indices.min() < 0 or indices.max() >= self.d:
                raise ConfigurationError("column index out of range")
            if not np.all((probs > 0) & (probs <= 1)):
                raise ConfigurationError("stored probabilities must lie in (0, 1]")
            # sorted and unique within each row
            step = np.diff(indices)
            row_start = np.zeros(len(indices), dtype=bool)
            row_start[indptr[:-1][np.diff(indptr) > 0]] = True
            if np.any((step <= 0) & ~row_start[1:]):
                raise ConfigurationError("column indices must be sorted and unique per row")
        for arr in (indptr, indices, probs):
            arr.setflags(write=False)
        object.__setattr__(self, "indptr", indptr)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_entries(cls, d: int, entries: Iterable[tuple[int, int, float]]) -> "InfluenceMatrix":
        """Build from ``(i, j, p)`` triples. Duplicate ``(i, j)`` pairs are rejected."""
        triples = list(entries)
        if not triples:
            return cls(d, np.zeros(d + 1, dtype=np.int64), np.zeros(0), np.zeros(0))
        arr = np.array([(i, j) for i, j, _ in triples], dtype=np.int64)
        p = np.array([t[2] for t in triples], dtype=np.float64)
        if arr.min() < 0 or arr.max() >= d:
            raise ConfigurationError("entry index out of range")
        order = np.lexsort((arr[:, 1], arr[:, 0]))
        rows, cols, p = arr[order, 0], arr[order, 1], p[order]
        dup = (np.diff(rows) == 0) & (np.diff(cols) == 0)
        if np.any(dup):
            raise ConfigurationError("duplicate (i, j) entry")
        indptr = np.zeros(d + 1, dtype=np.int64)
        np.add.at(indptr, rows + 1, 1)
        return cls(d, np.cumsum(indptr), cols, p)

    @classmethod
    def from_dense(cls, dense) -> "InfluenceMatrix":
        dense = np.asarray(dense, dtype=np.float64)
        if dense.ndim != 2 or dense.shape[0] != dense.shape[1]:
            raise ConfigurationError("dense influence matrix must be square")
        rows, cols = np.nonzero(dense)
        indptr = np.zeros(dense.shape[0] + 1, dtype=np.int64)
        np.add.at(indptr, rows + 1, 1)
        return cls(dense.shape[0], np.cumsum(indptr), cols, dense[rows, cols])

    @property
    def nnz(self) -> int:
        return len(self.indices)

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.probs[lo:hi]

    @property
    def rows(self) -> list[list[tuple[int, float]]]:
        out = []
        for i in range(self.d):
            cols, p = self.row(i)
            out.append([(int(j), float(q)) for j, q in zip(cols, p)])
        return out

    def row_ids(self) -> np.ndarray:
        """Row index of every stored entry."""
        return np.repeat(np.arange(self.d), np.diff(self.indptr))

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.d, self.d))
        dense[self.row_ids(), self.indices] = self.probs
        return dense

    def is_pattern_symmetric(self) -> bool:
        rows = self.row_ids()
        fwd = set(zip(rows.tolist(), self.indices.tolist()))
        return all((j, i) in fwd for i, j in fwd)

    def __eq__(self, other):
        if not isinstance(other, InfluenceMatrix):
            return NotImplemented
        return (
            self.d == other.d
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.probs, other.probs)
        )

    def __repr__(self):
        return f"InfluenceMatrix(d={self.d}, nnz={self.nnz})"


def _edges_to_matrix(d: int, edges, p: float, symmetric: bool) -> InfluenceMatrix:
    pairs = set()
    for i, j in edges:
        pairs.add((i, j))
        if symmetric:
            pairs.add((j, i))
    return InfluenceMatrix.from_entries(d, ((i, j, p) for i, j in pairs))


# ---------------------------------------------------------------------------
# Graph specifications


GRAPH_KINDS = (
    "barabasi_albert",
    "star",
    "complete",
    "empty",
    "lower_bound_symmetric",
    "lower_bound_asymmetric",
    "file",
    "matrix",
)

_KIND_ALIASES = {
    "ba": "barabasi_albert",
    "lbsym": "lower_bound_symmetric",
    "lbasym": "lower_bound_asymmetric",
}


@dataclass(frozen=True)
class GraphSpec:
    """Declarative description of an experimental graph.

    ``params`` holds the kind-specific parameters: ``m`` for barabasi_albert,
    ``r`` and ``n`` for the lower-bound fixtures (plus ``k0`` for the
    asymmetric one), ``path`` and ``symmetrize`` for SNAP files and ``path``
    for ``matrix`` (a file in the internal format, probabilities kept as
    stored). ``d`` is ignored for both (it comes from the data).
    """

    kind: str
    d: int = 0
    p: float = 1.0
    params: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.kind not in GRAPH_KINDS:
            raise ConfigurationError(f"unknown graph kind {self.kind!r}")
        if not (0 < self.p <= 1):
            raise ConfigurationError(f"edge probability must be in (0, 1], got {self.p}")
        if self.kind in ("file", "matrix"):
            if "path" not in self.params:
                raise ConfigurationError(f"{self.kind} graph needs a path")
            return
        if self.d < 1:
            raise ConfigurationError(f"node count must be >= 1, got {self.d}")
        if self.kind == "barabasi_albert":
            m = self.params.get("m")
            if m is None or not (1 <= int(m) < self.d):
                raise ConfigurationError(f"barabasi_albert needs 1 <= m < d, got m={m}, d={self.d}")
        if self.kind.startswith("lower_bound"):
            for key in ("r", "n"):
                if key not in self.params:
                    raise ConfigurationError(f"{self.kind} needs parameter {key!r}")
        if self.kind == "lower_bound_asymmetric" and "k0" not in self.params:
            raise ConfigurationError("lower_bound_asymmetric needs parameter 'k0'")

    def to_string(self) -> str:
        """Inverse of :func:`parse_graph_spec`."""
        items = []
        if self.kind not in ("file", "matrix"):
            items.append(f"d={self.d}")
        items.append(f"p={self.p!r}")
        for key in sorted(self.params):
            value = self.params[key]
            if isinstance(value, bool):
                value = "true" if value else "false"
            items.append(f"{key}={value}")
        return f"{self.kind}:" + ",".join(items)


def _coerce(value: str):
    low = value.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    try:
        return int(value)
    except ValueError:
        pass
    try:
        return float(value)
    except ValueError:
        return value


def parse_graph_spec(text: str) -> GraphSpec:
    """Parse ``kind:key=value,...`` (for example ``ba:d=1000,m=10,p=0.8``).

    A bare path to an existing file is read as ``file:path=<path>``.
    """
    text = text.strip()
    if ":" not in text:
        if os.path.exists(text):
            return GraphSpec("file", params={"path": text, "symmetrize": False})
        kind, rest = text, ""
    else:
        kind, rest = text.split(":", 1)
    kind = _KIND_ALIASES.get(kind.strip(), kind.strip())
    values = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        if "=" not in item:
            raise ConfigurationError(f"graph parameter {item!r} is not key=value")
        key, value = (s.strip() for s in item.split("=", 1))
        values[key] = value if key == "path" else _coerce(value)
    d = int(values.pop("d", 0))
    p = float(values.pop("p", 1.0))
    if kind == "file":
        values.setdefault("symmetrize", False)
    spec = GraphSpec(kind, d, p, values)
    spec.validate()
    return spec


# ---------------------------------------------------------------------------
# Generators


def barabasi_albert_edges(d: int, m: int, seed) -> list[tuple[int, int]]:
    """Undirected preferential-attachment edges on ``d`` nodes.

    Starts from a complete graph on ``m`` nodes; every later node attaches to
    ``m`` distinct existing nodes chosen with probability proportional to
    degree. The result has exactly ``C(m, 2) + m * (d - m)`` edges.
    """
    graph = nx.barabasi_albert_graph(d, m, seed=seed, initial_graph=nx.complete_graph(m))
    return sorted((min(u, v), max(u, v)) for u, v in graph.edges())


def generate(spec: GraphSpec, seed=None) -> InfluenceMatrix:
    """Build the influence matrix described by ``spec``."""
    spec.validate()
    d, p = spec.d, spec.p
    kind = spec.kind
    if kind == "barabasi_albert":
        edges = barabasi_albert_edges(d, int(spec.params["m"]), seed)
        return _edges_to_matrix(d, edges, p, symmetric=True)
    if kind == "star":
        return _edges_to_matrix(d, [(0, j) for j in range(1, d)], p, symmetric=True)
    if kind == "complete":
        entries = ((i, j, p) for i in range(d) for j in range(d) if i != j)
        return InfluenceMatrix.from_entries(d, entries)
    if kind == "empty":
        return InfluenceMatrix.from_entries(d, [])
    if kind == "lower_bound_symmetric":
        return lower_bound_symmetric(d, spec.params["r"], spec.params["n"])
    if kind == "lower_bound_asymmetric":
        return lower_bound_asymmetric(d, spec.params["r"], spec.params["n"], int(spec.params["k0"]))
    if kind == "file":
        matrix = load_snap(spec.params["path"], bool(spec.params.get("symmetrize", False)))
        return apply_uniform_probability(matrix, p)
    if kind == "matrix":
        return load_matrix(spec.params["path"])
    raise ConfigurationError(f"unknown graph kind {kind!r}")


def lower_bound_symmetric(d: int, r: float, n: int) -> InfluenceMatrix:
    """Two-gap construction: node 0 influences every node with probability r/d,
    every other node with probability r/d - sqrt(r/(d n)).

    Node 0 is better than every other node by sqrt(d r / n).
    """
    if not (0 < r <= d) or n < 1:
        raise ConfigurationError(f"need 0 < r <= d and n >= 1, got r={r}, d={d}, n={n}")
    best = r / d
    other = best - math.sqrt(r / (d * n))
    if other <= 0:
        raise ConfigurationError(
            f"suboptimal probability r/d - sqrt(r/(d n)) = {other} is not positive"
        )
    dense = np.full((d, d), other)
    dense[0, :] = best
    return InfluenceMatrix.from_dense(dense)


def influence_profile(d: int, r: float, n: int) -> np.ndarray:
    """Per-node influence levels of the two-gap construction."""
    levels = np.full(d, r - math.sqrt(d * r / n))
    levels[0] = r
    return levels


def lower_bound_asymmetric(d: int, r_profile, n: int, k0: int) -> InfluenceMatrix:
    """Asymmetric construction where every node surely influences ``k0``.

    ``r_profile`` is either a scalar ``r`` (levels from :func:`influence_profile`)
    or a length-``d`` sequence of per-node levels ``r_l``. Row ``l`` gets
    probability ``r_l / d`` on every column except ``k0``, which gets 1.
    """
    if np.isscalar(r_profile):
        levels = influence_profile(d, float(r_profile), n)
    else:
        levels = np.asarray(r_profile, dtype=np.float64)
        if levels.shape != (d,):
            raise ConfigurationError(f"r_profile must have {d} entries, got {levels.shape}")
    if not (0 <= k0 < d):
        raise ConfigurationError(f"k0={k0} out of range")
    if np.any(levels > d) or np.any(levels <= 0):
        raise ConfigurationError("every influence level must lie in (0, d]")
    if d > 1 and levels[k0] >= levels.max():
        raise ConfigurationError(f"k0={k0} must be a suboptimal node of the profile")
    dense = np.repeat((levels / d)[:, None], d, axis=1)
    dense[:, k0] = 1.0
    return InfluenceMatrix.from_dense(dense)


def apply_uniform_probability(matrix: InfluenceMatrix, p: float) -> InfluenceMatrix:
    """Same sparsity pattern, every stored probability replaced by ``p``."""
    if not (0 < p <= 1):
        raise ConfigurationError(f"edge probability must be in (0, 1], got {p}")
    return InfluenceMatrix(matrix.d, matrix.indptr, matrix.indices, np.full(matrix.nnz, float(p)))


# ---------------------------------------------------------------------------
# File formats


def load_snap(path, symmetrize: bool = False) -> InfluenceMatrix:
    """Read a SNAP edge list.

    Node ids are remapped to ``0..d-1`` in order of first appearance,
    duplicate edges collapse, and self-loops are kept on the diagonal. Every
    stored entry gets probability 1; use :func:`apply_uniform_probability`
    afterwards.
    """
    ids: dict[int, int] = {}
    edges: set[tuple[int, int]] = set()
    try:
        handle = open(path, encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read edge list: {exc.strerror}", path=path) from exc
    with handle:
        for lineno, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            tokens = stripped.split()
            if len(tokens) != 2:
                raise ParseError(f"expected 2 node ids, found {len(tokens)} tokens", path, lineno)
            try:
                src, dst = int(tokens[0]), int(tokens[1])
            except ValueError:
                raise ParseError(f"non-integer node id in {stripped!r}", path, lineno) from None
            a = ids.setdefault(src, len(ids))
            b = ids.setdefault(dst, len(ids))
            edges.add((a, b))
            if symmetrize:
                edges.add((b, a))
    if not ids:
        raise ParseError("edge list contains no edges", path=path)
    return InfluenceMatrix.from_entries(len(ids), ((i, j, 1.0) for i, j in edges))


def _first_appearance_order(matrix: InfluenceMatrix) -> list[tuple[int, int]]:
    # order edges so that reading them back assigns node k the id k
    edges = list(zip(matrix.row_ids().tolist(), matrix.indices.tolist()))
    incident: dict[int, list[int]] = {}
    for idx, (i, j) in enumerate(edges):
        incident.setdefault(i, []).append(idx)
        if j != i:
            incident.setdefault(j, []).append(idx)
    used = [False] * len(edges)
    order = []
    seen = 0
    for k in range(matrix.d):
        if k < seen:
            continue
        pick = None
        for idx in incident.get(k, ()):
            i, j = edges[idx]
            if max(i, j) == k or (i == k and j == k + 1):
                pick = idx
                if max(i, j) == k:
                    break
        if pick is None:
            break
        used[pick] = True
        order.append(edges[pick])
        seen = max(edges[pick]) + 1
    order.extend(e for e, u in zip(edges, used) if not u)
    return order


def write_snap(matrix: InfluenceMatrix, path) -> None:
    """Write the sparsity pattern as a SNAP edge list (probabilities dropped).

    Lines are ordered so that :func:`load_snap` reproduces the same node ids
    whenever the matrix itself came from :func:`load_snap`.
    """
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# Nodes: {matrix.d} Edges: {matrix.nnz}\n")
        for i, j in _first_appearance_order(matrix):
            fh.write(f"{i}\t{j}\n")


_HEADER = re.compile(r"^d\s*=\s*(\d+)$")


def save_matrix(matrix: InfluenceMatrix, path) -> None:
    """Internal text format: ``d=<d>`` header, then one ``i j p`` line per entry."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"d={matrix.d}\n")
        for i, j, p in zip(matrix.row_ids().tolist(), matrix.indices.tolist(), matrix.probs.tolist()):
            fh.write(f"{i} {j} {p!r}\n")


def load_matrix(path) -> InfluenceMatrix:
    d = None
    entries = []
    try:
        handle = open(path, encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read matrix file: {exc.strerror}", path=path) from exc
    with handle:
        for lineno, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if d is None:
                match = _HEADER.match(stripped)
                if not match:
                    raise ParseError("expected header 'd=<node count>'", path, lineno)
                d = int(match.group(1))
                continue
            tokens = stripped.split()
            if len(tokens) != 3:
                raise ParseError(f"expected 'i j p', found {len(tokens)} tokens", path, lineno)
            try:
                entries.append((int(tokens[0]), int(tokens[1]), float(tokens[2])))
            except ValueError:
                raise ParseError(f"malformed entry {stripped!r}", path, lineno) from None
    if d is None:
        raise ParseError("missing header 'd=<node count>'", path=path)
    try:
        return InfluenceMatrix.from_entries(d, entries)
    except ConfigurationError as exc:
        raise ParseError(str(exc), path=path) from exc


__all__ = [
    "InfluenceMatrix",
    "GraphSpec",
    "parse_graph_spec",
    "generate",
    "barabasi_albert_edges",
    "lower_bound_symmetric",
    "lower_bound_asymmetric",
    "influence_profile",
    "apply_uniform_probability",
    "load_snap",
    "write_snap",
    "save_matrix",
    "load_matrix",
]
