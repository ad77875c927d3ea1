"""Loading, validation and persistence of weighted networks.

File formats
------------
dense-csv
    ``N`` rows of ``N`` comma separated non-negative integers, no header.
edge-list-csv
    Header ``src,dst,weight`` followed by one edge per row with 1-based node
    indices. Pairs that are not listed have weight 0.
attributes
    One category token per line, one line per node.
"""

from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class NetworkFormatError(ValueError):
    """Raised when a network or attribute file is malformed or invalid."""


@dataclass(frozen=True)
class WeightedNetwork:
    """Observed ``N x N`` integer adjacency matrix with a directedness flag."""

    y: np.ndarray
    directed: bool = True
    node_labels: list[str] | None = None

    def __post_init__(self):
        y = np.asarray(self.y)
        validate_adjacency(y, self.directed)
        y = y.astype(np.int64, copy=True)
        y.setflags(write=False)
        object.__setattr__(self, "y", y)
        if self.node_labels is not None and len(self.node_labels) != y.shape[0]:
            raise NetworkFormatError("node_labels length does not match the network size")

    @property
    def n(self) -> int:
        return self.y.shape[0]

    def pair_mask(self):
        """Boolean mask of the pairs entering the likelihood.

        Ordered pairs ``i != j`` for directed networks and ``i < j`` otherwise.
        """
        n = self.n
        if self.directed:
            return ~np.eye(n, dtype=bool)
        return np.triu(np.ones((n, n), dtype=bool), k=1)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(b"directed" if self.directed else b"undirected")
        h.update(np.ascontiguousarray(self.y, dtype="<i8").tobytes())
        return h.hexdigest()

    def __eq__(self, other):
        if not isinstance(other, WeightedNetwork):
            return NotImplemented
        return self.directed == other.directed and np.array_equal(self.y, other.y)

    __hash__ = None


@dataclass(frozen=True)
class NodeAttributes:
    """Categorical node attributes coded ``1..C`` by first appearance."""

    c: np.ndarray
    levels: list[str] = field(default_factory=list)

    def __post_init__(self):
        c = np.asarray(self.c, dtype=np.int64)
        if c.ndim != 1 or c.size == 0:
            raise NetworkFormatError("attributes must be a non-empty vector")
        if c.min() < 1:
            raise NetworkFormatError("attribute levels must be >= 1")
        object.__setattr__(self, "c", c)
        if not self.levels:
            object.__setattr__(self, "levels", [str(k) for k in range(1, int(c.max()) + 1)])

    @property
    def C(self) -> int:
        return len(self.levels)

    @property
    def n(self) -> int:
        return self.c.shape[0]


def validate_adjacency(y, directed):
    """Raise :class:`NetworkFormatError` if ``y`` is not a valid adjacency matrix."""
    y = np.asarray(y)
    if y.ndim != 2 or y.shape[0] != y.shape[1]:
        raise NetworkFormatError(f"adjacency matrix must be square, got shape {y.shape}")
    if y.size == 0:
        raise NetworkFormatError("adjacency matrix is empty")
    if y.dtype.kind == "f":
        if not np.all(np.isfinite(y)) or np.any(y != np.round(y)):
            raise NetworkFormatError("weights must be integers")
    elif y.dtype.kind not in "iub":
        raise NetworkFormatError(f"unsupported weight dtype {y.dtype}")
    if np.any(y < 0):
        raise NetworkFormatError("weights must be non-negative")
    if np.any(np.diag(y) != 0):
        raise NetworkFormatError("self-loops are not allowed: diagonal must be zero")
    if not directed and not np.array_equal(y, y.T):
        raise NetworkFormatError("undirected network must have a symmetric adjacency matrix")


def _parse_int(token, where):
    token = token.strip()
    try:
        value = int(token)
    except ValueError:
        try:
            f = float(token)
        except ValueError:
            raise NetworkFormatError(f"malformed cell {token!r} at {where}") from None
        raise NetworkFormatError(f"non-integer weight {f!r} at {where}") from None
    return value


def _read_dense(text):
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        rows.append([_parse_int(tok, f"line {lineno}") for tok in line.split(",")])
    if not rows:
        raise NetworkFormatError("empty network file")
    n = len(rows)
    if any(len(r) != n for r in rows):
        raise NetworkFormatError("dense-csv must have N rows of N values")
    return np.array(rows, dtype=np.int64)


def _read_edge_list(text, directed):
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["src", "dst", "weight"]:
        raise NetworkFormatError("edge-list-csv must start with the header 'src,dst,weight'")
    edges = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not tok.strip() for tok in row):
            continue
        if len(row) != 3:
            raise NetworkFormatError(f"expected 3 fields at line {lineno}")
        src, dst, w = (_parse_int(tok, f"line {lineno}") for tok in row)
        if src < 1 or dst < 1:
            raise NetworkFormatError(f"node indices are 1-based, got ({src},{dst}) at line {lineno}")
        edges.append((src - 1, dst - 1, w, lineno))
    n = max((max(s, d) for s, d, _, _ in edges), default=-1) + 1
    if n == 0:
        raise NetworkFormatError("edge list has no edges; cannot infer the network size")
    y = np.zeros((n, n), dtype=np.int64)
    seen = {}
    for s, d, w, lineno in edges:
        if w < 0:
            raise NetworkFormatError(f"negative weight at line {lineno}")
        if s == d and w != 0:
            raise NetworkFormatError(f"self-loop at line {lineno}")
        key = (s, d) if directed else (min(s, d), max(s, d))
        if key in seen and seen[key] != w:
            if directed:
                raise NetworkFormatError(f"duplicate edge {s + 1}->{d + 1} with conflicting weight")
            raise NetworkFormatError(
                f"conflicting symmetric weights for pair ({key[0] + 1},{key[1] + 1}): {seen[key]} vs {w}")
        seen[key] = w
        y[s, d] = w
        if not directed:
            y[d, s] = w
    return y


def load_network(path, format="dense-csv", directed=True, n=None) -> WeightedNetwork:
    """Load and validate a network.

    ``n`` optionally pads an edge list whose highest-numbered nodes are
    isolated.
    """
    text = Path(path).read_text(encoding="utf-8")
    if format == "dense-csv":
        y = _read_dense(text)
    elif format == "edge-list-csv":
        y = _read_edge_list(text, directed)
        if n is not None:
            if n < y.shape[0]:
                raise NetworkFormatError("edge list references nodes beyond n")
            padded = np.zeros((n, n), dtype=np.int64)
            padded[: y.shape[0], : y.shape[0]] = y
            y = padded
    else:
        raise NetworkFormatError(f"unknown network format {format!r}")
    return WeightedNetwork(y, directed=directed)


def load_attributes(path, n) -> NodeAttributes:
    """Read one category token per line and code the tokens by first appearance."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if len(lines) != n:
        raise NetworkFormatError(f"attribute file has {len(lines)} rows, expected {n}")
    return attributes_from_tokens(lines)


def attributes_from_tokens(tokens) -> NodeAttributes:
    mapping = {}
    c = []
    for lineno, tok in enumerate(tokens, start=1):
        tok = str(tok).strip()
        if not tok:
            raise NetworkFormatError(f"empty attribute token at line {lineno}")
        if tok not in mapping:
            mapping[tok] = len(mapping) + 1
        c.append(mapping[tok])
    return NodeAttributes(np.array(c, dtype=np.int64), levels=list(mapping))


def write_attributes(path, attrs: NodeAttributes):
    tokens = [attrs.levels[k - 1] for k in attrs.c.tolist()]
    Path(path).write_text("".join(f"{t}\n" for t in tokens), encoding="utf-8", newline="\n")


def format_matrix(matrix) -> str:
    m = np.asarray(matrix)
    if m.ndim == 1:
        m = m[:, None]
    if m.dtype.kind in "iub":
        rows = (",".join(str(int(v)) for v in row) for row in m)
    else:
        if not np.all(np.isfinite(m)):
            raise ValueError("matrix must be finite")
        rows = (",".join(f"{float(v):.17g}" for v in row) for row in m)
    return "".join(r + "\n" for r in rows)


def write_matrix(path, matrix):
    """Write a dense CSV: integers verbatim, reals with round-trip precision."""
    Path(path).write_text(format_matrix(matrix), encoding="utf-8", newline="\n")


def read_matrix(path, dtype=float):
    text = Path(path).read_text(encoding="utf-8")
    rows = [line.split(",") for line in text.splitlines() if line.strip()]
    return np.array(rows, dtype=dtype)


def write_network(path, net: WeightedNetwork):
    write_matrix(path, net.y)
