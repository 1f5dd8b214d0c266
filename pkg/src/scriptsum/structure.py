"""Structural position signals derived from the tree.

Everything the encoder needs about structure is computed here as numpy
arrays wrapped in small typed records: all-pairs tree distances, the
row-normalized reciprocal weighting used by the distance-weighted layer,
clipped distance buckets and clipped sequential offsets for relative
attention, and the weighted multi-view relation matrix that gates
attention.

Node-level distances are expanded to token level through the leaf
alignment, so subtokens of one identifier share that leaf's structural
relations and sit at distance 0 from each other.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .astcore import Ast, TokenAlignment
from .errors import ConfigError

STATEMENT_TYPES = frozenset(
    {
        "IfStatement",
        "WhileStatement",
        "ReturnStatement",
        "Assignment",
        "ExpressionStatement",
        "FunctionDecl",
    }
)


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric hop-count matrix with zero diagonal; n rows/columns."""

    n: int
    d: np.ndarray

    def __post_init__(self):
        if self.d.shape != (self.n, self.n):
            raise ValueError(f"distance matrix shape {self.d.shape} != ({self.n}, {self.n})")
        if not np.all(np.isfinite(self.d)):
            raise ValueError("distance matrix has non-finite entries")
        if np.any(np.diagonal(self.d) != 0):
            raise ValueError("distance matrix diagonal must be zero")
        if not np.array_equal(self.d, self.d.T):
            raise ValueError("distance matrix must be symmetric")


@dataclass(frozen=True)
class NormalizedPositionMatrix:
    """Row-normalized reciprocal distances; zero-distance pairs get 0."""

    m_bar: np.ndarray


@dataclass(frozen=True)
class BucketMatrix:
    """Distances clipped at threshold l; integer ids in [0, l]."""

    l: int
    b: np.ndarray


@dataclass(frozen=True)
class MultiViewMatrix:
    """Three binary relation views and their weighted combination."""

    a_ast: np.ndarray
    a_fl: np.ndarray
    a_dp: np.ndarray
    alpha: float
    beta: float
    gamma: float
    a_mv: np.ndarray


def floyd_apsp(ast: Ast) -> DistanceMatrix:
    """All-pairs shortest-path hop counts over tree nodes.

    Classic O(n^3) relaxation over the undirected parent-child edges;
    rows and columns follow canonical node ids.
    """
    n = len(ast)
    dist = np.full((n, n), np.inf)
    np.fill_diagonal(dist, 0.0)
    for node in ast.nodes:
        for child in node.children:
            dist[node.id, child] = 1.0
            dist[child, node.id] = 1.0
    for k in range(n):
        np.minimum(dist, dist[:, k : k + 1] + dist[k : k + 1, :], out=dist)
    return DistanceMatrix(n=n, d=dist)


def token_distance_matrix(node_d: DistanceMatrix, align: TokenAlignment) -> DistanceMatrix:
    """Gather node distances onto token positions via the leaf alignment.

    Tokens aligned to the same leaf sit at distance 0 even off-diagonal.
    """
    idx = np.asarray(align.token_to_node, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= node_d.n):
        raise ValueError("alignment references node ids outside the distance matrix")
    return DistanceMatrix(n=len(align), d=node_d.d[np.ix_(idx, idx)])


def normalize(m: DistanceMatrix) -> NormalizedPositionMatrix:
    """Reciprocal distances, normalized per row over non-zero entries.

    m_bar(i,j) = (1/d(i,j)) / sum_z over {z: d(i,z) != 0} (1/d(i,z)) when
    d(i,j) != 0, else 0. A row with no non-zero entry (single-token input)
    stays all zero rather than raising.
    """
    positive = m.d > 0
    weights = np.zeros_like(m.d, dtype=np.float64)
    np.divide(1.0, m.d, out=weights, where=positive)
    row_sums = weights.sum(axis=1, keepdims=True)
    m_bar = np.divide(weights, row_sums, out=np.zeros_like(weights), where=row_sums > 0)
    return NormalizedPositionMatrix(m_bar=m_bar)


def bucketize(m: DistanceMatrix, l: int) -> BucketMatrix:
    """Clip distances elementwise to min(d, l)."""
    if not isinstance(l, int) or isinstance(l, bool) or l < 1:
        raise ConfigError(f"clip threshold must be a positive integer, got {l!r}")
    return BucketMatrix(l=l, b=np.minimum(m.d, l).astype(np.int64))


def sequential_relpos(n: int, k: int) -> np.ndarray:
    """Signed sequential offsets clamp(j - i, -k, k), shape (n, n)."""
    if not isinstance(k, int) or isinstance(k, bool) or k < 1:
        raise ConfigError(f"offset window must be a positive integer, got {k!r}")
    offsets = np.arange(n)[None, :] - np.arange(n)[:, None]
    return np.clip(offsets, -k, k).astype(np.int64)


def _statement_of(ast: Ast) -> list[int]:
    """Nearest enclosing statement-like node per node (self counts); the
    root is the fallback owner for top-level constructs."""
    owner = [0] * len(ast)
    stack = [(0, 0)]
    while stack:
        nid, current = stack.pop()
        node = ast.nodes[nid]
        if node.node_type in STATEMENT_TYPES:
            current = nid
        owner[nid] = current
        stack.extend((child, current) for child in node.children)
    return owner


def _flow_edges(ast: Ast) -> set[tuple[int, int]]:
    """Undirected pairs of statement nodes adjacent in control flow:
    consecutive statements in a block, condition to branch-body entry,
    and loop-body tail back to the loop condition."""
    edges: set[tuple[int, int]] = set()

    def add(a: int, b: int) -> None:
        if a != b:
            edges.add((min(a, b), max(a, b)))

    def entry(branch_id: int) -> int:
        node = ast.nodes[branch_id]
        if node.node_type == "Block":
            return node.children[0]
        return branch_id

    for node in ast.nodes:
        if node.node_type in ("Block", "Program"):
            for left, right in zip(node.children, node.children[1:]):
                add(left, right)
        elif node.node_type == "IfStatement":
            add(node.id, entry(node.children[1]))
            if len(node.children) == 3:
                add(node.id, entry(node.children[2]))
        elif node.node_type == "WhileStatement":
            body = node.children[1]
            add(node.id, entry(body))
            add(ast.nodes[body].children[-1], node.id)
    return edges


def _token_leaf_ids(align: TokenAlignment) -> np.ndarray:
    return np.asarray(align.token_to_node, dtype=np.int64)


def ast_view(ast: Ast, align: TokenAlignment) -> np.ndarray:
    """Token-pair relation: 1 when the aligned leaves are at most two hops
    apart in the tree (same leaf, or siblings under one parent)."""
    dist = floyd_apsp(ast).d
    idx = _token_leaf_ids(align)
    sub = dist[np.ix_(idx, idx)]
    out = (sub <= 2.0).astype(np.float64)
    np.fill_diagonal(out, 1.0)
    return out


def flow_view(ast: Ast, align: TokenAlignment) -> np.ndarray:
    """Token-pair relation: 1 when the owning statements are control-flow
    adjacent; the diagonal is forced to 1."""
    owner = _statement_of(ast)
    edges = _flow_edges(ast)
    idx = _token_leaf_ids(align)
    stmts = np.asarray([owner[nid] for nid in idx], dtype=np.int64)
    n = len(idx)
    out = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        for j in range(n):
            pair = (min(stmts[i], stmts[j]), max(stmts[i], stmts[j]))
            if pair in edges:
                out[i, j] = 1.0
    np.fill_diagonal(out, 1.0)
    return out


def dataflow_view(ast: Ast, align: TokenAlignment) -> np.ndarray:
    """Token-pair relation: 1 when both tokens are occurrences of the same
    identifier name; the diagonal is forced to 1."""
    idx = _token_leaf_ids(align)
    names: list[str | None] = []
    for nid in idx:
        node = ast.nodes[nid]
        names.append(node.value if node.node_type == "Identifier" else None)
    n = len(idx)
    out = np.eye(n, dtype=np.float64)
    for i in range(n):
        if names[i] is None:
            continue
        for j in range(n):
            if names[j] == names[i]:
                out[i, j] = 1.0
    return out


def multiview(
    ast: Ast,
    align: TokenAlignment,
    weights: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3),
) -> MultiViewMatrix:
    """Weighted sum of the three relation views at token level.

    Weights must be non-negative and not all zero; every view has a unit
    diagonal, so a_mv's diagonal equals alpha + beta + gamma.
    """
    alpha, beta, gamma = (float(w) for w in weights)
    if min(alpha, beta, gamma) < 0.0:
        raise ConfigError(f"view weights must be non-negative, got {weights!r}")
    if alpha + beta + gamma == 0.0:
        raise ConfigError("view weights must not all be zero")
    a_ast = ast_view(ast, align)
    a_fl = flow_view(ast, align)
    a_dp = dataflow_view(ast, align)
    a_mv = alpha * a_ast + beta * a_fl + gamma * a_dp
    return MultiViewMatrix(
        a_ast=a_ast, a_fl=a_fl, a_dp=a_dp, alpha=alpha, beta=beta, gamma=gamma, a_mv=a_mv
    )


@dataclass(frozen=True)
class StructuralEncodings:
    """Token-level structural inputs consumed by the encoder.

    distances:        tree hop counts between token pairs, (n, n) int
    distance_weights: row-normalized reciprocal tree distances, (n, n) float
    bucket_ids:       clipped tree-distance buckets, (n, n) int in [0, clip]
    multiview:        weighted relation matrix with diagonal alpha+beta+gamma
    """

    distances: np.ndarray
    distance_weights: np.ndarray
    bucket_ids: np.ndarray
    multiview: np.ndarray


def encode_structure(
    ast: Ast,
    align: TokenAlignment,
    distance_clip: int = 8,
    view_weights: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3),
) -> StructuralEncodings:
    """Compute every structural input for one example in token space.

    The distance weights are normalized from the clipped distances, so
    every matrix the model consumes depends on a raw distance only through
    min(d, distance_clip); distances at or beyond the threshold are
    interchangeable.
    """
    token_d = token_distance_matrix(floyd_apsp(ast), align)
    buckets = bucketize(token_d, distance_clip)
    clipped = DistanceMatrix(n=token_d.n, d=buckets.b.astype(np.float64))
    return StructuralEncodings(
        distances=token_d.d.astype(np.int64),
        distance_weights=normalize(clipped).m_bar,
        bucket_ids=buckets.b,
        multiview=multiview(ast, align, view_weights).a_mv,
    )
