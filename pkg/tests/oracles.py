"""Independent reference implementations used to verify the package.

Everything here is deliberately written with different algorithms than the
library (BFS instead of Floyd, explicit subsequence enumeration instead of
DP, step-by-step argmax instead of beam bookkeeping) so agreement is
meaningful.
"""

from collections import deque
from itertools import product

import numpy as np

from scriptsum.astcore import Ast, AstNode


def random_tree(rng: np.random.Generator, n_nodes: int) -> Ast:
    """Random tree with canonical ids; leaves carry values."""
    parents = [None] + [int(rng.integers(0, i)) for i in range(1, n_nodes)]
    children: list[list[int]] = [[] for _ in range(n_nodes)]
    for child, parent in enumerate(parents):
        if parent is not None:
            children[parent].append(child)
    nodes = [
        AstNode(
            id=i,
            node_type=f"T{int(rng.integers(0, 5))}",
            value=f"v{i}" if not children[i] else None,
            children=tuple(children[i]),
        )
        for i in range(n_nodes)
    ]
    return Ast(nodes, renumber=True)


def bfs_apsp(ast: Ast) -> np.ndarray:
    """All-pairs shortest paths by breadth-first search from every node."""
    n = len(ast)
    adjacency: list[list[int]] = [[] for _ in range(n)]
    for node in ast.nodes:
        for child in node.children:
            adjacency[node.id].append(child)
            adjacency[child].append(node.id)
    dist = np.full((n, n), -1, dtype=np.int64)
    for start in range(n):
        dist[start, start] = 0
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in adjacency[u]:
                if dist[start, v] < 0:
                    dist[start, v] = dist[start, u] + 1
                    queue.append(v)
    return dist


def node_depths(ast: Ast) -> list[int]:
    parent = {}
    for node in ast.nodes:
        for child in node.children:
            parent[child] = node.id
    depths = []
    for i in range(len(ast)):
        d = 0
        j = i
        while j in parent:
            j = parent[j]
            d += 1
        depths.append(d)
    return depths


def lca_depth(ast: Ast, a: int, b: int) -> int:
    """Depth of the lowest common ancestor via parent-chain intersection."""
    parent = {}
    for node in ast.nodes:
        for child in node.children:
            parent[child] = node.id
    chain = {a}
    j = a
    while j in parent:
        j = parent[j]
        chain.add(j)
    j = b
    while j not in chain:
        j = parent[j]
    depths = node_depths(ast)
    return depths[j]


def brute_force_lcs(a: list[str], b: list[str]) -> int:
    """Longest common subsequence by enumerating all subsequences of a."""
    best = 0
    for mask in range(1 << len(a)):
        sub = [a[i] for i in range(len(a)) if mask >> i & 1]
        it = iter(b)
        if all(tok in it for tok in sub):
            best = max(best, len(sub))
    return best


def vanilla_attention(params: dict, prefix: str, x: np.ndarray, n_heads: int) -> np.ndarray:
    """Plain multi-head scaled-dot attention with the model's weights."""
    d_head = params[f"{prefix}.q0"].shape[1]
    heads = []
    for h in range(n_heads):
        q = x @ params[f"{prefix}.q{h}"]
        k = x @ params[f"{prefix}.k{h}"]
        v = x @ params[f"{prefix}.v{h}"]
        scores = q @ k.T / np.sqrt(d_head)
        scores = scores - scores.max(axis=1, keepdims=True)
        alpha = np.exp(scores)
        alpha /= alpha.sum(axis=1, keepdims=True)
        heads.append(alpha @ v)
    return np.concatenate(heads, axis=1) @ params[f"{prefix}.out_w"] + params[f"{prefix}.out_b"]


def greedy_oracle(model, state, max_len: int) -> list[int]:
    """Step-by-step argmax decoding, ties to the smallest token id."""
    eos = model.config.eos_id
    seq = [model.config.bos_id]
    for _ in range(max_len):
        logp = model._next_log_probs(tuple(seq), state)
        nxt = int(np.argmax(logp))
        seq.append(nxt)
        if nxt == eos:
            break
    out = seq[1:]
    if out and out[-1] == eos:
        out.pop()
    return out


def _sequence_logprob(model, state, emitted: tuple[int, ...]) -> float:
    prefix = (model.config.bos_id,)
    total = 0.0
    for tok in emitted:
        logp = model._next_log_probs(prefix, state)
        total += float(logp[tok])
        prefix = prefix + (tok,)
    return total


def exhaustive_decode(model, state, max_len: int, length_penalty: float = 1.0) -> list[int]:
    """True argmax over every sequence beam search could produce.

    Candidates: emitted sequences with EOS only in final position (any
    length up to max_len), plus all EOS-free sequences of exactly max_len.
    Scored by logprob / len^penalty with the same lexicographic tie-break
    as beam search.
    """
    eos = model.config.eos_id
    vocab = model.config.tgt_vocab_size
    non_eos = [t for t in range(vocab) if t != eos]
    candidates: list[tuple[int, ...]] = []
    for length in range(1, max_len + 1):
        for body in product(non_eos, repeat=length - 1):
            candidates.append(body + (eos,))
    for body in product(non_eos, repeat=max_len):
        candidates.append(body)

    def key(emitted: tuple[int, ...]):
        lp = _sequence_logprob(model, state, emitted)
        score = lp / (len(emitted) ** length_penalty)
        return (-score, (model.config.bos_id,) + emitted)

    best = min(candidates, key=key)
    out = list(best)
    if out and out[-1] == eos:
        out.pop()
    return out


def finite_difference_grad(f, tensors, epsilon: float = 1e-5):
    """Central finite differences of a scalar-valued tensor function."""
    grads = []
    for t in tensors:
        g = np.zeros_like(t.data)
        for idx in np.ndindex(*t.data.shape):
            orig = t.data[idx]
            t.data[idx] = orig + epsilon
            up = float(f().data)
            t.data[idx] = orig - epsilon
            down = float(f().data)
            t.data[idx] = orig
            g[idx] = (up - down) / (2 * epsilon)
        grads.append(g)
    return grads
