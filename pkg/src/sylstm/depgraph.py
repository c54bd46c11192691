"""Dependency parses and their transformation into GCN-ready graph operators.

A parse tree is turned into an undirected graph by adding the inverse of
every head->dependent edge. Self-connections come solely from the +I term
of the symmetric normalization (the edge set stores no self-loops), giving
the operator A_hat = D^{-1/2} (A + I) D^{-1/2} with all eigenvalues in
[-1, 1]. Matrices are kept sparse (CSR, float64).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

ROOT = -1


class ParseError(Exception):
    pass


class GraphError(Exception):
    pass


@dataclass(frozen=True)
class DependencyParse:
    tokens: tuple[str, ...]
    heads: tuple[int, ...]          # 0-based, ROOT (-1) for the root token
    relations: tuple[str, ...]

    def __post_init__(self):
        n = len(self.tokens)
        if not (len(self.heads) == len(self.relations) == n):
            raise ParseError("tokens, heads and relations must have equal length")
        if n == 0:
            raise ParseError("empty parse")
        roots = [i for i, h in enumerate(self.heads) if h == ROOT]
        if len(roots) != 1:
            raise ParseError(f"expected exactly one root, found {len(roots)}")
        for i, h in enumerate(self.heads):
            if h != ROOT and not 0 <= h < n:
                raise ParseError(f"token {i}: head index {h} out of range")
            if h == i:
                raise ParseError(f"token {i} is its own head")
        # acyclicity: every node must reach the root
        for i in range(n):
            seen = set()
            j = i
            while j != ROOT:
                if j in seen:
                    raise ParseError(f"cycle in head chain starting at token {i}")
                seen.add(j)
                j = self.heads[j]


@dataclass(frozen=True)
class TweetGraph:
    n: int
    edges: frozenset[tuple[int, int]]  # unordered pairs stored as (min, max)

    def __post_init__(self):
        for i, j in self.edges:
            if not (0 <= i < j < self.n):
                raise GraphError(f"edge ({i},{j}) invalid for n={self.n}")


@dataclass(frozen=True)
class NormalizedAdjacency:
    n: int
    matrix: sp.csr_matrix   # symmetric, float64
    degrees: np.ndarray     # row sums of A + I


def read_conllu(path: str) -> list[DependencyParse]:
    """Parse a CoNLL-U file, one sentence block per tweet.

    Head indices are converted from 1-based to 0-based with root -> -1.
    Multiword-token ranges (id '1-2') and empty nodes (id '1.1') are skipped.
    """
    parses = []
    with open(path, encoding="utf-8") as f:
        content = f.read()
    for sent_idx, block in enumerate(_blocks(content)):
        tokens, heads, rels = [], [], []
        for line in block:
            cols = line.split("\t")
            if len(cols) != 10:
                raise ParseError(f"sentence {sent_idx}: expected 10 columns, found {len(cols)}")
            if "-" in cols[0] or "." in cols[0]:
                continue
            tokens.append(cols[1])
            try:
                head = int(cols[6])
            except ValueError:
                raise ParseError(f"sentence {sent_idx}: non-integer head {cols[6]!r}")
            heads.append(ROOT if head == 0 else head - 1)
            rels.append(cols[7])
        try:
            parses.append(DependencyParse(tuple(tokens), tuple(heads), tuple(rels)))
        except ParseError as err:
            raise ParseError(f"sentence {sent_idx}: {err}")
    return parses


def _blocks(content: str):
    block: list[str] = []
    for line in content.splitlines():
        if line.startswith("#"):
            continue
        if not line.strip():
            if block:
                yield block
                block = []
            continue
        block.append(line)
    if block:
        yield block


def write_conllu(path: str, parses: list[DependencyParse]) -> None:
    """Minimal 10-column CoNLL-U writer (underscores for unused fields)."""
    with open(path, "w", encoding="utf-8") as f:
        for p in parses:
            for i, (tok, head, rel) in enumerate(zip(p.tokens, p.heads, p.relations)):
                h = 0 if head == ROOT else head + 1
                f.write(f"{i+1}\t{tok}\t_\t_\t_\t_\t{h}\t{rel}\t_\t_\n")
            f.write("\n")


def build_graph(parse: DependencyParse, max_len: int | None = None) -> TweetGraph:
    """Undirected edge set from the dependency tree (one edge per dependency).

    With max_len set, the parse is restricted to the token prefix and edges
    touching removed nodes are dropped.
    """
    n = len(parse.tokens) if max_len is None else min(len(parse.tokens), max_len)
    edges = set()
    for dep, head in enumerate(parse.heads):
        if head == ROOT:
            continue
        if dep < n and head < n:
            edges.add((min(dep, head), max(dep, head)))
    return TweetGraph(n=n, edges=frozenset(edges))


def normalize(graph: TweetGraph, alpha: float = 1.0) -> NormalizedAdjacency:
    """Symmetric normalization D^{-1/2} (A + I) D^{-1/2} with edge weight alpha."""
    if alpha <= 0:
        raise GraphError(f"edge weight must be positive, got {alpha}")
    n = graph.n
    rows, cols = [], []
    for i, j in graph.edges:
        rows += [i, j]
        cols += [j, i]
    a = sp.coo_matrix((np.full(len(rows), alpha), (rows, cols)), shape=(n, n))
    a_tilde = (a + sp.identity(n)).tocsr()
    degrees = np.asarray(a_tilde.sum(axis=1)).ravel()
    d_inv_sqrt = sp.diags(1.0 / np.sqrt(degrees))
    a_hat = (d_inv_sqrt @ a_tilde @ d_inv_sqrt).tocsr()
    return NormalizedAdjacency(n=n, matrix=a_hat, degrees=degrees)


def batch_graphs(adjs: list[NormalizedAdjacency]) -> tuple[NormalizedAdjacency, list[int]]:
    """Pack graphs into one block-diagonal operator; returns (packed, node offsets)."""
    if not adjs:
        raise GraphError("cannot batch an empty list of graphs")
    offsets, total = [], 0
    for a in adjs:
        offsets.append(total)
        total += a.n
    matrix = sp.block_diag([a.matrix for a in adjs], format="csr")
    degrees = np.concatenate([a.degrees for a in adjs])
    return NormalizedAdjacency(n=total, matrix=matrix, degrees=degrees), offsets


# --- optional binary cache -------------------------------------------------
# Layout per entry: id length (uint32) + utf-8 id + n (uint32) + nnz (uint32)
# + nnz * (row uint32, col uint32, value float64), all little-endian.

def write_adjacency_cache(path: str, adjs: dict[str, NormalizedAdjacency]) -> None:
    with open(path, "wb") as f:
        for key, adj in adjs.items():
            raw = key.encode("utf-8")
            coo = adj.matrix.tocoo()
            f.write(struct.pack("<I", len(raw)) + raw)
            f.write(struct.pack("<II", adj.n, coo.nnz))
            for r, c, v in zip(coo.row, coo.col, coo.data):
                f.write(struct.pack("<IId", r, c, v))


def read_adjacency_cache(path: str) -> dict[str, NormalizedAdjacency]:
    out: dict[str, NormalizedAdjacency] = {}
    with open(path, "rb") as f:
        data = f.read()
    pos = 0
    while pos < len(data):
        (klen,) = struct.unpack_from("<I", data, pos); pos += 4
        key = data[pos:pos + klen].decode("utf-8"); pos += klen
        n, nnz = struct.unpack_from("<II", data, pos); pos += 8
        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        vals = np.empty(nnz, dtype=np.float64)
        for k in range(nnz):
            rows[k], cols[k], vals[k] = struct.unpack_from("<IId", data, pos)
            pos += 16
        matrix = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
        # recover D from the A_hat diagonal: A_hat_ii = 1 / D_ii
        degrees = 1.0 / matrix.diagonal()
        out[key] = NormalizedAdjacency(n=n, matrix=matrix, degrees=degrees)
    return out
