"""Graph containers, edge-list ingestion, splits, and synthetic generators."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


class GraphError(ValueError):
    """Malformed graph input or construction."""


@dataclass(frozen=True)
class Graph:
    """Immutable undirected simple graph with 0-based node indices.

    Edges are stored canonically: each pair as (min, max), sorted, no
    self-loops, no duplicates.
    """

    n: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.n < 1:
            raise GraphError(f"node count must be >= 1, got {self.n}")
        canon = set()
        for u, v in self.edges:
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise GraphError(f"edge ({u}, {v}) out of range for n={self.n}")
            if u == v:
                raise GraphError(f"self-loop at node {u}")
            canon.add((u, v) if u < v else (v, u))
        object.__setattr__(self, "edges", tuple(sorted(canon)))

    @property
    def m(self) -> int:
        return len(self.edges)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def has_edge(self, u: int, v: int) -> bool:
        if u > v:
            u, v = v, u
        return (u, v) in set(self.edges)

    def neighbors(self, u: int) -> list[int]:
        out = []
        for a, b in self.edges:
            if a == u:
                out.append(b)
            elif b == u:
                out.append(a)
        return sorted(out)


@dataclass(frozen=True)
class Dataset:
    """Graph plus dense node features and integer class labels."""

    graph: Graph
    features: np.ndarray  # (n, d) float64
    labels: np.ndarray  # (n,) int64, values in [0, num_classes)
    num_classes: int

    def __post_init__(self):
        n = self.graph.n
        feats = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if feats.ndim != 2 or feats.shape[0] != n:
            raise GraphError(f"features must be ({n}, d), got {feats.shape}")
        if labels.shape != (n,):
            raise GraphError(f"labels must have length {n}, got {labels.shape}")
        if labels.min(initial=0) < 0 or (labels.size and labels.max() >= self.num_classes):
            raise GraphError("labels must lie in [0, num_classes)")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)


@dataclass(frozen=True)
class SplitMask:
    """Disjoint boolean train/val/test masks covering all nodes."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    seed: int

    def __post_init__(self):
        tr = np.asarray(self.train, dtype=bool)
        va = np.asarray(self.val, dtype=bool)
        te = np.asarray(self.test, dtype=bool)
        if not (tr.shape == va.shape == te.shape) or tr.ndim != 1:
            raise GraphError("masks must be 1-d and equally sized")
        if np.any(tr & va) or np.any(tr & te) or np.any(va & te):
            raise GraphError("masks must be pairwise disjoint")
        if not np.all(tr | va | te):
            raise GraphError("masks must cover every node")
        object.__setattr__(self, "train", tr)
        object.__setattr__(self, "val", va)
        object.__setattr__(self, "test", te)

    @property
    def n(self) -> int:
        return self.train.shape[0]

    def to_json(self) -> dict:
        return {
            "seed": int(self.seed),
            "train": np.flatnonzero(self.train).tolist(),
            "val": np.flatnonzero(self.val).tolist(),
            "test": np.flatnonzero(self.test).tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SplitMask":
        idx = {k: np.asarray(obj[k], dtype=np.int64) for k in ("train", "val", "test")}
        n = int(max((a.max(initial=-1) for a in idx.values())) + 1)
        masks = {}
        for k, a in idx.items():
            mask = np.zeros(n, dtype=bool)
            mask[a] = True
            masks[k] = mask
        return cls(masks["train"], masks["val"], masks["test"], seed=int(obj["seed"]))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path) -> "SplitMask":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def load_edge_list(path) -> Graph:
    """Parse a whitespace-separated edge list file into a Graph.

    Lines starting with '#' are comments; an optional '#nodes N' header
    fixes the node count (otherwise max index + 1 is used). Reversed and
    duplicate edges collapse to one; self-loops are rejected.
    """
    header_n = None
    edges = []
    max_idx = -1
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 2 and parts[0].lower() == "nodes":
                    try:
                        header_n = int(parts[1])
                    except ValueError:
                        raise GraphError(f"{path}:{lineno}: bad node-count header {line!r}")
                continue
            parts = line.split()
            if len(parts) != 2:
                raise GraphError(f"{path}:{lineno}: expected 'u v', got {line!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise GraphError(f"{path}:{lineno}: non-integer endpoint in {line!r}")
            if u < 0 or v < 0:
                raise GraphError(f"{path}:{lineno}: negative node index in {line!r}")
            if u == v:
                raise GraphError(f"{path}:{lineno}: self-loop at node {u}")
            edges.append((u, v))
            max_idx = max(max_idx, u, v)
    if header_n is None:
        if not edges:
            raise GraphError(f"{path}: empty edge list and no '#nodes N' header")
        n = max_idx + 1
    else:
        n = header_n
        if max_idx >= n:
            raise GraphError(f"{path}: edge index {max_idx} exceeds header node count {n}")
    return Graph(n, tuple(edges))


def write_edge_list(g: Graph, path) -> None:
    """Write a graph in the edge-list format understood by load_edge_list."""
    with open(path, "w") as fh:
        fh.write(f"#nodes {g.n}\n")
        for u, v in g.edges:
            fh.write(f"{u} {v}\n")


def load_features_csv(path) -> np.ndarray:
    """Load an n x d headerless CSV of real-valued node features."""
    feats = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    return feats


def load_labels(path) -> np.ndarray:
    """Load one integer class label per line."""
    labels = np.loadtxt(path, dtype=np.int64, ndmin=1)
    return labels


def write_features_csv(features: np.ndarray, path) -> None:
    np.savetxt(path, np.asarray(features, dtype=np.float64), delimiter=",")


def write_labels(labels: np.ndarray, path) -> None:
    np.savetxt(path, np.asarray(labels, dtype=np.int64), fmt="%d")


def load_dataset(edges_path, features_path, labels_path) -> Dataset:
    g = load_edge_list(edges_path)
    feats = load_features_csv(features_path)
    labels = load_labels(labels_path)
    return Dataset(g, feats, labels, num_classes=int(labels.max()) + 1)


def _inv_sqrt_degrees(g: Graph) -> np.ndarray:
    deg = g.degrees().astype(np.float64)
    inv = np.zeros(g.n, dtype=np.float64)
    nz = deg > 0
    # isolated nodes keep 0 => zero row/col in the normalized adjacency
    inv[nz] = 1.0 / np.sqrt(deg[nz])
    return inv


def normalized_adjacency(g: Graph) -> np.ndarray:
    """Dense symmetrically normalized adjacency D^{-1/2} A D^{-1/2}.

    Exactly symmetric in stored values; isolated nodes contribute zero
    rows/columns; the spectrum lies in [-1, 1].
    """
    inv = _inv_sqrt_degrees(g)
    a = np.zeros((g.n, g.n), dtype=np.float64)
    for u, v in g.edges:
        a[u, v] = 1.0
        a[v, u] = 1.0
    # outer product first keeps (i, j) and (j, i) bitwise identical
    return a * np.outer(inv, inv)


def normalized_adjacency_sparse(g: Graph) -> sp.csr_array:
    """CSR form of the normalized adjacency (same values as the dense one)."""
    inv = _inv_sqrt_degrees(g)
    rows = np.empty(2 * g.m, dtype=np.int64)
    cols = np.empty(2 * g.m, dtype=np.int64)
    vals = np.empty(2 * g.m, dtype=np.float64)
    for i, (u, v) in enumerate(g.edges):
        w = inv[u] * inv[v]
        rows[2 * i], cols[2 * i], vals[2 * i] = u, v, w
        rows[2 * i + 1], cols[2 * i + 1], vals[2 * i + 1] = v, u, w
    return sp.csr_array(sp.coo_array((vals, (rows, cols)), shape=(g.n, g.n)))


def make_splits(n: int, seed: int) -> SplitMask:
    """Deterministic 60/20/20 node split from a seeded permutation."""
    if n < 5:
        raise GraphError(f"need n >= 5 to split, got {n}")
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(round(0.6 * n))
    n_val = int(round(0.2 * n))
    train = np.zeros(n, dtype=bool)
    val = np.zeros(n, dtype=bool)
    test = np.zeros(n, dtype=bool)
    train[perm[:n_train]] = True
    val[perm[n_train : n_train + n_val]] = True
    test[perm[n_train + n_val :]] = True
    return SplitMask(train, val, test, seed=seed)


def duplicate_subgraph(j: Graph, h_nodes) -> Graph:
    """Mirror a subgraph: add one twin q_i per listed node p_i.

    Twins replicate the internal edges among the listed nodes and every
    edge from a listed node to the rest of the graph; no edge joins a
    node to its own twin. When the induced adjacency of the listed nodes
    is singular, the result gains eigenvalue 0 of the normalized
    adjacency with an eigenvector supported on the (p_i, q_i) pairs and
    antisymmetric across each pair.
    """
    h = list(h_nodes)
    if len(set(h)) != len(h):
        raise GraphError("duplicate node in h_nodes")
    for p in h:
        if not (0 <= p < j.n):
            raise GraphError(f"node {p} out of range for n={j.n}")
    if not h:
        return j
    twin = {p: j.n + i for i, p in enumerate(h)}
    h_set = set(h)
    new_edges = list(j.edges)
    for u, v in j.edges:
        if u in h_set and v in h_set:
            new_edges.append((twin[u], twin[v]))  # mirrored internal edge
        elif u in h_set:
            new_edges.append((twin[u], v))
        elif v in h_set:
            new_edges.append((u, twin[v]))
    return Graph(j.n + len(h), tuple(new_edges))


def _synth_graph(n: int, rng: np.random.Generator) -> tuple[Graph, int]:
    """Base graph of linked even cycles, each then mirrored once.

    A 4k-cycle adjacency block is singular with a two-dimensional kernel
    supported on alternating nodes, so each mirrored cycle contributes two
    zero eigenvalues whose eigenvectors spread over cycle+twin nodes.
    Mixing 4-cycles with 8-cycles keeps the multiplicity of eigenvalue 0
    at n/5 or above while making most kernel supports wide.
    """
    t8 = n // 40
    t4 = max((n - 16 * t8) // 8, 0)
    r = n - 8 * t4 - 16 * t8
    cycles = [8] * t8 + [4] * t4
    starts = []
    pos = 0
    edges = []
    for size in cycles:
        starts.append(pos)
        for i in range(size):
            edges.append((pos + i, pos + (i + 1) % size))
        pos += size
    n_base = pos + r  # r filler nodes keep the requested total
    # ring of unit anchors keeps the graph connected
    anchors = starts + list(range(pos, n_base))
    for i in range(len(anchors)):
        u, v = anchors[i], anchors[(i + 1) % len(anchors)]
        if u != v:
            edges.append((u, v))
    # cross-unit chords thicken the bulk spectrum; never inside a cycle
    unit_of = np.zeros(n_base, dtype=np.int64)
    for u_idx, (start, size) in enumerate(zip(starts, cycles)):
        unit_of[start : start + size] = u_idx
    unit_of[pos:] = len(cycles) + np.arange(r)
    n_chords = n_base
    tries = 0
    added = 0
    existing = {tuple(sorted(e)) for e in edges}
    while added < n_chords and tries < 20 * n_chords:
        tries += 1
        u, v = rng.integers(0, n_base, size=2)
        if u == v or unit_of[u] == unit_of[v]:
            continue
        key = (min(u, v), max(u, v))
        if key in existing:
            continue
        existing.add(key)
        edges.append((int(u), int(v)))
        added += 1
    g = Graph(n_base, tuple(edges))
    for start, size in zip(starts, cycles):
        g = duplicate_subgraph(g, list(range(start, start + size)))
    return g, len(cycles)


def synth_spectral_dataset(n: int, seed: int, noise: float, feature_dim: int = 32) -> Dataset:
    """Synthetic node-classification task carried by the zero eigenspace.

    Builds a graph whose eigenvalue-0 multiplicity is at least n/5 via
    repeated subgraph mirroring, draws Gaussian features, and labels each
    node by the sign of a fixed random vector projected onto the zero
    eigenspace. A `noise` fraction of labels is flipped. Low-degree
    polynomial filters cannot isolate the zero band, so the labels reward
    piecewise-constant filtering.
    """
    from specband.spectral import eigendecompose, grouping_tolerance

    if n < 20:
        raise GraphError(f"need n >= 20, got {n}")
    if not 0.0 <= noise < 1.0:
        raise GraphError(f"noise fraction must be in [0, 1), got {noise}")
    rng = np.random.default_rng(seed)
    graph, _ = _synth_graph(n, rng)
    spec = eigendecompose(normalized_adjacency(graph))
    tol = grouping_tolerance(spec)
    zero_band = np.abs(spec.eigenvalues) <= tol
    u0 = spec.eigenvectors[:, zero_band]
    z = rng.standard_normal(n)
    proj = u0 @ (u0.T @ z)
    labels = (proj > 0.0).astype(np.int64)
    n_flip = int(round(noise * n))
    if n_flip:
        flip = rng.choice(n, size=n_flip, replace=False)
        labels[flip] = 1 - labels[flip]
    features = rng.standard_normal((n, feature_dim))
    return Dataset(graph, features, labels, num_classes=2)
