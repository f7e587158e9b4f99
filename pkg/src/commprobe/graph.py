"""Retweet interaction graph, Louvain community detection, and community
grouping.

The graph is undirected and weighted: one edge per user pair, its weight the
number of retweet events between the two users in either direction.
Self-retweets are dropped. Louvain follows the standard two-phase scheme
(local moves, then aggregation) with deterministic tie-breaking so a given
(graph, seed) always yields the same partition.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional

from .corpus import PostStore

GROUP_NAMES = (
    "Pro Eating Disorder",
    "Keto & Diet",
    "Body Image",
    "Anti Eating Disorder",
    "Healthy Lifestyle & Weight Loss",
    "Weight Loss Drugs",
)

# Minimum modularity gain for a local move; smaller improvements are treated
# as floating-point noise so the pass terminates.
GAIN_EPS = 1e-9


class GraphError(Exception):
    pass


def _canon(u: str, v: str) -> tuple[str, str]:
    return (u, v) if u < v else (v, u)


class InteractionGraph:
    """Weighted undirected user graph; each unordered pair stored once."""

    def __init__(self, edges: Mapping[tuple[str, str], int] | None = None):
        self._edges: dict[tuple[str, str], int] = {}
        self._adj: dict[str, dict[str, int]] = {}
        if edges:
            for (u, v), w in edges.items():
                self.add_edge(u, v, w)

    def add_edge(self, u: str, v: str, weight: int = 1) -> None:
        if u == v:
            return  # self-retweets carry no structural information
        if weight < 1:
            raise GraphError("edge weight must be >= 1")
        key = _canon(u, v)
        self._edges[key] = self._edges.get(key, 0) + weight
        self._adj.setdefault(u, {})
        self._adj.setdefault(v, {})
        self._adj[u][v] = self._adj[u].get(v, 0) + weight
        self._adj[v][u] = self._adj[v].get(u, 0) + weight

    @property
    def nodes(self) -> set[str]:
        return set(self._adj)

    @property
    def edges(self) -> dict[tuple[str, str], int]:
        return dict(self._edges)

    @property
    def total_weight(self) -> int:
        return sum(self._edges.values())

    def __len__(self) -> int:
        return len(self._adj)

    def neighbors(self, u: str) -> dict[str, int]:
        return self._adj.get(u, {})

    def degree(self, u: str) -> int:
        return sum(self._adj.get(u, {}).values())

    def save(self, edges_path: str | Path, meta_path: str | Path | None = None) -> None:
        """Edge list as `u v weight` lines plus optional JSON metadata."""
        lines = [f"{u} {v} {w}" for (u, v), w in sorted(self._edges.items())]
        Path(edges_path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
        if meta_path is not None:
            meta = {
                "nodes": len(self),
                "edges": len(self._edges),
                "total_weight": self.total_weight,
            }
            Path(meta_path).write_text(
                json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
            )

    @classmethod
    def load(cls, edges_path: str | Path) -> "InteractionGraph":
        g = cls()
        for line in Path(edges_path).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            u, v, w = line.split()
            g.add_edge(u, v, int(w))
        return g


@dataclass(frozen=True)
class Partition:
    """Community assignment with dense integer ids, 0 = largest community."""

    assignment: dict[str, int]
    modularity_q: float

    @property
    def n_communities(self) -> int:
        return len(set(self.assignment.values())) if self.assignment else 0

    def members(self) -> dict[int, list[str]]:
        out: dict[int, list[str]] = {}
        for node, c in self.assignment.items():
            out.setdefault(c, []).append(node)
        for nodes in out.values():
            nodes.sort()
        return out

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.assignment, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )

    @classmethod
    def load(cls, path: str | Path, g: InteractionGraph) -> "Partition":
        assignment = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(assignment, modularity(g, assignment))


@dataclass(frozen=True)
class GroupedCommunity:
    """Named merge of related detected communities."""

    name: str
    member_community_ids: tuple[int, ...]
    profile: Optional[str] = None

    def __post_init__(self):
        if self.name not in GROUP_NAMES:
            raise GraphError(f"unknown group name {self.name!r}")


def build_graph(store: PostStore, binary_edges: bool = False) -> InteractionGraph:
    """Accumulate retweet events into the interaction graph.

    With binary_edges=True every interacting pair gets weight 1 regardless
    of how often they retweeted each other (parity switch; weighted is the
    default). A store with no retweet events yields an empty graph.
    """
    g = InteractionGraph()
    counts: dict[tuple[str, str], int] = {}
    for post in store:
        if not post.is_retweet or post.retweeted_author_id is None:
            continue
        if post.author_id == post.retweeted_author_id:
            continue
        key = _canon(post.author_id, post.retweeted_author_id)
        counts[key] = counts.get(key, 0) + 1
    for (u, v), w in counts.items():
        g.add_edge(u, v, 1 if binary_edges else w)
    return g


def modularity(g: InteractionGraph, assignment: Mapping[str, int]) -> float:
    """Newman-Girvan weighted modularity of a node->community assignment.

    Q = (1/2m) * sum_ij [A_ij - k_i k_j / 2m] delta(c_i, c_j)
    """
    if len(g) == 0:
        raise GraphError("modularity is undefined on an empty graph")
    for node in g.nodes:
        if node not in assignment:
            raise GraphError(f"node {node!r} missing from assignment")
    m = float(g.total_weight)
    intra: dict[int, float] = {}
    degsum: dict[int, float] = {}
    for (u, v), w in g.edges.items():
        if assignment[u] == assignment[v]:
            c = assignment[u]
            intra[c] = intra.get(c, 0.0) + w
    for node in g.nodes:
        c = assignment[node]
        degsum[c] = degsum.get(c, 0.0) + g.degree(node)
    q = 0.0
    for c in degsum:
        q += intra.get(c, 0.0) / m - (degsum[c] / (2.0 * m)) ** 2
    return q


def singleton_modularity(g: InteractionGraph) -> float:
    """Q of the all-singletons partition (louvain's guaranteed floor)."""
    return modularity(g, {node: i for i, node in enumerate(sorted(g.nodes))})


class _Level:
    """Working graph for one Louvain level; self-loops appear after aggregation."""

    def __init__(self, adj: list[dict[int, float]], loops: list[float]):
        self.adj = adj
        self.loops = loops
        self.n = len(adj)
        self.degree = [sum(nbrs.values()) + 2.0 * loops[i] for i, nbrs in enumerate(adj)]
        self.m = sum(sum(nbrs.values()) for nbrs in adj) / 2.0 + sum(loops)

    @classmethod
    def from_graph(cls, g: InteractionGraph, order: list[str]) -> "_Level":
        index = {node: i for i, node in enumerate(order)}
        adj: list[dict[int, float]] = [{} for _ in order]
        for (u, v), w in g.edges.items():
            adj[index[u]][index[v]] = float(w)
            adj[index[v]][index[u]] = float(w)
        return cls(adj, [0.0] * len(order))


def _move_gain(k_i_in: float, tot_c: float, k_i: float, m: float) -> float:
    """Modularity gain of inserting a detached node into a community."""
    return k_i_in / m - (tot_c * k_i) / (2.0 * m * m)


def _local_moves(level: _Level, rng: random.Random) -> tuple[list[int], bool]:
    """Phase one: greedy node moves until a full pass yields no improvement.

    Candidate communities are iterated in ascending id so that exact gain
    ties resolve to the lowest community id.
    """
    comm = list(range(level.n))
    tot = list(level.degree)
    order = list(range(level.n))
    rng.shuffle(order)
    moved_any = False
    improved = True
    while improved:
        improved = False
        for i in order:
            ki = level.degree[i]
            current = comm[i]
            links: dict[int, float] = {current: 0.0}
            for j, w in level.adj[i].items():
                links[comm[j]] = links.get(comm[j], 0.0) + w
            tot[current] -= ki
            stay_gain = _move_gain(links[current], tot[current], ki, level.m)
            best_c, best_gain = current, stay_gain
            for c in sorted(links):
                if c == current:
                    continue
                gain = _move_gain(links[c], tot[c], ki, level.m)
                if gain > best_gain:
                    best_c, best_gain = c, gain
            if best_c != current and best_gain - stay_gain > GAIN_EPS:
                comm[i] = best_c
                tot[best_c] += ki
                improved = True
                moved_any = True
            else:
                tot[current] += ki
    return comm, moved_any


def _aggregate(level: _Level, comm: list[int]) -> tuple[_Level, dict[int, int]]:
    """Phase two: collapse communities into super-nodes.

    Intra-community weight becomes the super-node's self-loop weight.
    Returns the new level and the community-label -> super-node map.
    """
    labels = sorted(set(comm))
    remap = {c: i for i, c in enumerate(labels)}
    n_new = len(labels)
    adj: list[dict[int, float]] = [{} for _ in range(n_new)]
    loops = [0.0] * n_new
    for i in range(level.n):
        ci = remap[comm[i]]
        loops[ci] += level.loops[i]
        for j, w in level.adj[i].items():
            if j < i:
                continue
            cj = remap[comm[j]]
            if ci == cj:
                loops[ci] += w
            else:
                adj[ci][cj] = adj[ci].get(cj, 0.0) + w
                adj[cj][ci] = adj[cj].get(ci, 0.0) + w
    return _Level(adj, loops), remap


def louvain(g: InteractionGraph, seed: int = 0) -> Partition:
    """Two-phase Louvain modularity maximization.

    Node visit order is shuffled by `seed`; exact gain ties go to the lowest
    community id, making runs reproducible. The returned partition's Q is
    never below the singleton partition's Q.
    """
    if len(g) == 0:
        raise GraphError("louvain requires a non-empty graph")
    names = sorted(g.nodes)
    rng = random.Random(seed)
    level = _Level.from_graph(g, names)
    node_pos = list(range(level.n))  # original node -> current super-node
    while True:
        comm, moved = _local_moves(level, rng)
        if not moved:
            break
        level, remap = _aggregate(level, comm)
        node_pos = [remap[comm[p]] for p in node_pos]
    # final labels: communities ranked by size desc, ties by smallest member
    groups: dict[int, list[str]] = {}
    for name, p in zip(names, node_pos):
        groups.setdefault(p, []).append(name)
    ranked = sorted(groups.items(), key=lambda kv: (-len(kv[1]), min(kv[1])))
    relabel = {old: new for new, (old, _) in enumerate(ranked)}
    assignment = {name: relabel[p] for name, p in zip(names, node_pos)}
    return Partition(assignment, modularity(g, assignment))


def top_k(
    p: Partition, k: int, store: PostStore | None = None
) -> list[dict]:
    """The k largest communities with sizes (and post counts when a store
    is supplied). Ties sort by smaller community id.
    """
    if k < 1:
        raise GraphError("k must be >= 1")
    sizes: dict[int, int] = {}
    for c in p.assignment.values():
        sizes[c] = sizes.get(c, 0) + 1
    post_counts: dict[int, int] = {}
    if store is not None:
        for post in store:
            c = p.assignment.get(post.author_id)
            if c is not None:
                post_counts[c] = post_counts.get(c, 0) + 1
    ranked = sorted(sizes.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
    return [
        {
            "community": c,
            "size": size,
            "posts": post_counts.get(c, 0) if store is not None else None,
        }
        for c, size in ranked
    ]


def group_communities(
    p: Partition, mapping: Mapping[str, Iterable[int]]
) -> tuple[list[GroupedCommunity], list[int]]:
    """Merge detected communities into named groups per a user mapping.

    Communities not covered by any group are returned as the excluded list
    (spam / off-topic clusters the analysis drops).
    """
    detected = set(p.assignment.values())
    seen: dict[int, str] = {}
    groups: list[GroupedCommunity] = []
    for name, ids in mapping.items():
        ids = tuple(int(i) for i in ids)
        for c in ids:
            if c not in detected:
                raise GraphError(f"group {name!r} references unknown community {c}")
            if c in seen:
                raise GraphError(
                    f"community {c} appears in both {seen[c]!r} and {name!r}"
                )
            seen[c] = name
        groups.append(GroupedCommunity(name=name, member_community_ids=ids))
    excluded = sorted(detected - set(seen))
    return groups, excluded


def echo_chamber_stats(g: InteractionGraph, p: Partition) -> dict[int, dict]:
    """Internal/external edge weight and internal fraction per community.

    A community with no incident edges gets fraction None (degenerate).
    """
    for node in g.nodes:
        if node not in p.assignment:
            raise GraphError(f"node {node!r} missing from assignment")
    internal: dict[int, float] = {}
    external: dict[int, float] = {}
    for c in set(p.assignment.values()):
        internal[c] = 0.0
        external[c] = 0.0
    for (u, v), w in g.edges.items():
        cu, cv = p.assignment[u], p.assignment[v]
        if cu == cv:
            internal[cu] += w
        else:
            external[cu] += w
            external[cv] += w
    out = {}
    for c in sorted(internal):
        total = internal[c] + external[c]
        out[c] = {
            "internal_weight": internal[c],
            "external_weight": external[c],
            "internal_fraction": internal[c] / total if total > 0 else None,
        }
    return out
