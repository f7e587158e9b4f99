"""Graph construction, modularity, Louvain, grouping, and echo-chamber stats.

The modularity oracle here is an independent brute-force double sum over all
node pairs, and optimal partitions come from exhaustive enumeration of all
set partitions (restricted growth strings); neither shares code with the
implementation under test.
"""

import random
from datetime import datetime, timezone

import pytest

from commprobe.corpus import Post, PostStore
from commprobe.graph import (
    GraphError,
    InteractionGraph,
    Partition,
    build_graph,
    echo_chamber_stats,
    group_communities,
    louvain,
    modularity,
    singleton_modularity,
    top_k,
)

U = "u" + "0" * 15  # pseudonym prefix helper


def pseudo(i: int) -> str:
    return f"u{i:016x}"


def make_post(pid, author, retweeted=None):
    return Post(
        post_id=pid,
        author_id=author,
        text="ketodiet placeholder",
        created_at=datetime(2022, 10, 1, tzinfo=timezone.utc),
        is_retweet=retweeted is not None,
        retweeted_author_id=retweeted,
    )


def clique(g, members):
    for i, u in enumerate(members):
        for v in members[i + 1 :]:
            g.add_edge(u, v)


def two_cliques_bridged():
    g = InteractionGraph()
    left = [f"a{i}" for i in range(5)]
    right = [f"b{i}" for i in range(5)]
    clique(g, left)
    clique(g, right)
    g.add_edge(left[0], right[0])
    return g, left, right


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------


def brute_modularity(g: InteractionGraph, assignment) -> float:
    """Direct double sum over all ordered node pairs."""
    nodes = sorted(g.nodes)
    a = {(u, v): 0.0 for u in nodes for v in nodes}
    for (u, v), w in g.edges.items():
        a[(u, v)] += w
        a[(v, u)] += w
    k = {u: sum(a[(u, v)] for v in nodes) for u in nodes}
    m = float(g.total_weight)
    q = 0.0
    for u in nodes:
        for v in nodes:
            if assignment[u] == assignment[v]:
                q += a[(u, v)] - k[u] * k[v] / (2.0 * m)
    return q / (2.0 * m)


def all_partitions(nodes):
    """Every set partition, as restricted growth label strings."""
    n = len(nodes)

    def rec(i, labels, mx):
        if i == n:
            yield dict(zip(nodes, labels))
            return
        for b in range(mx + 2):
            yield from rec(i + 1, labels + [b], max(mx, b))

    yield from rec(0, [], -1)


def optimal_q(g: InteractionGraph) -> float:
    """Exhaustive maximum of modularity; fast community-sum form per
    candidate, validated at the optimum against the double-sum oracle."""
    nodes = sorted(g.nodes)
    idx = {u: i for i, u in enumerate(nodes)}
    edges = [(idx[u], idx[v], w) for (u, v), w in g.edges.items()]
    deg = [0.0] * len(nodes)
    for i, j, w in edges:
        deg[i] += w
        deg[j] += w
    m = float(g.total_weight)
    best_q, best_labels = float("-inf"), None
    for part in all_partitions(list(range(len(nodes)))):
        labels = [part[i] for i in range(len(nodes))]
        intra = {}
        for i, j, w in edges:
            if labels[i] == labels[j]:
                intra[labels[i]] = intra.get(labels[i], 0.0) + w
        degsum = {}
        for i, d in enumerate(deg):
            degsum[labels[i]] = degsum.get(labels[i], 0.0) + d
        q = sum(intra.get(c, 0.0) / m - (degsum[c] / (2 * m)) ** 2 for c in degsum)
        if q > best_q:
            best_q, best_labels = q, labels
    check = brute_modularity(g, {u: best_labels[idx[u]] for u in nodes})
    assert abs(check - best_q) < 1e-12
    return best_q


def random_graph(rng, max_nodes=8):
    n = rng.randint(2, max_nodes)
    nodes = [f"n{i}" for i in range(n)]
    g = InteractionGraph()
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < 0.45:
                g.add_edge(nodes[i], nodes[j], rng.randint(1, 4))
    if len(g) == 0:
        g.add_edge(nodes[0], nodes[1])
    return g


# ---------------------------------------------------------------------------
# build_graph
# ---------------------------------------------------------------------------


class TestBuildGraph:
    def test_bidirectional_events_accumulate(self):
        a, b = pseudo(1), pseudo(2)
        store = PostStore(
            [
                make_post("p1", a, retweeted=b),
                make_post("p2", a, retweeted=b),
                make_post("p3", b, retweeted=a),
            ]
        )
        g = build_graph(store)
        assert g.edges == {tuple(sorted((a, b))): 3}

    def test_self_retweet_dropped(self):
        a = pseudo(1)
        g = build_graph(PostStore([make_post("p1", a, retweeted=a)]))
        assert len(g) == 0

    def test_empty_store_empty_graph(self):
        g = build_graph(PostStore([]))
        assert len(g) == 0
        assert g.total_weight == 0

    def test_binary_edges_switch(self):
        a, b = pseudo(1), pseudo(2)
        store = PostStore(
            [make_post("p1", a, retweeted=b), make_post("p2", a, retweeted=b)]
        )
        assert build_graph(store, binary_edges=True).total_weight == 1
        assert build_graph(store).total_weight == 2

    def test_isolated_authors_excluded(self):
        a, b, c = pseudo(1), pseudo(2), pseudo(3)
        store = PostStore(
            [make_post("p1", a, retweeted=b), make_post("p2", c)]  # c never retweets
        )
        assert build_graph(store).nodes == {a, b}


# ---------------------------------------------------------------------------
# modularity
# ---------------------------------------------------------------------------


class TestModularity:
    def test_single_community_is_zero(self):
        g, left, right = two_cliques_bridged()
        q = modularity(g, {u: 0 for u in g.nodes})
        assert abs(q) < 1e-12

    def test_two_disconnected_cliques_half(self):
        g = InteractionGraph()
        clique(g, [f"a{i}" for i in range(4)])
        clique(g, [f"b{i}" for i in range(4)])
        assignment = {u: 0 if u.startswith("a") else 1 for u in g.nodes}
        assert abs(modularity(g, assignment) - 0.5) < 1e-12

    def test_bridged_cliques_match_double_sum_oracle(self):
        g, left, right = two_cliques_bridged()
        assignment = {u: 0 if u in left else 1 for u in g.nodes}
        assert abs(modularity(g, assignment) - brute_modularity(g, assignment)) < 1e-12

    def test_random_graphs_match_oracle(self):
        rng = random.Random(5)
        for _ in range(20):
            g = random_graph(rng)
            nodes = sorted(g.nodes)
            assignment = {u: rng.randint(0, 3) for u in nodes}
            assert abs(modularity(g, assignment) - brute_modularity(g, assignment)) < 1e-12

    def test_relabel_invariance(self):
        rng = random.Random(6)
        g = random_graph(rng)
        assignment = {u: rng.randint(0, 2) for u in g.nodes}
        q1 = modularity(g, assignment)
        relabeled = {u: c + 17 for u, c in assignment.items()}
        assert modularity(g, relabeled) == pytest.approx(q1, abs=1e-15)

    def test_missing_node_errors(self):
        g, left, right = two_cliques_bridged()
        partial = {u: 0 for u in list(g.nodes)[:-1]}
        with pytest.raises(GraphError):
            modularity(g, partial)

    def test_empty_graph_errors(self):
        with pytest.raises(GraphError):
            modularity(InteractionGraph(), {})


# ---------------------------------------------------------------------------
# louvain
# ---------------------------------------------------------------------------


class TestLouvain:
    def test_recovers_bridged_cliques_any_seed(self):
        g, left, right = two_cliques_bridged()
        expected_q = optimal_q(g)
        for seed in range(5):
            p = louvain(g, seed=seed)
            assert p.n_communities == 2
            assert len({p.assignment[u] for u in left}) == 1
            assert len({p.assignment[u] for u in right}) == 1
            assert abs(p.modularity_q - expected_q) < 1e-12

    def test_triangle_single_community(self):
        g = InteractionGraph()
        clique(g, ["a", "b", "c"])
        best = optimal_q(g)
        p = louvain(g, seed=0)
        assert p.n_communities == 1
        assert abs(p.modularity_q - 0.0) < 1e-12
        assert abs(best - 0.0) < 1e-12  # one community is the optimum

    def test_single_edge_merges(self):
        g = InteractionGraph()
        g.add_edge("a", "b")
        p = louvain(g, seed=3)
        assert p.n_communities == 1
        assert abs(singleton_modularity(g) - (-0.5)) < 1e-12

    def test_q_matches_independent_recomputation(self):
        rng = random.Random(7)
        for _ in range(10):
            g = random_graph(rng)
            p = louvain(g, seed=rng.randint(0, 1000))
            assert abs(p.modularity_q - brute_modularity(g, p.assignment)) < 1e-12

    def test_never_below_singleton_q(self):
        rng = random.Random(8)
        for _ in range(15):
            g = random_graph(rng)
            floor = singleton_modularity(g)
            for seed in (0, 1, 2):
                assert louvain(g, seed=seed).modularity_q >= floor - 1e-12

    def test_never_exceeds_global_optimum(self):
        rng = random.Random(9)
        for _ in range(8):
            g = random_graph(rng, max_nodes=8)
            best = optimal_q(g)
            assert louvain(g, seed=0).modularity_q <= best + 1e-12

    def test_dense_ids_largest_first(self):
        g, left, right = two_cliques_bridged()
        g.add_edge("c0", "c1")  # extra 2-node community
        p = louvain(g, seed=0)
        ids = sorted(set(p.assignment.values()))
        assert ids == list(range(p.n_communities))
        sizes = [len(v) for _, v in sorted(p.members().items())]
        assert sizes == sorted(sizes, reverse=True)

    def test_deterministic_given_seed(self):
        g, *_ = two_cliques_bridged()
        assert louvain(g, seed=42).assignment == louvain(g, seed=42).assignment

    def test_empty_graph_errors(self):
        with pytest.raises(GraphError):
            louvain(InteractionGraph(), seed=0)


# ---------------------------------------------------------------------------
# top_k / grouping / echo chambers
# ---------------------------------------------------------------------------


def make_partition(sizes):
    assignment = {}
    n = 0
    for c, size in enumerate(sizes):
        for _ in range(size):
            assignment[pseudo(n)] = c
            n += 1
    return Partition(assignment, 0.0)


class TestTopK:
    def test_k_larger_than_c_returns_all(self):
        p = make_partition([3, 2])
        assert len(top_k(p, 10)) == 2

    def test_tie_break_by_smaller_id(self):
        p = make_partition([10, 10, 3])
        rows = top_k(p, 2)
        assert [r["community"] for r in rows] == [0, 1]

    def test_post_counts_from_store(self):
        p = make_partition([2, 1])
        posts = [make_post(f"p{i}", pseudo(0)) for i in range(3)]
        posts.append(make_post("p9", pseudo(2)))
        rows = top_k(p, 5, PostStore(posts))
        assert rows[0] == {"community": 0, "size": 2, "posts": 3}
        assert rows[1] == {"community": 1, "size": 1, "posts": 1}

    def test_k_below_one_errors(self):
        with pytest.raises(GraphError):
            top_k(make_partition([1]), 0)


class TestGrouping:
    def test_mapping_emits_groups(self):
        p = make_partition([5, 4, 3, 2, 1, 1, 1, 1, 1, 1])
        groups, excluded = group_communities(p, {"Pro Eating Disorder": [0, 7, 8, 9]})
        assert len(groups) == 1
        assert groups[0].member_community_ids == (0, 7, 8, 9)
        assert excluded == [1, 2, 3, 4, 5, 6]

    def test_empty_mapping_excludes_all(self):
        p = make_partition([2, 1])
        groups, excluded = group_communities(p, {})
        assert groups == []
        assert excluded == [0, 1]

    def test_unknown_id_errors(self):
        p = make_partition([2, 1])
        with pytest.raises(GraphError):
            group_communities(p, {"Body Image": [99]})

    def test_overlap_errors(self):
        p = make_partition([2, 1])
        with pytest.raises(GraphError):
            group_communities(p, {"Body Image": [0], "Keto & Diet": [0, 1]})

    def test_unknown_group_name_errors(self):
        p = make_partition([2])
        with pytest.raises(GraphError):
            group_communities(p, {"Totally Novel Group": [0]})


class TestEchoChamber:
    def test_disconnected_cliques_fully_internal(self):
        g = InteractionGraph()
        clique(g, ["a0", "a1", "a2"])
        clique(g, ["b0", "b1", "b2"])
        p = Partition({u: 0 if u.startswith("a") else 1 for u in g.nodes}, 0.0)
        stats = echo_chamber_stats(g, p)
        assert stats[0]["internal_fraction"] == 1.0
        assert stats[1]["internal_fraction"] == 1.0

    def test_star_split_hand_count(self):
        g = InteractionGraph()
        for leaf in ("l1", "l2", "l3", "l4"):
            g.add_edge("s", leaf)
        p = Partition({"s": 0, "l1": 0, "l2": 0, "l3": 1, "l4": 1}, 0.0)
        stats = echo_chamber_stats(g, p)
        assert stats[0] == {
            "internal_weight": 2.0,
            "external_weight": 2.0,
            "internal_fraction": 0.5,
        }
        assert stats[1]["internal_fraction"] == 0.0

    def test_community_with_no_edges_is_undefined(self):
        g = InteractionGraph()
        g.add_edge("a", "b")
        p = Partition({"a": 0, "b": 0, "ghost": 1}, 0.0)
        stats = echo_chamber_stats(g, p)
        assert stats[1]["internal_fraction"] is None
