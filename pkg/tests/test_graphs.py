import numpy as np
import pytest

from seqlink import graphs
from seqlink.graphs import (
    AnchorSet,
    Graph,
    GraphFormatError,
    SyntheticSpec,
    generate_synthetic,
    load_anchors,
    load_edge_list,
    split_anchors,
    write_anchors,
    write_edge_list,
)


def write(tmp_path, name, lines):
    path = tmp_path / name
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# edge lists
# ---------------------------------------------------------------------------

def test_empty_file_gives_empty_graph(tmp_path):
    g = load_edge_list(write(tmp_path, "e.txt", []))
    assert g.node_count == 0
    assert g.edge_count == 0


def test_hand_parsed_degrees(tmp_path):
    g = load_edge_list(write(tmp_path, "e.txt", ["a b", "b c"]))
    assert g.node_count == 3
    deg = {g.node_ids[i]: g.degree(i) for i in range(3)}
    assert deg == {"a": 1, "b": 2, "c": 1}


def test_duplicate_lines_collapse(tmp_path):
    g = load_edge_list(write(tmp_path, "e.txt", ["a b", "b a", "a b"]))
    assert g.edge_count == 1


def test_comments_and_blank_lines_ignored(tmp_path):
    g = load_edge_list(write(tmp_path, "e.txt", ["# header", "", "a b"]))
    assert g.edge_count == 1


def test_malformed_line_reports_line_number(tmp_path):
    path = write(tmp_path, "e.txt", ["a b", "oops"])
    with pytest.raises(GraphFormatError, match=":2"):
        load_edge_list(path)


def test_self_loop_rejected(tmp_path):
    path = write(tmp_path, "e.txt", ["a a"])
    with pytest.raises(GraphFormatError, match="self-loop"):
        load_edge_list(path)


def test_degree_sum_is_twice_edge_count(tmp_path):
    rng = np.random.default_rng(0)
    lines = [f"n{rng.integers(20)} n{rng.integers(20, 40)}" for _ in range(60)]
    g = load_edge_list(write(tmp_path, "e.txt", lines))
    assert int(g.degrees().sum()) == 2 * g.edge_count
    g.validate()


def test_edge_list_round_trip(tmp_path):
    g = load_edge_list(write(tmp_path, "e.txt", ["a b", "b c", "c d"]))
    out = tmp_path / "copy.txt"
    write_edge_list(g, out)
    g2 = load_edge_list(out)
    assert sorted(g2.node_ids) == sorted(g.node_ids)
    edges = {(g.node_ids[i], g.node_ids[j]) for i, j in g.edges()}
    edges2 = {(g2.node_ids[i], g2.node_ids[j]) for i, j in g2.edges()}
    assert edges == edges2


# ---------------------------------------------------------------------------
# anchors
# ---------------------------------------------------------------------------

@pytest.fixture
def two_graphs(tmp_path):
    g_o = load_edge_list(write(tmp_path, "o.txt", ["a b", "b c"]))
    g_t = load_edge_list(write(tmp_path, "t.txt", ["x y", "y z"]))
    return g_o, g_t


def test_empty_anchor_file(tmp_path, two_graphs):
    anchors = load_anchors(write(tmp_path, "anc.txt", []), *two_graphs)
    assert len(anchors) == 0


def test_anchor_hand_parse(tmp_path, two_graphs):
    anchors = load_anchors(write(tmp_path, "anc.txt", ["a x", "b y"]), *two_graphs)
    assert anchors.pairs == [("a", "x"), ("b", "y")]


def test_anchor_one_to_one_violation(tmp_path, two_graphs):
    path = write(tmp_path, "anc.txt", ["a x", "a y"])
    with pytest.raises(GraphFormatError, match="'a'"):
        load_anchors(path, *two_graphs)


def test_anchor_unknown_label_named(tmp_path, two_graphs):
    path = write(tmp_path, "anc.txt", ["q x"])
    with pytest.raises(GraphFormatError, match="'q'"):
        load_anchors(path, *two_graphs)


def test_anchor_round_trip(tmp_path, two_graphs):
    anchors = AnchorSet([("a", "x"), ("c", "z")])
    out = tmp_path / "anc.txt"
    write_anchors(anchors, out)
    assert load_anchors(out, *two_graphs).pairs == anchors.pairs


# ---------------------------------------------------------------------------
# train/test split
# ---------------------------------------------------------------------------

def test_split_sizes():
    anchors = AnchorSet([(f"o{i}", f"t{i}") for i in range(10)])
    train, test = split_anchors(anchors, 0.6)
    assert (len(train), len(test)) == (6, 4)


def test_split_floor_on_single_pair():
    train, test = split_anchors(AnchorSet([("a", "x")]), 0.5)
    assert (len(train), len(test)) == (0, 1)


def test_split_sort_then_prefix():
    anchors = AnchorSet([("c", "3"), ("a", "1"), ("d", "4"), ("b", "2")])
    train, test = split_anchors(anchors, 0.5)
    assert train.originals() == ["a", "b"]
    assert test.originals() == ["c", "d"]


def test_split_is_partition_and_deterministic():
    anchors = AnchorSet([(f"o{i:02d}", f"t{i:02d}") for i in range(17)])
    train1, test1 = split_anchors(anchors, 0.3)
    train2, test2 = split_anchors(anchors, 0.3)
    assert train1.pairs == train2.pairs and test1.pairs == test2.pairs
    assert sorted(train1.pairs + test1.pairs) == sorted(anchors.pairs)
    assert not set(train1.pairs) & set(test1.pairs)


@pytest.mark.parametrize("ratio", [0.0, 1.0, -0.5, 2.0])
def test_split_ratio_validated(ratio):
    with pytest.raises(ValueError):
        split_anchors(AnchorSet([("a", "x")]), ratio)


# ---------------------------------------------------------------------------
# synthetic generation
# ---------------------------------------------------------------------------

def test_synthetic_deterministic():
    spec = SyntheticSpec(node_count=40, base_edge_prob=0.1, edge_overlap=0.8,
                         anchor_fraction=0.5, seed=7)
    g1o, g1t, a1 = generate_synthetic(spec)
    g2o, g2t, a2 = generate_synthetic(spec)
    assert g1o.edges() == g2o.edges()
    assert g1t.edges() == g2t.edges()
    assert a1.pairs == a2.pairs


def test_synthetic_full_overlap_isomorphic_under_anchors():
    spec = SyntheticSpec(node_count=30, base_edge_prob=0.15, edge_overlap=1.0,
                         anchor_fraction=1.0, seed=3)
    g_o, g_t, anchors = generate_synthetic(spec)
    assert g_o.edge_count == g_t.edge_count
    mapping = {o: t for o, t in anchors.pairs}
    for i in range(g_o.node_count):
        j = g_t.index_of[mapping[g_o.node_ids[i]]]
        assert g_o.degree(i) == g_t.degree(j)
    # adjacency itself transports across the anchor map
    edges_t = {tuple(sorted(e)) for e in g_t.edges()}
    for i, j in g_o.edges():
        ti = g_t.index_of[mapping[g_o.node_ids[i]]]
        tj = g_t.index_of[mapping[g_o.node_ids[j]]]
        assert tuple(sorted((ti, tj))) in edges_t


def test_synthetic_anchor_count():
    spec = SyntheticSpec(node_count=100, base_edge_prob=0.08, edge_overlap=0.95,
                         anchor_fraction=0.5, seed=1)
    _, _, anchors = generate_synthetic(spec)
    assert len(anchors) == 50


def test_synthetic_validates_inputs():
    with pytest.raises(ValueError):
        generate_synthetic(SyntheticSpec(node_count=1))
    with pytest.raises(ValueError):
        generate_synthetic(SyntheticSpec(edge_overlap=1.5))


def test_synthetic_sparse_graph_warns():
    spec = SyntheticSpec(node_count=50, base_edge_prob=0.005, edge_overlap=1.0,
                         anchor_fraction=1.0, seed=2)
    with pytest.warns(UserWarning, match="degree"):
        generate_synthetic(spec)


def test_synthetic_preferential_attachment_model():
    spec = SyntheticSpec(node_count=60, edge_overlap=0.9, anchor_fraction=1.0,
                         seed=4, model="pa", pa_edges_per_node=3)
    g_o, g_t, anchors = generate_synthetic(spec)
    assert g_o.node_count == 60 and g_t.node_count == 60
    assert len(anchors) == 60
    g_o.validate()
    g_t.validate()
    # degree-skew sanity: max degree well above the median
    deg = np.sort(g_o.degrees())
    assert deg[-1] >= 2 * max(deg[len(deg) // 2], 1)


def test_graph_from_edges_rejects_self_loop():
    with pytest.raises(GraphFormatError):
        Graph.from_edges(["a"], [("a", "a")])
