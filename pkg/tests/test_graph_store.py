import io
import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tempembed.errors import DataError, ParseError
from tempembed.graph_store import (
    SnapshotSeries,
    TemporalGraph,
    bin_snapshots,
    format_edge_list,
    pair_key,
    parse_edge_list,
    sample_negatives,
    temporal_split,
)


class TestParse:
    def test_basic(self):
        g = parse_edge_list("1 2 100\n2 3 200\n")
        assert g.num_nodes == 3 and g.num_edges == 2
        assert g.node_labels == ("1", "2", "3")
        assert g.ts.tolist() == [100.0, 200.0]

    def test_comments_commas_and_blank_lines(self):
        g = parse_edge_list(io.StringIO("# header\n\n5,9,1\n9 , 7, 2.5\n"))
        assert g.num_edges == 2
        assert g.ts.tolist() == [1.0, 2.5]

    def test_bad_node_id_has_line_number(self):
        with pytest.raises(ParseError, match="line 2"):
            parse_edge_list("1 2 3\nx 2 4\n")

    def test_negative_timestamp(self):
        with pytest.raises(ParseError, match="line 1"):
            parse_edge_list("1 2 -5\n")

    def test_bad_timestamp(self):
        with pytest.raises(ParseError):
            parse_edge_list("1 2 noon\n")

    def test_short_line(self):
        with pytest.raises(ParseError):
            parse_edge_list("1 2\n")

    def test_empty(self):
        with pytest.raises(DataError, match="no edges"):
            parse_edge_list("# nothing here\n")

    def test_undirected_canonical(self):
        g = parse_edge_list("2 1 0\n")
        assert (g.src[0], g.dst[0]) == (0, 1)
        d = parse_edge_list("2 1 0\n", directed=True)
        assert (d.src[0], d.dst[0]) == (0, 1)

    def test_round_trip(self):
        g = TemporalGraph(4, [0, 1, 2], [1, 2, 3], [0.0, 1.5, 7.0])
        assert parse_edge_list(format_edge_list(g)) == g

    @given(st.lists(st.tuples(st.integers(0, 9), st.integers(0, 9), st.integers(0, 10**6)), min_size=1, max_size=30))
    def test_round_trip_property(self, rows):
        text = "".join(f"{a} {b} {t}\n" for a, b, t in rows)
        g = parse_edge_list(text, directed=True)
        again = parse_edge_list(format_edge_list(g), directed=True)
        assert np.array_equal(again.src, g.src) and np.array_equal(again.ts, g.ts)

    def test_arrays_read_only(self):
        g = parse_edge_list("1 2 3\n")
        with pytest.raises(ValueError):
            g.src[0] = 5


class TestStats:
    def test_average_degree(self):
        g = TemporalGraph(4, [0, 1, 2], [1, 2, 3], [0, 0, 0])
        assert g.stats()["average_degree"] == 1.5
        d = TemporalGraph(4, [0, 1, 2], [1, 2, 3], [0, 0, 0], directed=True)
        assert d.stats()["average_degree"] == 0.75


class TestBinning:
    def test_count_one_per_edge(self):
        s = bin_snapshots(TemporalGraph(4, [0, 1, 2], [1, 2, 3], [1, 2, 3]), "count:3")
        assert s.num_snapshots == 3
        assert s.edge_bin.tolist() == [0, 1, 2]

    def test_all_same_time(self):
        s = bin_snapshots(TemporalGraph(4, [0, 1, 2], [1, 2, 3], [5, 5, 5]), "day")
        assert s.num_snapshots == 1

    def test_equal_time_never_split(self):
        s = bin_snapshots(TemporalGraph(4, [0, 1, 2, 0], [1, 2, 3, 3], [1, 2, 2, 3]), "count:4")
        assert s.edge_bin[1] == s.edge_bin[2]

    def test_count_boundaries(self):
        ts = np.arange(9, dtype=float)
        g = TemporalGraph(10, np.arange(9), np.arange(1, 10), ts)
        s = bin_snapshots(g, "count:3")
        assert s.boundaries.tolist() == [2.0, 5.0, 8.0]
        assert [int(s.edge_mask(k).sum()) for k in range(3)] == [3, 6, 9]

    def test_days_keep_empty_bins(self):
        day = 86400.0
        g = TemporalGraph(3, [0, 1], [1, 2], [0.0, 3 * day])
        s = bin_snapshots(g, "day")
        assert s.num_snapshots == 4
        assert s.edge_mask(1).sum() == s.edge_mask(0).sum() == 1

    def test_unknown_granularity(self):
        with pytest.raises(DataError):
            bin_snapshots(TemporalGraph(2, [0], [1], [0.0]), "fortnight")

    @given(st.lists(st.integers(0, 50), min_size=1, max_size=40), st.integers(1, 8))
    def test_cumulative_and_ordered(self, times, k):
        n = len(times) + 1
        g = TemporalGraph(n, np.arange(len(times)), np.arange(1, n), np.array(times, float))
        s = bin_snapshots(g, f"count:{k}")
        assert np.all(np.diff(s.boundaries) >= 0)
        # an edge at time t belongs to the first snapshot whose boundary reaches t
        for t, b in zip(g.ts, s.edge_bin):
            assert s.boundaries[b] >= t
            assert b == 0 or s.boundaries[b - 1] < t
        counts = [int(s.edge_mask(j).sum()) for j in range(s.num_snapshots)]
        assert counts == sorted(counts) and counts[-1] == g.num_edges

    def test_json_round_trip(self, small_series):
        doc = small_series.to_json()
        back = SnapshotSeries.from_json(doc)
        assert back.graph == small_series.graph
        assert np.array_equal(back.edge_bin, small_series.edge_bin)
        assert np.array_equal(back.boundaries, small_series.boundaries)

    def test_last_seen(self, small_series):
        rows, cols, last = small_series.last_seen(2)
        seen = {(int(r), int(c)): int(b) for r, c, b in zip(rows, cols, last)}
        assert seen[(0, 1)] == 0
        assert seen[(1, 2)] == 2
        assert (4, 5) in seen and seen[(4, 5)] == 2

    def test_truncate(self, small_series):
        t = small_series.truncate(1.0)
        assert t.num_snapshots == 2 and t.graph.num_edges == 4


def _chain(n):
    return TemporalGraph(n + 1, np.arange(n), np.arange(1, n + 1), np.arange(1, n + 1, dtype=float))


class TestSplit:
    def test_ten_edges(self):
        g = TemporalGraph(30, np.arange(0, 20, 2), np.arange(1, 20, 2), np.arange(10, dtype=float))
        sp = temporal_split(bin_snapshots(g, "index"), 0.7, seed=0)
        assert len(sp.train_positives) == 7 and len(sp.test_positives) == 3
        assert sp.pivot_time == 6.0

    def test_pivot_seventieth(self):
        sp = temporal_split(bin_snapshots(_chain(100), "count:10"), 0.7)
        assert sp.pivot_time == 70.0

    def test_all_same_time(self):
        g = TemporalGraph(5, [0, 1, 2], [1, 2, 3], [0.0, 0.0, 0.0])
        with pytest.raises(DataError, match="empty test"):
            temporal_split(bin_snapshots(g, "index"))

    def test_repeated_pairs_not_test_positives(self):
        g = TemporalGraph(8, [0, 2, 0, 4], [1, 3, 1, 5], [0.0, 1.0, 2.0, 3.0])
        sp = temporal_split(bin_snapshots(g, "index"), 0.5)
        assert sp.test_positives.tolist() == [[4, 5]]

    def test_negatives_clean_and_disjoint(self):
        g = _chain(40)
        sp = temporal_split(bin_snapshots(g, "count:5"), 0.7, seed=3)
        tr = set(pair_key(sp.train_negatives[:, 0], sp.train_negatives[:, 1], g.num_nodes, False).tolist())
        te = set(pair_key(sp.test_negatives[:, 0], sp.test_negatives[:, 1], g.num_nodes, False).tolist())
        allpos = set(g.pair_keys().tolist())
        assert not (tr & te) and not (tr & allpos) and not (te & allpos)
        assert len(tr) == len(sp.train_positives) and len(te) == len(sp.test_positives)

    def test_seed_deterministic(self):
        s = bin_snapshots(_chain(30), "count:5")
        a, b = temporal_split(s, seed=9), temporal_split(s, seed=9)
        assert np.array_equal(a.test_negatives, b.test_negatives)
        assert not np.array_equal(a.train_negatives, temporal_split(s, seed=10).train_negatives)

    def test_bad_fraction(self):
        with pytest.raises(DataError):
            temporal_split(bin_snapshots(_chain(5), "index"), 1.0)


class TestNegatives:
    def test_complete_graph_infeasible(self):
        g = TemporalGraph(3, [0, 0, 1], [1, 2, 2], [0, 0, 0])
        with pytest.raises(DataError):
            sample_negatives(g, 1, seed=0)

    def test_empty_graph_enumerates(self):
        g = TemporalGraph(3, np.empty(0, int), np.empty(0, int), np.empty(0))
        got = sample_negatives(g, 3, seed=0)
        assert sorted(map(tuple, got.tolist())) == [(0, 1), (0, 2), (1, 2)]

    def test_deterministic(self):
        g = _chain(20)
        assert np.array_equal(sample_negatives(g, 10, 4), sample_negatives(g, 10, 4))

    @settings(max_examples=40)
    @given(st.integers(4, 9), st.integers(0, 2**32), st.booleans())
    def test_purity(self, n, seed, directed):
        pairs = list(itertools.combinations(range(n), 2))[::3]
        g = TemporalGraph(n, [p[0] for p in pairs], [p[1] for p in pairs], [0.0] * len(pairs), directed)
        edges = set(pairs)
        total = n * (n - 1) if directed else n * (n - 1) // 2
        k = (total - len(edges)) // 2
        got = sample_negatives(g, k, seed)
        assert len({tuple(p) for p in got.tolist()}) == k
        for u, v in got.tolist():
            assert u != v and (u, v) not in edges
            if not directed:
                assert u < v
