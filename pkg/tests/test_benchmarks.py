import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from genbo.aggregation import AggregationSpec, generality_table, true_generality
from genbo.benchmarks import (
    SplitSpec,
    grid_search_optimum,
    held_out_split,
    load_surface,
    normalized_generality_score,
    split_tasks,
    synthetic_surface,
    transferability_sweep,
    write_surface,
)
from genbo.core import Fingerprint, LookupSurface, MissingCellError, SurfaceFormatError, TaskPoint

AGG = AggregationSpec()
HEADER = "x_id,w_id,y,x_bits,w_bits\n"


def write(tmp_path, body, name="s.csv"):
    path = tmp_path / name
    path.write_text(HEADER + body)
    return path


class TestLoad:
    def test_two_by_two(self, tmp_path):
        path = write(tmp_path, "P1-B3,S07,0.25,a0,0f\nP1-B3,S08,0.5,a0,f0\n"
                               "P2-B1,S07,0.75,0c,0f\nP2-B1,S08,1.0,0c,f0\n")
        s = load_surface(path)
        assert s.resolve("P1-B3", "S07") == 0.25
        assert s.table.tolist() == [[0.25, 0.5], [0.75, 1.0]]
        assert s.parameter_points[0].features == Fingerprint([1, 0, 1, 0, 0, 0, 0, 0])

    def test_missing_cell_names_pair(self, tmp_path):
        path = write(tmp_path, "a,s,1,1,1\na,t,2,1,2\nb,s,3,2,1\n")
        with pytest.raises(MissingCellError, match=r"\(b, t\)"):
            load_surface(path)

    @pytest.mark.parametrize("body, match", [
        ("a,s,1,1,1\na,t,2,3,2\n", "inconsistent"),
        ("a,s,1,1,1\na,s,2,1,1\n", "duplicate"),
        ("a,s,high,1,1\n", "bad outcome"),
        ("a,s,nan,1,1\n", "non-finite"),
        ("a,s,1,zz,1\n", "malformed"),
        ("", "no data"),
    ])
    def test_format_errors(self, tmp_path, body, match):
        with pytest.raises(SurfaceFormatError, match=match):
            load_surface(write(tmp_path, body))

    def test_missing_column(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("x_id,w_id,y\na,s,1\n")
        with pytest.raises(SurfaceFormatError, match="missing columns"):
            load_surface(path)

    def test_round_trip(self, tmp_path):
        s = synthetic_surface(2, 5, 4, n_bits=30)
        path = tmp_path / "syn.csv"
        write_surface(s, path)
        before = path.read_bytes()
        t = load_surface(path)
        assert path.read_bytes() == before
        assert t.x_ids == s.x_ids and t.w_ids == s.w_ids
        assert np.array_equal(t.table, s.table)
        assert [p.features for p in t.parameter_points][:2] != []
        # hex pads to whole nibbles, so widths round up to a multiple of four
        assert len(t.parameter_points[0].features) == 4 * -(-60 // 4)


class TestSynthetic:
    def test_replay(self):
        a, b = synthetic_surface(5, 8, 6), synthetic_surface(5, 8, 6)
        assert np.array_equal(a.table, b.table)
        assert all(p.features == q.features for p, q in zip(a.parameter_points, b.parameter_points))
        assert a.meta == b.meta

    @pytest.mark.parametrize("shape", [(24, 8), (24, 16), (4, 3), (40, 20)])
    def test_low_average(self, shape):
        assert synthetic_surface(0, *shape).table.mean() < 0.25

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 30), st.integers(1, 12))
    def test_dominant_is_grid_optimum(self, seed, n_x, n_w):
        s = synthetic_surface(seed, n_x, n_w)
        assert grid_search_optimum(s, s.w_ids, AGG)[0] == s.meta["dominant"]
        assert len(s.meta["needles"]) == -(-n_x // 4)
        assert s.table.min() >= 0

    def test_needles_score_high(self):
        s = synthetic_surface(1, 24, 8)
        dom = s.x_index(s.meta["dominant"])
        assert np.sum(s.table[dom] >= 0.6) >= 5

    @pytest.mark.parametrize("kwargs", [dict(n_x=0), dict(needle_fraction=0.0),
                                        dict(noise_scale=-1.0)])
    def test_invalid(self, kwargs):
        args = dict(seed=0, n_x=4, n_w=3) | kwargs
        with pytest.raises(ValueError):
            synthetic_surface(**args)


def tasks_from(rows):
    return [TaskPoint(f"T{i}", Fingerprint(r)) for i, r in enumerate(rows)]


class TestSplits:
    def test_fps_defers_duplicate(self):
        tasks = tasks_from([[1, 1, 0, 0], [1, 1, 0, 0], [0, 0, 1, 1]])
        train, test = split_tasks(tasks, SplitSpec(2, "fps"))
        assert [t.id for t in train] == ["T0", "T2"]
        assert [t.id for t in test] == ["T1"]

    def test_average_prefers_the_similar_pair(self):
        tasks = tasks_from([[1, 1, 0, 0, 0], [0, 0, 0, 1, 1], [1, 1, 0, 0, 0]])
        train, _ = split_tasks(tasks, SplitSpec(2, "average"))
        assert sorted(t.id for t in train) == ["T0", "T2"]

    def test_random_replay(self):
        tasks = tasks_from(np.eye(8, dtype=int))
        a = split_tasks(tasks, SplitSpec(3, "random", 4))
        b = split_tasks(tasks, SplitSpec(3, "random", 4))
        assert a == b

    def test_unknown_method_lists_choices(self):
        with pytest.raises(ValueError, match=r"\{random, fps, average\}"):
            SplitSpec(2, "kmeans")

    def test_size_bounds(self):
        tasks = tasks_from(np.eye(3, dtype=int))
        for n in (0, 3):
            with pytest.raises(ValueError):
                split_tasks(tasks, SplitSpec(n))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 12), st.data(), st.sampled_from(["random", "fps", "average"]))
    def test_partition(self, n, data, method):
        rng = np.random.default_rng(n)
        tasks = tasks_from(rng.random((n, 20)) < 0.3)
        k = data.draw(st.integers(1, n - 1))
        train, test = split_tasks(tasks, SplitSpec(k, method, data.draw(st.integers(0, 99))))
        ids = [t.id for t in train] + [t.id for t in test]
        assert len(train) == k
        assert sorted(ids) == sorted(t.id for t in tasks)
        assert len(set(ids)) == n

    def test_held_out_split_partitions(self):
        s = synthetic_surface(0, 4, 10)
        pool, test = held_out_split(s, 3, 0.5)
        assert len(pool) == len(test) == 5
        assert {t.id for t in pool} | {t.id for t in test} == set(s.w_ids)


class TestGridSearch:
    def test_single_condition(self, surface_factory):
        s = surface_factory([[0.1, 0.2]])
        assert grid_search_optimum(s, s.w_ids, AGG) == ("C0", pytest.approx(0.15))

    @pytest.mark.parametrize("agg", [AGG, AggregationSpec("min"),
                                     AggregationSpec("threshold", threshold=0.5)])
    def test_dominates_every_condition(self, agg):
        s = synthetic_surface(3, 12, 6)
        _, best = grid_search_optimum(s, s.w_ids, agg)
        for x in s.x_ids:
            assert best >= true_generality(s, x, s.w_ids, agg)

    def test_ties_go_to_first(self, surface_factory):
        s = surface_factory([[0.2], [0.5], [0.5]])
        assert grid_search_optimum(s, s.w_ids, AGG)[0] == "C1"


class TestNormalizedScore:
    def test_extremes_and_midpoint(self, surface_factory):
        s = surface_factory([[0.2, 0.2], [0.6, 0.6], [1.0, 1.0]])
        assert normalized_generality_score(s, "C2", s.w_ids, AGG) == 1.0
        assert normalized_generality_score(s, "C0", s.w_ids, AGG) == 0.0
        assert normalized_generality_score(s, "C1", s.w_ids, AGG) == pytest.approx(0.5)

    def test_flat_test_set(self, surface_factory):
        s = surface_factory([[0.3], [0.3]])
        assert normalized_generality_score(s, "C1", s.w_ids, AGG) == 1.0

    @settings(max_examples=30, deadline=None)
    @given(st.floats(-10, 10), st.floats(0.1, 10), st.sampled_from(["mean", "min"]))
    def test_affine_invariance(self, shift, scale, kind):
        s = synthetic_surface(4, 6, 5)
        moved = LookupSurface(s.parameter_points, s.task_points, s.table * scale + shift)
        agg = AggregationSpec(kind)
        for x in s.x_ids:
            assert normalized_generality_score(moved, x, s.w_ids, agg) == pytest.approx(
                normalized_generality_score(s, x, s.w_ids, agg), abs=1e-9)


class TestSweep:
    def test_aligned_optimum_scores_one(self, surface_factory):
        table = np.random.default_rng(0).random((5, 8)) * 0.5
        table[3] = 0.9
        s = surface_factory(table)
        r = transferability_sweep(s, [3], AGG, n_splits=5)
        assert all(score == 1.0 for *_, score in r.rows)

    def test_row_layout(self):
        s = synthetic_surface(0, 8, 10)
        r = transferability_sweep(s, [1, 2, 4], AGG, n_splits=4)
        assert len(r.rows) == 3 * 3 * 4
        assert [m for m, *_ in r.summary] == ["random"] * 3 + ["fps"] * 3 + ["average"] * 3
        assert r.mean_score("fps", 2) == pytest.approx(
            np.mean([row[3] for row in r.rows if row[:2] == ("fps", 2)]))

    def test_planted_surface_rank_correlation(self):
        r = transferability_sweep(synthetic_surface(0, 24, 16), [1, 2, 4, 6], AGG, n_splits=30)
        assert r.rho["random"] > 0

    def test_sizes_beyond_pool(self):
        with pytest.raises(ValueError, match="exceed"):
            transferability_sweep(synthetic_surface(0, 4, 6), [3], AGG, n_splits=1)

    def test_generality_table_consistent(self):
        s = synthetic_surface(0, 4, 6)
        assert generality_table(s, s.w_ids[:2], AGG).shape == (4,)
