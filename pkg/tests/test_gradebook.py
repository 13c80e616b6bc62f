"""Gradebook CSV reading, writing and the participation filter."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdpl.errors import ValidationError
from pdpl.gradebook import (
    Gradebook,
    filter_participation,
    is_gradebook_file,
    load_gradebook,
    write_gradebook,
)
from pdpl.sim import SimConfig, simulate

HEADER = "student_id,course,session,pre,post,sheet_grade,partner_id\n"


def write(tmp_path, body, header=HEADER, name="gb.csv"):
    path = tmp_path / name
    path.write_text(header + body)
    return path


def roster(n_students, attended_sessions, n_sessions=7):
    """Gradebook where student i attends the first ``attended_sessions[i]`` sessions."""
    pre = np.full((n_students, n_sessions), np.nan)
    for i, k in enumerate(attended_sessions):
        pre[i, :k] = 1.0
    post = np.where(np.isnan(pre), np.nan, 1.5)
    return Gradebook(
        students=[f"u{i:03d}" for i in range(n_students)], courses=["c"] * n_students,
        sessions=list(range(1, n_sessions + 1)), pre=pre, post=post,
        sheet=np.full(pre.shape, np.nan), partner=np.full(pre.shape, None, dtype=object),
    )


class TestLoad:
    def test_two_by_two(self, tmp_path):
        p = write(tmp_path, "a,c1,1,1,2,2,b\nb,c1,1,0.5,1,2,a\na,c1,2,1,1.5,1,b\nb,c1,2,0,1,2,a\n")
        gb = load_gradebook(p)
        assert gb.students == ["a", "b"] and gb.sessions == [1, 2]
        assert gb.pre.tolist() == [[1.0, 1.0], [0.5, 0.0]]
        assert gb.pre_matrix().mask.all() and gb.post_matrix().mask.all()

    def test_empty_cell_is_missing(self, tmp_path):
        p = write(tmp_path, "a,c1,1,,2,2,\n")
        gb = load_gradebook(p)
        assert not gb.pre_matrix().mask[0, 0] and gb.post_matrix().mask[0, 0]
        assert gb.attended[0, 0]

    @pytest.mark.parametrize("body, match", [
        ("a,c1,1,x,1,1,\n", "line 2"),
        ("a,c1,1,2.5,1,1,\n", "outside"),
        ("a,c1,zero,1,1,1,\n", "session"),
        ("a,c1,1,1,1,1,\na,c1,1,1,1,1,\n", "duplicate"),
        (",c1,1,1,1,1,\n", "student_id"),
        ("a,c1,1,1,1\n", "fields"),
    ])
    def test_invalid_rows(self, tmp_path, body, match):
        with pytest.raises(ValidationError, match=match):
            load_gradebook(write(tmp_path, body))

    def test_missing_column(self, tmp_path):
        with pytest.raises(ValidationError, match="missing column"):
            load_gradebook(write(tmp_path, "a,c,1\n", header="student_id,course,session\n"))

    def test_unknown_column(self, tmp_path):
        with pytest.raises(ValidationError, match="unknown column"):
            load_gradebook(write(tmp_path, "a,c,1,1,1,1,,x\n", header=HEADER.strip() + ",mood\n"))

    def test_bad_ordinal(self, tmp_path):
        with pytest.raises(ValidationError, match="self_assess"):
            load_gradebook(write(tmp_path, "a,c,1,1,1,1,,huge\n", header=HEADER.strip() + ",self_assess\n"))

    def test_no_rows(self, tmp_path):
        with pytest.raises(ValidationError, match="no data"):
            load_gradebook(write(tmp_path, ""))

    def test_same_id_in_two_courses(self, tmp_path):
        gb = load_gradebook(write(tmp_path, "a,c1,1,1,1,1,\na,c2,1,0,1,1,\n"))
        assert gb.keys() == [("c1", "a"), ("c2", "a")]
        assert gb.course_groups() == {"c1": [0], "c2": [1]}

    def test_is_gradebook_file(self, tmp_path):
        assert is_gradebook_file(write(tmp_path, ""))
        assert not is_gradebook_file(write(tmp_path, "1,2\n", header="x,y\n", name="w.csv"))


class TestRoundTrip:
    def test_simulated(self, tmp_path):
        gb = simulate(SimConfig(n_students=17, absence_prob=0.25, seed=6)).gradebook
        write_gradebook(gb, tmp_path / "g.csv")
        back = load_gradebook(tmp_path / "g.csv")
        for k in ("pre", "post", "sheet"):
            np.testing.assert_array_equal(getattr(back, k), getattr(gb, k))
        assert (back.partner == gb.partner).all()
        assert (back.attended == gb.attended).all()
        assert back.students == gb.students and back.sessions == gb.sessions

    def test_meta_columns(self, tmp_path):
        header = HEADER.strip() + ",self_assess,peer_assess,familiarity,concept\n"
        p = write(tmp_path, "a,c,1,1,1,1,b,high,low,medium,loops\nb,c,1,1,1,1,a,,,,\n", header=header)
        gb = load_gradebook(p)
        write_gradebook(gb, tmp_path / "again.csv")
        back = load_gradebook(tmp_path / "again.csv")
        assert back.meta["self_assess"][0, 0] == "high" and back.meta["concept"][0, 0] == "loops"
        assert back.meta["familiarity"][1, 0] is None

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.lists(st.one_of(st.none(), st.floats(0, 2, allow_nan=False)), min_size=3, max_size=3),
                    min_size=1, max_size=6))
    def test_values_and_masks_lossless(self, tmp_path_factory, cells):
        n = len(cells)
        pre = np.array([[np.nan if v is None else v for v in row] for row in cells])
        gb = Gradebook([f"s{i}" for i in range(n)], ["c"] * n, [1, 2, 3], pre, pre[:, ::-1].copy(),
                       np.full((n, 3), np.nan), np.full((n, 3), None, dtype=object),
                       attended=np.ones((n, 3), dtype=bool))
        path = tmp_path_factory.mktemp("rt") / "g.csv"
        write_gradebook(gb, path)
        back = load_gradebook(path)
        keep = back.students
        idx = [gb.students.index(s) for s in keep]
        np.testing.assert_array_equal(back.pre, gb.pre[idx])
        np.testing.assert_array_equal(back.post, gb.post[idx])


class TestParticipation:
    def test_threshold(self):
        gb = roster(5, [0, 2, 3, 7, 1])
        kept, dropped = filter_participation(gb, 3)
        assert kept.students == ["u002", "u003"] and dropped == ["u000", "u001", "u004"]

    def test_142_to_119(self):
        counts = [1 + i % 2 for i in range(23)] + [3 + i % 5 for i in range(119)]
        kept, dropped = filter_participation(roster(142, counts), 3)
        assert kept.n_students == 119 and len(dropped) == 23

    def test_idempotent(self):
        gb = roster(30, list(np.random.default_rng(0).integers(0, 8, 30)))
        once, _ = filter_participation(gb, 3)
        twice, dropped = filter_participation(once, 3)
        assert twice.students == once.students and dropped == []

    def test_attendance_counts_partner_only_rows(self):
        gb = roster(1, [0], n_sessions=3)
        gb.partner[0, :] = "x"
        gb = Gradebook(gb.students, gb.courses, gb.sessions, gb.pre, gb.post, gb.sheet, gb.partner)
        assert gb.sessions_attended().tolist() == [3]

    def test_negative_threshold(self):
        with pytest.raises(ValidationError):
            filter_participation(roster(1, [1]), -1)
