import numpy as np
import pytest

from crossproj.errors import ValidationError
from crossproj.views import (
    DEFAULT_VIEW_COUNT,
    View,
    ViewBundle,
    select_views_test,
    select_views_train,
)


def make_bundle(count):
    return ViewBundle([View(i, f"color_{i}.pgm", None, None) for i in range(count)])


def frames(views):
    return [v.frame_index for v in views]


class TestBundle:
    def test_frames_must_increase(self):
        with pytest.raises(ValidationError):
            ViewBundle([View(2, "a", None, None), View(1, "b", None, None)])

    def test_default_view_count_is_three(self):
        assert DEFAULT_VIEW_COUNT == 3


class TestTrainSelection:
    def test_all_views_is_set_equality(self):
        bundle = make_bundle(5)
        picked = select_views_train(bundle, 5, rng_seed=7)
        assert sorted(frames(picked)) == [0, 1, 2, 3, 4]

    def test_single_view_deterministic(self):
        bundle = make_bundle(9)
        first = select_views_train(bundle, 1, rng_seed=42)
        for _ in range(5):
            assert frames(select_views_train(bundle, 1, rng_seed=42)) == frames(first)

    def test_distinct_views(self):
        bundle = make_bundle(10)
        for seed in range(20):
            picked = frames(select_views_train(bundle, 4, rng_seed=seed))
            assert len(set(picked)) == 4

    def test_too_many_requested(self):
        with pytest.raises(ValidationError):
            select_views_train(make_bundle(3), 4, rng_seed=0)

    def test_selection_frequency_uniform(self):
        # 10^4 draws of 1 view from 8: each frame within 5% of uniform.
        bundle = make_bundle(8)
        draws = 10_000
        counts = np.zeros(8)
        for seed in range(draws):
            counts[select_views_train(bundle, 1, rng_seed=seed)[0].frame_index] += 1
        freq = counts / draws
        assert np.all(np.abs(freq - 1 / 8) <= 0.05)


class TestTestSelection:
    def test_nine_frames_three_groups(self):
        assert frames(select_views_test(make_bundle(9), 3)) == [1, 4, 7]

    def test_ten_frames_three_groups(self):
        # group sizes [4, 3, 3]; centers at offsets 2, 1, 1
        assert frames(select_views_test(make_bundle(10), 3)) == [2, 5, 8]

    def test_n_equals_bundle_size(self):
        assert frames(select_views_test(make_bundle(4), 4)) == [0, 1, 2, 3]

    def test_strictly_increasing_and_stable(self):
        for total in range(1, 20):
            for n in range(1, total + 1):
                picked = frames(select_views_test(make_bundle(total), n))
                assert len(picked) == n
                assert all(b > a for a, b in zip(picked, picked[1:]))
                assert picked == frames(select_views_test(make_bundle(total), n))

    def test_group_rule_enumeration(self):
        # Independent re-derivation of the stated rule.
        def expected(total, n):
            base, extra = divmod(total, n)
            sizes = [base + 1] * extra + [base] * (n - extra)
            out, off = [], 0
            for s in sizes:
                out.append(off + s // 2)
                off += s
            return out

        for total in (1, 2, 3, 5, 9, 10, 11, 17):
            for n in range(1, total + 1):
                assert frames(select_views_test(make_bundle(total), n)) == expected(total, n)

    def test_too_many_requested(self):
        with pytest.raises(ValidationError):
            select_views_test(make_bundle(2), 3)
