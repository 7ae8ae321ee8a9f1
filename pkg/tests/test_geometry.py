import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from vgwarp.exceptions import DomainError
from vgwarp.geometry import Partition, region_of, segment_fractions, segment_lengths, weights

from conftest import random_partition

coord = st.floats(0.0, 2.0, allow_nan=False)
point = st.tuples(coord, coord)


def clip_oracle(s, s2, box):
    """Liang-Barsky clipping of a segment against one box, as a length."""
    s, s2 = np.asarray(s, float), np.asarray(s2, float)
    d = s2 - s
    t0, t1 = 0.0, 1.0
    for a in range(2):
        if d[a] == 0:
            if not box[a, 0] <= s[a] <= box[a, 1]:
                return 0.0
            continue
        ta = (box[a, 0] - s[a]) / d[a]
        tb = (box[a, 1] - s[a]) / d[a]
        t0 = max(t0, min(ta, tb))
        t1 = min(t1, max(ta, tb))
    return max(t1 - t0, 0.0) * np.linalg.norm(d)


class TestPartition:
    def test_from_splits_layout(self):
        p = Partition.from_splits([0, 1, 2], [0, 1, 2])
        assert p.k == 4
        assert_allclose(p.domain_box, [[0, 2], [0, 2]])

    def test_rejects_overlap(self):
        with pytest.raises(ValueError, match="overlap"):
            Partition(np.array([[[0, 1.5], [0, 2]], [[1, 2], [0, 2]]]))

    def test_rejects_gap(self):
        with pytest.raises(ValueError, match="cover"):
            Partition(np.array([[[0, 1], [0, 2]], [[1, 2], [0, 1]]]))

    def test_rejects_degenerate_box(self):
        with pytest.raises(ValueError, match="positive volume"):
            Partition(np.array([[[0, 0], [0, 2]]]))

    def test_boundary_goes_to_lowest_index(self, two_regions):
        assert region_of([1.0, 0.5], two_regions) == 0
        assert region_of([1.0 + 1e-12, 0.5], two_regions) == 1

    def test_outside_domain(self, two_regions):
        with pytest.raises(DomainError):
            region_of([2.5, 0.5], two_regions)
        with pytest.raises(DomainError):
            two_regions.regions_of([[0.5, 0.5], [-0.1, 0.0]])

    def test_boxes_are_read_only(self, two_regions):
        with pytest.raises(ValueError):
            two_regions.boxes[0, 0, 0] = 5.0


class TestSegments:
    def test_crossing_segment(self, two_regions):
        pieces = dict(segment_lengths([0.5, 1.0], [1.5, 1.0], two_regions))
        assert_allclose(pieces[0], 0.5, atol=1e-15)
        assert_allclose(pieces[1], 0.5, atol=1e-15)

    def test_within_region(self, two_regions):
        assert segment_lengths([0.1, 0.1], [0.4, 0.5], two_regions) == [(0, pytest.approx(0.5))]

    def test_coincident(self, two_regions):
        assert segment_lengths([0.3, 0.3], [0.3, 0.3], two_regions) == []
        with pytest.raises(DomainError):
            weights([0.3, 0.3], [0.3, 0.3], two_regions)

    def test_segment_on_shared_face(self, two_regions):
        pieces = segment_lengths([1.0, 0.2], [1.0, 1.8], two_regions)
        assert pieces == [(0, pytest.approx(1.6))]

    def test_outside(self, two_regions):
        with pytest.raises(DomainError):
            segment_lengths([0.1, 0.1], [2.1, 0.1], two_regions)

    def test_matches_clipping_oracle(self, rng):
        for _ in range(20):
            part = random_partition(rng, int(rng.integers(1, 17)))
            s, s2 = rng.uniform(0, 2, (2, 2))
            got = np.zeros(part.k)
            for i, length in segment_lengths(s, s2, part):
                got[i] = length
            want = [clip_oracle(s, s2, b) for b in part.boxes]
            assert_allclose(got, want, atol=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(point, point, st.integers(1, 16), st.integers(0, 2**32 - 1))
    def test_lengths_add_up(self, s, s2, k, seed):
        part = random_partition(np.random.default_rng(seed), k)
        total = sum(length for _, length in segment_lengths(s, s2, part))
        assert_allclose(total, np.hypot(s[0] - s2[0], s[1] - s2[1]), atol=1e-10)

    @settings(max_examples=200, deadline=None)
    @given(point, point, st.integers(1, 16), st.integers(0, 2**32 - 1))
    def test_weights_sum_to_one(self, s, s2, k, seed):
        if s == s2:
            return
        part = random_partition(np.random.default_rng(seed), k)
        w = weights(s, s2, part)
        assert all(v > 0 for _, v in w)
        assert_allclose(sum(v for _, v in w), 1.0, atol=1e-10)

    def test_vectorised_fractions_match_scalar(self, rng):
        part = random_partition(rng, 9)
        a = rng.uniform(0, 2, (50, 2))
        b = rng.uniform(0, 2, (50, 2))
        frac = segment_fractions(a, b, part)
        for i in range(50):
            row = np.zeros(part.k)
            for r, w in weights(a[i], b[i], part):
                row[r] = w
            assert_allclose(frac[i], row, atol=1e-14)
