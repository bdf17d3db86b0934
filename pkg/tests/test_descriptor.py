import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from r2fd2.config import RunConfig
from r2fd2.descriptor import (
    ARRANGEMENTS,
    DescriptorParams,
    OrientedPatch,
    describe,
    describe_points,
    dominant_orientation,
    extract_rmim,
    pooling_weights,
    remap_indices,
)
from r2fd2.detector import InterestPoint
from r2fd2.errors import ParameterError
from r2fd2.imaging import rotate_about_center
from r2fd2.loggabor import FilterParams, build_filter_bank, max_index_map, oriented_amplitudes
from r2fd2.pipeline import extract_features


def _disc(radius):
    u = np.arange(-radius, radius + 1)
    vv, uu = np.meshgrid(u, u, indexing="ij")
    return uu**2 + vv**2 <= radius**2


class TestDominantOrientation:
    def test_uniform_window(self):
        mim = np.full((40, 40), 3, dtype=np.int8)
        assert dominant_orientation(mim, (20, 20), 10) == (3, 90.0)

    def test_index_six_is_180(self):
        mim = np.full((40, 40), 6, dtype=np.int8)
        assert dominant_orientation(mim, (20, 20), 10)[1] == 180.0

    def test_counting_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            mim = rng.integers(1, 7, size=(31, 31)).astype(np.int8)
            counts = {k: 0 for k in range(1, 7)}
            disc = _disc(12)
            for y in range(25):
                for x in range(25):
                    if disc[y, x]:
                        counts[int(mim[y + 3, x + 3])] += 1
            best = max(counts.values())
            expected = min(k for k, c in counts.items() if c == best)
            assert dominant_orientation(mim, (15, 15), 12)[0] == expected

    def test_tie_smallest(self):
        mim = np.full((9, 9), 5, dtype=np.int8)
        mim[:, :4] = 2
        mim[:, 5:] = 5
        mim[:, 4] = [2, 5, 2, 5, 2, 5, 2, 5, 2]
        # radius 4 disc is symmetric, counts equal except the middle column
        c, _ = dominant_orientation(mim, (4, 4), 4)
        assert c == 2

    def test_off_image(self):
        with pytest.raises(IndexError):
            dominant_orientation(np.ones((20, 20), dtype=np.int8), (5, 10), 8)


class TestRemap:
    def test_examples(self):
        assert remap_indices(np.array([5]), 3, 6)[0] == 3
        assert remap_indices(np.array([1]), 3, 6)[0] == 5
        patch = np.array([[0, 1, 2], [3, 4, 6]], dtype=np.int8)
        assert np.array_equal(remap_indices(patch, 1, 6), patch)

    def test_sentinel_passes(self):
        assert remap_indices(np.array([0, 4], dtype=np.int8), 4, 6).tolist() == [0, 1]

    @settings(max_examples=30)
    @given(st.integers(2, 12), st.data())
    def test_bijection(self, n, data):
        c = data.draw(st.integers(1, n))
        vals = remap_indices(np.arange(1, n + 1), c, n)
        assert sorted(vals.tolist()) == list(range(1, n + 1))
        assert vals[c - 1] == 1


class TestExtractRmim:
    def test_180_degree_frame_is_point_reflection(self):
        rng = np.random.default_rng(1)
        mim = rng.integers(1, 7, size=(121, 121)).astype(np.int8)
        mim[rng.random(mim.shape) < 0.5] = 6  # make 6 the mode -> DO = 180
        p = DescriptorParams(support_radius=20)
        patch = extract_rmim(mim, (60, 60), p)
        assert patch.c_mim == 6 and patch.dominant_deg == 180.0
        src = mim[40:81, 40:81]
        oracle = remap_indices(src[::-1, ::-1], 6, 6)
        assert np.array_equal(patch.rmim, oracle)

    def test_uniform_source(self):
        mim = np.full((121, 121), 4, dtype=np.int8)
        patch = extract_rmim(mim, (60, 60), DescriptorParams(support_radius=20))
        assert np.all(patch.rmim == 1)

    def test_out_of_image_is_sentinel(self):
        mim = np.full((50, 50), 2, dtype=np.int8)
        patch = extract_rmim(mim, (24, 24), DescriptorParams(support_radius=24))
        # the frame is 60 degrees, so corners of the square leave the image
        assert (patch.rmim == 0).any() and set(np.unique(patch.rmim)) <= {0, 1}

    def test_grating_rotated_90(self):
        p = FilterParams()
        yy, xx = np.mgrid[:160, :160].astype(float)
        theta = p.orientation(2)
        img = 0.5 + 0.5 * np.sin(2 * np.pi / 6 * (xx * np.cos(theta) - yy * np.sin(theta)))
        rot, t = rotate_about_center(img, 90)
        bank = build_filter_bank(160, 160, p)
        m1, m2 = (max_index_map(oriented_amplitudes(im, bank)) for im in (img, rot))
        dp = DescriptorParams(support_radius=24)
        inner = _disc(12)
        c = (79.5, 79.5)
        a, b = extract_rmim(m1, c, dp), extract_rmim(m2, c, dp)
        core = np.zeros_like(a.rmim, dtype=bool)
        core[12:37, 12:37] = inner
        assert np.mean(a.rmim[core] == b.rmim[core]) >= 0.8
        raw1 = m1[80 - 12 : 80 + 13, 80 - 12 : 80 + 13][inner]
        raw2 = m2[80 - 12 : 80 + 13, 80 - 12 : 80 + 13][inner]
        assert np.mean(raw1 == raw2) <= 1.0 / 6.0 + 0.05

    def test_polarity_only_adds_half_turn(self, texture):
        f = extract_features(texture, RunConfig(), describe=False)
        amp = f.amplitudes.sum(axis=0)
        for ip in f.points[:10]:
            plain = extract_rmim(f.mim, (ip.x, ip.y), DescriptorParams(resolve_polarity=False))
            resolved = extract_rmim(f.mim, (ip.x, ip.y), DescriptorParams(), amplitude=amp)
            expected = plain.rmim[::-1, ::-1] if resolved.flipped else plain.rmim
            # half-up rounding is not odd-symmetric, so a handful of samples
            # on exact .5 ties may land one pixel apart after the half turn
            assert np.mean(resolved.rmim == expected) >= 0.99


class TestDescribe:
    @pytest.mark.parametrize("arrangement,bins", [("daisy", 25), ("square4", 16), ("square5", 25), ("logpolar", 24)])
    def test_dimensions(self, arrangement, bins):
        p = DescriptorParams(arrangement=arrangement)
        assert p.dim == bins * 6
        assert pooling_weights(48, arrangement).shape == (bins, 97 * 97)

    def test_daisy_is_150(self):
        assert DescriptorParams().dim == 150

    def test_daisy_layout(self):
        w = pooling_weights(48, "daisy").reshape(25, 97, 97)
        assert all(w[k].any() for k in range(25))
        ys, xs = np.unravel_index([np.argmax(wk) for wk in w], (97, 97))
        assert (xs[0], ys[0]) == (48, 48)
        # first sub-region of every ring lies at 0 degrees (to the right)
        for ring in range(3):
            k = 1 + 8 * ring
            assert ys[k] == 48 and xs[k] > 48
            # second one is 45 degrees counter-clockwise: right and up
            assert xs[k + 1] > 48 and ys[k + 1] < 48
        # the outer ring ends at the support radius
        u = np.arange(-48, 49)
        dist = np.hypot(*np.meshgrid(u, u))
        assert dist[w.any(axis=0)].max() <= 48

    def test_uniform_index_gives_indicator_blocks(self):
        rmim = np.full((97, 97), 2, dtype=np.int8)
        d = describe(OrientedPatch((0, 0), 1, 30.0, rmim), DescriptorParams(slot_spread=0.0)).reshape(25, 6)
        assert np.all(d[:, [0, 2, 3, 4, 5]] == 0) and np.all(d[:, 1] > 0)
        assert np.linalg.norm(d) == pytest.approx(1.0, abs=1e-9)
        spread = describe(OrientedPatch((0, 0), 1, 30.0, rmim), DescriptorParams(slot_spread=0.5)).reshape(25, 6)
        assert np.allclose(spread[:, 0], 0.5 * spread[:, 1]) and np.allclose(spread[:, 2], 0.5 * spread[:, 1])

    def test_empty_patch_is_zero(self):
        d = describe(OrientedPatch((0, 0), 1, 30.0, np.zeros((97, 97), dtype=np.int8)))
        assert not d.any()

    def test_invalid_params(self):
        for kw in (dict(support_radius=8), dict(arrangement="hex"), dict(n_orients=1), dict(slot_spread=1.5)):
            with pytest.raises(ParameterError):
                DescriptorParams(**kw)


class TestDescribePoints:
    @pytest.fixture(scope="class")
    @staticmethod
    def feats(texture):
        return extract_features(texture, RunConfig(), describe=False)

    def test_empty(self, feats):
        out = describe_points(feats.mim, [])
        assert len(out) == 0 and out.descriptors.shape == (0, 150)

    @pytest.mark.parametrize("arrangement", ARRANGEMENTS)
    def test_batch_matches_single(self, feats, arrangement):
        p = DescriptorParams(arrangement=arrangement)
        amp = feats.amplitudes.sum(axis=0)
        batch = describe_points(feats.mim, feats.points, p, amplitude=amp)
        assert len(batch) + len(batch.dropped) == len(feats.points)
        for ip, d in list(batch)[:25]:
            single = describe(extract_rmim(feats.mim, (ip.x, ip.y), p, amplitude=amp), p)
            assert np.allclose(d, single, atol=1e-12)
        norms = np.linalg.norm(batch.descriptors, axis=1)
        assert np.allclose(norms, 1.0, atol=1e-9) and batch.descriptors.min() >= 0

    def test_order_preserved_and_deterministic(self, feats):
        pts = feats.points[:5] + feats.points[:5]
        out = describe_points(feats.mim, pts, amplitude=feats.amplitudes.sum(axis=0))
        assert out.points == pts
        assert np.array_equal(out.descriptors[:5], out.descriptors[5:])

    def test_drops_border_points(self, feats):
        ips = [InterestPoint(10.0, 10.0, 1.0), feats.points[0]]
        out = describe_points(feats.mim, ips)
        assert out.points == [feats.points[0]] and out.dropped == [ips[0]]

    def test_square_grid_needs_wider_margin(self):
        assert DescriptorParams(arrangement="daisy").sampling_radius == 49
        assert DescriptorParams(arrangement="square4").sampling_radius == 69


def _self_similarity(img, angle, rng):
    cfg = RunConfig()
    ref = extract_features(img, cfg)
    sen, fwd = rotate_about_center(img, angle)
    fs = extract_features(sen, cfg, describe=False)
    mapped = np.round(fwd.apply(ref.described.xy))
    ds = describe_points(fs.mim, [InterestPoint(float(x), float(y), 1.0) for x, y in mapped], cfg.descriptor_params(), amplitude=fs.amplitudes.sum(axis=0))
    by_xy = {(p.x, p.y): d for p, d in ds}
    hits = []
    for (x, y), d in zip(mapped, ref.described.descriptors):
        if (x, y) in by_xy:
            others = ds.descriptors[rng.choice(len(ds), 100, replace=False)]
            hits.append(np.linalg.norm(d - by_xy[(x, y)]) < np.median(np.linalg.norm(others - d, axis=1)))
    return np.mean(hits)


@pytest.mark.parametrize("angle", [30, 90, 180, 270])
def test_rotation_self_similarity_at_index_steps(texture, angle):
    assert _self_similarity(texture, angle, np.random.default_rng(0)) >= 0.9


@pytest.mark.xfail(strict=False, reason="orientation frames are quantised to 30 degrees; about 80-87% at intermediate angles")
@pytest.mark.parametrize("angle", [10, 50, 130])
def test_rotation_self_similarity_between_index_steps(texture, angle):
    assert _self_similarity(texture, angle, np.random.default_rng(0)) >= 0.9
