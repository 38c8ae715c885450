import numpy as np
import pytest

from textonkit.estimation import estimate_gaussians
from textonkit.model import ImageFrame, validate_set
from textonkit.objectives import set_matching_cost
from textonkit.synth import WorldSpec, synth_world


def spec(k=5, w=96, h=96, nf=3, layout="grid"):
    return WorldSpec(frame=ImageFrame(width=w, height=h), k=k, feature_dim=nf, layout=layout)


class TestWorldShape:
    def test_counts_and_validity(self):
        truth, stack, maps = synth_world(spec(k=6), 0)
        assert len(truth) == 6
        assert stack.n_masks == 7  # one background mask in front of the list
        assert maps.feature_dim == 3
        assert validate_set(truth) == []

    def test_masks_are_normalized_one_hot(self):
        _, stack, _ = synth_world(spec(k=4), 3)
        assert stack.check_normalized()
        assert set(np.unique(stack.masks)) <= {0.0, 1.0}

    def test_truth_area_equals_mask_pixels(self):
        truth, stack, _ = synth_world(spec(k=5), 1)
        for i, g in enumerate(truth):
            assert g.mask_area == stack.masks[i + 1].sum()

    def test_k_zero_is_all_background(self):
        truth, stack, _ = synth_world(spec(k=0), 0)
        assert len(truth) == 0
        assert np.array_equal(stack.masks[0], np.ones_like(stack.masks[0]))

    def test_determinism(self):
        a = synth_world(spec(k=9), 7)
        b = synth_world(spec(k=9), 7)
        assert np.array_equal(a[1].masks, b[1].masks)
        for ga, gb in zip(a[0], b[0]):
            assert np.array_equal(ga.mean, gb.mean)
            assert np.array_equal(ga.feature, gb.feature)

    def test_seeds_differ(self):
        a, _, _ = synth_world(spec(k=3), 0)
        b, _, _ = synth_world(spec(k=3), 1)
        assert not np.allclose(a.means(), b.means())

    def test_capacity_guard(self):
        frame = ImageFrame(width=96, height=96)
        with pytest.raises(ValueError, match="capacity"):
            WorldSpec(frame=frame, k=4, feature_dim=3, layout="grid", capacity=3)

    def test_random_layout_separation(self):
        truth, _, _ = synth_world(spec(k=5, layout="random"), 11)
        means = truth.means()
        smax = max(np.sqrt(np.linalg.eigvalsh(g.cov).max()) for g in truth)
        for i in range(len(truth)):
            for j in range(i + 1, len(truth)):
                assert np.linalg.norm(means[i] - means[j]) > 4.0 * smax


class TestRoundTrip:
    def test_single_center_gaussian_recovered(self):
        truth, stack, maps = synth_world(spec(k=1, w=64, h=64), 2)
        est = estimate_gaussians(stack, maps)
        # element 0 of the estimate is the background segment
        g_est = est[1]
        assert np.linalg.norm(g_est.mean - truth[0].mean) < 0.5

    def test_estimates_recover_truth_geometry(self):
        truth, stack, maps = synth_world(spec(k=6, w=128, h=128), 4)
        est = estimate_gaussians(stack, maps)
        for i, g in enumerate(truth):
            ge = est[i + 1]
            assert np.linalg.norm(ge.mean - g.mean) < 0.5
            rel = np.linalg.norm(ge.cov - g.cov) / np.linalg.norm(g.cov)
            assert rel < 0.10

    def test_segment_maps_match_truth_features(self):
        truth, stack, maps = synth_world(spec(k=4), 5)
        for i, g in enumerate(truth):
            mask = stack.masks[i + 1] > 0
            seg_feats = maps.appearance[mask]
            assert np.allclose(seg_feats, g.feature, atol=1e-12)
            seg_dirs = maps.direction[mask]
            assert np.allclose(seg_dirs, g.direction, atol=1e-12)

    def test_truth_vs_estimate_matching_cost_small(self):
        truth, stack, maps = synth_world(spec(k=5, w=128, h=128), 8)
        est = estimate_gaussians(stack, maps)
        interior = est.replace_gaussians([est[i + 1] for i in range(len(truth))])
        cc = set_matching_cost(truth, interior).total_cost
        assert cc < 10.0
