import numpy as np
import pytest

import bpreach as bp
from bpreach.errors import UndefinedMetricError
from bpreach.geometry import HyperRect, volume
from bpreach.oracle import error_metric, grid_soundness_check, mc_true_bp
from bpreach.reach import PartitionParams, backreach_chain, hybreach_lp_plus


def analytic_preimage_box(sys_, target):
    corners = (target.corners() - sys_.c) @ np.linalg.inv(sys_.A).T
    return HyperRect(corners.min(axis=0), corners.max(axis=0))


class TestMcTrueBp:
    def test_zero_controller_members_fill_preimage(self, double_int, zero_net, target_box):
        pre = analytic_preimage_box(double_int, target_box)
        region = HyperRect(pre.lower - 0.5, pre.upper + 0.5)
        est = mc_true_bp(double_int, zero_net, target_box, -1, region, 50000, seed=7)
        assert not est.empty
        # every member is a true preimage point, re-verified with scalar rollouts
        for p in est.member_points[:100]:
            final = bp.rollout(double_int, zero_net, p, 1)[-1]
            assert bp.contains(target_box, final, 1e-12)
        # with a dense sample the member hull approaches the preimage hull
        assert np.allclose(est.tight_box.lower, pre.lower, atol=0.05)
        assert np.allclose(est.tight_box.upper, pre.upper, atol=0.05)
        assert est.area_axis <= volume(pre) + 1e-9

    def test_single_sample_degenerate(self, double_int, zero_net, target_box):
        inside = HyperRect([4.4, -0.01], [4.6, 0.01])  # deep inside the preimage
        est = mc_true_bp(double_int, zero_net, target_box, -1, inside, 1, seed=0)
        assert est.member_points.shape == (1, 2)
        assert est.area_axis == 0.0

    def test_unreachable_flagged_empty(self, double_int, zero_net):
        far = HyperRect([9.0, 9.0], [9.5, 9.5])
        region = HyperRect([-1, -1], [1, 1])
        est = mc_true_bp(double_int, zero_net, far, -1, region, 1000, seed=0)
        assert est.empty
        assert est.area_axis == 0.0 and est.area_rotated == 0.0

    def test_doubling_never_shrinks_hull(self, double_int, fixture_net, target_box):
        chain = backreach_chain(double_int, target_box, 3)
        region = chain[2]
        small = mc_true_bp(double_int, fixture_net, target_box, -3, region, 20000, seed=5)
        big = mc_true_bp(double_int, fixture_net, target_box, -3, region, 40000, seed=5)
        assert not small.empty
        assert np.all(big.tight_box.lower <= small.tight_box.lower + 1e-12)
        assert np.all(big.tight_box.upper >= small.tight_box.upper - 1e-12)
        assert big.area_axis >= small.area_axis - 1e-12

    def test_reproducible(self, double_int, fixture_net, target_box):
        chain = backreach_chain(double_int, target_box, 2)
        a = mc_true_bp(double_int, fixture_net, target_box, -2, chain[1], 5000, seed=9)
        b = mc_true_bp(double_int, fixture_net, target_box, -2, chain[1], 5000, seed=9)
        assert np.array_equal(a.member_points, b.member_points)

    def test_validation(self, double_int, zero_net, target_box):
        region = HyperRect([-1, -1], [1, 1])
        with pytest.raises(ValueError):
            mc_true_bp(double_int, zero_net, target_box, -1, region, 0, seed=0)
        with pytest.raises(ValueError):
            mc_true_bp(double_int, zero_net, target_box, 1, region, 10, seed=0)


class TestGridSoundness:
    def test_zero_controller_exact_no_violations(self, double_int, zero_net, target_box):
        run = hybreach_lp_plus(double_int, zero_net, target_box, 1, PartitionParams((1, 1), 1))
        chain = backreach_chain(double_int, target_box, 1)
        viol = grid_soundness_check(
            double_int, zero_net, target_box, -1, chain[0], 0.01, run.aggregate(-1)
        )
        assert viol.shape[0] == 0

    def test_shrunk_bpoa_is_caught(self, double_int, zero_net, target_box):
        run = hybreach_lp_plus(double_int, zero_net, target_box, 1, PartitionParams((1, 1), 1))
        chain = backreach_chain(double_int, target_box, 1)
        shrunk = [b.scaled(0.9) for b in run.aggregate(-1)]
        viol = grid_soundness_check(
            double_int, zero_net, target_box, -1, chain[0], 0.01, shrunk
        )
        assert viol.shape[0] > 0

    def test_region_disjoint_from_bp_vacuous(self, double_int, zero_net, target_box):
        region = HyperRect([-9, -9], [-8, -8])
        viol = grid_soundness_check(
            double_int, zero_net, target_box, -1, region, 0.05, []
        )
        assert viol.shape[0] == 0

    def test_validation(self, double_int, zero_net, target_box):
        region = HyperRect([-1, -1], [1, 1])
        with pytest.raises(ValueError):
            grid_soundness_check(double_int, zero_net, target_box, -1, region, 0.0, [])


class TestErrorMetric:
    def test_examples(self):
        assert error_metric(2.0, 1.0) == 1.0
        assert error_metric(1.0, 1.0) == 0.0
        with pytest.raises(UndefinedMetricError):
            error_metric(1.0, 0.0)

    def test_nonnegative_up_to_sampling_noise(self, double_int, fixture_net, target_box):
        # BPOA bounding box covers the true set, so the metric can only dip
        # below zero through Monte-Carlo underestimation of the true hull
        tau = 3
        run = hybreach_lp_plus(double_int, fixture_net, target_box, tau, PartitionParams((2, 2), 4))
        chain = backreach_chain(double_int, target_box, tau)
        box = run.bounding_box(-tau)
        pad = 0.01 * box.widths
        region = HyperRect(
            np.maximum(box.lower - pad, chain[tau - 1].lower),
            np.minimum(box.upper + pad, chain[tau - 1].upper),
        )
        est = mc_true_bp(double_int, fixture_net, target_box, -tau, region, 10**5, seed=3)
        assert not est.empty
        err = error_metric(run.bound_area(-tau), est.area_axis)
        assert err >= -0.02
