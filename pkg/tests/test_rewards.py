import math

import numpy as np
import pytest

from aircap_arena.actor import NUM_JOINTS
from aircap_arena.errors import VariantMismatch
from aircap_arena.geometry import BoundingBox, CameraModel
from aircap_arena.rewards import (RewardConfig, RewardInputs, compose,
                                  default_joint_weights, r_center, r_col,
                                  r_concol, r_mhmr, r_spin, r_triag,
                                  r_workspace, r_wspin, v_pot)

CAM = CameraModel()
ONE_MINUS_TANH_1 = 1.0 - math.tanh(1.0)  # 0.23840584404423515


def box_at(center_u, center_v, half=10.0):
    return BoundingBox(min_uv=np.array([center_u - half, center_v - half]),
                       max_uv=np.array([center_u + half, center_v + half]))


def truth_joints(rng=None):
    rng = rng or np.random.default_rng(0)
    return rng.uniform(-1, 1, (NUM_JOINTS, 3))


class TestCenter:
    def test_centered_box(self):
        cfg = RewardConfig()
        assert r_center(box_at(320.0, 240.0), CAM, cfg) == 1.0

    def test_hundred_pixels(self):
        cfg = RewardConfig()
        out = r_center(box_at(420.0, 240.0), CAM, cfg)
        assert out == pytest.approx(ONE_MINUS_TANH_1, abs=1e-12)

    def test_empty_box(self):
        assert r_center(None, CAM, RewardConfig()) == 0.0


class TestSpin:
    def test_perfect_estimate(self):
        t = truth_joints()
        assert r_spin(t.copy(), True, t, RewardConfig()) == 1.0

    def test_closed_form(self):
        t = truth_joints()
        est = t + np.array([0.2, 0.0, 0.0])  # every joint off by 0.2 m
        out = r_spin(est, True, t, RewardConfig())
        assert out == pytest.approx(ONE_MINUS_TANH_1, abs=1e-12)

    def test_invalid_estimate(self):
        t = truth_joints()
        assert r_spin(None, False, t, RewardConfig()) == 0.0
        assert r_spin(t, False, t, RewardConfig()) == 0.0


class TestWeightedSpin:
    def test_uniform_weights_identity(self):
        cfg = RewardConfig(joint_weights=np.full(NUM_JOINTS, 1.0 / NUM_JOINTS))
        t = truth_joints()
        est = t + np.array([0.3, 0.0, 0.0])
        # with w_j = 1/14 and equal errors e: d_W = e/14 exactly
        expected = 1.0 - math.tanh(cfg.c2 * 0.3 / NUM_JOINTS)
        assert r_wspin(est, True, t, cfg) == pytest.approx(expected, abs=1e-14)

    def test_near_zero_weight_joint(self):
        eps = 1e-9
        w = np.full(NUM_JOINTS, (1.0 - eps) / (NUM_JOINTS - 1))
        w[0] = eps
        cfg = RewardConfig(joint_weights=w / w.sum())
        t = truth_joints()
        est = t.copy()
        est[0] += np.array([5.0, 0.0, 0.0])  # large error on the epsilon joint
        assert r_wspin(est, True, t, cfg) > 1.0 - 1e-6

    def test_zero_error(self):
        t = truth_joints()
        assert r_wspin(t.copy(), True, t, RewardConfig()) == 1.0

    def test_uniform_consistency_bitwise(self):
        cfg = RewardConfig(joint_weights=np.full(NUM_JOINTS, 1.0 / NUM_JOINTS))
        rng = np.random.default_rng(4)
        t = truth_joints(rng)
        est = t + rng.normal(0, 0.1, t.shape)
        errors = np.linalg.norm(est - t, axis=1)
        d_j = float(errors.mean())
        d_w = float((cfg.joint_weights * errors).sum() / NUM_JOINTS)
        assert d_w == pytest.approx(d_j / NUM_JOINTS, rel=1e-12)
        assert r_wspin(est, True, t, cfg) == 1.0 - math.tanh(cfg.c2 * d_w)


class TestCollision:
    def test_far_apart(self):
        assert r_col(5.0, RewardConfig()) == 0.2

    def test_too_close(self):
        assert r_col(1.0, RewardConfig()) == -1.0

    def test_boundary_is_safe(self):
        assert r_col(3.0, RewardConfig()) == 0.2

    def test_verbatim_flag_reproduces_printed_form(self):
        cfg = RewardConfig(eq8_verbatim=True)
        assert r_col(5.0, cfg) == -1.0
        assert r_col(1.0, cfg) == 0.2


class TestTriag:
    def test_perfect(self):
        t = truth_joints()
        valid = np.ones(NUM_JOINTS, dtype=bool)
        assert r_triag(t.copy(), valid, t, RewardConfig()) == 1.0

    def test_closed_form(self):
        t = truth_joints()
        est = t + np.array([0.2, 0.0, 0.0])
        valid = np.ones(NUM_JOINTS, dtype=bool)
        assert r_triag(est, valid, t, RewardConfig()) == pytest.approx(ONE_MINUS_TANH_1, abs=1e-12)

    def test_no_valid_joints(self):
        t = truth_joints()
        assert r_triag(t, np.zeros(NUM_JOINTS, dtype=bool), t, RewardConfig()) == 0.0
        assert r_triag(None, None, t, RewardConfig()) == 0.0

    def test_partial_validity_mean_over_valid(self):
        t = truth_joints()
        est = t.copy()
        valid = np.zeros(NUM_JOINTS, dtype=bool)
        valid[:7] = True
        est[:7] += np.array([0.2, 0.0, 0.0])
        est[7:] += 100.0  # invalid joints must not matter
        assert r_triag(est, valid, t, RewardConfig()) == pytest.approx(ONE_MINUS_TANH_1, abs=1e-12)


class TestMhmr:
    def test_perfect(self):
        t = truth_joints()
        valid = np.ones(NUM_JOINTS, dtype=bool)
        assert r_mhmr(t.copy(), valid, t, RewardConfig()) == 1.0

    def test_uniform_weight_consistency(self):
        cfg = RewardConfig(joint_weights=np.full(NUM_JOINTS, 1.0 / NUM_JOINTS))
        t = truth_joints()
        est = t + np.array([0.2, 0.0, 0.0])
        valid = np.ones(NUM_JOINTS, dtype=bool)
        # all-valid equal errors: d_mhmr = 0.2/14, r matches r_triag at d/14
        expected = 1.0 - math.tanh(cfg.c4 * 0.2 / NUM_JOINTS)
        assert r_mhmr(est, valid, t, cfg) == pytest.approx(expected, abs=1e-14)

    def test_zero_valid(self):
        t = truth_joints()
        assert r_mhmr(t, np.zeros(NUM_JOINTS, dtype=bool), t, RewardConfig()) == 0.0


class TestPotential:
    def test_zero_at_threshold(self):
        assert v_pot(1.0, RewardConfig()) == 0.0

    def test_clamped_at_contact(self):
        assert v_pot(0.0, RewardConfig()) == 1.0
        assert v_pot(1e-9, RewardConfig()) == 1.0

    def test_exact_at_sqrt_half(self):
        cfg = RewardConfig()
        assert v_pot(cfg.d_lthresh / math.sqrt(2.0), cfg) == pytest.approx(1.0, abs=1e-12)

    def test_range(self):
        cfg = RewardConfig()
        for d in np.linspace(0, 30, 500):
            assert 0.0 <= v_pot(float(d), cfg) <= 1.0


class TestConcol:
    def test_middle_band(self):
        assert r_concol(10.0, RewardConfig()) == 0.2

    def test_too_far(self):
        assert r_concol(25.0, RewardConfig()) == -1.0

    def test_close_penalty_clamped(self):
        assert r_concol(0.5, RewardConfig()) == -1.0  # v_pot(0.5) = min(1, 4-1) = 1

    def test_boundaries_safe(self):
        cfg = RewardConfig()
        assert r_concol(cfg.d_lthresh, cfg) == 0.2
        assert r_concol(cfg.d_hthresh, cfg) == 0.2

    def test_gentle_penalty_near_threshold(self):
        cfg = RewardConfig()
        out = r_concol(0.9, cfg)
        assert out == pytest.approx(-(1.0 / 0.81 - 1.0), abs=1e-12)


class TestWorkspacePenalty:
    def test_values(self):
        cfg = RewardConfig()
        assert r_workspace(False, cfg) == 0.0
        assert r_workspace(True, cfg) == -0.1

    def test_stateless_repeat(self):
        cfg = RewardConfig()
        assert [r_workspace(True, cfg) for _ in range(2)] == [-0.1, -0.1]


class TestCompose:
    def _perfect_single_inputs(self, t):
        return RewardInputs(bbox=box_at(320.0, 240.0), camera=CAM,
                            mono_joints=t.copy(), mono_valid=True, truth_joints=t)

    def test_variant_14_perfect_sums_to_two(self):
        t = truth_joints()
        out = compose("1.4", self._perfect_single_inputs(t), RewardConfig())
        assert out.center == 1.0 and out.wspin == 1.0
        assert out.total == 2.0

    def test_variant_23_far_neighbor(self):
        t = truth_joints()
        inputs = RewardInputs(bbox=box_at(320.0, 240.0), camera=CAM,
                              multi_joints=t.copy(),
                              multi_valid=np.ones(NUM_JOINTS, dtype=bool),
                              truth_joints=t, neighbor_distance=25.0,
                              has_multi_inputs=True)
        out = compose("2.3", inputs, RewardConfig())
        assert out.center == 1.0 and out.concol == -1.0 and out.mhmr == 1.0
        assert out.total == pytest.approx(1.0)

    def test_single_variant_rejects_neighbor_inputs(self):
        t = truth_joints()
        inputs = RewardInputs(bbox=box_at(320.0, 240.0), camera=CAM,
                              truth_joints=t, neighbor_distance=5.0)
        with pytest.raises(VariantMismatch):
            compose("1.1", inputs, RewardConfig())

    def test_multi_variant_requires_neighbor(self):
        t = truth_joints()
        inputs = RewardInputs(bbox=box_at(320.0, 240.0), camera=CAM, truth_joints=t,
                              multi_joints=t, multi_valid=np.ones(NUM_JOINTS, bool),
                              has_multi_inputs=True)
        with pytest.raises(VariantMismatch):
            compose("2.1", inputs, RewardConfig())

    def test_unknown_variant(self):
        with pytest.raises(VariantMismatch):
            compose("3.1", RewardInputs(), RewardConfig())

    def test_total_is_exact_sum(self):
        rng = np.random.default_rng(8)
        t = truth_joints(rng)
        cfg = RewardConfig()
        for _ in range(100):
            est = t + rng.normal(0, 0.3, t.shape)
            inputs = RewardInputs(
                bbox=box_at(rng.uniform(0, 640), rng.uniform(0, 480)), camera=CAM,
                multi_joints=est, multi_valid=rng.random(NUM_JOINTS) < 0.8,
                truth_joints=t, neighbor_distance=float(rng.uniform(0, 30)),
                workspace_violated=bool(rng.random() < 0.3), has_multi_inputs=True)
            out = compose("2.3", inputs, cfg)
            assert out.total == sum(out.components().values())

    def test_workspace_joins_when_flag_supplied(self):
        t = truth_joints()
        inputs = RewardInputs(bbox=box_at(320.0, 240.0), camera=CAM,
                              mono_joints=t.copy(), mono_valid=True, truth_joints=t,
                              workspace_violated=True)
        out = compose("1.1", inputs, RewardConfig())
        assert out.workspace == -0.1
        assert out.total == pytest.approx(0.9)

    def test_normalize_total_clamps(self):
        t = truth_joints()
        cfg = RewardConfig(normalize_total=True)
        out = compose("1.4", self._perfect_single_inputs(t), cfg)
        assert out.total == 1.0


class TestRangesAndMonotonicity:
    def test_component_ranges_random(self):
        # physical input domains: pixel distances bounded by the image
        # diagonal, joint errors by the workspace scale (float64 tanh
        # saturates to exactly 1 only far outside these)
        rng = np.random.default_rng(123)
        cfg = RewardConfig()
        t = truth_joints(rng)
        diag = math.hypot(*CAM.image_size)
        for _ in range(5000):
            d_px = rng.uniform(0, diag)
            rc = r_center(box_at(320 + d_px / 2, 240 - d_px / 3, half=1.0), CAM, cfg)
            assert 0.0 < rc <= 1.0
            est = t + rng.normal(0, rng.uniform(0, 0.6), t.shape)
            rs = r_spin(est, True, t, cfg)
            assert 0.0 < rs <= 1.0
            dist = rng.uniform(0, 40)
            assert r_col(dist, cfg) in (-1.0, 0.2)
            assert -1.0 <= r_concol(dist, cfg) <= 0.2
            assert r_workspace(bool(rng.random() < 0.5), cfg) in (cfg.k_workspace, 0.0)

    def test_center_strictly_decreasing(self):
        cfg = RewardConfig()
        ds = np.sort(np.random.default_rng(5).uniform(0, 500, 200))
        vals = [r_center(box_at(320 + d, 240.0, half=1.0), CAM, cfg) for d in ds]
        assert all(a > b for a, b in zip(vals, vals[1:]) if a != b)
        assert vals[0] > vals[-1]

    def test_error_rewards_strictly_decreasing(self):
        cfg = RewardConfig()
        t = truth_joints()
        errors = np.sort(np.random.default_rng(6).uniform(0, 2, 100))
        for fn in (lambda e: r_spin(t + [e, 0, 0], True, t, cfg),
                   lambda e: r_wspin(t + [e, 0, 0], True, t, cfg),
                   lambda e: r_triag(t + [e, 0, 0], np.ones(NUM_JOINTS, bool), t, cfg),
                   lambda e: r_mhmr(t + [e, 0, 0], np.ones(NUM_JOINTS, bool), t, cfg)):
            vals = [fn(float(e)) for e in errors]
            assert all(a > b for a, b in zip(vals, vals[1:]))


def test_default_weights_sum_to_one_and_favor_outward_joints():
    w = default_joint_weights()
    assert w.shape == (NUM_JOINTS,)
    assert abs(w.sum() - 1.0) < 1e-12
    assert (w > 0).all()
    names = list(__import__("aircap_arena.actor", fromlist=["JOINT_NAMES"]).JOINT_NAMES)
    wrist = w[names.index("left_wrist")]
    hip = w[names.index("left_hip")]
    assert wrist > hip


def test_reward_config_validation():
    with pytest.raises(ValueError):
        RewardConfig(joint_weights=np.ones(NUM_JOINTS))  # sums to 14
    with pytest.raises(ValueError):
        RewardConfig(d_lthresh=5.0, d_hthresh=2.0)
    with pytest.raises(ValueError):
        RewardConfig(c1=0.0)
