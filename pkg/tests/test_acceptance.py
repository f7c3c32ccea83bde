"""Acceptance gate: nine criteria, one test each, one pass/fail line each.

Run with `pytest tests/test_acceptance.py -v -s`.  The two training-based
criteria (the learning smoke test and the trained-policy collision rate)
dominate the runtime; everything else finishes in seconds.
"""

import dataclasses
import math
import time

import numpy as np

from aircap_arena.actor import ActorParams, NUM_JOINTS
from aircap_arena.avoidance import potential_field_avoidance
from aircap_arena.baselines import FrontalStrategy, OrbitStrategy
from aircap_arena.config import default_config
from aircap_arena.eval import eval_policy, eval_strategy
from aircap_arena.geometry import (CameraModel, CameraPose, project,
                                   rotation_yaw, triangulate_point,
                                   world_to_camera)
from aircap_arena.metrics import (METRIC_INTER_MAV, METRIC_MPE_MONO,
                                  METRIC_MPE_MULTI, emit_reports)
from aircap_arena.nets import init_mlp, mlp_backward, mlp_forward
from aircap_arena.ppo import gae, measure_random_baseline, train
from aircap_arena.rewards import (RewardConfig, r_center, r_col, r_concol,
                                  r_mhmr, r_spin, r_triag, r_workspace, r_wspin)
from aircap_arena.world import Action, WorldConfig, reset_episode, step_env

FULL_CONFIG = default_config()


def report(criterion: str, detail: str):
    print(f"{criterion} PASS - {detail}")


# --- A1: triangulation oracle ---------------------------------------------------

def test_a1_triangulation_oracle():
    rng = np.random.default_rng(101)
    cam = CameraModel(pitch_cam=0.35)
    cases = []
    while len(cases) < 1000:
        pose_a = CameraPose(position=rng.uniform([-5, -5, 1], [5, 5, 6]),
                            yaw=rng.uniform(-math.pi, math.pi))
        offset = rng.uniform(-4, 4, 3)
        pose_b = CameraPose(position=pose_a.position + offset,
                            yaw=rng.uniform(-math.pi, math.pi))
        point = pose_a.position + rotation_yaw(pose_a.yaw) @ np.array(
            [rng.uniform(3.0, 8.0), 0.0, -rng.uniform(0.5, 3.0)])
        depth = float(np.linalg.norm(point - pose_a.position))
        if np.linalg.norm(offset) / depth <= 0.1:  # well-conditioned only
            continue
        det_a = project(world_to_camera(point, pose_a, cam), cam)
        det_b = project(world_to_camera(point, pose_b, cam), cam)
        if not (det_a.visible and det_b.visible):
            continue
        cases.append((det_a, pose_a, det_b, pose_b, point))

    start = time.perf_counter()
    max_err = 0.0
    for det_a, pose_a, det_b, pose_b, point in cases:
        rec = triangulate_point(det_a, pose_a, det_b, pose_b, cam)
        max_err = max(max_err, float(np.linalg.norm(rec - point)))
    elapsed = time.perf_counter() - start

    assert max_err < 1e-6, f"max reconstruction error {max_err}"
    assert elapsed < 1.0, f"triangulation of 1000 points took {elapsed:.3f} s"
    report("A1", f"max error {max_err:.2e} m over 1000 configs in {elapsed * 1e3:.0f} ms")


# --- A2: gradient checks ---------------------------------------------------------

def _gradient_check(sizes, seed, probes=100, h=1e-5):
    rng = np.random.default_rng(seed)
    params = init_mlp(sizes, rng)
    x = rng.standard_normal((4, sizes[0]))
    w_obj = rng.standard_normal((4, sizes[-1]))
    _, cache = mlp_forward(params, x)
    grads, _ = mlp_backward(params, cache, w_obj)

    def objective():
        y, _ = mlp_forward(params, x)
        return float((y * w_obj).sum())

    arrays = params.arrays()
    grad_arrays = grads.arrays()
    max_rel = 0.0
    for _ in range(probes):
        ai = int(rng.integers(len(arrays)))
        arr, g = arrays[ai], grad_arrays[ai]
        idx = tuple(int(rng.integers(s)) for s in arr.shape)
        old = arr[idx]
        arr[idx] = old + h
        up = objective()
        arr[idx] = old - h
        down = objective()
        arr[idx] = old
        fd = (up - down) / (2.0 * h)
        denom = max(abs(fd), abs(g[idx]), 1e-8)
        max_rel = max(max_rel, abs(fd - g[idx]) / denom)
    return max_rel


def test_a2_gradient_checks():
    rel_small = _gradient_check((7, 64, 64, 4), seed=202)
    rel_large = _gradient_check((11, 256, 256, 4), seed=203)
    assert rel_small < 1e-4, f"64x64 max relative error {rel_small}"
    assert rel_large < 1e-4, f"256x256 max relative error {rel_large}"
    report("A2", f"max relative gradient error {max(rel_small, rel_large):.2e} "
                 f"(64x64 and 256x256, 100 probes each)")


# --- A3: GAE equivalence ---------------------------------------------------------

def test_a3_gae_equivalence():
    rng = np.random.default_rng(303)
    worst = 0.0
    for _ in range(1000):
        n = 100
        rewards = rng.standard_normal(n)
        values = rng.standard_normal(n)
        dones = rng.random(n) < 0.05
        dones[-1] = True
        gamma = float(rng.uniform(0.9, 1.0))
        adv, _ = gae(rewards, values, dones, gamma, 1.0)
        # brute force: discounted return to the episode end, minus baseline
        expected = np.empty(n)
        for t in range(n):
            acc = 0.0
            disc = 1.0
            for k in range(t, n):
                acc += disc * rewards[k]
                if dones[k]:
                    break
                disc *= gamma
            expected[t] = acc - values[t]
        worst = max(worst, float(np.abs(adv - expected).max()))
    assert worst < 1e-10, f"max |GAE - brute force| = {worst}"
    report("A3", f"lambda=1 GAE matches discounted-return-minus-baseline, "
                 f"max diff {worst:.2e} over 1000 sequences")


# --- A4: reward conformance ------------------------------------------------------

def test_a4_reward_conformance():
    rng = np.random.default_rng(404)
    cfg = RewardConfig()
    cam = CameraModel()
    from aircap_arena.geometry import BoundingBox
    diag = math.hypot(*cam.image_size)
    n = 100_000

    # ranges over randomized physical inputs
    d_px = rng.uniform(0.0, diag, n)
    centers = np.stack([320.0 + d_px * 0.6, 240.0 + d_px * 0.8], axis=1)
    truth = rng.uniform(-1, 1, (NUM_JOINTS, 3))
    for i in range(0, n, 97):
        bbox = BoundingBox(min_uv=centers[i], max_uv=centers[i])
        val = r_center(bbox, cam, cfg)
        assert 0.0 < val <= 1.0
    errors = rng.uniform(0.0, 2.5, n)
    for i in range(0, n, 97):
        est = truth + np.array([errors[i], 0.0, 0.0])
        assert 0.0 < r_spin(est, True, truth, cfg) <= 1.0
        assert 0.0 < r_wspin(est, True, truth, cfg) <= 1.0
        valid = np.ones(NUM_JOINTS, dtype=bool)
        assert 0.0 < r_triag(est, valid, truth, cfg) <= 1.0
        assert 0.0 < r_mhmr(est, valid, truth, cfg) <= 1.0
    dists = rng.uniform(0.0, 40.0, n)
    col_vals = np.array([r_col(float(d), cfg) for d in dists[:5000]])
    assert set(np.unique(col_vals)) <= {-1.0, 0.2}
    concol_vals = np.array([r_concol(float(d), cfg) for d in dists[:5000]])
    assert ((-1.0 <= concol_vals) & (concol_vals <= 0.2)).all()
    assert {r_workspace(True, cfg), r_workspace(False, cfg)} == {cfg.k_workspace, 0.0}

    # monotonicity on sorted samples
    ds = np.sort(rng.uniform(0, diag, 300))
    center_vals = [r_center(BoundingBox(min_uv=np.array([320 + d, 240.0]),
                                        max_uv=np.array([320 + d, 240.0])), cam, cfg)
                   for d in ds]
    assert all(a > b for a, b in zip(center_vals, center_vals[1:]))
    es = np.sort(rng.uniform(0, 2.5, 300))
    for fn in (r_spin, r_wspin):
        vals = [fn(truth + [e, 0, 0], True, truth, cfg) for e in es]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    # uniform-weight identity, bit-consistent
    uniform = RewardConfig(joint_weights=np.full(NUM_JOINTS, 1.0 / NUM_JOINTS))
    for _ in range(200):
        est = truth + rng.normal(0, 0.3, truth.shape)
        err = np.linalg.norm(est - truth, axis=1)
        d_j = float(err.mean())
        expected = 1.0 - math.tanh(uniform.c2 * float(
            (uniform.joint_weights * err).sum() / NUM_JOINTS))
        got = r_wspin(est, True, truth, uniform)
        assert got == expected
        assert abs(got - (1.0 - math.tanh(uniform.c2 * d_j / NUM_JOINTS))) < 1e-15
    report("A4", "component ranges, monotonicity and uniform-weight identity hold "
                 "over randomized inputs")


# --- A6: multi-view benefit ------------------------------------------------------

def test_a6_multiview_benefit():
    report_obj, _ = eval_strategy(OrbitStrategy(), FULL_CONFIG, num_mavs=2,
                                  write_replays=False)
    mono = report_obj.values(METRIC_MPE_MONO)
    multi = report_obj.values(METRIC_MPE_MULTI)
    assert mono.size > 0 and multi.size > 0
    med_mono = float(np.median(mono))
    med_multi = float(np.median(multi))
    assert med_multi < 0.7 * med_mono, (
        f"triangulated median {med_multi:.3f} not below 0.7 x monocular {med_mono:.3f}")
    report("A6", f"median multi-view MPE {med_multi:.3f} m vs monocular "
                 f"{med_mono:.3f} m (ratio {med_multi / med_mono:.2f} < 0.7)")


# --- A9: baseline ordering -------------------------------------------------------

def test_a9_baseline_ordering():
    orbit_report, _ = eval_strategy(OrbitStrategy(), FULL_CONFIG, num_mavs=1,
                                    write_replays=False)
    frontal_report, _ = eval_strategy(FrontalStrategy(), FULL_CONFIG, num_mavs=1,
                                      write_replays=False)
    orbit_vis = orbit_report.visibility_fraction()
    frontal_vis = frontal_report.visibility_fraction()
    assert orbit_vis > frontal_vis, (
        f"orbit visibility {orbit_vis:.4f} not above frontal {frontal_vis:.4f}")
    report("A9", f"orbit visibility {orbit_vis:.4f} > frontal {frontal_vis:.4f}")


# --- A8: determinism -------------------------------------------------------------

def test_a8_determinism(tmp_path):
    cfg = FULL_CONFIG
    results = []
    for tag in ("x", "y"):
        out = tmp_path / f"train_{tag}"
        train("1.1", cfg, seed=88, out_dir=out, iterations=5)
        results.append((out / "training_metrics.csv").read_bytes())
    assert results[0] == results[1], "training metric logs differ between executions"

    ckpt = tmp_path / "train_x" / "checkpoint_1_1.json"
    eval_bytes = []
    for tag in ("p", "q"):
        out = tmp_path / f"eval_{tag}"
        rep, replays = eval_policy(ckpt, cfg, out_dir=out, write_replays=False)
        emit_reports(rep, replays, out)
        eval_bytes.append((out / "metrics.csv").read_bytes())
        # 20 runs x 120 s at 4 Hz: 9600 per-agent visibility rows
        assert rep.values("visible").size == 20 * 480
    assert eval_bytes[0] == eval_bytes[1], "evaluation metric logs differ"
    report("A8", "5-iteration training and 20-run evaluation logs are "
                 "byte-identical across executions")


# --- A7: collision safety --------------------------------------------------------

def _head_on_world(rng):
    cfg = WorldConfig(num_mavs=2, actor=ActorParams(static=True))
    world = reset_episode(cfg, seed=int(rng.integers(1 << 30)))
    center = rng.uniform([-6, -6, 2], [6, 6, 6])
    direction = rng.uniform(-1, 1, 3)
    direction[2] *= 0.3
    direction /= np.linalg.norm(direction)
    world.mavs[0].position = center - direction
    world.mavs[1].position = center + direction
    for k, sign in ((0, 1.0), (1, -1.0)):
        d = sign * direction
        world.mavs[k].yaw = math.atan2(d[1], d[0])
        world.mavs[k].velocity = np.zeros(3)
    return world


def test_a7_collision_safety(tmp_path):
    rcfg = RewardConfig()
    rng = np.random.default_rng(707)
    overall_min = math.inf
    for _ in range(20):
        world = _head_on_world(rng)
        for _ in range(80):
            proposed = [Action(np.array([2.0, 0.0, 0.0]), 0.0) for _ in range(2)]
            actions = potential_field_avoidance(proposed, world, rcfg)
            world, events = step_env(world, actions)
            overall_min = min(overall_min, events.inter_mav_distance)
    assert overall_min >= rcfg.d_lthresh, (
        f"min inter-MAV distance {overall_min:.3f} m below {rcfg.d_lthresh}")

    # trained 2.3 policy rarely enters the potential-penalty band
    cfg = dataclasses.replace(
        FULL_CONFIG,
        world=dataclasses.replace(FULL_CONFIG.world, t_episode=256),
        train=dataclasses.replace(FULL_CONFIG.train, workers=5, checkpoint_every=0))
    result = train("2.3", cfg, seed=1, out_dir=tmp_path / "net23", iterations=500)
    rep, _ = eval_policy(result.checkpoint_path, cfg, write_replays=False)
    dists = rep.values(METRIC_INTER_MAV)
    violation_fraction = float((dists < rcfg.d_lthresh).mean())
    assert violation_fraction < 0.01, (
        f"trained 2.3 policy in penalty band on {violation_fraction:.2%} of steps")
    report("A7", f"scripted head-on min distance {overall_min:.3f} m >= 1.0; "
                 f"trained 2.3 penalty-band fraction {violation_fraction:.3%} < 1%")


# --- A5: learning smoke test -----------------------------------------------------

def test_a5_learning_smoke(tmp_path):
    cfg = FULL_CONFIG
    baseline = measure_random_baseline("1.1", cfg, seed=0, episodes=20)
    start = time.perf_counter()
    result = train("1.1", cfg, seed=0, out_dir=tmp_path / "net11", iterations=200)
    elapsed = time.perf_counter() - start
    rewards = [m["mean_ep_reward"] for m in result.metrics]
    final10 = float(np.mean(rewards[-10:]))
    assert final10 >= 2.0 * baseline, (
        f"final-10 mean {final10:.2f} below 2 x baseline {baseline:.2f}")
    assert elapsed < 30 * 60, f"training took {elapsed / 60:.1f} min"
    report("A5", f"final-10 mean episode reward {final10:.1f} >= 2 x random "
                 f"baseline {baseline:.1f}, wall clock {elapsed / 60:.1f} min")
