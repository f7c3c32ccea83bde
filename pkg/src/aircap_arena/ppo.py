"""Clipped-surrogate PPO with GAE and a centralized critic.

Rollout collection snapshots the policy parameters, runs each worker's
environment to completion and assembles samples in canonical
(worker, step, agent) order, so results are independent of scheduling.  All
per-iteration randomness (environment seeds, action sampling, minibatch
shuffles) is derived from (seed, iteration), which makes checkpoint resume
bit-exact.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ArenaConfig, TrainConfig
from .envs import TrackingEnv
from .errors import CheckpointMismatch, LengthMismatch, NonFiniteLoss
from .nets import (AdamState, MlpParams, PolicyParams, adam_step, clip_grad_norm,
                   gaussian_entropy, gaussian_log_prob, init_policy, init_value,
                   mlp_backward, mlp_forward, policy_sample)
from .variants import VariantSpec, get_variant

CHECKPOINT_VERSION = 1

# Seed-stream tags (world/detection/proxy streams 0..2 live elsewhere).
_STREAM_UPDATE = 3
_STREAM_SAMPLE = 4
_STREAM_ENV = 5
_STREAM_BASELINE = 6
_STREAM_INIT = 10

COMPONENT_NAMES = ("center", "spin", "wspin", "col", "triag", "mhmr", "concol", "workspace")
METRICS_HEADER = ("iteration", "mean_ep_reward") + tuple(
    f"r_{c}_mean" for c in COMPONENT_NAMES) + (
    "actor_loss", "critic_loss", "clip_fraction", "entropy", "approx_kl")


def derived_seed(*entropy: int) -> int:
    """Well-mixed non-negative integer seed from a tuple of integers."""
    return int(np.random.SeedSequence(list(entropy)).generate_state(1, np.uint64)[0])


def gae(rewards, values, dones, gamma: float, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Generalized advantage estimation over a flat sequence with done flags.

    dones[t] marks that the transition at t ended its episode; the value
    beyond the final entry is taken as zero, so sequences should end on a
    done.  Returns (advantages, returns-to-go = advantages + values).
    """
    r = np.asarray(rewards, dtype=float)
    v = np.asarray(values, dtype=float)
    d = np.asarray(dones, dtype=bool)
    if not (r.shape == v.shape == d.shape) or r.ndim != 1:
        raise LengthMismatch(
            f"rewards {r.shape}, values {v.shape} and dones {d.shape} must be equal-length 1-D")
    adv = np.zeros_like(r)
    last = 0.0
    for t in range(len(r) - 1, -1, -1):
        nonterminal = 0.0 if d[t] else 1.0
        next_value = v[t + 1] if t + 1 < len(r) else 0.0
        delta = r[t] + gamma * next_value * nonterminal - v[t]
        last = delta + gamma * lam * nonterminal * last
        adv[t] = last
    return adv, adv + v


@dataclass
class RolloutBatch:
    """Trajectories in canonical (worker, step, agent) row order."""

    obs: np.ndarray          # (N, obs_dim)
    states: np.ndarray       # (N, state_dim)
    actions: np.ndarray      # (N, act_dim)
    logps: np.ndarray        # (N,)
    rewards: np.ndarray      # (N,)
    values: np.ndarray       # (N,)
    dones: np.ndarray        # (N,) bool
    advantages: np.ndarray   # (N,)
    returns: np.ndarray      # (N,)
    episode_rewards: np.ndarray           # (workers * K,) per-agent episode totals
    component_means: dict[str, float] = field(default_factory=dict)

    def __len__(self) -> int:
        return self.obs.shape[0]


def collect_rollouts(theta: PolicyParams, phi: MlpParams, env_factory, workers: int,
                     t_episode: int, gamma: float, lam: float,
                     sample_rng_factory) -> RolloutBatch:
    """Run `workers` independent episodes under a frozen policy snapshot.

    env_factory(worker) builds a fresh seeded environment;
    sample_rng_factory(worker) owns that worker's action-sampling stream.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    all_obs, all_states, all_actions, all_logps = [], [], [], []
    all_rewards, all_values, all_dones = [], [], []
    episode_rewards = []
    comp_sums: dict[str, float] = {}
    comp_count = 0

    for w in range(workers):
        env = env_factory(w)
        rng = sample_rng_factory(w)
        k_agents = env.num_agents
        obs, state = env.reset()
        for _ in range(t_episode):
            value = float(mlp_forward(phi, state)[0][0])
            actions = np.empty((k_agents, theta.log_std.shape[0]))
            logps = np.empty(k_agents)
            for k in range(k_agents):
                actions[k], logps[k] = policy_sample(theta, obs[k], rng)
            all_obs.append(obs)
            all_states.append(state)
            all_actions.append(actions)
            all_logps.append(logps)
            all_values.append(value)
            obs, state, rewards, done, info = env.step(actions)
            all_rewards.append(rewards)
            all_dones.append(done)
            for b in info["breakdowns"]:
                for name, val in b.components().items():
                    comp_sums[name] = comp_sums.get(name, 0.0) + val
                comp_count += 1
            if done:
                break

    w_count = workers
    t_count = len(all_obs) // w_count
    k_agents = all_obs[0].shape[0]
    obs_arr = np.asarray(all_obs).reshape(w_count, t_count, k_agents, -1)
    states_arr = np.asarray(all_states).reshape(w_count, t_count, -1)
    actions_arr = np.asarray(all_actions).reshape(w_count, t_count, k_agents, -1)
    logps_arr = np.asarray(all_logps).reshape(w_count, t_count, k_agents)
    rewards_arr = np.asarray(all_rewards).reshape(w_count, t_count, k_agents)
    values_arr = np.asarray(all_values).reshape(w_count, t_count)
    dones_arr = np.asarray(all_dones).reshape(w_count, t_count)

    adv_arr = np.zeros_like(rewards_arr)
    ret_arr = np.zeros_like(rewards_arr)
    for w in range(w_count):
        for k in range(k_agents):
            adv_arr[w, :, k], ret_arr[w, :, k] = gae(
                rewards_arr[w, :, k], values_arr[w], dones_arr[w], gamma, lam)
    episode_rewards = rewards_arr.sum(axis=1).reshape(-1)

    n = w_count * t_count * k_agents
    batch = RolloutBatch(
        obs=obs_arr.reshape(n, -1),
        states=np.repeat(states_arr[:, :, None, :], k_agents, axis=2).reshape(n, -1),
        actions=actions_arr.reshape(n, -1),
        logps=logps_arr.reshape(n),
        rewards=rewards_arr.reshape(n),
        values=np.repeat(values_arr[:, :, None], k_agents, axis=2).reshape(n),
        dones=np.repeat(dones_arr[:, :, None], k_agents, axis=2).reshape(n),
        advantages=adv_arr.reshape(n),
        returns=ret_arr.reshape(n),
        episode_rewards=episode_rewards,
        component_means={name: total / comp_count for name, total in sorted(comp_sums.items())},
    )
    return batch


def normalize_advantages(batch: RolloutBatch) -> None:
    adv = batch.advantages
    batch.advantages = (adv - adv.mean()) / (adv.std() + 1e-8)


def ppo_update(theta: PolicyParams, phi: MlpParams, adam_actor: AdamState,
               adam_critic: AdamState, batch: RolloutBatch, cfg: TrainConfig,
               rng: np.random.Generator):
    """Epochs of shuffled-minibatch clipped-surrogate updates.

    Returns (theta', phi', adam_actor', adam_critic', diagnostics).  Raises
    NonFiniteLoss (checkpointable diagnostics attached) when a loss leaves
    the reals.
    """
    n = len(batch)
    stats = {"actor_loss": [], "critic_loss": [], "clip_fraction": [],
             "entropy": [], "approx_kl": []}
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.minibatch_size):
            mb = perm[start:start + cfg.minibatch_size]
            m = len(mb)
            obs = batch.obs[mb]
            acts = batch.actions[mb]
            adv = batch.advantages[mb]
            logp_old = batch.logps[mb]
            rets = batch.returns[mb]
            states = batch.states[mb]

            means, cache = mlp_forward(theta.mlp, obs)
            std = np.exp(theta.log_std)
            z = (acts - means) / std
            logp_new = gaussian_log_prob(acts, means, theta.log_std)
            ratio = np.exp(logp_new - logp_old)
            unclipped = ratio * adv
            clipped = np.clip(ratio, 1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio) * adv
            objective = np.minimum(unclipped, clipped)
            entropy = gaussian_entropy(theta.log_std)
            actor_loss = -float(objective.mean()) - cfg.entropy_coef * entropy

            v_pred, v_cache = mlp_forward(phi, states)
            v_err = v_pred[:, 0] - rets
            critic_loss = cfg.value_coef * float((v_err * v_err).mean())

            diag_step = {
                "actor_loss": actor_loss,
                "critic_loss": critic_loss,
                "clip_fraction": float((np.abs(ratio - 1.0) > cfg.clip_ratio).mean()),
                "entropy": entropy,
                "approx_kl": float((logp_old - logp_new).mean()),
            }
            if not (math.isfinite(actor_loss) and math.isfinite(critic_loss)):
                raise NonFiniteLoss("PPO loss left the reals", diagnostics=diag_step)
            if cfg.debug_asserts:
                bound = np.maximum(unclipped,
                                   np.maximum((1.0 - cfg.clip_ratio) * adv,
                                              (1.0 + cfg.clip_ratio) * adv))
                assert np.all(objective <= bound + 1e-12), "clipped objective exceeded bound"

            # d(actor_loss)/d(logp_new): the min passes gradient to the
            # unclipped branch only where it is active.
            active = unclipped <= clipped
            dlogp = -(ratio * adv * active) / m
            dmean = dlogp[:, None] * (z / std)
            grads_mlp, _ = mlp_backward(theta.mlp, cache, dmean)
            dlog_std = (dlogp[:, None] * (z * z - 1.0)).sum(axis=0) - cfg.entropy_coef
            actor_grads, _ = clip_grad_norm(grads_mlp.arrays() + [dlog_std], cfg.max_grad_norm)
            new_arrays, adam_actor = adam_step(theta.arrays(), actor_grads, adam_actor,
                                               cfg.learning_rate)
            theta = PolicyParams.from_arrays(new_arrays)

            dv = (cfg.value_coef * 2.0 * v_err / m)[:, None]
            v_grads, _ = mlp_backward(phi, v_cache, dv)
            critic_grads, _ = clip_grad_norm(v_grads.arrays(), cfg.max_grad_norm)
            new_v_arrays, adam_critic = adam_step(phi.arrays(), critic_grads, adam_critic,
                                                  cfg.critic_learning_rate)
            phi = MlpParams.from_arrays(new_v_arrays)

            for key, val in diag_step.items():
                stats[key].append(val)

    diagnostics = {key: float(np.mean(vals)) for key, vals in stats.items()}
    return theta, phi, adam_actor, adam_critic, diagnostics


def curriculum_transfer(src: PolicyParams, dst: PolicyParams) -> PolicyParams:
    """Seed a larger policy with a pretrained smaller one.

    Overlapping blocks of every weight matrix, bias and log-std prefix are
    copied; weight rows for inputs the source never saw are zeroed so the
    transferred behavior initially ignores the new observation fields.
    """
    out = dst.copy()
    for i, w_src in enumerate(src.mlp.weights):
        w_dst = out.mlp.weights[i]
        n_in = min(w_src.shape[0], w_dst.shape[0])
        n_out = min(w_src.shape[1], w_dst.shape[1])
        w_dst[:n_in, :n_out] = w_src[:n_in, :n_out]
        w_dst[n_in:, :n_out] = 0.0
        out.mlp.biases[i][:n_out] = src.mlp.biases[i][:n_out]
    n_act = min(src.log_std.shape[0], out.log_std.shape[0])
    out.log_std[:n_act] = src.log_std[:n_act]
    return out


# --- checkpoints ----------------------------------------------------------------

def _mlp_to_json(mlp: MlpParams) -> dict:
    return {"weights": [w.tolist() for w in mlp.weights],
            "biases": [b.tolist() for b in mlp.biases]}


def _mlp_from_json(data: dict) -> MlpParams:
    return MlpParams(weights=[np.array(w, dtype=float) for w in data["weights"]],
                     biases=[np.array(b, dtype=float) for b in data["biases"]])


def _adam_to_json(state: AdamState) -> dict:
    return {"m": [a.tolist() for a in state.m], "v": [a.tolist() for a in state.v],
            "t": state.t}


def _adam_from_json(data: dict) -> AdamState:
    return AdamState(m=[np.array(a, dtype=float) for a in data["m"]],
                     v=[np.array(a, dtype=float) for a in data["v"]], t=int(data["t"]))


def save_checkpoint(path, variant: str, iteration: int, seed: int, theta: PolicyParams,
                    phi: MlpParams, adam_actor: AdamState, adam_critic: AdamState):
    """Versioned JSON checkpoint; float lists round-trip bit-exactly."""
    payload = {
        "version": CHECKPOINT_VERSION,
        "variant": variant,
        "iteration": iteration,
        "seed": seed,
        "rng": {"scheme": "derived-per-iteration", "seed": seed, "iteration": iteration},
        "policy": {**_mlp_to_json(theta.mlp), "log_std": theta.log_std.tolist()},
        "value": _mlp_to_json(phi),
        "adam_actor": _adam_to_json(adam_actor),
        "adam_critic": _adam_to_json(adam_critic),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_checkpoint(path, expected_variant: str | None = None) -> dict:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("version") != CHECKPOINT_VERSION:
        raise CheckpointMismatch(f"unsupported checkpoint version {payload.get('version')}")
    if expected_variant is not None and payload["variant"] != expected_variant:
        raise CheckpointMismatch(
            f"checkpoint holds variant {payload['variant']}, requested {expected_variant}")
    theta = PolicyParams(mlp=_mlp_from_json(payload["policy"]),
                         log_std=np.array(payload["policy"]["log_std"], dtype=float))
    return {
        "variant": payload["variant"],
        "iteration": payload["iteration"],
        "seed": payload["seed"],
        "theta": theta,
        "phi": _mlp_from_json(payload["value"]),
        "adam_actor": _adam_from_json(payload["adam_actor"]),
        "adam_critic": _adam_from_json(payload["adam_critic"]),
    }


# --- training loop ----------------------------------------------------------------

@dataclass
class TrainResult:
    theta: PolicyParams
    phi: MlpParams
    metrics: list[dict]
    checkpoint_path: str | None


def write_metrics_csv(rows: list[dict], path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_HEADER)
        for row in rows:
            writer.writerow([row.get(col, "") for col in METRICS_HEADER])


def _metrics_row(iteration: int, batch: RolloutBatch, diagnostics: dict) -> dict:
    row = {"iteration": iteration,
           "mean_ep_reward": float(batch.episode_rewards.mean())}
    for comp in COMPONENT_NAMES:
        if comp in batch.component_means:
            row[f"r_{comp}_mean"] = batch.component_means[comp]
    row.update(diagnostics)
    return row


def init_params(spec: VariantSpec, train_cfg: TrainConfig,
                seed: int) -> tuple[PolicyParams, MlpParams]:
    rng = np.random.default_rng(np.random.SeedSequence([seed, _STREAM_INIT]))
    theta = init_policy(spec.obs_dim, spec.hidden, spec.action_dim, rng,
                        initial_std=train_cfg.initial_std)
    phi = init_value(spec.state_dim, spec.hidden, rng)
    return theta, phi


def train(variant_name: str, config: ArenaConfig, seed: int, out_dir,
          iterations: int | None = None, curriculum_from=None,
          resume_from=None) -> TrainResult:
    """Algorithm: iterate rollout collection, advantage estimation and the
    clipped-surrogate update; checkpoint periodically and on abort.

    `curriculum_from` seeds the actor from a pretrained checkpoint of a
    (possibly smaller) variant; `resume_from` continues a run bit-exactly.
    """
    spec = get_variant(variant_name)
    cfg = config.train
    total_iters = cfg.iterations if iterations is None else iterations
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    start_iter = 0
    if resume_from is not None:
        snap = load_checkpoint(resume_from, expected_variant=variant_name)
        theta, phi = snap["theta"], snap["phi"]
        adam_actor, adam_critic = snap["adam_actor"], snap["adam_critic"]
        seed = snap["seed"]
        start_iter = snap["iteration"]
    else:
        theta, phi = init_params(spec, cfg, seed)
        if curriculum_from is not None:
            pretrained = load_checkpoint(curriculum_from)
            theta = curriculum_transfer(pretrained["theta"], theta)
        adam_actor = AdamState.like(theta.arrays())
        adam_critic = AdamState.like(phi.arrays())

    metrics: list[dict] = []
    ckpt_path = out_dir / f"checkpoint_{variant_name.replace('.', '_')}.json"

    def checkpoint(iteration: int):
        save_checkpoint(ckpt_path, variant_name, iteration, seed, theta, phi,
                        adam_actor, adam_critic)

    for it in range(start_iter, total_iters):
        def env_factory(worker: int, _it=it):
            return TrackingEnv(spec, config, seed=derived_seed(seed, _STREAM_ENV, _it, worker))

        def sample_rng_factory(worker: int, _it=it):
            return np.random.default_rng(
                np.random.SeedSequence([seed, _STREAM_SAMPLE, _it, worker]))

        batch = collect_rollouts(theta, phi, env_factory, cfg.workers,
                                 config.world.t_episode, cfg.gamma, cfg.gae_lambda,
                                 sample_rng_factory)
        if cfg.normalize_advantages:
            normalize_advantages(batch)
        update_rng = np.random.default_rng(np.random.SeedSequence([seed, _STREAM_UPDATE, it]))
        try:
            theta, phi, adam_actor, adam_critic, diagnostics = ppo_update(
                theta, phi, adam_actor, adam_critic, batch, cfg, update_rng)
        except NonFiniteLoss:
            checkpoint(it)
            write_metrics_csv(metrics, out_dir / "training_metrics.csv")
            raise
        metrics.append(_metrics_row(it, batch, diagnostics))
        if cfg.checkpoint_every > 0 and (it + 1) % cfg.checkpoint_every == 0:
            checkpoint(it + 1)

    checkpoint(total_iters)
    write_metrics_csv(metrics, out_dir / "training_metrics.csv")
    return TrainResult(theta=theta, phi=phi, metrics=metrics,
                       checkpoint_path=str(ckpt_path))


def measure_random_baseline(variant_name: str, config: ArenaConfig, seed: int,
                            episodes: int = 20) -> float:
    """Mean per-agent episode reward of the freshly initialized (iteration-0) policy."""
    spec = get_variant(variant_name)
    theta, _ = init_params(spec, config.train, seed)
    totals = []
    for ep in range(episodes):
        env = TrackingEnv(spec, config, seed=derived_seed(seed, _STREAM_BASELINE, ep))
        rng = np.random.default_rng(np.random.SeedSequence([seed, _STREAM_BASELINE, ep, 1]))
        obs, _state = env.reset()
        sums = np.zeros(env.num_agents)
        done = False
        while not done:
            actions = np.stack([policy_sample(theta, obs[k], rng)[0]
                                for k in range(env.num_agents)])
            obs, _state, rewards, done, _info = env.step(actions)
            sums += rewards
        totals.extend(sums.tolist())
    return float(np.mean(totals))
