"""Held-out evaluation: greedy policy rollout over explicit map seeds.

Episodes are processed in waves of parallel environments; each env runs
exactly one seeded episode, so results are independent of wave size. SR is
the success fraction, SPL the success-weighted path ratio.
"""
from __future__ import annotations

import csv

import numpy as np
import torch

from ..gridsim import GridEnv, generate_world, spl, success_rate
from ..gridsim.oracle_agent import run_oracle_episode
from ..model import NavModel
from ..policy import START_TOKEN
from .checkpoint import load_checkpoint
from .config import config_from_dict
from .vecenv import VecGridEnv

EVAL_WAVE = 32


def _episode_specs(seed, map_cfg):
    rng = np.random.Generator(np.random.PCG64(seed))
    n_objects = int(rng.integers(map_cfg.n_objects_min, map_cfg.n_objects_max + 1))
    return map_cfg.n_rooms, n_objects


@torch.no_grad()
def eval_policy(model, cfg, n_episodes, seed_base, out_csv=None):
    """Evaluate greedy actions on held-out seeds; returns (sr, spl, records)."""
    if n_episodes <= 0:
        raise ValueError(f"n_episodes must be positive, got {n_episodes}")
    model.eval()
    mc = cfg.model
    records = []
    start = 0
    while start < n_episodes:
        wave = min(EVAL_WAVE, n_episodes - start)
        seeds = [seed_base + start + i for i in range(wave)]
        envs = VecGridEnv(cfg.map, wave, mc.backbone.resolution, mc.sg_slots,
                          eval_seeds=seeds, sg_window=mc.sg_window,
                          sg_img_dim=mc.sg_img_dim, auto_reset=False)
        goal_feats = model.encode_goal(torch.stack(envs.goal_images))
        hidden = model.policy.initial_hidden(wave)
        prev = torch.full((wave,), START_TOKEN, dtype=torch.long)
        running = list(range(wave))
        while running:
            obs_np, slots_np = envs.current_obs()
            obs = torch.from_numpy(obs_np[running]).clone()
            if mc.scene_graph:
                feats = model.sg_image_feature(obs)
                slot_t = torch.from_numpy(slots_np[running]).clone()
                sg_img, sg_slots, sg_mask, newest = envs.push_windows_subset(
                    running, feats, slot_t)
            else:
                sg_img = sg_slots = sg_mask = newest = None
            rows = torch.as_tensor(running)
            out = model.act(obs, goal_feats.select(rows), sg_img, sg_slots,
                            sg_mask, prev[rows], hidden[rows], newest)
            actions = out.action_probs.argmax(dim=-1)
            dones = envs.step_subset(running, actions.numpy())
            hidden[rows] = out.hidden
            prev[rows] = actions
            running = [e for e, d in zip(running, dones) if not d]
        records.extend(env.record for env in envs.envs)
        start += wave

    model.train()
    sr, sp = success_rate(records), spl(records)
    if out_csv is not None:
        with open(out_csv, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["episode", "seed", "success", "spl", "steps",
                        "path_cells", "geodesic", "collisions"])
            for i, r in enumerate(records):
                w.writerow([i, seed_base + i, int(r.success), repr(r.spl()),
                            r.steps, r.path_cells, r.geodesic_start, r.collisions])
    return sr, sp, records


def eval_oracle(cfg, n_episodes, seed_base, out_csv=None):
    """Shortest-path oracle baseline on the same held-out seeds."""
    if n_episodes <= 0:
        raise ValueError(f"n_episodes must be positive, got {n_episodes}")
    records = []
    for i in range(n_episodes):
        seed = seed_base + i
        n_rooms, n_objects = _episode_specs(seed, cfg.map)
        world = generate_world(seed, cfg.map.size, n_rooms, n_objects)
        env = GridEnv(world, reward_cfg=cfg.map.reward,
                      success_threshold=cfg.map.success_threshold,
                      max_steps=cfg.map.max_episode_steps)
        records.append(run_oracle_episode(env))
    sr, sp = success_rate(records), spl(records)
    if out_csv is not None:
        with open(out_csv, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["episode", "seed", "success", "spl", "steps",
                        "path_cells", "geodesic", "collisions"])
            for i, r in enumerate(records):
                w.writerow([i, seed_base + i, int(r.success), repr(r.spl()),
                            r.steps, r.path_cells, r.geodesic_start, r.collisions])
    return sr, sp, records


def eval_checkpoint(ckpt_path, n_episodes, seed_base=None, out_csv=None):
    """Load a checkpoint and evaluate it; refuses version mismatches."""
    payload = load_checkpoint(ckpt_path)
    cfg = config_from_dict(payload["config"])
    model = NavModel(cfg.model)
    model.load_state_dict(payload["model"])
    if seed_base is None:
        seed_base = cfg.heldout_seed_base
    return eval_policy(model, cfg, n_episodes, seed_base, out_csv=out_csv)
