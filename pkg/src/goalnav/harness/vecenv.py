"""Vectorized environment wrapper used by training and evaluation.

Each slot owns an independent world/episode; maps are drawn either from a
per-slot seeded generator (training) or from an explicit seed list (held-out
evaluation). The wrapper also keeps the per-slot scene-graph window of raw
node ingredients (frozen image features + detection slot features), since
those must be snapshotted into the rollout buffer every step.
"""
from __future__ import annotations

import numpy as np
import torch

from ..gridsim import GridEnv, generate_world, render
from ..gridsim.render import detect_oracle
from ..gridsim.world import format_world, parse_world
from ..scenegraph import slots_from_detections


class SgWindow:
    """Ring buffer of raw node ingredients for one environment."""

    def __init__(self, capacity, img_dim, n_slots):
        self.capacity = capacity
        self.img = torch.zeros(capacity, img_dim)
        self.slots = torch.zeros(capacity, n_slots, 6)
        self.mask = torch.zeros(capacity, dtype=torch.bool)
        self.cursor = 0

    def reset(self):
        self.img.zero_()
        self.slots.zero_()
        self.mask.zero_()
        self.cursor = 0

    def push(self, img_feat, slot_feats):
        """Returns the slot index written (the newest node)."""
        idx = self.cursor
        self.img[idx] = img_feat
        self.slots[idx] = slot_feats
        self.mask[idx] = True
        self.cursor = (idx + 1) % self.capacity
        return idx

    def state_dict(self):
        return {"img": self.img.clone(), "slots": self.slots.clone(),
                "mask": self.mask.clone(), "cursor": self.cursor}

    def load_state_dict(self, state):
        self.img.copy_(state["img"])
        self.slots.copy_(state["slots"])
        self.mask.copy_(state["mask"])
        self.cursor = state["cursor"]


class VecGridEnv:
    def __init__(self, map_cfg, n_envs, resolution, n_slots, seed_seq=None,
                 eval_seeds=None, sg_window=8, sg_img_dim=1, auto_reset=True):
        self.map_cfg = map_cfg
        self.n_envs = n_envs
        self.resolution = resolution
        self.n_slots = n_slots
        self.auto_reset = auto_reset
        self.eval_seeds = list(eval_seeds) if eval_seeds is not None else None
        self._eval_pos = 0
        if seed_seq is not None:
            self.rngs = [np.random.Generator(np.random.PCG64(s))
                         for s in seed_seq.spawn(n_envs)]
        else:
            self.rngs = [None] * n_envs
        self.envs = [None] * n_envs
        self.goal_images = [None] * n_envs
        self.windows = [SgWindow(sg_window, sg_img_dim, n_slots)
                        for _ in range(n_envs)]
        self._obs = np.zeros((n_envs, 3, resolution, resolution), dtype=np.float32)
        self._slots = np.zeros((n_envs, n_slots, 6), dtype=np.float32)
        self.completed = []
        for e in range(n_envs):
            self.reset_env(e)

    # --- seeding --------------------------------------------------------------

    def _next_specs(self, e):
        cfg = self.map_cfg
        if self.eval_seeds is not None:
            if self._eval_pos >= len(self.eval_seeds):
                raise IndexError("ran out of evaluation seeds")
            seed = self.eval_seeds[self._eval_pos]
            self._eval_pos += 1
            # derive room/object counts from the episode seed itself
            rng = np.random.Generator(np.random.PCG64(seed))
        else:
            rng = self.rngs[e]
            seed = int(rng.integers(0, 2 ** 22))
        n_rooms = cfg.n_rooms
        n_objects = int(rng.integers(cfg.n_objects_min, cfg.n_objects_max + 1))
        return seed, n_rooms, n_objects

    def reset_env(self, e):
        seed, n_rooms, n_objects = self._next_specs(e)
        world = generate_world(seed, self.map_cfg.size, n_rooms, n_objects)
        self.envs[e] = GridEnv(world, reward_cfg=self.map_cfg.reward,
                               success_threshold=self.map_cfg.success_threshold,
                               max_steps=self.map_cfg.max_episode_steps)
        self.goal_images[e] = torch.from_numpy(
            render(world, world.goal, self.resolution))
        self.windows[e].reset()
        self._refresh_obs(e)

    def _refresh_obs(self, e):
        env = self.envs[e]
        self._obs[e] = render(env.world, env.agent, self.resolution)
        dets = detect_oracle(env.world, env.agent, self.resolution)
        self._slots[e] = slots_from_detections(
            dets, self.resolution, self.resolution, self.n_slots)

    # --- stepping ---------------------------------------------------------------

    def current_obs(self):
        """(observations [E, 3, R, R] float32, detection slots [E, K, 6])."""
        return self._obs, self._slots

    def push_windows(self, img_feats):
        """Record the current observation as a scene-graph node per env.

        img_feats: [E, img_dim] frozen-encoder features of current_obs().
        Returns (window img [E, N, D], slots [E, N, K, 6], mask [E, N],
        newest slot index [E]).
        """
        newest = torch.zeros(self.n_envs, dtype=torch.long)
        for e, w in enumerate(self.windows):
            newest[e] = w.push(img_feats[e], torch.from_numpy(self._slots[e]))
        return self.window_batch() + (newest,)

    def window_batch(self):
        img = torch.stack([w.img for w in self.windows])
        slots = torch.stack([w.slots for w in self.windows])
        mask = torch.stack([w.mask for w in self.windows])
        return img, slots, mask

    def step(self, actions):
        """Step every env; auto-resets finished episodes.

        Returns (rewards [E] float32, dones [E] bool). Completed episode
        records accumulate in self.completed.
        """
        rewards = np.zeros(self.n_envs, dtype=np.float32)
        dones = np.zeros(self.n_envs, dtype=bool)
        for e, env in enumerate(self.envs):
            _, r, done, _ = env.step(int(actions[e]))
            rewards[e] = r
            dones[e] = done
            if done:
                self.completed.append(env.record)
                if self.auto_reset:
                    self.reset_env(e)
            else:
                self._refresh_obs(e)
        return rewards, dones

    def step_subset(self, idx, actions):
        """Step only the listed envs (no auto-reset); returns dones [len(idx)]."""
        dones = np.zeros(len(idx), dtype=bool)
        for j, e in enumerate(idx):
            _, _, done, _ = self.envs[e].step(int(actions[j]))
            dones[j] = done
            if done:
                self.completed.append(self.envs[e].record)
            else:
                self._refresh_obs(e)
        return dones

    def push_windows_subset(self, idx, img_feats, slots):
        """push_windows() for a subset of envs; tensors are [len(idx), ...]."""
        newest = torch.zeros(len(idx), dtype=torch.long)
        for j, e in enumerate(idx):
            newest[j] = self.windows[e].push(img_feats[j], slots[j])
        img = torch.stack([self.windows[e].img for e in idx])
        sl = torch.stack([self.windows[e].slots for e in idx])
        mask = torch.stack([self.windows[e].mask for e in idx])
        return img, sl, mask, newest

    def pop_completed(self):
        out = self.completed
        self.completed = []
        return out

    # --- checkpoint support -----------------------------------------------------

    def state_dict(self):
        states = []
        for e in range(self.n_envs):
            env = self.envs[e]
            states.append({
                "world": format_world(env.world),
                "agent": (env.agent.row, env.agent.col, env.agent.heading),
                "record": {"geodesic_start": env.record.geodesic_start,
                           "steps": env.record.steps,
                           "path_cells": env.record.path_cells,
                           "collisions": env.record.collisions},
                "rng": self.rngs[e].bit_generator.state if self.rngs[e] else None,
                "window": self.windows[e].state_dict(),
            })
        return {"envs": states, "eval_pos": self._eval_pos}

    def load_state_dict(self, state):
        self._eval_pos = state["eval_pos"]
        for e, s in enumerate(state["envs"]):
            world = parse_world(s["world"])
            env = GridEnv(world, reward_cfg=self.map_cfg.reward,
                          success_threshold=self.map_cfg.success_threshold,
                          max_steps=self.map_cfg.max_episode_steps)
            env.agent.row, env.agent.col, env.agent.heading = s["agent"]
            for k, v in s["record"].items():
                setattr(env.record, k, v)
            self.envs[e] = env
            if s["rng"] is not None:
                self.rngs[e].bit_generator.state = s["rng"]
            self.windows[e].load_state_dict(s["window"])
            self.goal_images[e] = torch.from_numpy(
                render(world, world.goal, self.resolution))
            self._refresh_obs(e)
        self.completed = []
