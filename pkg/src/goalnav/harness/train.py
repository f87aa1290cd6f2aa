"""PPO training loop over vectorized gridworld environments.

Determinism contract: given the same config, seed, platform and build, two
runs produce bit-identical metrics CSVs. All randomness funnels through one
root seed, fanned out to torch init, the action sampler and the per-env map
generators. Wall-clock timings never enter metrics.csv.
"""
from __future__ import annotations

import csv
import json
import time
from collections import deque
from pathlib import Path

import numpy as np
import torch

from .. import __version__
from ..backbone import GoalFeatures
from ..gridsim.kernels import BACKEND as KERNEL_BACKEND
from ..model import NavModel
from ..policy import (START_TOKEN, PpoNanError, RolloutBuffer, log_probs_for,
                      ppo_update, sample_actions)
from .checkpoint import load_checkpoint, save_checkpoint
from .config import config_to_dict
from .evaluate import eval_policy
from .vecenv import VecGridEnv

METRIC_FIELDS = ("env_steps", "sr", "spl", "policy_loss", "value_loss",
                 "entropy", "distill_loss")


def _fmt(x):
    return repr(float(x))


class Trainer:
    def __init__(self, cfg, resume_from=None):
        cfg.validate()
        self.cfg = cfg
        if cfg.torch_threads > 0:
            torch.set_num_threads(cfg.torch_threads)

        root = np.random.SeedSequence(cfg.seed)
        ss_torch, ss_actions, ss_envs = root.spawn(3)
        torch.manual_seed(int(ss_torch.generate_state(1)[0]))
        self.action_rng = torch.Generator()
        self.action_rng.manual_seed(int(ss_actions.generate_state(1)[0]))

        self.model = NavModel(cfg.model)
        self.optimizer = torch.optim.Adam(self.model.trainable_parameters(),
                                          lr=cfg.ppo.learning_rate)
        mc = cfg.model
        self.envs = VecGridEnv(cfg.map, cfg.num_envs, mc.backbone.resolution,
                               mc.sg_slots, seed_seq=ss_envs,
                               sg_window=mc.sg_window, sg_img_dim=mc.sg_img_dim)
        self.buffer = RolloutBuffer(
            cfg.rollout_len, cfg.num_envs,
            (3, mc.backbone.resolution, mc.backbone.resolution),
            mc.sg_window, mc.sg_slots, mc.sg_img_dim, mc.gru_hidden)

        self.hidden = self.model.policy.initial_hidden(cfg.num_envs)
        self.prev_action = torch.full((cfg.num_envs,), START_TOKEN, dtype=torch.long)
        self.env_goal_idx = torch.zeros(cfg.num_envs, dtype=torch.long)
        self.rolling = deque(maxlen=cfg.rolling_window)
        self.env_steps = 0
        self._goal_cache = None

        self.out_dir = Path(cfg.out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)

        if resume_from is not None:
            self._load(resume_from)
        self._refresh_goal_cache()

    # --- goal feature cache ----------------------------------------------------

    def _refresh_goal_cache(self, idx=None):
        with torch.no_grad():
            if idx is None:
                imgs = torch.stack(self.envs.goal_images)
                self._goal_cache = self.model.encode_goal(imgs)
            else:
                imgs = torch.stack([self.envs.goal_images[e] for e in idx])
                sub = self.model.encode_goal(imgs)
                rows = torch.as_tensor(idx)
                for full, part in zip(self._goal_cache.stage_feats, sub.stage_feats):
                    full[rows] = part
                self._goal_cache.final_map[rows] = sub.final_map
                self._goal_cache.pooled[rows] = sub.pooled

    # --- rollout collection ------------------------------------------------------

    def _act_current(self, push):
        """Policy forward on the current observations.

        push=True advances the scene-graph windows (collection); push=False
        builds a temporary window copy (value bootstrap at rollout end).
        """
        cfg = self.cfg
        obs_np, slots_np = self.envs.current_obs()
        obs = torch.from_numpy(obs_np).clone()
        if cfg.model.scene_graph:
            feats = self.model.sg_image_feature(obs)
            if push:
                sg_img, sg_slots, sg_mask, newest = self.envs.push_windows(feats)
            else:
                sg_img, sg_slots, sg_mask = (t.clone() for t in self.envs.window_batch())
                newest = torch.tensor([w.cursor for w in self.envs.windows])
                ar = torch.arange(cfg.num_envs)
                sg_img[ar, newest] = feats
                sg_slots[ar, newest] = torch.from_numpy(slots_np)
                sg_mask[ar, newest] = True
        else:
            sg_img = sg_slots = sg_mask = newest = None
        with torch.no_grad():
            out = self.model.act(obs, self._goal_cache, sg_img, sg_slots, sg_mask,
                                 self.prev_action, self.hidden, newest)
        return obs, (sg_img, sg_slots, sg_mask, newest), out

    def collect_rollout(self):
        cfg = self.cfg
        buf = self.buffer
        buf.reset()
        for e in range(cfg.num_envs):
            self.env_goal_idx[e] = buf.register_goal(self.envs.goal_images[e])
        buf.h0.copy_(self.hidden)

        for _ in range(cfg.rollout_len):
            obs, (sg_img, sg_slots, sg_mask, newest), out = self._act_current(push=True)
            actions = sample_actions(out.action_probs, self.action_rng)
            logprob = log_probs_for(out.action_logits, actions)
            rewards, dones = self.envs.step(actions.numpy())
            rewards_t = torch.from_numpy(rewards)
            dones_t = torch.from_numpy(dones)
            if cfg.model.scene_graph:
                buf.add(obs, self.env_goal_idx.clone(), sg_img, sg_slots, sg_mask,
                        self.prev_action, actions, logprob, out.value, rewards_t,
                        dones_t, newest)
            else:
                zero3 = torch.zeros(cfg.num_envs, 1, 1)
                buf.add(obs, self.env_goal_idx.clone(), zero3,
                        torch.zeros(cfg.num_envs, 1, 1, 6),
                        torch.zeros(cfg.num_envs, 1, dtype=torch.bool),
                        self.prev_action, actions, logprob, out.value, rewards_t,
                        dones_t)
            self.hidden = out.hidden * (~dones_t).float().unsqueeze(-1)
            self.prev_action = torch.where(dones_t, torch.tensor(START_TOKEN),
                                           actions)
            reset_idx = torch.nonzero(dones_t).flatten().tolist()
            if reset_idx:
                for e in reset_idx:
                    self.env_goal_idx[e] = buf.register_goal(self.envs.goal_images[e])
                self._refresh_goal_cache(reset_idx)
            for rec in self.envs.pop_completed():
                self.rolling.append((1.0 if rec.success else 0.0, rec.spl()))

        _, _, out = self._act_current(push=False)
        buf.finalize(out.value, cfg.ppo.gamma, cfg.ppo.gae_lambda)

    # --- main loop -----------------------------------------------------------------

    def run(self):
        cfg = self.cfg
        t_start = time.perf_counter()
        steps_per_update = cfg.rollout_len * cfg.num_envs
        n_updates = cfg.total_steps // steps_per_update
        done_updates = self.env_steps // steps_per_update

        metrics_path = self.out_dir / "metrics.csv"
        eval_path = self.out_dir / "eval.csv"
        new_run = self.env_steps == 0
        metrics_f = open(metrics_path, "w" if new_run else "a", newline="")
        writer = csv.writer(metrics_f)
        if new_run:
            from .config import save_config
            save_config(cfg, self.out_dir / "config.yaml")
            writer.writerow(METRIC_FIELDS)
            with open(eval_path, "w", newline="") as f:
                csv.writer(f).writerow(["env_steps", "sr", "spl", "episodes"])

        next_eval = (self.env_steps // cfg.eval_every + 1) * cfg.eval_every \
            if cfg.eval_every else None

        for _ in range(done_updates, n_updates):
            if (self.cfg.model.scene_graph and not self.cfg.model.sg_joint_training
                    and not self.model.sg_snapshotted
                    and self.env_steps >= cfg.model.sg_snapshot_step):
                self.model.snapshot_sg_encoder()
            self.collect_rollout()
            try:
                stats = ppo_update(self.model, self.optimizer, self.buffer,
                                   cfg.ppo, self.action_rng)
            except PpoNanError as err:
                self.env_steps += steps_per_update
                self._save(self.out_dir / "nan_abort.pt")
                metrics_f.close()
                raise RuntimeError(
                    f"aborted at {self.env_steps} env steps, checkpoint written "
                    f"to nan_abort.pt: {err}") from err
            self._refresh_goal_cache()
            self.env_steps += steps_per_update

            sr = (sum(s for s, _ in self.rolling) / len(self.rolling)
                  if self.rolling else 0.0)
            spl_v = (sum(p for _, p in self.rolling) / len(self.rolling)
                     if self.rolling else 0.0)
            writer.writerow([self.env_steps, _fmt(sr), _fmt(spl_v),
                             _fmt(stats["policy_loss"]), _fmt(stats["value_loss"]),
                             _fmt(stats["entropy"]), _fmt(stats["distill_loss"])])
            metrics_f.flush()

            if next_eval is not None and self.env_steps >= next_eval:
                sr_e, spl_e, _ = eval_policy(self.model, cfg, cfg.eval_episodes,
                                             cfg.heldout_seed_base)
                with open(eval_path, "a", newline="") as f:
                    csv.writer(f).writerow([self.env_steps, _fmt(sr_e), _fmt(spl_e),
                                            cfg.eval_episodes])
                self._save(self.out_dir / f"ckpt_{self.env_steps:09d}.pt")
                next_eval += cfg.eval_every

        metrics_f.close()
        self._save(self.out_dir / "final.pt")
        sr_f, spl_f, _ = eval_policy(self.model, cfg, cfg.final_eval_episodes,
                                     cfg.heldout_seed_base,
                                     out_csv=self.out_dir / "episodes.csv")
        with open(eval_path, "a", newline="") as f:
            csv.writer(f).writerow([self.env_steps, _fmt(sr_f), _fmt(spl_f),
                                    cfg.final_eval_episodes])
        summary = {
            "env_steps": self.env_steps,
            "final_sr": sr_f,
            "final_spl": spl_f,
            "wall_clock_s": time.perf_counter() - t_start,
            "kernel_backend": KERNEL_BACKEND,
            "code_version": __version__,
        }
        with open(self.out_dir / "summary.json", "w") as f:
            json.dump(summary, f, indent=2)
        return summary

    # --- checkpointing ---------------------------------------------------------------

    def _save(self, path):
        save_checkpoint(
            path,
            config_dict=config_to_dict(self.cfg),
            env_steps=self.env_steps,
            model=self.model,
            optimizer=self.optimizer,
            torch_rng=torch.get_rng_state(),
            action_rng=self.action_rng.get_state(),
            env_state=self.envs.state_dict(),
            trainer_state={
                "hidden": self.hidden.clone(),
                "prev_action": self.prev_action.clone(),
                "rolling": list(self.rolling),
            },
            sg_snapshotted=getattr(self.model, "sg_snapshotted", True),
        )

    def _load(self, payload):
        if isinstance(payload, (str, Path)):
            payload = load_checkpoint(payload)
        self.model.load_state_dict(payload["model"])
        if payload.get("sg_snapshotted"):
            self.model.sg_snapshotted = True
        self.optimizer.load_state_dict(payload["optimizer"])
        torch.set_rng_state(payload["torch_rng"])
        self.action_rng.set_state(payload["action_rng"])
        self.envs.load_state_dict(payload["env_state"])
        ts = payload["trainer_state"]
        self.hidden = ts["hidden"].clone()
        self.prev_action = ts["prev_action"].clone()
        self.rolling = deque(ts["rolling"], maxlen=self.cfg.rolling_window)
        self.env_steps = payload["env_steps"]


def run_training(cfg, resume_from=None):
    return Trainer(cfg, resume_from=resume_from).run()
