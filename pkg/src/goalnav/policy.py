"""Recurrent actor-critic head and PPO machinery.

The policy concatenates the fused backbone embedding with the scene-graph
feature, adds a learned embedding of the previous action, advances one GRU
step and emits categorical logits over the 5 navigation actions plus a state
value. Training uses clipped-surrogate PPO over fixed-length rollouts with
GAE, entropy bonus and the self-distillation loss added to the objective.
"""
from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

N_ACTIONS = 5
START_TOKEN = N_ACTIONS  # previous-action index used at episode starts


@dataclass
class PolicyOutput:
    action_logits: torch.Tensor  # [B, 5]
    action_probs: torch.Tensor   # [B, 5]
    value: torch.Tensor          # [B]
    hidden: torch.Tensor         # [B, hidden_dim]


class PpoNanError(RuntimeError):
    """A loss component became non-finite; carries the diagnostic values."""

    def __init__(self, components):
        self.components = components
        super().__init__(f"non-finite PPO loss: {components}")


def _ortho(layer, gain):
    nn.init.orthogonal_(layer.weight, gain)
    nn.init.zeros_(layer.bias)
    return layer


class RecurrentActorCritic(nn.Module):
    def __init__(self, input_dim, hidden_dim=512):
        super().__init__()
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.action_embed = nn.Embedding(N_ACTIONS + 1, input_dim)
        self.gru = nn.GRUCell(input_dim, hidden_dim)
        self.actor = _ortho(nn.Linear(hidden_dim, N_ACTIONS), 0.01)
        self.critic = _ortho(nn.Linear(hidden_dim, 1), 1.0)

    def initial_hidden(self, batch, dtype=torch.float32):
        return torch.zeros(batch, self.hidden_dim, dtype=dtype)

    def step(self, features, prev_action, hidden):
        """One policy step; features [B, input_dim], prev_action [B] long."""
        x = features + self.action_embed(prev_action)
        h = self.gru(x, hidden)
        logits = self.actor(h)
        return PolicyOutput(logits, torch.softmax(logits, dim=-1),
                            self.critic(h).squeeze(-1), h)


def policy_step(f_backbone, f_env, prev_action, hidden, params):
    """Functional form: params is a RecurrentActorCritic.

    f_env may be None when the scene graph is disabled.
    """
    feats = f_backbone if f_env is None else torch.cat([f_backbone, f_env], dim=-1)
    return params.step(feats, prev_action, hidden)


def sample_actions(probs, generator=None):
    return torch.multinomial(probs, 1, generator=generator).squeeze(-1)


def log_probs_for(logits, actions):
    return F.log_softmax(logits, dim=-1).gather(-1, actions.unsqueeze(-1)).squeeze(-1)


def entropy_of(logits):
    logp = F.log_softmax(logits, dim=-1)
    return -(logp.exp() * logp).sum(dim=-1)


def compute_gae(rewards, values, dones, gamma, lam, bootstrap_value):
    """Standard recursive generalized advantage estimation.

    All columns are [T, E] (or [T]); bootstrap_value is V(s_T) for the state
    after the last stored step. Returns (advantages, returns) with
    returns = advantages + values. A done at step t blocks bootstrapping
    into step t+1.
    """
    if not (rewards.shape == values.shape == dones.shape):
        raise ValueError("rewards/values/dones length mismatch")
    advantages = torch.zeros_like(values)
    not_done = 1.0 - dones.to(values.dtype)
    gae = torch.zeros_like(bootstrap_value)
    next_value = bootstrap_value
    for t in range(rewards.shape[0] - 1, -1, -1):
        delta = rewards[t] + gamma * next_value * not_done[t] - values[t]
        gae = delta + gamma * lam * not_done[t] * gae
        advantages[t] = gae
        next_value = values[t]
    return advantages, advantages + values


@dataclass
class PpoConfig:
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip: float = 0.2
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    epochs: int = 4
    minibatches: int = 4
    learning_rate: float = 2.5e-4
    max_grad_norm: float = 0.5


class RolloutBuffer:
    """Fixed-size [T, E] storage of everything needed to replay the rollout
    through the current parameters during the update epochs.

    Observations and raw scene-graph windows are stored (not features): the
    backbone and instance MLP change every gradient step. Frozen scene-graph
    image embeddings are cached as-is. Goal images are deduplicated; steps
    refer to them by index.
    """

    def __init__(self, steps, n_envs, obs_shape, sg_window, n_slots, sg_img_dim,
                 hidden_dim):
        t, e = steps, n_envs
        self.steps, self.n_envs = t, e
        self.obs = torch.zeros(t, e, *obs_shape)
        self.goal_idx = torch.zeros(t, e, dtype=torch.long)
        self.sg_img = torch.zeros(t, e, sg_window, sg_img_dim)
        self.sg_slots = torch.zeros(t, e, sg_window, n_slots, 6)
        self.sg_mask = torch.zeros(t, e, sg_window, dtype=torch.bool)
        self.sg_newest = torch.zeros(t, e, dtype=torch.long)
        self.prev_action = torch.zeros(t, e, dtype=torch.long)
        self.action = torch.zeros(t, e, dtype=torch.long)
        self.logprob = torch.zeros(t, e)
        self.value = torch.zeros(t, e)
        self.reward = torch.zeros(t, e)
        self.done = torch.zeros(t, e, dtype=torch.bool)
        self.h0 = torch.zeros(e, hidden_dim)
        self.goal_images = []          # unique goal images this rollout
        self.advantage = torch.zeros(t, e)
        self.returns = torch.zeros(t, e)
        self.pos = 0

    def register_goal(self, goal_img):
        self.goal_images.append(goal_img)
        return len(self.goal_images) - 1

    def add(self, obs, goal_idx, sg_img, sg_slots, sg_mask, prev_action, action,
            logprob, value, reward, done, sg_newest=None):
        t = self.pos
        self.obs[t] = obs
        self.goal_idx[t] = goal_idx
        self.sg_img[t] = sg_img
        self.sg_slots[t] = sg_slots
        self.sg_mask[t] = sg_mask
        if sg_newest is not None:
            self.sg_newest[t] = sg_newest
        self.prev_action[t] = prev_action
        self.action[t] = action
        self.logprob[t] = logprob
        self.value[t] = value
        self.reward[t] = reward
        self.done[t] = done
        self.pos += 1

    def finalize(self, bootstrap_value, gamma, lam, normalize=True):
        if self.pos != self.steps:
            raise ValueError(f"buffer has {self.pos}/{self.steps} steps")
        self.advantage, self.returns = compute_gae(
            self.reward, self.value, self.done.float(), gamma, lam, bootstrap_value)
        if normalize:
            flat = self.advantage.flatten()
            self.advantage = (self.advantage - flat.mean()) / (flat.std() + 1e-8)

    def reset(self):
        self.pos = 0
        self.goal_images = []

    def env_minibatches(self, n_minibatches, generator):
        perm = torch.randperm(self.n_envs, generator=generator)
        for chunk in perm.chunk(n_minibatches):
            yield chunk


def ppo_update(model, optimizer, buffer, cfg, generator):
    """Clipped-surrogate update over the rollout; returns mean loss stats.

    `model` must expose evaluate_rollout(buffer, env_idx) returning new
    log-probs, entropies, values [T, |env_idx|] and the distillation loss.
    Raises PpoNanError (before stepping) if any component is non-finite.
    """
    stats = {k: 0.0 for k in ("policy_loss", "value_loss", "entropy",
                              "distill_loss", "clip_frac", "approx_kl")}
    n = 0
    for _ in range(cfg.epochs):
        for env_idx in buffer.env_minibatches(cfg.minibatches, generator):
            new_logprob, ent, value, l_dis = model.evaluate_rollout(buffer, env_idx)
            old_logprob = buffer.logprob[:, env_idx]
            adv = buffer.advantage[:, env_idx]
            ratio = (new_logprob - old_logprob).exp()
            clipped = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip)
            policy_loss = -torch.min(ratio * adv, clipped * adv).mean()
            value_loss = 0.5 * (value - buffer.returns[:, env_idx]).pow(2).mean()
            entropy = ent.mean()
            loss = (policy_loss + cfg.value_coef * value_loss
                    - cfg.entropy_coef * entropy + l_dis)
            components = {"policy_loss": policy_loss.item(),
                          "value_loss": value_loss.item(),
                          "entropy": entropy.item(),
                          "distill_loss": l_dis.detach().item(),
                          "total": loss.item()}
            if not torch.isfinite(loss):
                raise PpoNanError(components)
            optimizer.zero_grad()
            loss.backward()
            if cfg.max_grad_norm:
                nn.utils.clip_grad_norm_(model.parameters(), cfg.max_grad_norm)
            optimizer.step()

            with torch.no_grad():
                stats["policy_loss"] += components["policy_loss"]
                stats["value_loss"] += components["value_loss"]
                stats["entropy"] += components["entropy"]
                stats["distill_loss"] += components["distill_loss"]
                stats["clip_frac"] += ((ratio - 1.0).abs() > cfg.clip).float().mean().item()
                stats["approx_kl"] += (old_logprob - new_logprob).mean().item()
            n += 1
    return {k: v / n for k, v in stats.items()}
