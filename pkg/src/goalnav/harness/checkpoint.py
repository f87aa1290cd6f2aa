"""Checkpoint container: versioned, complete enough to resume bit-exactly.

Holds model/optimizer state, env-step counter, all RNG states, per-env
simulator state and the trainer's recurrent bookkeeping. Loading refuses a
format-version mismatch.
"""
from __future__ import annotations

from pathlib import Path

import torch

FORMAT_VERSION = 1


class CheckpointVersionError(RuntimeError):
    pass


def save_checkpoint(path, *, config_dict, env_steps, model, optimizer=None,
                    torch_rng=None, action_rng=None, env_state=None,
                    trainer_state=None, sg_snapshotted=True):
    payload = {
        "format_version": FORMAT_VERSION,
        "config": config_dict,
        "env_steps": int(env_steps),
        "model": model.state_dict(),
        "optimizer": optimizer.state_dict() if optimizer is not None else None,
        "torch_rng": torch_rng if torch_rng is not None else torch.get_rng_state(),
        "action_rng": action_rng,
        "env_state": env_state,
        "trainer_state": trainer_state,
        "sg_snapshotted": sg_snapshotted,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(payload, path)
    return path


def load_checkpoint(path):
    payload = torch.load(path, map_location="cpu", weights_only=False)
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"checkpoint format v{version} unsupported (expected v{FORMAT_VERSION})")
    return payload
