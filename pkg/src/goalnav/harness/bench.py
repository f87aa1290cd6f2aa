"""Per-component inference latency benchmark.

Times a single policy step (backbone fusion + scene graph + GRU heads) for
the four component stacks: baseline fusion, attention fusion, attention
fusion with distillation enabled (distillation is training-only, so its
inference cost is zero by construction; the row exists to demonstrate that),
and the full model with the scene graph.
"""
from __future__ import annotations

import csv
import dataclasses
import time

import torch

from ..gridsim import generate_world, render
from ..gridsim.render import detect_oracle
from ..model import NavModel
from ..policy import START_TOKEN
from ..scenegraph import slots_from_detections
from .checkpoint import load_checkpoint
from .config import RunConfig, config_from_dict

COMBOS = (
    ("film", False, False),
    ("sca_wdm", False, False),
    ("sca_wdm", True, False),
    ("sca_wdm", True, True),
)


def _variant_config(base_model_cfg, fusion, distill, scene_graph):
    bb = dataclasses.replace(base_model_cfg.backbone, fusion_mode=fusion)
    return dataclasses.replace(base_model_cfg, backbone=bb, distill=distill,
                               scene_graph=scene_graph)


@torch.no_grad()
def bench_model(model, cfg, iters=200, warmup=20, world_seed=123):
    """Mean per-step latency (ms) of model.act on a fixed rendered scene."""
    mc = cfg.model if isinstance(cfg, RunConfig) else cfg
    res = model.cfg.backbone.resolution
    world = generate_world(world_seed, cfg.map.size, cfg.map.n_rooms,
                           cfg.map.n_objects_max)
    obs = torch.from_numpy(render(world, world.start, res)).unsqueeze(0)
    goal = torch.from_numpy(render(world, world.goal, res)).unsqueeze(0)
    goal_feats = model.encode_goal(goal)
    if model.cfg.scene_graph:
        dets = detect_oracle(world, world.start, res)
        slots = torch.from_numpy(
            slots_from_detections(dets, res, res, model.cfg.sg_slots))
        n = model.cfg.sg_window
        feat = model.sg_image_feature(obs).squeeze(0)
        sg_img = feat.repeat(n, 1).unsqueeze(0)  # full window: worst case
        sg_slots = slots.repeat(n, 1, 1).unsqueeze(0)
        sg_mask = torch.ones(1, n, dtype=torch.bool)
    else:
        sg_img = sg_slots = sg_mask = None
    prev = torch.full((1,), START_TOKEN, dtype=torch.long)
    hidden = model.policy.initial_hidden(1)

    def step():
        model.act(obs, goal_feats, sg_img, sg_slots, sg_mask, prev, hidden)

    for _ in range(warmup):
        step()
    t0 = time.perf_counter()
    for _ in range(iters):
        step()
    return (time.perf_counter() - t0) / iters * 1e3


def run_bench(ckpt_path=None, cfg=None, iters=200, device_label="cpu", seed=0,
              out_csv=None):
    """Benchmark the four component combinations; returns a list of row dicts."""
    if ckpt_path is not None:
        payload = load_checkpoint(ckpt_path)
        cfg = config_from_dict(payload["config"])
    elif cfg is None:
        cfg = RunConfig()
    rows = []
    for fusion, distill, scene_graph in COMBOS:
        torch.manual_seed(seed)
        model = NavModel(_variant_config(cfg.model, fusion, distill, scene_graph))
        model.eval()
        ms = bench_model(model, cfg, iters=iters)
        rows.append({"fusion": fusion, "distill": distill,
                     "scene_graph": scene_graph, "mean_ms": ms,
                     "device": device_label})
    if out_csv is not None:
        with open(out_csv, "w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    return rows


def format_rows(rows):
    lines = [f"{'fusion':<10} {'distill':<8} {'scene_graph':<12} {'mean_ms':>8}  device"]
    for r in rows:
        lines.append(f"{r['fusion']:<10} {str(r['distill']):<8} "
                     f"{str(r['scene_graph']):<12} {r['mean_ms']:8.2f}  {r['device']}")
    return "\n".join(lines)
