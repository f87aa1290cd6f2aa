"""Episode replay: regenerate a world from its seed, re-run a recorded action
list, and write per-step egocentric frames plus a top-down trajectory map.

A replay file (seed + actions) reproduces any episode bit-exactly because the
simulator is a deterministic function of both.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from ..gridsim import Action, GridEnv, generate_world, render
from ..gridsim.render import CLASS_COLORS

REPLAY_FORMAT_VERSION = 1
CELL_PX = 24


class ReplayError(ValueError):
    pass


def write_replay_file(path, seed, size, n_rooms, n_objects, actions):
    lines = [f"gridworld-replay v{REPLAY_FORMAT_VERSION}",
             f"seed {seed}", f"size {size}", f"rooms {n_rooms}",
             f"objects {n_objects}", "actions"]
    lines += [Action(a).name for a in actions]
    Path(path).write_text("\n".join(lines) + "\n")


def parse_replay_file(path):
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("gridworld-replay v"):
        raise ReplayError(f"{path}: not a replay file")
    version = int(lines[0].split("v")[-1])
    if version != REPLAY_FORMAT_VERSION:
        raise ReplayError(f"{path}: unsupported replay version {version}")
    header = {}
    idx = 1
    for key in ("seed", "size", "rooms", "objects"):
        parts = lines[idx].split()
        if len(parts) != 2 or parts[0] != key:
            raise ReplayError(f"{path}:{idx + 1}: expected '{key} <int>'")
        header[key] = int(parts[1])
        idx += 1
    if lines[idx] != "actions":
        raise ReplayError(f"{path}:{idx + 1}: expected 'actions'")
    actions = []
    for ln, raw in enumerate(lines[idx + 1:], start=idx + 2):
        token = raw.strip()
        if not token:
            continue
        try:
            actions.append(Action[token])
        except KeyError:
            raise ReplayError(f"{path}:{ln}: unknown action token {token!r}") from None
    return header, actions


def _topdown(world, visited, out_path):
    s = world.size * CELL_PX
    img = Image.new("RGB", (s, s), (235, 235, 235))
    draw = ImageDraw.Draw(img)
    for r in range(world.size):
        for c in range(world.size):
            if world.walls[r, c]:
                draw.rectangle([c * CELL_PX, r * CELL_PX,
                                (c + 1) * CELL_PX - 1, (r + 1) * CELL_PX - 1],
                               fill=(60, 60, 60))
    for o in world.objects:
        color = tuple(int(255 * v) for v in CLASS_COLORS[o.class_index - 1])
        draw.rectangle([o.col * CELL_PX + 6, o.row * CELL_PX + 6,
                        (o.col + 1) * CELL_PX - 7, (o.row + 1) * CELL_PX - 7],
                       fill=color)
    gr, gc = world.goal.row, world.goal.col
    draw.ellipse([gc * CELL_PX + 4, gr * CELL_PX + 4,
                  (gc + 1) * CELL_PX - 5, (gr + 1) * CELL_PX - 5],
                 outline=(0, 160, 0), width=3)
    pts = [(c * CELL_PX + CELL_PX // 2, r * CELL_PX + CELL_PX // 2)
           for r, c in visited]
    if len(pts) > 1:
        draw.line(pts, fill=(30, 90, 220), width=3)
    for p, color in ((pts[0], (220, 40, 40)), (pts[-1], (30, 90, 220))):
        draw.ellipse([p[0] - 4, p[1] - 4, p[0] + 4, p[1] + 4], fill=color)
    img.save(out_path)


def _save_frame(frame, path):
    arr = (np.clip(frame, 0.0, 1.0) * 255).astype(np.uint8).transpose(1, 2, 0)
    Image.fromarray(arr).save(path)


def run_replay(replay_path, out_dir, resolution=128):
    """Re-simulate a replay file; writes frames/ and topdown.png.

    Returns (EpisodeRecord, visited cell list). The visited list has
    path_cells + 1 entries (start plus one per actual move).
    """
    header, actions = parse_replay_file(replay_path)
    world = generate_world(header["seed"], header["size"], header["rooms"],
                           header["objects"])
    env = GridEnv(world)
    out_dir = Path(out_dir)
    frames_dir = out_dir / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)

    visited = [env.agent.cell]
    _save_frame(render(world, env.agent, resolution), frames_dir / "step_000.png")
    for i, action in enumerate(actions, start=1):
        _, _, done, _ = env.step(action)
        if env.agent.cell != visited[-1]:
            visited.append(env.agent.cell)
        _save_frame(render(world, env.agent, resolution),
                    frames_dir / f"step_{i:03d}.png")
        if done:
            break
    _topdown(world, visited, out_dir / "topdown.png")
    return env.record, visited
