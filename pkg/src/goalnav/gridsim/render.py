"""Egocentric raycast rendering and the oracle instance detector.

The renderer is a flat-shaded column raycaster: one ray per image column,
walls are full-height slabs, objects are half-height pillars drawn from the
horizon down. All geometry comes from the kernel backend; the painting and
detection assembly below are shared by both backends, so images are identical
regardless of which kernel implementation is active.
"""
from __future__ import annotations

import numpy as np

from ..detection import Detection
from . import kernels

FOV_TAN = 1.0  # tan(fov/2); 90 degree horizontal field of view
MIN_DIST = 0.05

CEIL_COLOR = np.array([0.85, 0.90, 0.95])
FLOOR_COLOR = np.array([0.32, 0.28, 0.24])
WALL_COLOR = np.array([0.55, 0.55, 0.60])

# one distinct color per object class (class indices are 1-based)
CLASS_COLORS = np.array([
    [0.90, 0.10, 0.10],  # 1 red
    [0.10, 0.75, 0.10],  # 2 green
    [0.15, 0.25, 0.95],  # 3 blue
    [0.95, 0.85, 0.10],  # 4 yellow
    [0.80, 0.15, 0.80],  # 5 magenta
    [0.10, 0.80, 0.80],  # 6 cyan
    [0.95, 0.55, 0.10],  # 7 orange
    [0.95, 0.95, 0.95],  # 8 white
])


def _camera(pose):
    # world x runs along columns, y along rows; plane is perpendicular to dir
    from .world import HEADING_VECS
    dr, dc = HEADING_VECS[pose.heading]
    dirx, diry = float(dc), float(dr)
    planex, planey = -diry * FOV_TAN, dirx * FOV_TAN
    px, py = pose.col + 0.5, pose.row + 0.5
    return px, py, dirx, diry, planex, planey


def _walls_u8(world):
    arr = getattr(world, "_walls_u8", None)
    if arr is None:
        arr = world.walls.astype(np.uint8)
        world._walls_u8 = arr
    return arr


def cast_pose(world, pose, resolution):
    """Raw per-column geometry for a pose (shared by render and detection)."""
    px, py, dirx, diry, planex, planey = _camera(pose)
    return kernels.cast_columns(
        _walls_u8(world), world.objgrid, len(world.objects),
        px, py, dirx, diry, planex, planey, resolution)


def _object_classes(world):
    arr = getattr(world, "_class_arr", None)
    if arr is None:
        arr = np.array([o.class_index for o in world.objects], dtype=np.int32)
        world._class_arr = arr
    return arr


def render(world, pose, resolution):
    """Render an RGB observation, shape [3, R, R], values in [0, 1]."""
    wall_dist, wall_side, hit_obj, obj_dist, _ = cast_pose(world, pose, resolution)
    return kernels.paint_columns(
        wall_dist, wall_side, hit_obj, obj_dist, _object_classes(world),
        resolution, MIN_DIST, CEIL_COLOR, FLOOR_COLOR, WALL_COLOR, CLASS_COLORS)


def detect_oracle(world, pose, resolution):
    """Oracle detections for every object visible from the pose.

    The box covers the visible columns and the projected pillar height at the
    object's nearest visible distance; confidence is the fraction of the
    object's unoccluded column span that is actually visible.
    """
    r = resolution
    _, _, hit_obj, obj_dist, potential = cast_pose(world, pose, r)
    dets = []
    for m, obj in enumerate(world.objects):
        cols = np.nonzero(hit_obj == m)[0]
        if len(cols) == 0:
            continue
        d_near = float(obj_dist[cols].min())
        half_o = r / (2.0 * max(d_near, MIN_DIST))
        x1, x2 = float(cols[0]), float(cols[-1] + 1)
        y1 = r / 2.0
        y2 = min(float(r), float(np.floor(r / 2.0 + half_o)))
        conf = len(cols) / max(int(potential[m].sum()), 1)
        dets.append(Detection(x1, y1, x2, max(y2, y1), obj.class_index,
                              float(conf)).validate(r, r))
    return dets
