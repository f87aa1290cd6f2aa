"""Pure-Python fallback for the gridworld hot kernels.

Mirrors `_kernels.pyx` operation-for-operation so that both backends produce
bit-identical outputs (all ray arithmetic is IEEE double in the same order).
Used when the compiled extension is unavailable or GOALNAV_PURE_PYTHON=1.
"""
from collections import deque

import numpy as np

BACKEND = "python"

_FAR = 1e9


def cast_columns(walls, objgrid, n_objects, px, py, dirx, diry, planex, planey, n_cols):
    """Cast one ray per image column through the cell grid (DDA).

    walls:   uint8 [S, S], 1 = wall, indexed [row, col]
    objgrid: int32 [S, S], object index occupying the cell, -1 if none
    (px, py): camera position in world units (x = col axis, y = row axis)
    dir/plane: unit view direction and the perpendicular camera-plane vector
               (its length is tan(fov/2))

    Returns (wall_dist, wall_side, hit_obj, obj_dist, potential):
      wall_dist f64 [n_cols]  perpendicular distance to the first wall
      wall_side u8  [n_cols]  0 = x-face hit, 1 = y-face hit
      hit_obj  i32  [n_cols]  first object cell entered before the wall, or -1
      obj_dist f64  [n_cols]  perpendicular distance to that object cell
      potential u8 [n_objects, n_cols]  1 where the ray would cross the
               object's cell if nothing occluded it (walls ignored)
    """
    size = walls.shape[0]
    wall_dist = np.full(n_cols, _FAR, dtype=np.float64)
    wall_side = np.zeros(n_cols, dtype=np.uint8)
    hit_obj = np.full(n_cols, -1, dtype=np.int32)
    obj_dist = np.zeros(n_cols, dtype=np.float64)
    potential = np.zeros((n_objects, n_cols), dtype=np.uint8)

    max_iter = 4 * size * size
    for u in range(n_cols):
        s = 2.0 * (u + 0.5) / n_cols - 1.0
        rdx = dirx + planex * s
        rdy = diry + planey * s
        mapx = int(px)
        mapy = int(py)
        delta_x = abs(1.0 / rdx) if rdx != 0.0 else _FAR
        delta_y = abs(1.0 / rdy) if rdy != 0.0 else _FAR
        if rdx < 0.0:
            step_x = -1
            side_x = (px - mapx) * delta_x
        else:
            step_x = 1
            side_x = (mapx + 1.0 - px) * delta_x
        if rdy < 0.0:
            step_y = -1
            side_y = (py - mapy) * delta_y
        else:
            step_y = 1
            side_y = (mapy + 1.0 - py) * delta_y

        o0 = objgrid[mapy, mapx]
        if o0 >= 0:
            potential[o0, u] = 1
            hit_obj[u] = o0
            obj_dist[u] = 0.0

        wall_found = False
        for _ in range(max_iter):
            if side_x < side_y:
                t = side_x
                side_x += delta_x
                mapx += step_x
                side = 0
            else:
                t = side_y
                side_y += delta_y
                mapy += step_y
                side = 1
            if mapx < 0 or mapx >= size or mapy < 0 or mapy >= size:
                break
            cell_obj = objgrid[mapy, mapx]
            if cell_obj >= 0:
                potential[cell_obj, u] = 1
                if not wall_found and hit_obj[u] < 0:
                    hit_obj[u] = cell_obj
                    obj_dist[u] = t
            if walls[mapy, mapx] and not wall_found:
                wall_dist[u] = t
                wall_side[u] = side
                wall_found = True
    return wall_dist, wall_side, hit_obj, obj_dist, potential


def paint_columns(wall_dist, wall_side, hit_obj, obj_dist, obj_classes,
                  resolution, min_dist, ceil_color, floor_color, wall_color,
                  palette):
    """Paint the egocentric frame from per-column geometry.

    Walls span symmetric bands around the horizon scaled by 1/distance;
    objects are half-height pillars drawn from the horizon down; brightness
    falls off with distance. Returns float32 [3, R, R].
    """
    r = resolution
    half_w = r / (2.0 * np.maximum(wall_dist, min_dist))
    top = r / 2.0 - half_w
    bot = r / 2.0 + half_w
    ys = np.arange(r, dtype=np.float64)[:, None]

    img = np.empty((r, r, 3), dtype=np.float64)
    img[:] = ceil_color
    img[ys[:, 0] >= r / 2.0] = floor_color

    wall_shade = np.clip(1.0 / (1.0 + 0.25 * wall_dist), 0.25, 1.0) \
        * np.where(wall_side == 0, 1.0, 0.8)
    wall_rgb = wall_color[None, :] * wall_shade[:, None]
    in_wall = (ys >= top[None, :]) & (ys < bot[None, :])
    img = np.where(in_wall[:, :, None], wall_rgb[None, :, :], img)

    vis = hit_obj >= 0
    if vis.any():
        half_o = r / (2.0 * np.maximum(obj_dist, min_dist))
        bot_o = r / 2.0 + half_o
        classes = np.where(vis, obj_classes[np.maximum(hit_obj, 0)], 1)
        shade_o = np.clip(1.0 / (1.0 + 0.25 * obj_dist), 0.25, 1.0)
        obj_rgb = palette[classes - 1] * shade_o[:, None]
        in_obj = vis[None, :] & (ys >= r / 2.0) & (ys < bot_o[None, :])
        img = np.where(in_obj[:, :, None], obj_rgb[None, :, :], img)

    return np.ascontiguousarray(img.transpose(2, 0, 1)).astype(np.float32)


def bfs_dist(walls, sr, sc):
    """4-connected BFS distance field from (sr, sc); -1 on walls/unreachable."""
    size = walls.shape[0]
    dist = np.full((size, size), -1, dtype=np.int32)
    if walls[sr, sc]:
        return dist
    dist[sr, sc] = 0
    queue = deque([(sr, sc)])
    while queue:
        r, c = queue.popleft()
        d = dist[r, c] + 1
        for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if 0 <= nr < size and 0 <= nc < size and not walls[nr, nc] and dist[nr, nc] < 0:
                dist[nr, nc] = d
                queue.append((nr, nc))
    return dist
