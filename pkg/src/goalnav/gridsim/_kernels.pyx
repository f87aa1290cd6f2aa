# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled gridworld hot kernels (raycast columns + BFS distance field).

Twin of `_kernels_py.py`: same arithmetic in the same order, so outputs are
bit-identical between backends.
"""
import numpy as np

cimport numpy as cnp

BACKEND = "cython"

cdef double _FAR = 1e9


def cast_columns(cnp.uint8_t[:, :] walls, cnp.int32_t[:, :] objgrid, int n_objects,
                 double px, double py, double dirx, double diry,
                 double planex, double planey, int n_cols):
    cdef int size = walls.shape[0]
    wall_dist_arr = np.full(n_cols, _FAR, dtype=np.float64)
    wall_side_arr = np.zeros(n_cols, dtype=np.uint8)
    hit_obj_arr = np.full(n_cols, -1, dtype=np.int32)
    obj_dist_arr = np.zeros(n_cols, dtype=np.float64)
    potential_arr = np.zeros((n_objects, n_cols), dtype=np.uint8)

    cdef double[:] wall_dist = wall_dist_arr
    cdef cnp.uint8_t[:] wall_side = wall_side_arr
    cdef cnp.int32_t[:] hit_obj = hit_obj_arr
    cdef double[:] obj_dist = obj_dist_arr
    cdef cnp.uint8_t[:, :] potential = potential_arr

    cdef int max_iter = 4 * size * size
    cdef int u, mapx, mapy, step_x, step_y, side, cell_obj, o0, it
    cdef double s, rdx, rdy, delta_x, delta_y, side_x, side_y, t
    cdef bint wall_found

    for u in range(n_cols):
        s = 2.0 * (u + 0.5) / n_cols - 1.0
        rdx = dirx + planex * s
        rdy = diry + planey * s
        mapx = <int>px
        mapy = <int>py
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
        for it in range(max_iter):
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
                wall_side[u] = <cnp.uint8_t>side
                wall_found = True
    return wall_dist_arr, wall_side_arr, hit_obj_arr, obj_dist_arr, potential_arr


def paint_columns(double[:] wall_dist, cnp.uint8_t[:] wall_side,
                  cnp.int32_t[:] hit_obj, double[:] obj_dist,
                  cnp.int32_t[:] obj_classes, int resolution, double min_dist,
                  double[:] ceil_color, double[:] floor_color,
                  double[:] wall_color, double[:, :] palette):
    cdef int r = resolution
    img_arr = np.empty((3, r, r), dtype=np.float32)
    cdef float[:, :, :] img = img_arr
    cdef int u, y, ch, cls
    cdef double d_w, d_o, half_w, half_o, top, bot, bot_o, shade, shade_o
    cdef double horizon, val
    cdef bint has_obj
    horizon = r / 2.0
    for u in range(r):
        d_w = wall_dist[u]
        half_w = r / (2.0 * (d_w if d_w > min_dist else min_dist))
        top = horizon - half_w
        bot = horizon + half_w
        shade = 1.0 / (1.0 + 0.25 * d_w)
        if shade < 0.25:
            shade = 0.25
        elif shade > 1.0:
            shade = 1.0
        if wall_side[u] != 0:
            shade = shade * 0.8
        has_obj = hit_obj[u] >= 0
        if has_obj:
            d_o = obj_dist[u]
            half_o = r / (2.0 * (d_o if d_o > min_dist else min_dist))
            bot_o = horizon + half_o
            cls = obj_classes[hit_obj[u]]
            shade_o = 1.0 / (1.0 + 0.25 * d_o)
            if shade_o < 0.25:
                shade_o = 0.25
            elif shade_o > 1.0:
                shade_o = 1.0
        for y in range(r):
            for ch in range(3):
                if y >= top and y < bot:
                    val = wall_color[ch] * shade
                elif y >= horizon:
                    val = floor_color[ch]
                else:
                    val = ceil_color[ch]
                if has_obj and y >= horizon and y < bot_o:
                    val = palette[cls - 1, ch] * shade_o
                img[ch, y, u] = <float>val
    return img_arr


def bfs_dist(cnp.uint8_t[:, :] walls, int sr, int sc):
    cdef int size = walls.shape[0]
    dist_arr = np.full((size, size), -1, dtype=np.int32)
    cdef cnp.int32_t[:, :] dist = dist_arr
    if walls[sr, sc]:
        return dist_arr
    queue_arr = np.empty(size * size, dtype=np.int32)
    cdef cnp.int32_t[:] queue = queue_arr
    cdef int head = 0, tail = 0
    cdef int r, c, d, k, nr, nc
    dist[sr, sc] = 0
    queue[tail] = sr * size + sc
    tail += 1
    while head < tail:
        r = queue[head] // size
        c = queue[head] % size
        head += 1
        d = dist[r, c] + 1
        for k in range(4):
            if k == 0:
                nr = r - 1; nc = c
            elif k == 1:
                nr = r + 1; nc = c
            elif k == 2:
                nr = r; nc = c - 1
            else:
                nr = r; nc = c + 1
            if 0 <= nr < size and 0 <= nc < size and not walls[nr, nc] and dist[nr, nc] < 0:
                dist[nr, nc] = d
                queue[tail] = nr * size + nc
                tail += 1
    return dist_arr
