"""Deterministic procedurally-generated gridworld for image-goal navigation.

A world is a square occupancy grid with a ring of border walls, colored
objects standing on free cells (they do not block movement), and start/goal
poses guaranteed mutually reachable. Everything is a pure function of the
seed, so any episode can be replayed bit-exactly from (seed, action list).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from . import kernels

N_OBJECT_CLASSES = 8
HEADING_NAMES = ("N", "E", "S", "W")
# (drow, dcol) per heading
HEADING_VECS = ((-1, 0), (0, 1), (1, 0), (0, -1))

UNREACHABLE = 10 ** 9


class Action(IntEnum):
    FORWARD = 0
    BACKWARD = 1
    LEFT_TURN = 2
    RIGHT_TURN = 3
    STOP = 4


class WorldGenError(RuntimeError):
    """Raised when map constraints cannot be satisfied after bounded retries."""


class EpisodeDoneError(RuntimeError):
    """Raised when step() is called on a finished episode."""


@dataclass
class AgentState:
    row: int
    col: int
    heading: int  # index into HEADING_VECS

    @property
    def cell(self):
        return (self.row, self.col)


@dataclass
class WorldObject:
    row: int
    col: int
    class_index: int  # 1..N_OBJECT_CLASSES, kept >= 1 so log(class) is finite


@dataclass
class WorldMap:
    seed: int
    size: int
    walls: np.ndarray  # bool [size, size], True = wall
    objects: list[WorldObject]
    start: AgentState
    goal: AgentState
    objgrid: np.ndarray = field(default=None, repr=False)  # int32, object index or -1

    def __post_init__(self):
        if self.objgrid is None:
            self.objgrid = build_objgrid(self.size, self.objects)

    def free(self, row, col):
        return not self.walls[row, col]


def build_objgrid(size, objects):
    grid = np.full((size, size), -1, dtype=np.int32)
    for i, o in enumerate(objects):
        grid[o.row, o.col] = i
    return grid


def _carve_rooms(walls, size, n_rooms, rng):
    """Carve n_rooms rectangles plus L-corridors chaining them together."""
    if n_rooms <= 1:
        walls[1:size - 1, 1:size - 1] = False
        return
    centers = []
    max_side = max(2, size // 3)
    for _ in range(n_rooms):
        h = int(rng.integers(2, max_side + 1))
        w = int(rng.integers(2, max_side + 1))
        r0 = int(rng.integers(1, size - h))
        c0 = int(rng.integers(1, size - w))
        walls[r0:r0 + h, c0:c0 + w] = False
        centers.append((r0 + h // 2, c0 + w // 2))
    for (r1, c1), (r2, c2) in zip(centers, centers[1:]):
        lo, hi = sorted((c1, c2))
        walls[r1, lo:hi + 1] = False
        lo, hi = sorted((r1, r2))
        walls[lo:hi + 1, c2] = False


def generate_world(seed, size, n_rooms, n_objects, max_retries=20):
    """Deterministic map from seed; raises WorldGenError if constraints fail."""
    if size < 5:
        raise WorldGenError(f"size must be >= 5, got {size}")
    if n_objects < 1:
        raise WorldGenError(f"n_objects must be >= 1, got {n_objects}")
    rng = np.random.Generator(np.random.PCG64(seed))
    for _ in range(max_retries):
        walls = np.ones((size, size), dtype=bool)
        _carve_rooms(walls, size, n_rooms, rng)
        walls[0, :] = walls[-1, :] = walls[:, 0] = walls[:, -1] = True

        free_cells = np.argwhere(~walls)
        if len(free_cells) < n_objects + 2:
            continue
        idx = rng.choice(len(free_cells), size=n_objects, replace=False)
        objects = [
            WorldObject(int(free_cells[i][0]), int(free_cells[i][1]),
                        int(rng.integers(1, N_OBJECT_CLASSES + 1)))
            for i in idx
        ]
        occupied = {(o.row, o.col) for o in objects}
        open_cells = [tuple(c) for c in free_cells if tuple(c) not in occupied]
        if len(open_cells) < 2:
            continue

        for _ in range(100):
            si, gi = rng.choice(len(open_cells), size=2, replace=False)
            s_cell, g_cell = open_cells[si], open_cells[gi]
            dist = kernels.bfs_dist(walls.astype(np.uint8), s_cell[0], s_cell[1])
            d = int(dist[g_cell[0], g_cell[1]])
            if d >= 2:
                start = AgentState(int(s_cell[0]), int(s_cell[1]), int(rng.integers(4)))
                goal = AgentState(int(g_cell[0]), int(g_cell[1]), int(rng.integers(4)))
                return WorldMap(seed=seed, size=size, walls=walls, objects=objects,
                                start=start, goal=goal)
    raise WorldGenError(
        f"could not satisfy map constraints (seed={seed}, size={size}, "
        f"n_rooms={n_rooms}, n_objects={n_objects})")


def geodesic(world, a, b):
    """Shortest-path length in cells between two free cells (BFS, 4-connected).

    Returns UNREACHABLE if disconnected; raises ValueError if a cell is a wall.
    """
    for cell in (a, b):
        if world.walls[cell[0], cell[1]]:
            raise ValueError(f"cell {cell} is inside a wall")
    dist = kernels.bfs_dist(world.walls.astype(np.uint8), a[0], a[1])
    d = int(dist[b[0], b[1]])
    return d if d >= 0 else UNREACHABLE


def distance_field(world, cell):
    """BFS distance to `cell` from every free cell (-1 where unreachable)."""
    if world.walls[cell[0], cell[1]]:
        raise ValueError(f"cell {cell} is inside a wall")
    return kernels.bfs_dist(world.walls.astype(np.uint8), cell[0], cell[1])


# --- episode stepping ---------------------------------------------------------

@dataclass
class RewardConfig:
    success_bonus: float = 10.0
    step_penalty: float = 0.01
    collision_penalty: float = 0.05
    shaping: bool = True


@dataclass
class EpisodeRecord:
    geodesic_start: int
    steps: int = 0
    path_cells: int = 0
    collisions: int = 0
    success: bool = False
    done: bool = False

    def spl(self):
        if not self.success:
            return 0.0
        return self.geodesic_start / max(self.path_cells, self.geodesic_start)


class GridEnv:
    """Single-agent episode over one WorldMap.

    Objects are landmarks only; walls are the only blockers. STOP ends the
    episode, succeeding iff the agent is within `success_threshold` cells
    (geodesic) of the goal. Running past `max_steps` truncates with failure.
    """

    def __init__(self, world, reward_cfg=None, success_threshold=1, max_steps=100):
        self.world = world
        self.reward_cfg = reward_cfg or RewardConfig()
        self.success_threshold = success_threshold
        self.max_steps = max_steps
        self.goal_field = distance_field(world, world.goal.cell)
        self.reset()

    def reset(self):
        self.agent = AgentState(self.world.start.row, self.world.start.col,
                                self.world.start.heading)
        self.record = EpisodeRecord(
            geodesic_start=int(self.goal_field[self.agent.row, self.agent.col]))
        return self.agent

    def geodesic_to_goal(self):
        return int(self.goal_field[self.agent.row, self.agent.col])

    def step(self, action):
        """Apply one action; returns (agent_state, reward, done, info)."""
        if self.record.done:
            raise EpisodeDoneError("step() called after episode end")
        action = Action(action)
        cfg = self.reward_cfg
        agent = self.agent
        geo_before = self.geodesic_to_goal()
        collided = False
        success = False
        done = False

        if action in (Action.FORWARD, Action.BACKWARD):
            dr, dc = HEADING_VECS[agent.heading]
            if action == Action.BACKWARD:
                dr, dc = -dr, -dc
            nr, nc = agent.row + dr, agent.col + dc
            if self.world.free(nr, nc):
                agent.row, agent.col = nr, nc
                self.record.path_cells += 1
            else:
                collided = True
                self.record.collisions += 1
        elif action == Action.LEFT_TURN:
            agent.heading = (agent.heading - 1) % 4
        elif action == Action.RIGHT_TURN:
            agent.heading = (agent.heading + 1) % 4
        else:  # STOP
            done = True
            success = self.geodesic_to_goal() <= self.success_threshold

        self.record.steps += 1
        geo_after = self.geodesic_to_goal()
        reward = -cfg.step_penalty
        if cfg.shaping:
            reward += float(geo_before - geo_after)
        if collided:
            reward -= cfg.collision_penalty
        if success:
            reward += cfg.success_bonus

        if not done and self.record.steps >= self.max_steps:
            done = True

        info = {"collision": collided, "geodesic_to_goal": geo_after,
                "timeout": done and action != Action.STOP}
        if done:
            self.record.done = True
            self.record.success = success
            info["success"] = success
        return agent, reward, done, info


# --- text serialization -------------------------------------------------------

MAP_FORMAT_VERSION = 1


def format_world(world):
    """Stable plain-text map format: grid + object table + poses."""
    lines = [f"gridworld-map v{MAP_FORMAT_VERSION}",
             f"seed {world.seed}",
             f"size {world.size}",
             "grid"]
    for r in range(world.size):
        lines.append("".join("#" if world.walls[r, c] else "." for c in range(world.size)))
    lines.append("objects")
    for o in world.objects:
        lines.append(f"{o.row} {o.col} {o.class_index}")
    s, g = world.start, world.goal
    lines.append(f"start {s.row} {s.col} {HEADING_NAMES[s.heading]}")
    lines.append(f"goal {g.row} {g.col} {HEADING_NAMES[g.heading]}")
    return "\n".join(lines) + "\n"


def parse_world(text):
    lines = [ln.rstrip("\n") for ln in text.strip().splitlines()]
    if not lines or not lines[0].startswith("gridworld-map v"):
        raise ValueError("not a gridworld map file")
    version = int(lines[0].split("v")[-1])
    if version != MAP_FORMAT_VERSION:
        raise ValueError(f"unsupported map format version {version}")
    seed = int(lines[1].split()[1])
    size = int(lines[2].split()[1])
    assert lines[3] == "grid"
    walls = np.array([[ch == "#" for ch in lines[4 + r]] for r in range(size)], dtype=bool)
    i = 4 + size
    assert lines[i] == "objects"
    i += 1
    objects = []
    while not lines[i].startswith("start"):
        r, c, k = (int(x) for x in lines[i].split())
        objects.append(WorldObject(r, c, k))
        i += 1
    sr, sc, sh = lines[i].split()[1:]
    gr, gc, gh = lines[i + 1].split()[1:]
    start = AgentState(int(sr), int(sc), HEADING_NAMES.index(sh))
    goal = AgentState(int(gr), int(gc), HEADING_NAMES.index(gh))
    return WorldMap(seed=seed, size=size, walls=walls, objects=objects,
                    start=start, goal=goal)
