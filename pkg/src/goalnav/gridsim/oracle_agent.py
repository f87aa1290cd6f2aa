"""Shortest-path oracle agent: follows the BFS geodesic, then stops.

Used as an upper bound for eval sanity checks: it scores SR = 1.0 and
SPL = 1.0 on every solvable map (turns do not add path length).
"""
from __future__ import annotations

from .world import Action, HEADING_VECS, distance_field


def plan_actions(world):
    """Action sequence driving start -> goal cell along a shortest path."""
    field = distance_field(world, world.goal.cell)
    r, c = world.start.row, world.start.col
    heading = world.start.heading
    actions = []
    while field[r, c] > 0:
        d = field[r, c]
        for h, (dr, dc) in enumerate(HEADING_VECS):
            nr, nc = r + dr, c + dc
            if 0 <= nr < world.size and 0 <= nc < world.size and field[nr, nc] == d - 1:
                break
        else:
            raise RuntimeError("no descending neighbor; disconnected map?")
        turn = (h - heading) % 4
        if turn == 1:
            actions.append(Action.RIGHT_TURN)
        elif turn == 3:
            actions.append(Action.LEFT_TURN)
        elif turn == 2:
            actions.extend([Action.RIGHT_TURN, Action.RIGHT_TURN])
        heading = h
        actions.append(Action.FORWARD)
        r, c = nr, nc
    actions.append(Action.STOP)
    return actions


def run_oracle_episode(env):
    """Drive env with the planned shortest path; returns its EpisodeRecord."""
    env.reset()
    total = 0.0
    for a in plan_actions(env.world):
        _, reward, done, _ = env.step(a)
        total += reward
        if done:
            break
    env.record.total_reward = total
    return env.record
