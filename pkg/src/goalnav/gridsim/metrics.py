"""Navigation episode metrics."""
from __future__ import annotations


def success_rate(episodes):
    """Fraction of episodes that ended in success."""
    if not episodes:
        raise ValueError("success_rate over zero episodes")
    return sum(1.0 for e in episodes if e.success) / len(episodes)


def spl(episodes):
    """Success weighted by path length, averaged over episodes.

    Per episode: success * geodesic / max(path, geodesic). A failed episode
    contributes 0; max() guards the degenerate zero-length cases.
    """
    if not episodes:
        raise ValueError("spl over zero episodes")
    return sum(e.spl() for e in episodes) / len(episodes)
