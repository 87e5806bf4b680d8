"""Canned evaluation results for protocol tests: a pure function of the
request's seed ladder, no game involved.

Episode at seed s wins unless s % 3 == 2, so a three-episode request at
a seed divisible by three lands exactly on a 2/3 win rate — the same
threshold edge the engine gates on.
"""

from __future__ import annotations


def stub_metrics(seed: int) -> dict:
    win = seed % 3 != 2
    return {
        "win": win,
        "ticks": 40 + seed % 23,
        "damage_dealt": 300 + 10 * (seed % 13),
        "damage_taken": 120 + 10 * (seed % 7),
        "surviving_hp_fraction": round(0.25 + 0.05 * (seed % 11), 2) if win else 0.0,
        "seed": seed,
    }


def stub_report(episodes: int, seed: int) -> dict:
    metrics = [stub_metrics(seed + i) for i in range(episodes)]
    wins = sum(1 for m in metrics if m["win"])
    return {
        "win_rate": f"{wins}/{episodes}",
        "episodes": metrics,
        "error": None,
    }
