"""Two-sample rank statistics used to validate frame and timing values."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptySample, TooFewPlayers

TARGET_MIN_PROB = 0.55
OTHERS_MAX_PROB = 0.30


@dataclass(frozen=True)
class LabeledSample:
    value: float
    label: str  # "target" | "others"
    group: str  # "group1" | "group2" | "all"
    sequence: str

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"non-finite sample value {self.value}")


@dataclass(frozen=True)
class RankRecord:
    frame: int
    rank: int
    team_size: int


def _as_array(x, name: str) -> np.ndarray:
    a = np.asarray(x, dtype=float).ravel()
    if a.size == 0:
        raise EmptySample(f"sample {name} is empty")
    if not np.isfinite(a).all():
        raise ValueError(f"sample {name} has non-finite values")
    return a


def kolmogorov_sf(x: float) -> float:
    """Survival function of the limiting Kolmogorov distribution."""
    if x <= 0:
        return 1.0
    if x < 1.0:
        # theta-function form, fast for small x
        s = 0.0
        for k in range(1, 50):
            s += math.exp(-((2 * k - 1) ** 2) * math.pi**2 / (8.0 * x * x))
        return min(1.0, max(0.0, 1.0 - math.sqrt(2.0 * math.pi) / x * s))
    total = 0.0
    for k in range(1, 101):
        term = math.exp(-2.0 * k * k * x * x)
        total += term if k % 2 else -term
        if term < 1e-300:
            break
    return min(1.0, max(0.0, 2.0 * total))


def ks_two_sample(a, b) -> tuple[float, float]:
    """Largest gap ``D`` between the empirical CDFs and its asymptotic p-value."""
    a = np.sort(_as_array(a, "a"))
    b = np.sort(_as_array(b, "b"))
    n, m = len(a), len(b)
    pooled = np.concatenate([a, b])
    # integer counts keep D exact for tied values
    ca = np.searchsorted(a, pooled, side="right")
    cb = np.searchsorted(b, pooled, side="right")
    diff = np.abs(ca * m - cb * n)
    d = float(diff.max()) / (n * m)
    en = n * m / (n + m)
    return d, kolmogorov_sf(math.sqrt(en) * d)


def _midranks(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x))
    sorted_x = x[order]
    ties = []
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sorted_x[j + 1] == sorted_x[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        ties.append(j - i + 1)
        i = j + 1
    return ranks, np.array(ties)


def _normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def mann_whitney_u(a, b) -> tuple[float, float]:
    """``U`` of sample ``a`` (pairs a > b, ties count half) and a two-sided p-value.

    The p-value uses the normal approximation with tie-corrected variance and
    a continuity correction of 0.5.
    """
    a = _as_array(a, "a")
    b = _as_array(b, "b")
    n, m = len(a), len(b)
    ranks, ties = _midranks(np.concatenate([a, b]))
    u = float(ranks[:n].sum()) - n * (n + 1) / 2.0
    N = n + m
    mu = n * m / 2.0
    tie_term = float((ties**3 - ties).sum())
    var = n * m / 12.0 * ((N + 1) - tie_term / (N * (N - 1))) if N > 1 else 0.0
    if var <= 0:
        return u, 1.0
    z = (abs(u - mu) - 0.5) / math.sqrt(var)
    return u, min(1.0, 2.0 * _normal_sf(z))


def cliffs_delta(a, b) -> float:
    """``(#{a > b} - #{a < b}) / (n m)`` over all pairs."""
    a = _as_array(a, "a")
    b = np.sort(_as_array(b, "b"))
    below = np.searchsorted(b, a, side="left")  # b values < a_i
    not_above = np.searchsorted(b, a, side="right")  # b values <= a_i
    greater = int(below.sum())
    less = int((len(b) - not_above).sum())
    return (greater - less) / (len(a) * len(b))


def rank_within_team(values: dict[int, float], detected: int, holder: int | None = None,
                     frame: int = 0) -> RankRecord:
    """Dense rank (1 = highest) of the detected player among non-holders."""
    pool = {pid: v for pid, v in values.items() if pid != holder}
    if len(pool) < 2 or detected not in pool:
        raise TooFewPlayers(f"need the detected player and at least one teammate, got {sorted(pool)}")
    mine = pool[detected]
    above = {v for v in pool.values() if v > mine}
    return RankRecord(frame=frame, rank=len(above) + 1, team_size=len(pool))


def label_from_probability(prob: float) -> str | None:
    """``"target"``, ``"others"``, or None for ambiguous predictions."""
    if prob >= TARGET_MIN_PROB:
        return "target"
    if prob <= OTHERS_MAX_PROB:
        return "others"
    return None


def compare(a, b) -> dict:
    """All three statistics for one pair of samples."""
    d, p_ks = ks_two_sample(a, b)
    u, p_u = mann_whitney_u(a, b)
    return {
        "n_a": int(len(a)),
        "n_b": int(len(b)),
        "ks_d": d,
        "ks_p": p_ks,
        "mw_u": u,
        "mw_p": p_u,
        "cliffs_delta": cliffs_delta(a, b),
    }
