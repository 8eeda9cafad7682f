"""Temporally shifted versions of a detected cut.

For a shift ``xi`` (frames), the receiver and the defender paired with them
start the cut ``|xi|`` frames earlier (``xi < 0``) or later (``xi > 0``).
Earlier starts replay the original motion sooner, translated so the path is
continuous where the replay begins. Later starts hold a straight glide at the
pre-cut mean velocity for ``xi`` frames and then replay the cut, translated by
the glide. Every other object keeps its recorded trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataio import FrameTable, SmoothingConfig, differentiate
from .detect import MovementSequence
from .errors import ShiftBeforePossession

XI_MIN, XI_MAX = -15, 15
HISTORY_FRAMES = 15


@dataclass(frozen=True)
class ShiftedTrack:
    """One object's counterfactual path over a possession."""

    obj_id: int
    pos: np.ndarray
    vel: np.ndarray
    acc: np.ndarray
    vbar: np.ndarray
    short_history: bool
    boundaries: tuple[int, ...]
    boundary_gap: float


@dataclass(frozen=True)
class CounterfactualScenario:
    """A play with the receiver's (and their defender's) onset moved by ``xi``.

    ``table`` covers the possession containing the cut; its rows line up
    with the rows of the possession in the source table, offset by ``row0``.
    """

    xi: int
    target_id: int
    defender_id: int
    table: FrameTable
    row0: int
    vbar: np.ndarray
    short_history: bool = False
    boundaries: tuple[int, ...] = ()
    boundary_gap: float = 0.0
    tracks: dict = field(default_factory=dict, repr=False)


def check_shift(xi: int) -> int:
    if not XI_MIN <= xi <= XI_MAX:
        raise ValueError(f"shift {xi} outside [{XI_MIN}, {XI_MAX}]")
    return int(xi)


def mean_velocity(table: FrameTable, player: int, t0: int, lo: int | None = None) -> tuple[np.ndarray, bool]:
    """Mean velocity over the 15 rows before ``t0`` and a short-history flag.

    With fewer than 15 earlier rows in the possession, the available ones are
    averaged (zero vector if none) and the flag is set.
    """
    if lo is None:
        lo = table.possessions()[0][1].start if len(table) else 0
        for _, sl in table.possessions():
            if sl.start <= t0 < sl.stop:
                lo = sl.start
    a = max(lo, t0 - HISTORY_FRAMES)
    window = table.vel[a:t0, player - 1]
    short = len(window) < HISTORY_FRAMES
    if len(window) == 0:
        return np.zeros(2), True
    return window.sum(axis=0) / len(window), short


def _early_path(pos: np.ndarray, t0: int, xi: int) -> tuple[np.ndarray, np.ndarray, float]:
    """Earlier onset: positions, source row of every output row, boundary gap."""
    n = len(pos)
    b = t0 + xi
    shift = pos[b] - pos[t0]
    src = np.arange(n)
    src[b + 1 :] = np.minimum(np.arange(b + 1, n) - xi, n - 1)
    out = pos.copy()
    out[b + 1 :] = pos[src[b + 1 :]] + shift
    # replay branch evaluated at the splice row, against the kept branch
    gap = float(np.linalg.norm((pos[b - xi] + shift) - pos[b]))
    return out, src, gap


def _late_path(pos: np.ndarray, t0: int, xi: int, vbar: np.ndarray, fps: int) -> tuple[np.ndarray, float]:
    n = len(pos)

    def glide(t):
        return pos[t0] + vbar * ((t - t0) / fps)

    out = pos.copy()
    for t in range(t0 + 1, min(t0 + xi, n - 1) + 1):
        out[t] = glide(t)
    shift = vbar * (xi / fps)
    if t0 + xi + 1 < n:
        out[t0 + xi + 1 :] = pos[t0 + 1 : n - xi] + shift
    # glide against the kept path at t0, replay against the glide at t0 + xi
    gap = max(
        float(np.linalg.norm(glide(t0) - pos[t0])),
        float(np.linalg.norm((pos[t0] + shift) - glide(t0 + xi))),
    )
    return out, gap


def shift_track(
    table: FrameTable,
    obj_id: int,
    t0: int,
    xi: int,
    lo: int,
    hi: int,
    derivatives: str = "carry",
    smoothing: SmoothingConfig | None = None,
) -> ShiftedTrack:
    """Shift one object's path inside possession rows ``[lo, hi)``.

    ``t0`` is an absolute row index. ``derivatives="carry"`` takes velocity
    and acceleration piecewise from the segment each row was copied from
    (mean velocity and zero acceleration on the glide);
    ``derivatives="recompute"`` re-estimates them from the shifted positions.
    """
    k = obj_id - 1
    pos = table.pos[lo:hi, k]
    vel = table.vel[lo:hi, k]
    acc = table.acc[lo:hi, k]
    r0 = t0 - lo
    vbar, short = mean_velocity(table, obj_id, t0, lo)

    if xi == 0:
        return ShiftedTrack(obj_id, pos, vel, acc, vbar, short, (), 0.0)

    if xi < 0:
        if r0 + xi < 0:
            raise ShiftBeforePossession(
                f"onset row {t0} shifted by {xi} precedes possession start row {lo}"
            )
        new_pos, src, gap = _early_path(pos, r0, xi)
        new_vel, new_acc = vel.copy(), acc.copy()
        tail = slice(r0 + xi + 1, None)
        new_vel[tail] = vel[src[tail]]
        new_acc[tail] = acc[src[tail]]
        # past the end of the recording the replay is parked
        parked = np.flatnonzero(np.arange(len(pos)) - xi > len(pos) - 1)
        parked = parked[parked > r0 + xi]
        new_vel[parked] = 0.0
        new_acc[parked] = 0.0
        bounds = (lo + r0 + xi,)
    else:
        new_pos, gap = _late_path(pos, r0, xi, vbar, table.fps)
        new_vel, new_acc = vel.copy(), acc.copy()
        glide = slice(r0 + 1, min(r0 + xi, len(pos) - 1) + 1)
        new_vel[glide] = vbar
        new_acc[glide] = 0.0
        if r0 + xi + 1 < len(pos):
            new_vel[r0 + xi + 1 :] = vel[r0 + 1 : len(pos) - xi]
            new_acc[r0 + xi + 1 :] = acc[r0 + 1 : len(pos) - xi]
        bounds = (lo + r0, lo + r0 + xi)

    if derivatives == "recompute":
        new_vel, new_acc = differentiate(new_pos, table.fps, smoothing or SmoothingConfig())
    elif derivatives != "carry":
        raise ValueError(f"unknown derivative mode {derivatives!r}")
    return ShiftedTrack(obj_id, new_pos, new_vel, new_acc, vbar, short, bounds, gap)


def marking_defender(table: FrameTable, seq: MovementSequence) -> int:
    """Defender paired with the receiver at the onset row (0 if unpaired)."""
    return int(table.closest[seq.t0, seq.player_id - 1])


def _scenario(
    table: FrameTable,
    seq: MovementSequence,
    xi: int,
    defender_id: int | None = None,
    derivatives: str = "carry",
    smoothing: SmoothingConfig | None = None,
) -> CounterfactualScenario:
    xi = check_shift(xi)
    sl = table.possession_slice(seq.possession_id)
    base = table.take(sl)
    if defender_id is None:
        defender_id = marking_defender(table, seq)
    ids = [seq.player_id] + ([defender_id] if defender_id else [])
    tracks = {
        obj: shift_track(table, obj, seq.t0, xi, sl.start, sl.stop, derivatives, smoothing)
        for obj in ids
    }
    target = tracks[seq.player_id]
    if xi == 0:
        shifted = base
    else:
        pos, vel, acc = base.pos.copy(), base.vel.copy(), base.acc.copy()
        for obj, tr in tracks.items():
            pos[:, obj - 1] = tr.pos
            vel[:, obj - 1] = tr.vel
            acc[:, obj - 1] = tr.acc
        shifted = base.evolve(pos=pos, vel=vel, acc=acc)
    return CounterfactualScenario(
        xi=xi,
        target_id=seq.player_id,
        defender_id=int(defender_id or 0),
        table=shifted,
        row0=sl.start,
        vbar=target.vbar,
        short_history=any(tr.short_history for tr in tracks.values()),
        boundaries=target.boundaries,
        boundary_gap=max(tr.boundary_gap for tr in tracks.values()),
        tracks=tracks,
    )


def shift_early(table: FrameTable, seq: MovementSequence, xi: int, **kwargs) -> CounterfactualScenario:
    if xi >= 0:
        raise ValueError("shift_early needs a negative shift")
    return _scenario(table, seq, xi, **kwargs)


def shift_late(table: FrameTable, seq: MovementSequence, xi: int, **kwargs) -> CounterfactualScenario:
    if xi <= 0:
        raise ValueError("shift_late needs a positive shift")
    return _scenario(table, seq, xi, **kwargs)


def build_scenario(table: FrameTable, seq: MovementSequence, xi: int, **kwargs) -> CounterfactualScenario:
    return _scenario(table, seq, xi, **kwargs)


def build_sweep(
    table: FrameTable,
    seq: MovementSequence,
    defender_rule=marking_defender,
    xis=range(XI_MIN, XI_MAX + 1),
    derivatives: str = "carry",
    smoothing: SmoothingConfig | None = None,
) -> list[CounterfactualScenario]:
    """One scenario per shift (all 31 by default), the same defender throughout."""
    defender = defender_rule(table, seq)
    return [
        _scenario(table, seq, xi, defender, derivatives=derivatives, smoothing=smoothing)
        for xi in xis
    ]


def scenario_to_csv(scenario: CounterfactualScenario) -> str:
    from .dataio import write_csv

    return write_csv(scenario.table, extra={"xi": scenario.xi})
