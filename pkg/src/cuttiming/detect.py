"""Rule-based detection of receiver cuts.

A cut starts at an acceleration burst aligned with the current velocity by a
player who has not held the disc recently. The onset is grown forward while
the run stays fast and straight, grown backward over an earlier gentle
ramp-up, and finally dropped when it ends in a crowd of teammates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataio import OFFENSE, FrameTable


@dataclass(frozen=True)
class DetectionConfig:
    accel_min: float = 4.0  # m/s^2
    no_hold_frames: int = 30
    init_angle_max: float = 90.0  # degrees
    fwd_speed_min: float = 3.0  # m/s
    fwd_turn_max: float = 20.0  # degrees
    fwd_mean_dev_max: float = 90.0  # degrees
    bwd_speed_min: float = 0.05  # m/s
    bwd_decel_max: float = 0.05  # m/s
    excl_radius: float = 5.0  # m
    excl_cone: float = 90.0  # full aperture, degrees

    def __post_init__(self):
        for name, value in vars(self).items():
            if not value > 0:
                raise ValueError(f"{name} must be positive, got {value}")


@dataclass(frozen=True)
class MovementSequence:
    """A detected cut. Frame fields are row indices into the source table."""

    player_id: int
    t0: int
    start: int
    end: int
    possession_id: int
    retained: bool = True

    def __post_init__(self):
        if not self.start <= self.t0 <= self.end:
            raise ValueError(f"sequence bounds out of order: {self.start}, {self.t0}, {self.end}")


def angle_between(u: np.ndarray, v: np.ndarray) -> float:
    """Unsigned angle in degrees; 0 when either vector is zero."""
    nu, nv = math.hypot(u[0], u[1]), math.hypot(v[0], v[1])
    if nu == 0.0 or nv == 0.0:
        return 0.0
    c = (u[0] * v[0] + u[1] * v[1]) / (nu * nv)
    return math.degrees(math.acos(max(-1.0, min(1.0, c))))


def _held_recently(table: FrameTable, k: int, i: int, lo: int, frames: int) -> bool:
    # player k held the disc anywhere in rows [i - frames, i] of the possession
    a = max(lo, i - frames)
    return bool(table.holder[a : i + 1, k].any())


def initiation_ok(table: FrameTable, player_id: int, i: int, cfg: DetectionConfig, lo: int = 0) -> bool:
    """Whether row ``i`` satisfies every onset criterion for ``player_id``."""
    k = player_id - 1
    if table.cls[i, k] != OFFENSE:
        return False
    a = table.acc[i, k]
    if math.hypot(a[0], a[1]) < cfg.accel_min:
        return False
    if _held_recently(table, k, i, lo, cfg.no_hold_frames):
        return False
    return angle_between(table.vel[i, k], a) <= cfg.init_angle_max


def detect_initiations(table: FrameTable, cfg: DetectionConfig | None = None) -> list[tuple[int, int]]:
    """``(player_id, row)`` onsets; a run of qualifying rows yields its first row."""
    cfg = cfg or DetectionConfig()
    found = []
    for _, sl in table.possessions():
        for player_id in range(1, table.cls.shape[1] + 1):
            previous = False
            for i in range(sl.start, sl.stop):
                ok = initiation_ok(table, player_id, i, cfg, lo=sl.start)
                if ok and not previous:
                    found.append((player_id, i))
                previous = ok
    found.sort(key=lambda item: (item[1], item[0]))
    return found


def extend_forward(table: FrameTable, seq: MovementSequence, cfg: DetectionConfig | None = None) -> MovementSequence:
    cfg = cfg or DetectionConfig()
    k = seq.player_id - 1
    stop = table.possession_slice(seq.possession_id).stop
    vsum = table.vel[seq.t0, k].copy()
    end = seq.t0
    for i in range(seq.t0 + 1, stop):
        v = table.vel[i, k]
        if table.holder[i, k]:
            break
        if math.hypot(v[0], v[1]) < cfg.fwd_speed_min:
            break
        if angle_between(table.vel[i - 1, k], v) > cfg.fwd_turn_max:
            break
        if angle_between(vsum, v) > cfg.fwd_mean_dev_max:
            break
        vsum += v
        end = i
    return MovementSequence(seq.player_id, seq.t0, min(seq.start, seq.t0), end, seq.possession_id, seq.retained)


def extend_backward(
    table: FrameTable, seq: MovementSequence, cfg: DetectionConfig | None = None, floor: int | None = None
) -> MovementSequence:
    """Grow ``start`` backward. ``floor`` bounds it (defaults to possession start)."""
    cfg = cfg or DetectionConfig()
    k = seq.player_id - 1
    lo = table.possession_slice(seq.possession_id).start if floor is None else floor
    speed = np.hypot(table.vel[:, k, 0], table.vel[:, k, 1])
    start = seq.t0
    for i in range(seq.t0 - 1, lo - 1, -1):
        if speed[i] < cfg.bwd_speed_min:
            break
        if speed[i + 1] < speed[i] - cfg.bwd_decel_max:
            break
        start = i
    return MovementSequence(seq.player_id, seq.t0, start, max(seq.end, seq.t0), seq.possession_id, seq.retained)


def apply_exclusions(table: FrameTable, seq: MovementSequence, cfg: DetectionConfig | None = None) -> bool:
    """True if the sequence is kept, i.e. it does not end in a crowd."""
    cfg = cfg or DetectionConfig()
    i, k = seq.end, seq.player_id - 1
    mates = [j for j in np.flatnonzero(table.cls[i] == OFFENSE) if j != k]
    offsets = table.pos[i, mates] - table.pos[i, k]
    dist = np.hypot(offsets[:, 0], offsets[:, 1])
    if int((dist <= cfg.excl_radius).sum()) >= 2:
        return False
    v = table.vel[i, k]
    if math.hypot(v[0], v[1]) == 0.0:
        # no heading, so only the radius test applies
        return True
    half = cfg.excl_cone / 2.0
    in_cone = sum(1 for off, d in zip(offsets, dist) if d > 0 and angle_between(v, off) <= half)
    return in_cone < 2


def detect_sequences(
    table: FrameTable, cfg: DetectionConfig | None = None, keep_excluded: bool = False
) -> list[MovementSequence]:
    """Full detection: onsets, forward and backward growth, exclusions.

    Onsets falling inside an earlier sequence of the same player are absorbed,
    and backward growth never reaches into that earlier sequence, so the
    sequences of one player are disjoint.
    """
    cfg = cfg or DetectionConfig()
    last_end: dict[int, int] = {}
    out = []
    for player_id, t0 in detect_initiations(table, cfg):
        pid = int(table.possession[t0])
        lo = table.possession_slice(pid).start
        prev = last_end.get(player_id)
        if prev is not None and prev >= lo:
            if t0 <= prev:
                continue
            lo = prev + 1
        seq = MovementSequence(player_id, t0, t0, t0, pid)
        seq = extend_forward(table, seq, cfg)
        seq = extend_backward(table, seq, cfg, floor=lo)
        last_end[player_id] = seq.end
        keep = apply_exclusions(table, seq, cfg)
        if keep or keep_excluded:
            out.append(MovementSequence(seq.player_id, seq.t0, seq.start, seq.end, pid, keep))
    return out


def sequences_to_csv(table: FrameTable, sequences: list[MovementSequence]) -> str:
    """``possession_id,player_id,start,t0,end,retained`` with frame numbers."""
    lines = ["possession_id,player_id,start,t0,end,retained"]
    for s in sequences:
        f = table.frames
        lines.append(
            f"{s.possession_id},{s.player_id},{int(f[s.start])},{int(f[s.t0])},{int(f[s.end])},"
            f"{'true' if s.retained else 'false'}"
        )
    return "\n".join(lines) + "\n"


def sequences_from_csv(table: FrameTable, text: str) -> list[MovementSequence]:
    import csv
    import io

    out = []
    for row in csv.DictReader(io.StringIO(text)):
        out.append(
            MovementSequence(
                player_id=int(row["player_id"]),
                t0=table.index_of(int(row["t0"])),
                start=table.index_of(int(row["start"])),
                end=table.index_of(int(row["end"])),
                possession_id=int(row["possession_id"]),
                retained=row.get("retained", "true").strip().lower() == "true",
            )
        )
    return out
