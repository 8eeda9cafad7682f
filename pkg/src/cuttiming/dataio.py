"""Tracking data model, CSV I/O and preprocessing.

A :class:`FrameTable` stores every object of every frame in dense arrays
indexed ``[frame_index, object_index]`` where ``object_index = id - 1``.
Tables are treated as immutable values: all arrays are flagged read-only and
every preprocessing step returns a new table.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import (
    BadObjectCount,
    DuplicateHolder,
    InvalidPairing,
    MissingColumn,
    NoHolderAnchor,
    OutOfBounds,
    SchemaError,
    TooShort,
)

FIELD_LENGTH = 94.0
FIELD_WIDTH = 37.0
FPS = 15
N_OBJECTS = 15
N_PER_TEAM = 7
BOUNDS_TOLERANCE = 2.0

OFFENSE, DEFENSE, DISC = 0, 1, 2
CLASS_NAMES = ("offense", "defense", "disc")
CLASS_CODES = {name: code for code, name in enumerate(CLASS_NAMES)}

COLUMNS = ("frame", "id", "class", "x", "y", "vx", "vy", "ax", "ay", "closest", "holder")


@dataclass(frozen=True)
class ObjectState:
    """One object (player or disc) at one frame."""

    frame: int
    id: int
    cls: str
    x: float
    y: float
    vx: float = 0.0
    vy: float = 0.0
    ax: float = 0.0
    ay: float = 0.0
    closest: int = 0
    holder: bool = False

    @property
    def pos(self) -> np.ndarray:
        return np.array([self.x, self.y])

    @property
    def vel(self) -> np.ndarray:
        return np.array([self.vx, self.vy])

    @property
    def acc(self) -> np.ndarray:
        return np.array([self.ax, self.ay])


@dataclass(frozen=True)
class SmoothingConfig:
    """Position smoothing used before differentiating.

    ``window`` is the length of the centred moving average applied to
    positions; ``scheme`` selects plain central differences on raw positions
    (``"central-difference"``) or on smoothed positions (``"filtered"``).
    """

    window: int = 5
    scheme: str = "filtered"

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError(f"smoothing window must be odd and >= 3, got {self.window}")
        if self.scheme not in ("central-difference", "filtered"):
            raise ValueError(f"unknown derivative scheme {self.scheme!r}")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True, order="C")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FrameTable:
    """All 15 objects for a run of frames.

    Attributes:
        frames: ``(n,)`` frame indices.
        cls: ``(n, 15)`` class codes (``OFFENSE``, ``DEFENSE``, ``DISC``).
        pos, vel, acc: ``(n, 15, 2)`` kinematics in m, m/s, m/s^2.
        closest: ``(n, 15)`` id of the paired opponent, 0 for none.
        holder: ``(n, 15)`` disc-possession flags.
        possession: ``(n,)`` possession label of each frame.
    """

    frames: np.ndarray
    cls: np.ndarray
    pos: np.ndarray
    vel: np.ndarray
    acc: np.ndarray
    closest: np.ndarray
    holder: np.ndarray
    possession: np.ndarray
    fps: int = FPS
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        for name in ("frames", "cls", "pos", "vel", "acc", "closest", "holder", "possession"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        object.__setattr__(self, "_index", {int(f): i for i, f in enumerate(self.frames)})

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def n_frames(self) -> int:
        return len(self.frames)

    def index_of(self, frame: int) -> int:
        return self._index[int(frame)]

    def state(self, i: int, obj_id: int) -> ObjectState:
        """Object ``obj_id`` at row ``i`` (row index, not frame number)."""
        k = obj_id - 1
        return ObjectState(
            frame=int(self.frames[i]),
            id=obj_id,
            cls=CLASS_NAMES[self.cls[i, k]],
            x=float(self.pos[i, k, 0]),
            y=float(self.pos[i, k, 1]),
            vx=float(self.vel[i, k, 0]),
            vy=float(self.vel[i, k, 1]),
            ax=float(self.acc[i, k, 0]),
            ay=float(self.acc[i, k, 1]),
            closest=int(self.closest[i, k]),
            holder=bool(self.holder[i, k]),
        )

    def holder_id(self, i: int) -> int:
        """Id of the player holding the disc at row ``i``, 0 if in flight."""
        players = self.holder[i] & (self.cls[i] != DISC)
        hits = np.flatnonzero(players)
        return int(hits[0]) + 1 if hits.size else 0

    def disc_index(self, i: int = 0) -> int:
        return int(np.flatnonzero(self.cls[i] == DISC)[0])

    def possessions(self) -> list[tuple[int, slice]]:
        """``(possession_id, row slice)`` for each contiguous possession."""
        out = []
        if not len(self):
            return out
        breaks = np.flatnonzero(np.diff(self.possession) != 0) + 1
        starts = np.concatenate([[0], breaks])
        stops = np.concatenate([breaks, [len(self)]])
        for a, b in zip(starts, stops):
            out.append((int(self.possession[a]), slice(int(a), int(b))))
        return out

    def possession_slice(self, possession_id: int) -> slice:
        for pid, sl in self.possessions():
            if pid == possession_id:
                return sl
        raise KeyError(possession_id)

    def take(self, rows: slice) -> "FrameTable":
        return FrameTable(
            frames=self.frames[rows],
            cls=self.cls[rows],
            pos=self.pos[rows],
            vel=self.vel[rows],
            acc=self.acc[rows],
            closest=self.closest[rows],
            holder=self.holder[rows],
            possession=self.possession[rows],
            fps=self.fps,
        )

    def evolve(self, **changes) -> "FrameTable":
        return replace(self, **changes)

    def objects_of(self, cls_code: int, i: int = 0) -> np.ndarray:
        """Ids of the objects of one class at row ``i``."""
        return np.flatnonzero(self.cls[i] == cls_code) + 1


# ---------------------------------------------------------------------------
# validation


def validate(table: FrameTable, tolerance: float = BOUNDS_TOLERANCE) -> None:
    """Check every per-frame invariant; raise a :class:`SchemaError` subclass."""
    for i in range(len(table)):
        frame = int(table.frames[i])
        counts = np.bincount(table.cls[i], minlength=3)
        if tuple(counts) != (N_PER_TEAM, N_PER_TEAM, 1):
            raise BadObjectCount(
                f"expected 7 offense / 7 defense / 1 disc, got {tuple(int(c) for c in counts)}",
                frame,
            )
        x, y = table.pos[i, :, 0], table.pos[i, :, 1]
        bad = (
            (x < -tolerance)
            | (x > FIELD_LENGTH + tolerance)
            | (y < -tolerance)
            | (y > FIELD_WIDTH + tolerance)
            | ~np.isfinite(x)
            | ~np.isfinite(y)
        )
        if bad.any():
            k = int(np.flatnonzero(bad)[0])
            raise OutOfBounds(
                f"object {k + 1} at ({x[k]:.3f}, {y[k]:.3f}) outside the field band", frame
            )
        if int(table.holder[i].sum()) > 1:
            ids = (np.flatnonzero(table.holder[i]) + 1).tolist()
            raise DuplicateHolder(f"several holders {ids}", frame)
        for k in range(N_OBJECTS):
            mate = int(table.closest[i, k])
            if mate == 0:
                continue
            own = table.cls[i, k]
            if own == DISC or not 1 <= mate <= N_OBJECTS:
                raise InvalidPairing(f"object {k + 1} paired with {mate}", frame)
            other = table.cls[i, mate - 1]
            if other == DISC or other == own:
                raise InvalidPairing(f"object {k + 1} paired with same-class object {mate}", frame)


# ---------------------------------------------------------------------------
# CSV


def _parse_bool(text: str, frame) -> bool:
    t = text.strip().lower()
    if t in ("true", "1"):
        return True
    if t in ("false", "0", ""):
        return False
    raise SchemaError(f"bad holder value {text!r}", frame)


def _parse_closest(text: str) -> int:
    t = text.strip().lower()
    if t in ("", "nan", "none", "-1"):
        return 0
    return int(float(t))


def _assign_possessions(frames: np.ndarray, cls: np.ndarray) -> np.ndarray:
    # a possession breaks on a frame gap or when the attacking side changes
    poss = np.zeros(len(frames), dtype=np.int64)
    label = 0
    for i in range(1, len(frames)):
        gap = frames[i] != frames[i - 1] + 1
        flipped = not np.array_equal(cls[i] == OFFENSE, cls[i - 1] == OFFENSE)
        if gap or flipped:
            label += 1
        poss[i] = label
    return poss


def read_csv(source, fps: int = FPS, tolerance: float = BOUNDS_TOLERANCE) -> FrameTable:
    """Parse UltimateTrack CSV text (path or file object) into a validated table."""
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8") as fh:
            return read_csv(fh, fps=fps, tolerance=tolerance)

    reader = csv.DictReader(source)
    header = reader.fieldnames or []
    missing = [c for c in COLUMNS if c not in header]
    if missing:
        raise MissingColumn(f"missing column(s): {', '.join(missing)}")

    rows: dict[int, dict[int, tuple]] = {}
    for line_no, row in enumerate(reader, start=2):
        try:
            frame = int(row["frame"])
            obj = int(row["id"])
            name = row["class"].strip().lower()
            if name not in CLASS_CODES:
                raise SchemaError(f"line {line_no}: unknown class {row['class']!r}", frame)
            values = tuple(float(row[c]) for c in ("x", "y", "vx", "vy", "ax", "ay"))
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"line {line_no}: {exc}") from None
        if not 1 <= obj <= N_OBJECTS:
            raise BadObjectCount(f"line {line_no}: object id {obj} outside 1..15", frame)
        per_frame = rows.setdefault(frame, {})
        if obj in per_frame:
            raise BadObjectCount(f"line {line_no}: duplicate object id {obj}", frame)
        per_frame[obj] = (
            CLASS_CODES[name],
            values,
            _parse_closest(row["closest"]),
            _parse_bool(row["holder"], frame),
        )

    frames = np.array(sorted(rows), dtype=np.int64)
    n = len(frames)
    cls = np.zeros((n, N_OBJECTS), dtype=np.int8)
    kin = np.zeros((n, N_OBJECTS, 6))
    closest = np.zeros((n, N_OBJECTS), dtype=np.int64)
    holder = np.zeros((n, N_OBJECTS), dtype=bool)
    for i, frame in enumerate(frames):
        per_frame = rows[int(frame)]
        if len(per_frame) != N_OBJECTS:
            raise BadObjectCount(f"expected 15 objects, got {len(per_frame)}", int(frame))
        for obj, (c, values, mate, hold) in per_frame.items():
            cls[i, obj - 1] = c
            kin[i, obj - 1] = values
            closest[i, obj - 1] = mate
            holder[i, obj - 1] = hold

    table = FrameTable(
        frames=frames,
        cls=cls,
        pos=kin[:, :, 0:2].copy(),
        vel=kin[:, :, 2:4].copy(),
        acc=kin[:, :, 4:6].copy(),
        closest=closest,
        holder=holder,
        possession=_assign_possessions(frames, cls),
        fps=fps,
    )
    validate(table, tolerance)
    return table


parse_csv = read_csv


def write_csv(table: FrameTable, dest=None, extra: dict | None = None) -> str | None:
    """Emit a table in the fixed column order with 3-decimal floats.

    ``extra`` maps additional column names to constant values (the
    counterfactual export adds ``xi``). Returns the text when ``dest`` is None.
    """
    extra = extra or {}
    buf = io.StringIO()
    buf.write(",".join(COLUMNS + tuple(extra)) + "\n")
    tail = "".join("," + str(v) for v in extra.values())
    for i in range(len(table)):
        frame = int(table.frames[i])
        for k in range(N_OBJECTS):
            p, v, a = table.pos[i, k], table.vel[i, k], table.acc[i, k]
            c = table.cls[i, k]
            mate = "" if c == DISC else str(int(table.closest[i, k]))
            buf.write(
                f"{frame},{k + 1},{CLASS_NAMES[c]},"
                f"{p[0]:.3f},{p[1]:.3f},{v[0]:.3f},{v[1]:.3f},{a[0]:.3f},{a[1]:.3f},"
                f"{mate},{'true' if table.holder[i, k] else 'false'}{tail}\n"
            )
    text = buf.getvalue()
    if dest is None:
        return text
    if isinstance(dest, (str, Path)):
        Path(dest).write_text(text, encoding="utf-8", newline="\n")
    else:
        dest.write(text)
    return None


# ---------------------------------------------------------------------------
# preprocessing


def interpolate_disc(table: FrameTable) -> FrameTable:
    """Place the disc on its holder and interpolate it linearly during passes.

    Frames before the first (after the last) holder frame of a possession keep
    the disc at the first (last) anchor.
    """
    pos = table.pos.copy()
    for pid, sl in table.possessions():
        rows = np.arange(sl.start, sl.stop)
        holders = np.array([table.holder_id(i) for i in rows])
        held = holders > 0
        if not held.any():
            raise NoHolderAnchor(f"possession {pid} has no holder frames")
        d = table.disc_index(sl.start)
        anchor_rows = rows[held]
        anchors = table.pos[anchor_rows, holders[held] - 1]
        t = rows.astype(float)
        for axis in range(2):
            # np.interp holds the end values outside the anchor range
            pos[rows, d, axis] = np.interp(t, anchor_rows.astype(float), anchors[:, axis])
        pos[anchor_rows, d] = anchors
    return table.evolve(pos=pos)


def _centered_average(x: np.ndarray, window: int) -> np.ndarray:
    # the window shrinks symmetrically at the edges so linear motion is preserved
    n = len(x)
    half = window // 2
    csum = np.concatenate([np.zeros((1,) + x.shape[1:]), np.cumsum(x, axis=0)])
    out = np.empty_like(x)
    for i in range(n):
        h = min(half, i, n - 1 - i)
        out[i] = (csum[i + h + 1] - csum[i - h]) / (2 * h + 1)
    return out


def differentiate(pos: np.ndarray, fps: int, cfg: SmoothingConfig) -> tuple[np.ndarray, np.ndarray]:
    """Velocity and acceleration of a position series along axis 0."""
    if len(pos) < cfg.window:
        raise TooShort(f"{len(pos)} frames is shorter than the smoothing window {cfg.window}")
    dt = 1.0 / fps
    src = _centered_average(pos, cfg.window) if cfg.scheme == "filtered" else pos
    vel = np.gradient(src, dt, axis=0)
    acc = np.gradient(vel, dt, axis=0)
    return vel, acc


def estimate_derivatives(table: FrameTable, cfg: SmoothingConfig | None = None) -> FrameTable:
    """Fill ``vel``/``acc`` from positions, one possession at a time."""
    cfg = cfg or SmoothingConfig()
    vel = np.zeros_like(table.pos)
    acc = np.zeros_like(table.pos)
    for pid, sl in table.possessions():
        try:
            vel[sl], acc[sl] = differentiate(table.pos[sl], table.fps, cfg)
        except TooShort as exc:
            raise TooShort(f"possession {pid}: {exc}") from None
    return table.evolve(vel=vel, acc=acc)


def greedy_pairs(off_pos: np.ndarray, def_pos: np.ndarray) -> list[tuple[int, int]]:
    """One-to-one offense/defense pairs, taking the shortest free pair first.

    Returns ``(offense_index, defense_index)`` tuples. Ties break on the
    lower offense index, then the lower defense index.
    """
    dist = np.linalg.norm(off_pos[:, None, :] - def_pos[None, :, :], axis=2)
    order = sorted(
        ((dist[a, b], a, b) for a in range(len(off_pos)) for b in range(len(def_pos)))
    )
    used_a, used_b, pairs = set(), set(), []
    for _, a, b in order:
        if a in used_a or b in used_b:
            continue
        used_a.add(a)
        used_b.add(b)
        pairs.append((a, b))
    return sorted(pairs)


def pair_closest(table: FrameTable) -> FrameTable:
    """Fill ``closest`` symmetrically with the greedy pairing of every frame."""
    closest = np.zeros_like(table.closest)
    for i in range(len(table)):
        off = np.flatnonzero(table.cls[i] == OFFENSE)
        dfn = np.flatnonzero(table.cls[i] == DEFENSE)
        for a, b in greedy_pairs(table.pos[i, off], table.pos[i, dfn]):
            closest[i, off[a]] = dfn[b] + 1
            closest[i, dfn[b]] = off[a] + 1
    return table.evolve(closest=closest)


def preprocess(table: FrameTable, cfg: SmoothingConfig | None = None) -> FrameTable:
    """Disc interpolation, derivative estimation and pairing, in that order."""
    table = interpolate_disc(table)
    table = estimate_derivatives(table, cfg)
    table = pair_closest(table)
    validate(table)
    return table


def summary(table: FrameTable) -> dict:
    counts = np.bincount(table.cls.ravel(), minlength=3)
    return {
        "frames": int(len(table)),
        "possessions": len(table.possessions()),
        "fps": table.fps,
        "objects": {name: int(counts[c]) for c, name in enumerate(CLASS_NAMES)},
        "first_frame": int(table.frames[0]) if len(table) else None,
        "last_frame": int(table.frames[-1]) if len(table) else None,
    }
