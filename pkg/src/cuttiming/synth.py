"""Deterministic synthetic plays with exact kinematics.

A play starts from a formation (7 attackers, each shadowed by a defender,
attacker 1 holding the disc). Scripted players move through
constant-acceleration phases that begin on whole frames, so positions,
velocities and accelerations at every frame are known exactly.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace

import numpy as np

from .dataio import (
    BOUNDS_TOLERANCE,
    DEFENSE,
    DISC,
    FIELD_LENGTH,
    FIELD_WIDTH,
    FPS,
    N_OBJECTS,
    FrameTable,
    SmoothingConfig,
    differentiate,
    interpolate_disc,
    pair_closest,
)
from .errors import InfeasibleScript

MAX_SPEED = 12.0
DISC_ID = 15

OFFENSE_FORMATION = (
    (30.0, 18.5),
    (45.0, 5.0),
    (45.0, 18.5),
    (45.0, 32.0),
    (60.0, 8.0),
    (60.0, 29.0),
    (72.0, 18.5),
)
DEFENDER_OFFSET = (1.0, 1.0)


def formation() -> np.ndarray:
    """Default ``(15, 2)`` positions; the disc sits on attacker 1."""
    pos = np.zeros((N_OBJECTS, 2))
    pos[:7] = OFFENSE_FORMATION
    pos[7:14] = pos[:7] + DEFENDER_OFFSET
    pos[14] = pos[0]
    return pos


@dataclass(frozen=True)
class Phase:
    """From ``frame`` on, accelerate at ``(ax, ay)``; optionally reset velocity first."""

    frame: int
    ax: float = 0.0
    ay: float = 0.0
    vx: float | None = None
    vy: float | None = None


@dataclass(frozen=True)
class MotionScript:
    player_id: int
    start: tuple[float, float] | None = None
    velocity: tuple[float, float] = (0.0, 0.0)
    phases: tuple[Phase, ...] = ()


@dataclass(frozen=True)
class ScriptedPlay:
    duration: int
    motions: tuple[MotionScript, ...] = ()
    holders: tuple[tuple[int, int], ...] = ((0, 1),)
    seed: int = 0
    jitter: float = 0.0
    first_frame: int = 0
    possession: int = 0


@dataclass(frozen=True)
class GeneratedPlay:
    """Generated table plus the exact kinematics of every object."""

    table: FrameTable
    true_vel: np.ndarray = field(repr=False)
    true_acc: np.ndarray = field(repr=False)


def cut(player_id: int, onset: int, direction=(1.0, 0.0), accel: float = 5.0, top_speed: float = 6.0,
        start=None, velocity=(0.0, 0.0), lead_in: int = 0, lead_speed: float = 3.5) -> MotionScript:
    """Burst along ``direction`` from ``onset`` until roughly ``top_speed``, then cruise.

    With ``lead_in > 0`` the player first jogs up from rest to ``lead_speed``
    over the ``lead_in`` frames before the onset (the gentle ramp stays well
    under typical onset thresholds for ``lead_in >= 15``).
    """
    ux, uy = direction
    norm = math.hypot(ux, uy)
    ux, uy = ux / norm, uy / norm
    phases = []
    speed0 = math.hypot(*velocity)
    if lead_in > 0:
        ramp = lead_speed * FPS / lead_in
        phases.append(Phase(onset - lead_in, ramp * ux, ramp * uy))
        speed0 = lead_speed
    k = max(1, round((top_speed - speed0) / accel * FPS))
    phases += [Phase(onset, accel * ux, accel * uy), Phase(onset + k, 0.0, 0.0)]
    return MotionScript(player_id, start, tuple(velocity), tuple(phases))


def waypoints(player_id: int, start, points, depart: int = 0) -> MotionScript:
    """Straight constant-speed legs through ``points`` = ``[(x, y, speed), ...]``.

    Leg speeds are adjusted so each leg takes a whole number of frames.
    """
    phases, frame = [], depart
    x, y = start
    for px, py, speed in points:
        dist = math.hypot(px - x, py - y)
        k = max(1, round(dist / speed * FPS))
        phases.append(Phase(frame, 0.0, 0.0, (px - x) * FPS / k, (py - y) * FPS / k))
        frame += k
        x, y = px, py
    phases.append(Phase(frame, 0.0, 0.0, 0.0, 0.0))
    return MotionScript(player_id, tuple(start), (0.0, 0.0), tuple(phases))


def _integrate_motion(start, velocity, phases, n: int, dt: float):
    pos = np.zeros((n, 2))
    vel = np.zeros((n, 2))
    acc = np.zeros((n, 2))
    p = np.array(start, dtype=float)
    v = np.array(velocity, dtype=float)
    a = np.zeros(2)
    by_frame = {}
    for ph in phases:
        by_frame.setdefault(ph.frame, []).append(ph)
    for f in range(n):
        for ph in by_frame.get(f, ()):
            a = np.array([ph.ax, ph.ay], dtype=float)
            if ph.vx is not None:
                v = np.array([ph.vx, ph.vy], dtype=float)
        pos[f], vel[f], acc[f] = p, v, a
        p = p + v * dt + 0.5 * a * dt * dt
        v = v + a * dt
    return pos, vel, acc


def _holder_series(holders, n: int) -> np.ndarray:
    out = np.zeros(n, dtype=np.int64)
    current = 0
    changes = dict(holders)
    for f in range(n):
        current = changes.get(f, current)
        out[f] = current
    return out


def generate(script: ScriptedPlay, smoothing: SmoothingConfig | None = None) -> GeneratedPlay:
    """Render a script into a validated table carrying the exact kinematics."""
    n = script.duration
    if n < 3:
        raise InfeasibleScript("a play needs at least 3 frames")
    dt = 1.0 / FPS
    base = formation()
    pos = np.repeat(base[None], n, axis=0)
    vel = np.zeros((n, N_OBJECTS, 2))
    acc = np.zeros((n, N_OBJECTS, 2))
    for m in script.motions:
        if not 1 <= m.player_id <= 14:
            raise InfeasibleScript(f"cannot script object {m.player_id}")
        k = m.player_id - 1
        start = base[k] if m.start is None else m.start
        pos[:, k], vel[:, k], acc[:, k] = _integrate_motion(start, m.velocity, m.phases, n, dt)

    speed = np.hypot(vel[..., 0], vel[..., 1])
    if speed.max() > MAX_SPEED:
        f, k = np.unravel_index(int(np.argmax(speed)), speed.shape)
        raise InfeasibleScript(f"object {k + 1} reaches {speed[f, k]:.2f} m/s at frame {f}")

    if script.jitter > 0:
        rng = np.random.default_rng(script.seed)
        pos[:, :14] += rng.normal(0.0, script.jitter, size=(n, 14, 2))

    holder_ids = _holder_series(script.holders, n)
    holder = np.zeros((n, N_OBJECTS), dtype=bool)
    rows = np.arange(n)
    held = holder_ids > 0
    holder[rows[held], holder_ids[held] - 1] = True

    cls = np.zeros((n, N_OBJECTS), dtype=np.int8)
    cls[:, 7:14] = DEFENSE
    cls[:, 14] = DISC
    table = FrameTable(
        frames=np.arange(script.first_frame, script.first_frame + n, dtype=np.int64),
        cls=cls,
        pos=pos,
        vel=vel,
        acc=acc,
        closest=np.zeros((n, N_OBJECTS), dtype=np.int64),
        holder=holder,
        possession=np.full(n, script.possession, dtype=np.int64),
    )
    table = interpolate_disc(table)
    disc_v, disc_a = differentiate(table.pos[:, 14], FPS, SmoothingConfig(3, "central-difference"))
    vel[:, 14], acc[:, 14] = disc_v, disc_a
    pos = table.pos
    x, y = pos[..., 0], pos[..., 1]
    t = BOUNDS_TOLERANCE
    if (x < -t).any() or (x > FIELD_LENGTH + t).any() or (y < -t).any() or (y > FIELD_WIDTH + t).any():
        raise InfeasibleScript("script leaves the field")

    table = pair_closest(table.evolve(pos=pos, vel=vel, acc=acc))
    return GeneratedPlay(table, vel.copy(), acc.copy())


def mirror(script: ScriptedPlay) -> ScriptedPlay:
    """Reflect a script across the long axis of the field (``y -> 37 - y``).

    Default formation positions are made explicit first; the formation
    itself is not symmetric.
    """
    base = formation()
    scripted = {m.player_id: m for m in script.motions}
    motions = []
    for pid in range(1, 15):
        m = scripted.get(pid, MotionScript(pid))
        sx, sy = base[pid - 1] if m.start is None else m.start
        phases = tuple(
            Phase(ph.frame, ph.ax, -ph.ay, ph.vx, None if ph.vy is None else -ph.vy) for ph in m.phases
        )
        motions.append(MotionScript(pid, (sx, FIELD_WIDTH - sy), (m.velocity[0], -m.velocity[1]), phases))
    return replace(script, motions=tuple(motions))


def concatenate(tables: list[FrameTable]) -> FrameTable:
    """Stack tables whose frame ranges do not touch into one multi-possession table."""
    return FrameTable(
        frames=np.concatenate([t.frames for t in tables]),
        cls=np.concatenate([t.cls for t in tables]),
        pos=np.concatenate([t.pos for t in tables]),
        vel=np.concatenate([t.vel for t in tables]),
        acc=np.concatenate([t.acc for t in tables]),
        closest=np.concatenate([t.closest for t in tables]),
        holder=np.concatenate([t.holder for t in tables]),
        possession=np.concatenate([t.possession for t in tables]),
        fps=tables[0].fps,
    )


def _stays_on_field(m: MotionScript, n: int) -> bool:
    start = formation()[m.player_id - 1] if m.start is None else m.start
    pos, _, _ = _integrate_motion(start, m.velocity, m.phases, n, 1.0 / FPS)
    x, y = pos[:, 0], pos[:, 1]
    return bool((x >= 0).all() and (x <= FIELD_LENGTH).all() and (y >= 0).all() and (y <= FIELD_WIDTH).all())


def random_cut_play(rng: np.random.Generator, duration: int = 90, possession: int = 0,
                    first_frame: int = 0, jitter: float = 0.0) -> ScriptedPlay:
    """One attacker (not the holder) jogs, then cuts at a random onset and
    heading, shadowed by their defender with a short lag."""
    receiver = int(rng.integers(2, 8))
    onset = int(rng.integers(36, 46))
    heading = float(rng.uniform(-0.6, 0.6))
    if OFFENSE_FORMATION[receiver - 1][1] > FIELD_WIDTH / 2:
        heading = -abs(heading)
    elif OFFENSE_FORMATION[receiver - 1][1] < FIELD_WIDTH / 2:
        heading = abs(heading)
    direction = (math.cos(heading), math.sin(heading))
    accel = float(rng.uniform(4.5, 6.5))
    top = float(rng.uniform(5.5, 7.0))
    lead = int(rng.integers(15, 21))
    lag = int(rng.integers(2, 6))

    def pair(direction):
        return (
            cut(receiver, onset, direction, accel, top, lead_in=lead),
            cut(receiver + 7, onset + lag, direction, accel * 0.9, top * 0.95, lead_in=lead),
        )

    motions = pair(direction)
    if not all(_stays_on_field(m, duration) for m in motions):
        # not enough room ahead: cut back toward the holder instead
        motions = pair((-direction[0], direction[1]))
    return ScriptedPlay(duration, motions, ((0, 1),), int(rng.integers(0, 2**31)), jitter, first_frame, possession)


def generate_season(n_possessions: int = 64, seed: int = 0, duration: int = 90, gap: int = 10) -> FrameTable:
    """Many random one-cut possessions separated by frame gaps."""
    rng = np.random.default_rng(seed)
    tables, frame = [], 0
    for p in range(n_possessions):
        play = random_cut_play(rng, duration, possession=p, first_frame=frame)
        tables.append(generate(play).table)
        frame += duration + gap
    return concatenate(tables)


# ---------------------------------------------------------------------------
# plain-text scripts

_SECTION = re.compile(r"^\[player\s+(\d+)\]$")


def parse_script(text: str) -> ScriptedPlay:
    """Read the key/value script format written by :func:`format_script`."""
    top: dict = {"holders": []}
    motions: dict[int, dict] = {}
    current = None
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        sec = _SECTION.match(line)
        if sec:
            current = motions.setdefault(int(sec.group(1)), {"phases": [], "waypoints": [], "depart": 0})
            continue
        if "=" not in line:
            raise ValueError(f"cannot parse script line {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        nums = [float(v) for v in value.split()] if key not in ("seed",) else [int(value)]
        if current is None:
            if key == "holder":
                top["holders"].append((int(nums[0]), int(nums[1])))
            elif key in ("duration", "first_frame", "possession", "seed"):
                top[key] = int(nums[0])
            elif key == "jitter":
                top[key] = nums[0]
            else:
                raise ValueError(f"unknown script key {key!r}")
            continue
        if key == "start":
            current["start"] = (nums[0], nums[1])
        elif key == "velocity":
            current["velocity"] = (nums[0], nums[1])
        elif key == "phase":
            if len(nums) == 3:
                current["phases"].append(Phase(int(nums[0]), nums[1], nums[2]))
            else:
                current["phases"].append(Phase(int(nums[0]), nums[1], nums[2], nums[3], nums[4]))
        elif key == "waypoint":
            current["waypoints"].append(tuple(nums[:3]))
        elif key == "depart":
            current["depart"] = int(nums[0])
        else:
            raise ValueError(f"unknown player key {key!r}")

    scripts = []
    for pid, entry in sorted(motions.items()):
        start = entry.get("start")
        if entry["waypoints"]:
            origin = start if start is not None else tuple(formation()[pid - 1])
            m = waypoints(pid, origin, entry["waypoints"], entry["depart"])
            m = replace(m, phases=tuple(entry["phases"]) + m.phases)
        else:
            m = MotionScript(pid, start, entry.get("velocity", (0.0, 0.0)), tuple(entry["phases"]))
        scripts.append(m)
    return ScriptedPlay(
        duration=top.get("duration", 90),
        motions=tuple(scripts),
        holders=tuple(top["holders"]) or ((0, 1),),
        seed=top.get("seed", 0),
        jitter=top.get("jitter", 0.0),
        first_frame=top.get("first_frame", 0),
        possession=top.get("possession", 0),
    )


def format_script(play: ScriptedPlay) -> str:
    lines = [f"duration = {play.duration}", f"seed = {play.seed}", f"jitter = {play.jitter!r}",
             f"first_frame = {play.first_frame}", f"possession = {play.possession}"]
    lines += [f"holder = {f} {h}" for f, h in play.holders]
    for m in play.motions:
        lines.append("")
        lines.append(f"[player {m.player_id}]")
        if m.start is not None:
            lines.append(f"start = {m.start[0]!r} {m.start[1]!r}")
        lines.append(f"velocity = {m.velocity[0]!r} {m.velocity[1]!r}")
        for ph in m.phases:
            if ph.vx is None:
                lines.append(f"phase = {ph.frame} {ph.ax!r} {ph.ay!r}")
            else:
                lines.append(f"phase = {ph.frame} {ph.ax!r} {ph.ay!r} {ph.vx!r} {ph.vy!r}")
    return "\n".join(lines) + "\n"
