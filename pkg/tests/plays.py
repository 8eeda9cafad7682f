"""Scripted plays shared by the CLI and acceptance tests."""

from cuttiming import synth
from cuttiming.synth import ScriptedPlay, cut, waypoints

BLOCKED_T0 = 40


def blocked_lane(block_frame: int = 50) -> ScriptedPlay:
    """Attacker 3 cuts back toward the holder just as the holder's marker
    slides into the throwing lane; an earlier cut would have found it open."""
    t0 = BLOCKED_T0
    motions = (
        cut(3, t0, direction=(-0.6, 0.8), accel=6.0, top_speed=6.5, start=(42.0, 12.0), lead_in=15),
        cut(10, t0 + 2, direction=(-0.6, 0.8), accel=5.4, top_speed=6.2, start=(42.8, 11.2), lead_in=15),
        waypoints(8, (31.0, 17.0), [(33.0, 20.5, 2.0)], depart=block_frame - 15),
    )
    return ScriptedPlay(90, motions)


def symmetric_play() -> ScriptedPlay:
    """Formation mirrored about y = 18.5 with the holder and disc on the axis."""
    spots = {1: (30.0, 18.5), 2: (45.0, 8.0), 3: (45.0, 29.0), 4: (60.0, 12.0), 5: (60.0, 25.0),
             6: (72.0, 4.0), 7: (72.0, 33.0)}
    defs = {8: (32.0, 18.5), 9: (47.0, 9.0), 10: (47.0, 28.0), 11: (62.0, 13.0), 12: (62.0, 24.0),
            13: (74.0, 5.0), 14: (74.0, 32.0)}
    motions = tuple(synth.MotionScript(k, v) for k, v in {**spots, **defs}.items())
    return ScriptedPlay(20, motions)
